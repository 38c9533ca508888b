//! Helpers shared by the integration suites and the acceptance target.
#![allow(dead_code)]

use factormi::cli::{ExperimentConfig, Profile};
use factormi::data::{generate_synthetic, ClassPattern, Dataset, EegTrial, NuisanceSource, SyntheticSpec};
use nalgebra::{DMatrix, DVector};
use rand_distr::StandardNormal;
use factormi::model::{FactorModel, ModelConfig};
use factormi::tensor::{Tape, Tensor, Var};
use factormi::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `|a - n| / max(|a|, |n|, 1e-3)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

pub fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Pushes elements away from the origin so the ELU kink stays outside the
/// finite-difference stencil.
pub fn off_kink(mut t: Tensor) -> Tensor {
    for v in t.data_mut() {
        if v.abs() < 1e-2 {
            *v += 2e-2f64.copysign(*v);
        }
    }
    t
}

/// Scalar readout `proj · vec(y)`, so every output element gets a distinct
/// upstream weight.
fn project<'t>(tape: &'t Tape, y: Var<'t>, proj: &Tensor) -> Result<Var<'t>> {
    let flat = y.reshape(&[1, y.value().len()])?;
    let w = tape.constant(proj.clone());
    let b = tape.constant(Tensor::zeros(&[1]));
    Ok(flat.linear(&w, &b)?.sum())
}

/// Max relative error between reverse-mode and central-difference gradients of
/// `proj · vec(f(inputs))` with respect to every input element.
pub fn check_op<F>(inputs: &[Tensor], seed: u64, f: F) -> f64
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let out_len = {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        f(&tape, &vars).unwrap().value().len()
    };
    let proj = random_tensor(&mut rng(seed ^ 0x5EED), &[1, out_len], 1.0);

    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = project(&tape, f(&tape, &vars).unwrap(), &proj).unwrap();
    let grads = tape.backward(loss).unwrap();
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| grads.get(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let eval = |xs: &[Tensor]| -> f64 {
        let tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        project(&tape, f(&tape, &vars).unwrap(), &proj)
            .unwrap()
            .value()
            .item()
            .unwrap()
    };
    let mut worst = 0.0f64;
    let mut xs = inputs.to_vec();
    for (i, g) in analytic.iter().enumerate() {
        for j in 0..xs[i].len() {
            let x0 = inputs[i].data()[j];
            let h = fd_step(x0);
            xs[i].data_mut()[j] = x0 + h;
            let up = eval(&xs);
            xs[i].data_mut()[j] = x0 - h;
            let down = eval(&xs);
            xs[i].data_mut()[j] = x0;
            worst = worst.max(rel_err(g.data()[j], (up - down) / (2.0 * h)));
        }
    }
    worst
}

/// Per-op worst relative error for one seed, shapes drawn up to 8 per axis.
pub fn op_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let mut dim = |lo: usize, hi: usize| r.random_range(lo..=hi);
    let (c, h, w) = (dim(1, 3), dim(2, 8), dim(2, 8));
    let (o, kh, kw) = (dim(1, 3), dim(1, h), dim(1, w));
    let (sh, sw) = (dim(1, 2), dim(1, 2));
    let (ph, pw) = (dim(1, h), dim(1, w));
    let (b, n_in, n_out) = (dim(1, 4), dim(1, 8), dim(1, 8));
    let k = dim(2, 6);
    let alpha = 0.5 + (seed % 5) as f64 * 0.25;
    let labels: Vec<usize> = (0..b).map(|i| (i + seed as usize) % k).collect();

    let mut r = rng(seed.wrapping_add(1000));
    let mut t = |shape: &[usize]| random_tensor(&mut r, shape, 2.0);
    let x = t(&[c, h, w]);
    let cw = t(&[o, c, kh, kw]);
    let cb = t(&[o]);
    let xb = t(&[b, n_in]);
    let lw = t(&[n_out, n_in]);
    let lb = t(&[n_out]);
    let y = t(&[b, n_in]);
    let z = t(&[b, k]);
    let logits = t(&[b, k]);
    let pw1 = t(&[o, c, kh, kw]);
    let ph1 = t(&[o]);

    let mut out = vec![
        ("conv2d", check_op(&[x.clone(), cw, cb], seed, |_, v| v[0].conv2d(&v[1], &v[2], (sh, sw)))),
        ("avgpool2d", check_op(&[x.clone()], seed, |_, v| v[0].avgpool2d((ph, pw), (sh, sw)))),
        ("linear", check_op(&[xb.clone(), lw.clone(), lb.clone()], seed, |_, v| v[0].linear(&v[1], &v[2]))),
        ("elu", check_op(&[off_kink(xb.clone())], seed, move |_, v| Ok(v[0].elu(alpha)))),
        ("softplus", check_op(&[xb.clone()], seed, |_, v| Ok(v[0].softplus()))),
        ("add", check_op(&[xb.clone(), y.clone()], seed, |_, v| v[0].add(&v[1]))),
        ("scale", check_op(&[xb.clone()], seed, |_, v| Ok(v[0].scale(-1.7)))),
        ("sum", check_op(&[xb.clone()], seed, |_, v| Ok(v[0].sum()))),
        ("mean", check_op(&[xb.clone()], seed, |_, v| Ok(v[0].mean()))),
        ("mean_last_axis", check_op(&[xb.clone()], seed, |_, v| Ok(v[0].mean_last_axis()))),
        ("reshape", check_op(&[x.clone()], seed, |_, v| v[0].flatten_batch())),
        ("concat_last", check_op(&[xb.clone(), z], seed, |_, v| v[0].concat_last(&v[1]))),
        ("cross_entropy", check_op(&[logits], seed, move |_, v| v[0].cross_entropy(&labels))),
    ];
    // conv → elu → pool → linear, with the first conv producing a [1,C',H',W'] map.
    let composite_x = t(&[1, c, h, w]);
    let comp = check_op(&[composite_x, pw1, ph1], seed, move |tape, v| {
        let conv = v[0].conv2d(&v[1], &v[2], (1, 1))?.elu(alpha);
        let s = conv.shape();
        let pooled = conv.avgpool2d((1, s[3].min(2)), (1, 1))?.flatten_batch()?;
        let n = pooled.shape()[1];
        let w = tape.constant(Tensor::new(vec![3, n], (0..3 * n).map(|i| ((i * 7) % 5) as f64 * 0.3 - 0.6).collect())?);
        let b = tape.constant(Tensor::from_vec(vec![0.1, -0.2, 0.3]));
        pooled.linear(&w, &b)
    });
    out.push(("conv∘elu∘pool∘linear", comp));
    out
}

/// The shrunken model used for end-to-end gradient checks: 3 channels, 30
/// samples.
pub fn shrunken_config() -> ModelConfig {
    ModelConfig {
        n_channels: 3,
        n_samples: 30,
        n_classes: 4,
        conv_filters: 3,
        temporal_kernel: 5,
        pool_kernel: 6,
        pool_stride: 4,
        discriminator_hidden: vec![5],
        mlp_hidden: vec![6],
        ..ModelConfig::default()
    }
}

/// Cross-entropy through classify∘(extract_common, extract_class_specific)
/// plus a discriminator term on the common features, with every parameter
/// trainable.
fn e2e_loss<'t>(model: &FactorModel, tape: &'t Tape, x: &Tensor, labels: &[usize]) -> Result<Var<'t>> {
    let input = tape.constant(x.clone());
    let common = model.generator.forward(tape, input, true)?;
    let specific = model.class_specific.forward(tape, input, true)?;
    let ce = model.head_logits(tape, common, specific, true)?.cross_entropy(labels)?;
    let score = model.discriminator_score(tape, common, true)?;
    ce.add(&score.neg().softplus().mean())
}

/// Worst relative error over every parameter element of the shrunken model.
pub fn end_to_end_error(seed: u64) -> f64 {
    let cfg = shrunken_config();
    let mut model = FactorModel::build(cfg.clone(), seed).unwrap();
    let mut r = rng(seed.wrapping_mul(31).wrapping_add(7));
    let x = random_tensor(&mut r, &[3, 1, cfg.n_channels, cfg.n_samples], 1.5);
    let labels = [0usize, 2, 3];

    let tape = Tape::new();
    let loss = e2e_loss(&model, &tape, &x, &labels).unwrap();
    let grads = tape.backward(loss).unwrap();
    let analytic: Vec<(String, Tensor)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), grads.param(&p.name).expect("every parameter reaches the loss")))
        .collect();

    let eval = |m: &FactorModel| {
        let tape = Tape::new();
        e2e_loss(m, &tape, &x, &labels).unwrap().value().item().unwrap()
    };
    let mut worst = 0.0f64;
    for (pi, (name, g)) in analytic.iter().enumerate() {
        for j in 0..g.len() {
            let x0 = model.params()[pi].value.data()[j];
            let h = fd_step(x0);
            model.params_mut()[pi].value.data_mut()[j] = x0 + h;
            let up = eval(&model);
            model.params_mut()[pi].value.data_mut()[j] = x0 - h;
            let down = eval(&model);
            model.params_mut()[pi].value.data_mut()[j] = x0;
            let e = rel_err(g.data()[j], (up - down) / (2.0 * h));
            assert!(e.is_finite(), "{name}[{j}]");
            worst = worst.max(e);
        }
    }
    worst
}

pub fn refs(ts: &[EegTrial]) -> Vec<&EegTrial> {
    ts.iter().collect()
}

/// Desk-profile separable data with a chosen size and seed.
pub fn desk_spec(trials_per_class: usize, seed: u64) -> SyntheticSpec {
    let mut s = ExperimentConfig::preset(Profile::Desk).data.synthetic;
    s.trials_per_class = trials_per_class;
    s.seed = seed;
    s
}

pub fn desk_data(trials_per_class: usize, seed: u64) -> Dataset {
    generate_synthetic(&desk_spec(trials_per_class, seed)).unwrap()
}

pub fn random_spd(rng: &mut ChaCha8Rng, c: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(c, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() + DMatrix::identity(c, c) * 0.1
}

pub fn rayleigh(w: &DVector<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let num = (w.transpose() * a * w)[(0, 0)];
    let den = (w.transpose() * (a + b) * w)[(0, 0)];
    num / den
}

/// Unit directions covering the half circle / hemisphere with 10⁴ points.
pub fn direction_grid(c: usize) -> Vec<DVector<f64>> {
    let n = 10_000;
    match c {
        2 => (0..n)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / n as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
        _ => unreachable!(),
    }
}

/// Best grid direction for `sign · rayleigh`, polished by shrinking random
/// perturbations.
pub fn brute_force(a: &DMatrix<f64>, b: &DMatrix<f64>, sign: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let f = |w: &DVector<f64>| sign * rayleigh(w, a, b);
    let mut best = direction_grid(a.nrows())
        .into_iter()
        .max_by(|x, y| f(x).total_cmp(&f(y)))
        .unwrap();
    let mut step = 0.05;
    while step > 1e-7 {
        let mut improved = false;
        for _ in 0..40 {
            let mut cand = best.clone();
            for v in cand.iter_mut() {
                *v += step * rng.sample::<f64, _>(StandardNormal);
            }
            cand.normalize_mut();
            if f(&cand) > f(&best) {
                best = cand;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

pub fn angle_deg(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let c = (u.dot(v) / (u.norm() * v.norm())).abs().min(1.0);
    c.acos().to_degrees()
}

/// Four classes whose patterns share the 17-19 Hz band, buried under
/// class-independent nuisance oscillations in four other bands.
pub fn one_band_spec(seed: u64) -> SyntheticSpec {
    let mut spec = SyntheticSpec::new(4, 30, 8, 250, seed);
    spec.amplitude = 1.5;
    spec.patterns = (0..4)
        .map(|c| ClassPattern {
            channels: vec![2 * c, 2 * c + 1],
            band: (17.0, 19.0),
        })
        .collect();
    spec.nuisance = [(5.0, 7.0), (9.0, 11.0), (25.0, 27.0), (33.0, 35.0)]
        .iter()
        .map(|&band| NuisanceSource { band, amplitude: 3.0 })
        .collect();
    spec
}
