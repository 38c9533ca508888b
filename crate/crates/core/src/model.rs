//! The four networks of the factorization model.
//!
//! ```text
//! trial [1, C, T] ─┬─ generator ───────── common   [F·W] ─┬─ concat ── MLP ── logits [K]
//!                  └─ class-specific ext ─ specific [F·W] ─┘
//! noise [1, C, T] ─── generator ── fake features ── discriminator ── score
//! ```
//!
//! Both extractors are `conv(1×k_t) → ELU → conv(C×1) → ELU → avgpool(1×p, stride s)
//! → flatten`, with independent parameters. The discriminator and the MLP
//! head are linear stacks with ELU between layers.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::EegTrial;
use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_channels: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    pub conv_filters: usize,
    pub temporal_kernel: usize,
    pub pool_kernel: usize,
    pub pool_stride: usize,
    /// 1 for a scalar real/fake score; 4 reproduces the wide output layer,
    /// whose scores are mean-pooled before the loss.
    pub discriminator_out: usize,
    pub discriminator_hidden: Vec<usize>,
    pub mlp_hidden: Vec<usize>,
    pub elu_alpha: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_channels: 22,
            n_samples: 1001,
            n_classes: 4,
            conv_filters: 40,
            temporal_kernel: 52,
            pool_kernel: 68,
            pool_stride: 14,
            discriminator_out: 1,
            discriminator_hidden: vec![1280, 1280],
            mlp_hidden: vec![2560, 1280],
            elu_alpha: 1.0,
        }
    }
}

impl ModelConfig {
    /// Width of the temporal conv output: `n_samples - temporal_kernel + 1`.
    pub fn conv_width(&self) -> usize {
        self.n_samples + 1 - self.temporal_kernel
    }

    /// Pooled width: `floor((conv_width - pool_kernel) / pool_stride) + 1`.
    pub fn pooled_width(&self) -> usize {
        (self.conv_width() - self.pool_kernel) / self.pool_stride + 1
    }

    /// `conv_filters × floor((n_samples − temporal_kernel + 1 − pool_kernel)/pool_stride + 1)`.
    pub fn feature_len(&self) -> usize {
        self.conv_filters * self.pooled_width()
    }

    pub fn fused_len(&self) -> usize {
        2 * self.feature_len()
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("n_channels", self.n_channels),
            ("n_samples", self.n_samples),
            ("conv_filters", self.conv_filters),
            ("temporal_kernel", self.temporal_kernel),
            ("pool_kernel", self.pool_kernel),
            ("pool_stride", self.pool_stride),
            ("discriminator_out", self.discriminator_out),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.n_classes < 2 {
            return Err(Error::config("n_classes", "need at least 2 classes"));
        }
        for (field, sizes) in [
            ("discriminator_hidden", &self.discriminator_hidden),
            ("mlp_hidden", &self.mlp_hidden),
        ] {
            if sizes.contains(&0) {
                return Err(Error::config(field, "hidden sizes must be positive"));
            }
        }
        if !(self.elu_alpha > 0.0 && self.elu_alpha.is_finite()) {
            return Err(Error::config("elu_alpha", "must be positive"));
        }
        if self.temporal_kernel > self.n_samples {
            return Err(Error::config(
                "temporal_kernel",
                format!(
                    "feature length is non-positive: n_samples - temporal_kernel + 1 = {} - {} + 1 <= 0",
                    self.n_samples, self.temporal_kernel
                ),
            ));
        }
        if self.pool_kernel > self.conv_width() {
            return Err(Error::config(
                "pool_kernel",
                format!(
                    "feature length is non-positive: floor((n_samples - temporal_kernel + 1 - pool_kernel)/pool_stride + 1) \
                     with {} - {} + 1 - {} = {} < 0",
                    self.n_samples,
                    self.temporal_kernel,
                    self.pool_kernel,
                    self.conv_width() as i64 - self.pool_kernel as i64
                ),
            ));
        }
        Ok(())
    }
}

/// A feature vector produced by one of the extractors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVec(pub Vec<f64>);

impl Deref for FeatureVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn glorot(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// The shared convolutional architecture of the generator and the
/// class-specific extractor.
#[derive(Clone, Debug)]
pub struct ConvExtractor {
    pub conv1_weight: Parameter,
    pub conv1_bias: Parameter,
    pub conv2_weight: Parameter,
    pub conv2_bias: Parameter,
    pool_kernel: usize,
    pool_stride: usize,
    alpha: f64,
}

pub type GeneratorNet = ConvExtractor;
pub type ClassSpecificNet = ConvExtractor;

impl ConvExtractor {
    fn build(prefix: &str, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let f = cfg.conv_filters;
        let (c, k) = (cfg.n_channels, cfg.temporal_kernel);
        ConvExtractor {
            conv1_weight: Parameter::new(format!("{prefix}.conv1.weight"), glorot(rng, &[f, 1, 1, k], k, f * k)),
            conv1_bias: Parameter::new(format!("{prefix}.conv1.bias"), Tensor::zeros(&[f])),
            conv2_weight: Parameter::new(
                format!("{prefix}.conv2.weight"),
                glorot(rng, &[f, f, c, 1], f * c, f * c),
            ),
            conv2_bias: Parameter::new(format!("{prefix}.conv2.bias"), Tensor::zeros(&[f])),
            pool_kernel: cfg.pool_kernel,
            pool_stride: cfg.pool_stride,
            alpha: cfg.elu_alpha,
        }
    }

    /// `x` is `[B, 1, C, T]`; returns `[B, feature_len]`.
    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>, trainable: bool) -> Result<Var<'t>> {
        let w1 = tape.bind(&self.conv1_weight, trainable);
        let b1 = tape.bind(&self.conv1_bias, trainable);
        let w2 = tape.bind(&self.conv2_weight, trainable);
        let b2 = tape.bind(&self.conv2_bias, trainable);
        x.conv2d(&w1, &b1, (1, 1))?
            .elu(self.alpha)
            .conv2d(&w2, &b2, (1, 1))?
            .elu(self.alpha)
            .avgpool2d((1, self.pool_kernel), (1, self.pool_stride))?
            .flatten_batch()
    }

    pub fn params(&self) -> [&Parameter; 4] {
        [&self.conv1_weight, &self.conv1_bias, &self.conv2_weight, &self.conv2_bias]
    }

    pub fn params_mut(&mut self) -> [&mut Parameter; 4] {
        [
            &mut self.conv1_weight,
            &mut self.conv1_bias,
            &mut self.conv2_weight,
            &mut self.conv2_bias,
        ]
    }

    /// Layer names (without the network prefix) and parameter shapes.
    pub fn shape_signature(&self) -> Vec<(String, Vec<usize>)> {
        signature(self.params())
    }
}

/// Fully connected stack with ELU between layers (none after the last).
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<(Parameter, Parameter)>,
    alpha: f64,
}

pub type DiscriminatorNet = Mlp;
pub type MlpHead = Mlp;

impl Mlp {
    fn build(prefix: &str, sizes: &[usize], alpha: f64, rng: &mut ChaCha8Rng) -> Self {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (n_in, n_out) = (w[0], w[1]);
                (
                    Parameter::new(format!("{prefix}.fc{}.weight", i + 1), glorot(rng, &[n_out, n_in], n_in, n_out)),
                    Parameter::new(format!("{prefix}.fc{}.bias", i + 1), Tensor::zeros(&[n_out])),
                )
            })
            .collect();
        Mlp { layers, alpha }
    }

    pub fn in_features(&self) -> usize {
        self.layers[0].0.value.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.layers.last().unwrap().0.value.shape()[0]
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>, trainable: bool) -> Result<Var<'t>> {
        let mut h = x;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            if i > 0 {
                h = h.elu(self.alpha);
            }
            h = h.linear(&tape.bind(w, trainable), &tape.bind(b, trainable))?;
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(|(w, b)| [w, b]).collect()
    }
}

fn signature<'a>(params: impl IntoIterator<Item = &'a Parameter>) -> Vec<(String, Vec<usize>)> {
    params
        .into_iter()
        .map(|p| {
            let local = p.name.split_once('.').map_or(p.name.as_str(), |(_, rest)| rest);
            (local.to_string(), p.value.shape().to_vec())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub generator: usize,
    pub discriminator: usize,
    pub class_specific: usize,
    pub head: usize,
}

impl ParamCounts {
    pub fn total(&self) -> usize {
        self.generator + self.discriminator + self.class_specific + self.head
    }
}

#[derive(Clone, Debug)]
pub struct FactorModel {
    pub config: ModelConfig,
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub class_specific: ClassSpecificNet,
    pub head: MlpHead,
}

const INFER_CHUNK: usize = 64;

impl FactorModel {
    /// Glorot-uniform weights and zero biases; each network draws from its own
    /// ChaCha stream of `seed`.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let stream = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        let feat = config.feature_len();
        let mut disc_sizes = vec![feat];
        disc_sizes.extend(&config.discriminator_hidden);
        disc_sizes.push(config.discriminator_out);
        let mut head_sizes = vec![config.fused_len()];
        head_sizes.extend(&config.mlp_hidden);
        head_sizes.push(config.n_classes);

        let model = FactorModel {
            generator: ConvExtractor::build("generator", &config, &mut stream(0)),
            discriminator: Mlp::build("discriminator", &disc_sizes, config.elu_alpha, &mut stream(1)),
            class_specific: ConvExtractor::build("class_specific", &config, &mut stream(2)),
            head: Mlp::build("head", &head_sizes, config.elu_alpha, &mut stream(3)),
            config,
        };
        log::debug!("built factor model: {:?}", model.param_counts());
        Ok(model)
    }

    pub fn feature_len(&self) -> usize {
        self.config.feature_len()
    }

    pub fn param_counts(&self) -> ParamCounts {
        let count = |ps: Vec<&Parameter>| ps.iter().map(|p| p.numel()).sum();
        ParamCounts {
            generator: count(self.generator.params().to_vec()),
            discriminator: count(self.discriminator.params()),
            class_specific: count(self.class_specific.params().to_vec()),
            head: count(self.head.params()),
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut v: Vec<&Parameter> = self.generator.params().to_vec();
        v.extend(self.discriminator.params());
        v.extend(self.class_specific.params());
        v.extend(self.head.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v: Vec<&mut Parameter> = self.generator.params_mut().into_iter().collect();
        v.extend(self.discriminator.params_mut());
        v.extend(self.class_specific.params_mut());
        v.extend(self.head.params_mut());
        v
    }

    /// Stacks trials into a `[B, 1, C, T]` network input.
    pub fn batch_input(&self, trials: &[&EegTrial]) -> Result<Tensor> {
        const OP: &str = "batch_input";
        if trials.is_empty() {
            return Err(Error::contract(OP, "empty batch"));
        }
        let (c, t) = (self.config.n_channels, self.config.n_samples);
        let mut data = Vec::with_capacity(trials.len() * c * t);
        for tr in trials {
            if tr.n_channels() != c {
                return Err(Error::dim(OP, "channels", c, tr.n_channels()));
            }
            if tr.n_samples() != t {
                return Err(Error::dim(OP, "samples", t, tr.n_samples()));
            }
            data.extend_from_slice(tr.data());
        }
        Tensor::new(vec![trials.len(), 1, c, t], data)
    }

    fn check_features(&self, op: &'static str, f: &[f64]) -> Result<()> {
        if f.len() != self.feature_len() {
            return Err(Error::dim(op, "feature length", self.feature_len(), f.len()));
        }
        Ok(())
    }

    /// Scalar real/fake score per row of `features` (`[B, F]` → `[B]`); wide
    /// discriminator outputs are mean-pooled.
    pub fn discriminator_score<'t>(&self, tape: &'t Tape, features: Var<'t>, trainable: bool) -> Result<Var<'t>> {
        let raw = self.discriminator.forward(tape, features, trainable)?;
        Ok(raw.mean_last_axis())
    }

    /// MLP logits of `concat(common, specific)`.
    pub fn head_logits<'t>(
        &self,
        tape: &'t Tape,
        common: Var<'t>,
        specific: Var<'t>,
        trainable: bool,
    ) -> Result<Var<'t>> {
        let fused = common.concat_last(&specific)?;
        self.head.forward(tape, fused, trainable)
    }

    pub fn extract_common(&self, trial: &EegTrial) -> Result<FeatureVec> {
        let tape = Tape::new();
        let x = tape.constant(self.batch_input(&[trial])?);
        let f = self.generator.forward(&tape, x, false)?;
        Ok(FeatureVec(f.value().into_vec()))
    }

    pub fn extract_class_specific(&self, trial: &EegTrial) -> Result<FeatureVec> {
        let tape = Tape::new();
        let x = tape.constant(self.batch_input(&[trial])?);
        let f = self.class_specific.forward(&tape, x, false)?;
        Ok(FeatureVec(f.value().into_vec()))
    }

    /// Raw discriminator outputs (`discriminator_out` values).
    pub fn discriminate(&self, feature: &[f64]) -> Result<Vec<f64>> {
        self.check_features("discriminate", feature)?;
        let tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, feature.len()], feature.to_vec())?);
        Ok(self.discriminator.forward(&tape, x, false)?.value().into_vec())
    }

    /// Logits for `concat(common, specific)`; the order is part of the contract.
    pub fn classify(&self, common: &[f64], specific: &[f64]) -> Result<Vec<f64>> {
        self.check_features("classify", common)?;
        self.check_features("classify", specific)?;
        let tape = Tape::new();
        let c = tape.constant(Tensor::new(vec![1, common.len()], common.to_vec())?);
        let s = tape.constant(Tensor::new(vec![1, specific.len()], specific.to_vec())?);
        Ok(self.head_logits(&tape, c, s, false)?.value().into_vec())
    }

    /// Logits for every trial, `[n_trials][n_classes]`.
    pub fn logits(&self, trials: &[&EegTrial]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(trials.len());
        for chunk in trials.chunks(INFER_CHUNK) {
            let tape = Tape::new();
            let x = tape.constant(self.batch_input(chunk)?);
            let common = self.generator.forward(&tape, x, false)?;
            let specific = self.class_specific.forward(&tape, x, false)?;
            let logits = self.head_logits(&tape, common, specific, false)?.value();
            out.extend(logits.data().chunks(self.config.n_classes).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    pub fn predict(&self, trials: &[&EegTrial]) -> Result<Vec<usize>> {
        Ok(self.logits(trials)?.iter().map(|l| argmax(l)).collect())
    }

    pub fn accuracy(&self, trials: &[&EegTrial]) -> Result<f64> {
        if trials.is_empty() {
            return Err(Error::contract("accuracy", "no trials to evaluate"));
        }
        let pred = self.predict(trials)?;
        let hits = pred.iter().zip(trials).filter(|(p, t)| **p == t.label).count();
        Ok(hits as f64 / trials.len() as f64)
    }

    pub const CHECKPOINT_KIND: &'static str = "factor-model";

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(Self::CHECKPOINT_KIND, serde_json::to_value(&self.config).expect("serializable"));
        for p in self.params() {
            ck.push(p.name.clone(), p.value.clone());
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(Self::CHECKPOINT_KIND)?;
        let config: ModelConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::Format { offset: 0, msg: format!("model config: {e}") })?;
        let mut model = FactorModel::build(config, 0)?;
        for p in model.params_mut() {
            let t = ck.tensor(&p.name)?;
            if t.shape() != p.value.shape() {
                return Err(Error::dim(
                    "from_checkpoint",
                    p.name.clone(),
                    format!("{:?}", p.value.shape()),
                    format!("{:?}", t.shape()),
                ));
            }
            p.value = t.clone();
        }
        Ok(model)
    }
}

/// Index of the largest value; ties resolve to the first.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}
