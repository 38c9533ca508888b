//! Compare reverse-mode gradients of a small conv → ELU → pool → linear
//! network with central finite differences.

use factormi::tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(x: &Tensor, w: &Tensor, b: &Tensor, lw: &Tensor, lb: &Tensor) -> f64 {
    let tape = Tape::new();
    forward(&tape, [x, w, b, lw, lb], false).0
}

fn forward(tape: &Tape, ts: [&Tensor; 5], grads: bool) -> (f64, Vec<Tensor>) {
    let vars: Vec<_> = ts.iter().map(|t| if grads { tape.leaf((*t).clone()) } else { tape.constant((*t).clone()) }).collect();
    let y = vars[0]
        .conv2d(&vars[1], &vars[2], (1, 1))
        .unwrap()
        .elu(1.0)
        .avgpool2d((1, 2), (1, 2))
        .unwrap()
        .reshape(&[12])
        .unwrap()
        .linear(&vars[3], &vars[4])
        .unwrap()
        .cross_entropy(&[1])
        .unwrap();
    let value = y.value().item().unwrap();
    if !grads {
        return (value, Vec::new());
    }
    let g = tape.backward(y).unwrap();
    (value, vars.iter().map(|v| g.get(v).unwrap()).collect())
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut t = |shape: &[usize]| {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    };
    let mut params = [t(&[1, 3, 8]), t(&[2, 1, 2, 3]), t(&[2]), t(&[3, 12]), t(&[3])];
    let tape = Tape::new();
    let (value, grads) = forward(&tape, [&params[0], &params[1], &params[2], &params[3], &params[4]], true);
    println!("loss {value:.6}");
    let names = ["input", "conv weight", "conv bias", "linear weight", "linear bias"];
    for i in 0..params.len() {
        let mut worst = 0.0f64;
        for j in 0..params[i].len() {
            let x0 = params[i].data()[j];
            let h = 1e-6 * x0.abs().max(1.0);
            params[i].data_mut()[j] = x0 + h;
            let up = loss(&params[0], &params[1], &params[2], &params[3], &params[4]);
            params[i].data_mut()[j] = x0 - h;
            let down = loss(&params[0], &params[1], &params[2], &params[3], &params[4]);
            params[i].data_mut()[j] = x0;
            let (a, n) = (grads[i].data()[j], (up - down) / (2.0 * h));
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-3));
        }
        println!("{:<14} max relative error {worst:.2e}", names[i]);
    }
}
