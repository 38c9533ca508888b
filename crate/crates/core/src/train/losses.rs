//! Scalar loss functions and their tape counterparts.
//!
//! The discriminator sees raw scores; probabilities are `σ(score)`. Both
//! logistic terms are written through softplus so saturated scores stay
//! finite: `−log σ(x) = softplus(−x)`, `−log(1 − σ(x)) = softplus(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::kernels::{log_sum_exp, softplus};
use crate::tensor::Var;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// `mean log(1 − σ(D(G(z))))`, the literal minimax objective.
    Minimax,
    /// `−mean log σ(D(G(z)))`, same fixed point with stronger early gradients.
    #[default]
    NonSaturating,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdversarialLosses {
    pub discriminator: f64,
    pub generator: f64,
}

/// `−log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::contract("cross_entropy", "empty logits"));
    }
    if label >= logits.len() {
        return Err(Error::contract(
            "cross_entropy",
            format!("label {label} out of range for {} classes", logits.len()),
        ));
    }
    Ok(log_sum_exp(logits) - logits[label])
}

/// Batch mean of [`cross_entropy`].
pub fn cross_entropy_batch(logits: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::contract(
            "cross_entropy",
            format!("{} logit rows for {} labels", logits.len(), labels.len()),
        ));
    }
    let mut total = 0.0;
    for (l, &y) in logits.iter().zip(labels) {
        total += cross_entropy(l, y)?;
    }
    Ok(total / labels.len() as f64)
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

/// `L_D = −mean log σ(real) − mean log(1 − σ(fake))` and the generator loss
/// selected by `mode`.
pub fn adversarial_losses(real: &[f64], fake: &[f64], mode: GeneratorLoss) -> Result<AdversarialLosses> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::contract("adversarial_losses", "empty score batch"));
    }
    let discriminator =
        mean(real.iter().map(|&r| softplus(-r))) + mean(fake.iter().map(|&f| softplus(f)));
    let generator = match mode {
        GeneratorLoss::Minimax => -mean(fake.iter().map(|&f| softplus(f))),
        GeneratorLoss::NonSaturating => mean(fake.iter().map(|&f| softplus(-f))),
    };
    Ok(AdversarialLosses {
        discriminator,
        generator,
    })
}

/// `L_adv + L_ce`, unweighted.
pub fn total_loss(adversarial: f64, cross_entropy: f64) -> Result<f64> {
    if !adversarial.is_finite() || !cross_entropy.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite loss term (adversarial {adversarial}, cross-entropy {cross_entropy})"
        )));
    }
    Ok(adversarial + cross_entropy)
}

pub(crate) fn discriminator_loss<'t>(real: Var<'t>, fake: Var<'t>) -> Result<Var<'t>> {
    let real_term = real.neg().softplus().mean();
    let fake_term = fake.softplus().mean();
    real_term.add(&fake_term)
}

pub(crate) fn generator_loss(fake: Var<'_>, mode: GeneratorLoss) -> Var<'_> {
    match mode {
        GeneratorLoss::Minimax => fake.softplus().mean().neg(),
        GeneratorLoss::NonSaturating => fake.neg().softplus().mean(),
    }
}
