use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Parameter;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[serde(rename = "adamw")]
    AdamW,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Decoupled decay for AdamW; ignored by SGD.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Heavy-ball momentum for SGD; 0 gives plain `p - lr·g`.
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::AdamW,
            learning_rate: 1e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
            weight_decay: 0.0,
            ..Default::default()
        }
    }

    pub fn adamw(learning_rate: f64, weight_decay: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::AdamW,
            learning_rate,
            weight_decay,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
struct Slot {
    shape: Vec<usize>,
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Optimizer state for a fixed set of named parameters.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    step_count: u64,
    slots: BTreeMap<String, Slot>,
}

impl Optimizer {
    pub fn new<'a>(config: OptimizerConfig, params: impl IntoIterator<Item = &'a Parameter>) -> Self {
        let slots = params
            .into_iter()
            .map(|p| {
                let n = p.numel();
                let second = match config.kind {
                    OptimizerKind::AdamW => vec![0.0; n],
                    OptimizerKind::Sgd => Vec::new(),
                };
                (
                    p.name.clone(),
                    Slot {
                        shape: p.value.shape().to_vec(),
                        first: vec![0.0; n],
                        second,
                    },
                )
            })
            .collect();
        Optimizer {
            config,
            step_count: 0,
            slots,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn registered(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    /// Applies one update to exactly the registered parameter set, consuming
    /// each parameter's `grad`.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter>) -> Result<()> {
        const OP: &str = "optimizer_step";
        let mut params: Vec<&mut Parameter> = params.into_iter().collect();
        if params.len() != self.slots.len() {
            return Err(Error::contract(
                OP,
                format!(
                    "expected {} registered parameters, got {}",
                    self.slots.len(),
                    params.len()
                ),
            ));
        }
        for p in params.iter() {
            let slot = self.slots.get(&p.name).ok_or_else(|| {
                Error::contract(OP, format!("parameter `{}` is not registered", p.name))
            })?;
            if slot.shape != p.value.shape() {
                return Err(Error::dim(
                    OP,
                    format!("shape of `{}`", p.name),
                    format!("{:?}", slot.shape),
                    format!("{:?}", p.value.shape()),
                ));
            }
            match &p.grad {
                None => {
                    return Err(Error::contract(OP, format!("missing gradient for `{}`", p.name)));
                }
                Some(g) if g.shape() != p.value.shape() => {
                    return Err(Error::dim(
                        OP,
                        format!("gradient of `{}`", p.name),
                        format!("{:?}", p.value.shape()),
                        format!("{:?}", g.shape()),
                    ));
                }
                Some(_) => {}
            }
        }

        self.step_count += 1;
        let cfg = self.config;
        let t = self.step_count as i32;
        for p in params.iter_mut() {
            let grad = p.grad.take().expect("checked above");
            let slot = self.slots.get_mut(&p.name).expect("checked above");
            let values = p.value.data_mut();
            match cfg.kind {
                OptimizerKind::Sgd => {
                    for ((v, &g), buf) in values.iter_mut().zip(grad.data()).zip(&mut slot.first) {
                        let d = if cfg.momentum != 0.0 {
                            *buf = cfg.momentum * *buf + g;
                            *buf
                        } else {
                            g
                        };
                        *v -= cfg.learning_rate * d;
                    }
                }
                OptimizerKind::AdamW => {
                    let bc1 = 1.0 - cfg.beta1.powi(t);
                    let bc2 = 1.0 - cfg.beta2.powi(t);
                    let decay = cfg.learning_rate * cfg.weight_decay;
                    for (((v, &g), m), s) in values
                        .iter_mut()
                        .zip(grad.data())
                        .zip(&mut slot.first)
                        .zip(&mut slot.second)
                    {
                        *v -= decay * *v;
                        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                        *s = cfg.beta2 * *s + (1.0 - cfg.beta2) * g * g;
                        let m_hat = *m / bc1;
                        let s_hat = *s / bc2;
                        *v -= cfg.learning_rate * m_hat / (s_hat.sqrt() + cfg.eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn param(v: f64) -> Parameter {
        Parameter::new("p", Tensor::from_vec(vec![v]))
    }

    #[test]
    fn sgd_one_step() {
        let mut p = param(1.0);
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1), [&p]);
        p.grad = Some(Tensor::from_vec(vec![1.0]));
        opt.step([&mut p]).unwrap();
        assert!((p.value.data()[0] - 0.9).abs() < 1e-15);
        assert!(p.grad.is_none());
    }

    #[test]
    fn adamw_zero_gradient_fixed_point() {
        let mut p = param(0.7);
        let mut opt = Optimizer::new(OptimizerConfig::adamw(1e-3, 0.0), [&p]);
        p.grad = Some(Tensor::from_vec(vec![0.0]));
        opt.step([&mut p]).unwrap();
        assert_eq!(p.value.data()[0], 0.7);
    }

    #[test]
    fn missing_gradient_is_contract_error() {
        let mut p = param(1.0);
        let mut opt = Optimizer::new(OptimizerConfig::default(), [&p]);
        assert!(matches!(opt.step([&mut p]), Err(Error::Contract { .. })));
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn unregistered_parameter_rejected() {
        let p = param(1.0);
        let mut q = Parameter::new("q", Tensor::from_vec(vec![1.0]));
        q.grad = Some(Tensor::from_vec(vec![1.0]));
        let mut opt = Optimizer::new(OptimizerConfig::default(), [&p]);
        assert!(opt.step([&mut q]).is_err());
    }
}
