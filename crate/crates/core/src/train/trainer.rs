use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::losses::{self, GeneratorLoss};
use super::report::{EpochRecord, FoldReport};
use crate::data::EegTrial;
use crate::error::{Error, Result};
use crate::model::FactorModel;
use crate::tensor::{Optimizer, OptimizerConfig, OptimizerKind, Parameter, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub weight_decay: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub adversarial_generator_loss: GeneratorLoss,
    /// Let the classification loss also update the generator (ablation).
    pub ce_into_generator: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 32,
            max_epochs: 200,
            patience: 5,
            weight_decay: 0.01,
            optimizer: OptimizerKind::AdamW,
            seed: 0,
            adversarial_generator_loss: GeneratorLoss::NonSaturating,
            ce_into_generator: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and non-negative"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay", "must be finite and non-negative"));
        }
        for (field, v) in [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.patience > self.max_epochs {
            return Err(Error::config(
                "patience",
                format!("{} exceeds max_epochs {}", self.patience, self.max_epochs),
            ));
        }
        Ok(())
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        match self.optimizer {
            OptimizerKind::AdamW => OptimizerConfig::adamw(self.learning_rate, self.weight_decay),
            OptimizerKind::Sgd => OptimizerConfig::sgd(self.learning_rate),
        }
    }
}

/// Losses of one three-part update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub discriminator: f64,
    /// Generator loss; the adversarial term of the total.
    pub adversarial: f64,
    pub cross_entropy: f64,
    pub total: f64,
}

/// A model together with the optimizer state of its three update groups.
pub struct Trainer {
    pub model: FactorModel,
    config: TrainConfig,
    disc_opt: Optimizer,
    gen_opt: Optimizer,
    cls_opt: Optimizer,
    noise_rng: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Trainer {
    pub fn new(model: FactorModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let opt = config.optimizer_config();
        let disc_opt = Optimizer::new(opt, model.discriminator.params());
        let gen_opt = Optimizer::new(opt, model.generator.params());
        let cls_opt = Optimizer::new(opt, Self::cls_group(&model, config.ce_into_generator));
        Ok(Trainer {
            noise_rng: stream(config.seed, 7),
            model,
            config,
            disc_opt,
            gen_opt,
            cls_opt,
        })
    }

    fn cls_group(model: &FactorModel, with_generator: bool) -> Vec<&Parameter> {
        let mut v: Vec<&Parameter> = model.class_specific.params().to_vec();
        v.extend(model.head.params());
        if with_generator {
            v.extend(model.generator.params());
        }
        v
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// I.i.d. standard Gaussian "fake" inputs shaped like `batch` trials.
    pub fn sample_noise(&mut self, batch: usize) -> Tensor {
        let cfg = &self.model.config;
        let shape = [batch, 1, cfg.n_channels, cfg.n_samples];
        let n = shape.iter().product();
        let data = (0..n).map(|_| StandardNormal.sample(&mut self.noise_rng)).collect();
        Tensor::new(shape.to_vec(), data).expect("shape matches")
    }

    /// One step: discriminator update (generator frozen), generator update
    /// through the noise stream (discriminator frozen), then the classifier
    /// update on cross-entropy with the common features gradient-blocked.
    pub fn train_step(&mut self, batch: &[&EegTrial], noise: &Tensor) -> Result<StepLosses> {
        let x = self.model.batch_input(batch)?;
        if noise.shape() != x.shape() {
            return Err(Error::dim(
                "train_step",
                "noise shape",
                format!("{:?}", x.shape()),
                format!("{:?}", noise.shape()),
            ));
        }
        let labels: Vec<usize> = batch.iter().map(|t| t.label).collect();
        let mode = self.config.adversarial_generator_loss;

        // Discriminator: real = G(eeg), fake = G(noise).
        let (disc_loss, grads) = {
            let m = &self.model;
            let tape = Tape::new();
            let real = m.generator.forward(&tape, tape.constant(x.clone()), false)?;
            let fake = m.generator.forward(&tape, tape.constant(noise.clone()), false)?;
            let d_real = m.discriminator_score(&tape, real, true)?;
            let d_fake = m.discriminator_score(&tape, fake, true)?;
            let loss = losses::discriminator_loss(d_real, d_fake)?;
            (loss.value().item().expect("scalar"), tape.backward(loss)?)
        };
        grads.attach(self.model.discriminator.params_mut())?;
        self.disc_opt.step(self.model.discriminator.params_mut())?;

        // Generator: fool the updated discriminator on noise inputs.
        let (gen_loss, grads) = {
            let m = &self.model;
            let tape = Tape::new();
            let fake = m.generator.forward(&tape, tape.constant(noise.clone()), true)?;
            let d_fake = m.discriminator_score(&tape, fake, false)?;
            let loss = losses::generator_loss(d_fake, mode);
            (loss.value().item().expect("scalar"), tape.backward(loss)?)
        };
        grads.attach(self.model.generator.params_mut())?;
        self.gen_opt.step(self.model.generator.params_mut())?;

        // Classifier: class-specific extractor + MLP on [common, specific].
        let through_gen = self.config.ce_into_generator;
        let (ce_loss, grads) = {
            let m = &self.model;
            let tape = Tape::new();
            let input = tape.constant(x);
            let common = m.generator.forward(&tape, input, through_gen)?;
            let specific = m.class_specific.forward(&tape, input, true)?;
            let logits = m.head_logits(&tape, common, specific, true)?;
            let loss = logits.cross_entropy(&labels)?;
            (loss.value().item().expect("scalar"), tape.backward(loss)?)
        };
        let m = &mut self.model;
        let mut group: Vec<&mut Parameter> = m.class_specific.params_mut().into_iter().collect();
        group.extend(m.head.params_mut());
        if through_gen {
            group.extend(m.generator.params_mut());
        }
        grads.attach(group.iter_mut().map(|p| &mut **p))?;
        self.cls_opt.step(group)?;

        let total = losses::total_loss(gen_loss, ce_loss)?;
        if !disc_loss.is_finite() {
            return Err(Error::Numerical(format!("discriminator loss is {disc_loss}")));
        }
        Ok(StepLosses {
            discriminator: disc_loss,
            adversarial: gen_loss,
            cross_entropy: ce_loss,
            total,
        })
    }

    /// One pass over `train` in a seeded random order.
    pub fn train_epoch(&mut self, train: &[&EegTrial], order_rng: &mut ChaCha8Rng) -> Result<EpochRecord> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(order_rng);
        let (mut d, mut a, mut c) = (0.0, 0.0, 0.0);
        let mut steps = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&EegTrial> = chunk.iter().map(|&i| train[i]).collect();
            let noise = self.sample_noise(batch.len());
            let s = self.train_step(&batch, &noise)?;
            d += s.discriminator;
            a += s.adversarial;
            c += s.cross_entropy;
            steps += 1;
        }
        let n = steps as f64;
        let (adversarial, cross_entropy) = (a / n, c / n);
        Ok(EpochRecord {
            discriminator: d / n,
            adversarial,
            cross_entropy,
            total: losses::total_loss(adversarial, cross_entropy)?,
        })
    }
}

/// Patience bookkeeping on a monitored accuracy.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records `value` for `epoch` (1-based). Returns `(improved, stop)`.
    pub fn update(&mut self, epoch: usize, value: f64) -> (bool, bool) {
        let improved = value > self.best;
        if improved {
            self.best = value;
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        (improved, self.stale >= self.patience)
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Trains until `max_epochs` or until validation accuracy stalls for
/// `patience` epochs, then restores the best-validation parameters into
/// `model`.
pub fn fit(model: &mut FactorModel, train: &[&EegTrial], val: &[&EegTrial], config: &TrainConfig) -> Result<FoldReport> {
    if train.is_empty() {
        return Err(Error::contract("fit", "empty training set"));
    }
    if val.is_empty() {
        return Err(Error::contract("fit", "empty validation set"));
    }
    if train.iter().any(|t| val.iter().any(|v| std::ptr::eq(*t, *v))) {
        return Err(Error::contract("fit", "training and validation sets overlap"));
    }
    let mut trainer = Trainer::new(model.clone(), config.clone())?;
    let mut order_rng = stream(config.seed, 3);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_model = model.clone();
    let mut epochs = Vec::new();
    let mut val_trace = Vec::new();

    for epoch in 1..=config.max_epochs {
        let record = trainer.train_epoch(train, &mut order_rng)?;
        let acc = trainer.model.accuracy(val)?;
        log::info!(
            "epoch {epoch}: L_D {:.4} L_adv {:.4} L_ce {:.4} val {:.3}",
            record.discriminator,
            record.adversarial,
            record.cross_entropy,
            acc
        );
        epochs.push(record);
        val_trace.push(acc);
        let (improved, stop) = stopper.update(epoch, acc);
        if improved {
            best_model = trainer.model.clone();
        }
        if stop {
            break;
        }
    }
    *model = best_model;
    Ok(FoldReport {
        fold: 0,
        seed: config.seed,
        stopping_epoch: epochs.len(),
        best_epoch: stopper.best_epoch(),
        best_val_accuracy: stopper.best(),
        epochs,
        val_accuracy: val_trace,
        test_accuracy: None,
        selected_bands: Vec::new(),
    })
}
