use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::loss;
use super::model::{InversionModel, Mode};
use super::{InversionError, Result, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience_epochs: usize,
    pub alpha: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub plateau_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            batch_size: 8,
            patience_epochs: 10,
            alpha: 0.8,
            max_epochs: 200,
            seed: 0,
            plateau_factor: 0.5,
            plateau_patience: 3,
            plateau_threshold: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(InversionError::Config(
                "learning rate, batch size and max epochs must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(InversionError::Config(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            return Err(InversionError::Config(format!(
                "plateau factor {} outside (0, 1]",
                self.plateau_factor
            )));
        }
        Ok(())
    }
}

/// Stops after `patience` epochs without a strict improvement and keeps
/// track of the best epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    bad: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            bad: 0,
        }
    }

    /// Records an epoch's validation loss. Returns `(improved, stop)`.
    pub fn update(&mut self, epoch: usize, val: f64) -> (bool, bool) {
        if val < self.best {
            self.best = val;
            self.best_epoch = Some(epoch);
            self.bad = 0;
            (true, false)
        } else {
            self.bad += 1;
            (false, self.bad >= self.patience)
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Multiplies the learning rate by `factor` once validation loss has gone
/// `patience` epochs without improving on its best by more than `threshold`.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    factor: f64,
    patience: usize,
    threshold: f64,
    best: f64,
    bad: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize, threshold: f64) -> Self {
        Self {
            factor,
            patience,
            threshold,
            best: f64::INFINITY,
            bad: 0,
        }
    }

    /// Returns the learning rate to use from the next epoch on.
    pub fn step(&mut self, val: f64, lr: f64) -> f64 {
        if val < self.best - self.threshold {
            self.best = val;
            self.bad = 0;
            return lr;
        }
        self.bad += 1;
        if self.bad >= self.patience {
            self.bad = 0;
            lr * self.factor
        } else {
            lr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters and batch-norm statistics from the best validation epoch.
    pub model: InversionModel,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Mean loss over a set in evaluation mode.
pub fn mean_loss(model: &InversionModel, set: &[Sample], alpha: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(InversionError::EmptySet("evaluation"));
    }
    let mut total = 0.0;
    for s in set {
        let pred = model.forward(&s.embedding, Mode::Eval)?;
        total += loss(
            pred.as_slice(),
            s.target.as_slice(),
            model.config.outputs,
            alpha,
        )?
        .loss;
    }
    Ok(total / set.len() as f64)
}

/// Mini-batch Adam training with plateau learning-rate decay and early
/// stopping on validation loss. Epochs are numbered from 1.
pub fn train(
    model: InversionModel,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(InversionError::EmptySet("training"));
    }
    if val_set.is_empty() {
        return Err(InversionError::EmptySet("validation"));
    }
    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(&model.params, cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience_epochs);
    let mut plateau = PlateauScheduler::new(
        cfg.plateau_factor,
        cfg.plateau_patience,
        cfg.plateau_threshold,
    );
    let mut best = model.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (l, grads, fwd) = model.loss_and_gradient(&batch, cfg.alpha, Some(&mut rng))?;
            if !l.is_finite() {
                return Err(InversionError::Diverged {
                    epoch,
                    what: "training loss",
                });
            }
            if !grads.is_finite() {
                return Err(InversionError::Diverged {
                    epoch,
                    what: "gradient",
                });
            }
            opt.step(&mut model.params, &grads);
            if let Some(stats) = &fwd.bn_stats {
                model.update_running_stats(stats);
            }
            train_loss += l * chunk.len() as f64;
        }
        train_loss /= train_set.len() as f64;
        if !model.params.is_finite() {
            return Err(InversionError::Diverged {
                epoch,
                what: "parameters",
            });
        }
        let val_loss = mean_loss(&model, val_set, cfg.alpha)?;
        if !val_loss.is_finite() {
            return Err(InversionError::Diverged {
                epoch,
                what: "validation loss",
            });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            learning_rate: opt.lr,
        });
        stopped = epoch;
        let (improved, stop) = stopper.update(epoch, val_loss);
        if improved {
            best = model.clone();
        }
        if stop {
            break;
        }
        opt.lr = plateau.step(val_loss, opt.lr);
    }
    Ok(TrainOutcome {
        model: best,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        stopped_epoch: stopped,
        history,
    })
}
