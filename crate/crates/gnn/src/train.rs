//! Adam training loop over per-instance gradients.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use graphvar_core::{Norm, ProblemParams};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::error::{Error, Result};
use crate::loss::{loss_distill, loss_unsupervised, LossAndGrad};
use crate::model::GnnModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Unsupervised,
    Distill,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Unsupervised => "unsupervised",
            Objective::Distill => "distill",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsupervised" => Ok(Objective::Unsupervised),
            "distill" => Ok(Objective::Distill),
            _ => Err(Error::InvalidInput(format!("unknown training mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl TrainConfig {
    pub fn new(objective: Objective) -> Self {
        Self {
            objective,
            p: 2.0,
            q: 1.0,
            lambda: 0.05,
            epsilon: 1e-8,
            epochs: 60,
            learning_rate: 0.01,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }

    pub fn problem(&self) -> Result<ProblemParams> {
        Ok(ProblemParams::new(Norm::from_p(self.p)?, self.q, self.lambda, self.epsilon)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidInput("learning rate must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    /// Mean per-instance loss over the epoch's updates.
    pub train_loss: f64,
    /// Mean per-instance loss on the validation set after the epoch.
    pub val_loss: Option<f64>,
}

pub const CURVES_CSV_HEADER: &str = "epoch,train_loss,val_loss";

pub fn write_curves_csv<W: Write>(curves: &[EpochLosses], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CURVES_CSV_HEADER}")?;
    for c in curves {
        match c.val_loss {
            Some(v) => writeln!(out, "{},{:e},{:e}", c.epoch, c.train_loss, v)?,
            None => writeln!(out, "{},{:e},", c.epoch, c.train_loss)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the lowest validation loss (or the
    /// last epoch when there is no validation set).
    pub model: GnnModel,
    pub best_epoch: usize,
    pub curves: Vec<EpochLosses>,
}

/// Loss and gradient of one instance under `config.objective`.
pub fn instance_loss(model: &GnnModel, inst: &Instance, config: &TrainConfig) -> Result<LossAndGrad> {
    match config.objective {
        Objective::Unsupervised => loss_unsupervised(model, &inst.index, &inst.f0, &config.problem()?),
        Objective::Distill => {
            let target = inst.target.as_ref().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "instance {} has no precomputed target; run precompute-targets first",
                    inst.name
                ))
            })?;
            loss_distill(model, &inst.index, &inst.f0, target)
        }
    }
}

/// Loss value without gradients.
pub fn instance_loss_value(model: &GnnModel, inst: &Instance, config: &TrainConfig) -> Result<f64> {
    let out = model.forward(&inst.index, &inst.f0)?;
    match config.objective {
        Objective::Unsupervised => Ok(graphvar_core::operators::objective_eps(
            &inst.graph,
            &out,
            &inst.f0,
            &config.problem()?,
        )?),
        Objective::Distill => {
            let target = inst.target.as_ref().ok_or_else(|| {
                Error::InvalidInput(format!("instance {} has no precomputed target", inst.name))
            })?;
            Ok(out.distance_sq(target))
        }
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    fn new(model: &GnnModel, config: &TrainConfig) -> Self {
        let zeros: Vec<Array2<f64>> = model
            .tensors()
            .into_iter()
            .map(|(_, t)| Array2::zeros(t.raw_dim()))
            .collect();
        Self {
            lr: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, model: &mut GnnModel, grads: &[Array2<f64>]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in model
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

fn mean(xs: impl Iterator<Item = Result<f64>>) -> Result<f64> {
    let mut n = 0usize;
    let mut total = 0.0;
    for x in xs {
        total += x?;
        n += 1;
    }
    Ok(total / n as f64)
}

/// Trains `model` with Adam, one instance per step, visiting the training set
/// in a freshly shuffled order every epoch.
pub fn train(
    mut model: GnnModel,
    train_set: &[Instance],
    val_set: &[Instance],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&model, config);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, GnnModel)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let step = instance_loss(&model, &train_set[i], config)?;
            let finite = step.loss.is_finite()
                && step.grads.iter().all(|g| g.iter().all(|v| v.is_finite()));
            if !finite {
                return Err(Error::NonFinite { epoch, curves });
            }
            total += step.loss;
            adam.step(&mut model, &step.grads);
        }
        let train_loss = total / train_set.len() as f64;
        let val_loss = if val_set.is_empty() {
            None
        } else {
            Some(mean(val_set.iter().map(|inst| instance_loss_value(&model, inst, config)))?)
        };
        log::info!("epoch {epoch}: train {train_loss:e} val {val_loss:?}");
        curves.push(EpochLosses {
            epoch,
            train_loss,
            val_loss,
        });
        if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFinite { epoch, curves });
        }
        let score = val_loss.unwrap_or(train_loss);
        if val_loss.is_none() || best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        curves,
    })
}
