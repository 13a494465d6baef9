use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{HinGraph, TypeId};
use crate::model::{eval_forward, forward, layer_dims, Mode, ModelParams, ParamVars};
use crate::numerics::Tape;
use crate::rng;

use super::adam::AdamState;
use super::config::TrainConfig;
use super::loss::{cross_entropy_loss, LabeledSet};
use super::metrics::{classification_metrics, Metrics};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_micro_f1: f64,
    pub val_macro_f1: f64,
    pub epoch_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters of the best validation epoch (the initial ones if no
    /// epoch ran).
    pub params: ModelParams,
    pub log: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// Types that carry labels and a split.
fn supervised_types(g: &HinGraph) -> Vec<TypeId> {
    g.labeled_types()
        .into_iter()
        .filter(|&t| g.split(t).is_some())
        .collect()
}

/// Xavier-initialized parameters whose last layer has one column per class
/// for every labeled type.
pub fn init_params(g: &HinGraph, cfg: &TrainConfig) -> Result<ModelParams> {
    cfg.check_for(g.schema())?;
    let schema = g.schema();
    let input: Vec<usize> = (0..schema.n_types())
        .map(|t| g.features(t).cols())
        .collect();
    let output: Vec<Option<usize>> = (0..schema.n_types())
        .map(|t| (g.class_count(t) > 0).then(|| g.class_count(t)))
        .collect();
    let dims = layer_dims(&input, &cfg.widths, &output);
    Ok(ModelParams::init(
        schema,
        dims,
        cfg.d_a,
        cfg.mean_variant,
        &mut rng::stream(cfg.seed, rng::ids::INIT),
    ))
}

/// Optimizer state and training data for stepping one epoch at a time.
pub struct Trainer<'g> {
    g: &'g HinGraph,
    cfg: TrainConfig,
    params: ModelParams,
    adam: AdamState,
    sets: Vec<LabeledSet>,
    targets: Vec<TypeId>,
    epoch: usize,
}

impl<'g> Trainer<'g> {
    pub fn new(g: &'g HinGraph, cfg: &TrainConfig) -> Result<Trainer<'g>> {
        let params = init_params(g, cfg)?;
        let targets = supervised_types(g);
        let sets = targets
            .iter()
            .map(|&t| {
                LabeledSet::from_split(g, t, "train", cfg.type_weight(g.schema().type_name(t)))
            })
            .collect::<Result<Vec<_>>>()?;
        if sets.iter().all(|s| s.rows.is_empty()) {
            return Err(Error::Data("no labeled training objects".into()));
        }
        let adam = AdamState::new(&params.matrices());
        Ok(Trainer {
            g,
            cfg: cfg.clone(),
            params,
            adam,
            sets,
            targets,
            epoch: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn targets(&self) -> &[TypeId] {
        &self.targets
    }

    /// Forward in training mode, loss, backward and one Adam update.
    /// Returns the training loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, &self.params);
        let mut drop_rng = rng::stream(self.cfg.seed, rng::ids::DROPOUT + self.epoch as u64);
        let mode = Mode::Train {
            dropout: self.cfg.dropout_rate,
        };
        let out = forward(
            &mut tape,
            &self.params,
            &vars,
            self.g,
            Some(&self.targets),
            mode,
            &mut drop_rng,
        )?;
        let loss = cross_entropy_loss(&mut tape, &out.outputs, &self.sets, self.g)?;
        let value = tape.value(loss).get(0, 0);
        if !value.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss at epoch {}",
                self.epoch + 1
            )));
        }
        let grads = tape.backward(loss);
        let grads = vars.gradients(&tape, &grads);
        drop(tape);
        self.adam.update(
            &mut self.params.matrices_mut(),
            &grads,
            self.cfg.learning_rate,
            self.cfg.l2_weight,
        )?;
        self.epoch += 1;
        Ok(value)
    }
}

/// Per-type metrics on split `part` (eval-mode forward, argmax).
pub fn evaluate(
    params: &ModelParams,
    g: &HinGraph,
    part: &str,
) -> Result<BTreeMap<String, Metrics>> {
    let targets = supervised_types(g);
    if targets.is_empty() {
        return Err(Error::Data("no labeled type with a split".into()));
    }
    let (outputs, _) = eval_forward(params, g, Some(&targets))?;
    let mut out = BTreeMap::new();
    for &t in &targets {
        let set = LabeledSet::from_split(g, t, part, 1.0)?;
        let logits = outputs[t].as_ref().ok_or_else(|| {
            Error::Model(format!("no output for type {}", g.schema().type_name(t)))
        })?;
        let pred: Vec<usize> = logits.select_rows(&set.rows).argmax_rows();
        out.insert(
            g.schema().type_name(t).to_string(),
            classification_metrics(&pred, &set.labels, g.class_count(t))?,
        );
    }
    Ok(out)
}

/// Micro-F1 pooled over all objects, macro-F1 averaged over types.
fn pooled(m: &BTreeMap<String, Metrics>) -> (f64, f64) {
    let n: usize = m.values().map(|x| x.n).sum();
    let micro = m.values().map(|x| x.micro_f1 * x.n as f64).sum::<f64>() / n as f64;
    let macro_ = m.values().map(|x| x.macro_f1).sum::<f64>() / m.len() as f64;
    (micro, macro_)
}

pub fn fit(g: &HinGraph, cfg: &TrainConfig) -> Result<FitResult> {
    fit_with(g, cfg, |_| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_with(
    g: &HinGraph,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    let mut trainer = Trainer::new(g, cfg)?;
    let mut best = trainer.params().clone();
    let mut best_epoch = None;
    let mut best_val = f64::NEG_INFINITY;
    let mut log = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        let train_loss = trainer.step()?;
        let epoch_seconds = start.elapsed().as_secs_f64();
        let (val_micro_f1, val_macro_f1) = pooled(&evaluate(trainer.params(), g, "val")?);
        let rec = EpochRecord {
            epoch,
            train_loss,
            val_micro_f1,
            val_macro_f1,
            epoch_seconds,
        };
        log::debug!("epoch {epoch}: loss {train_loss:.4} val micro-F1 {val_micro_f1:.4}");
        on_epoch(&rec);
        log.push(rec);
        if val_micro_f1 > best_val {
            best_val = val_micro_f1;
            best_epoch = Some(epoch);
            best = trainer.params().clone();
        } else if best_epoch.is_some_and(|b| epoch - b >= cfg.patience) {
            break;
        }
    }
    Ok(FitResult {
        params: best,
        log,
        best_epoch,
    })
}
