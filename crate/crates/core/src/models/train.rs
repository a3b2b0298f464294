use std::fmt::Write as _;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Model, ModelKind, ModelSpec};
use crate::augment::{augment_sequence, AugmentParams};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig};
use crate::radar_dsp::RdSequence;

/// Generator for one purpose of one run; streams keep initialisation,
/// splitting and batch order independent of each other.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const STREAM_INIT: u64 = 0;
pub(crate) const STREAM_SPLIT: u64 = 1;
pub(crate) const STREAM_BATCHES: u64 = 2;
pub(crate) const STREAM_FINETUNE: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub augment: bool,
    pub augment_params: AugmentParams,
    pub val_fraction: f64,
    /// Stop once validation accuracy reaches this value.
    pub early_stop: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch: 16,
            lr: 1e-3,
            seed: 0,
            augment: true,
            augment_params: AugmentParams::default(),
            val_fraction: 0.1,
            early_stop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("epochs and batch must be >= 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config("val_fraction must be in (0, 1)".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if let Some(t) = self.early_stop {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config("early_stop must be in [0, 1]".into()));
            }
        }
        self.augment_params.validate()
    }
}

/// Contents of a training config file: model kind and class count plus
/// the training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub kind: ModelKind,
    pub n_classes: usize,
    pub train: TrainConfig,
}

impl TrainSettings {
    pub fn new(kind: ModelKind, n_classes: usize) -> Self {
        Self {
            kind,
            n_classes,
            train: TrainConfig::default(),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys not present
    /// keep their defaults; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::new(ModelKind::Snn, 4);
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            s.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        s.train.validate()?;
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
        }
        let t = &mut self.train;
        match key {
            "kind" => self.kind = value.parse()?,
            "n_classes" => self.n_classes = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "batch" => t.batch = num(key, value)?,
            "lr" => t.lr = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "augment" => t.augment = num(key, value)?,
            "val_fraction" => t.val_fraction = num(key, value)?,
            "early_stop" => {
                t.early_stop = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Fully resolved settings in the same format `parse` reads.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let early = t.early_stop.map_or("none".to_string(), |v| v.to_string());
        format!(
            "kind = {}\nn_classes = {}\nepochs = {}\nbatch = {}\nlr = {}\nseed = {}\naugment = {}\nval_fraction = {}\nearly_stop = {}\n",
            self.kind, self.n_classes, t.epochs, t.batch, t.lr, t.seed, t.augment, t.val_fraction, early
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }

    /// `epoch,train_loss,val_accuracy` lines, epochs counted from 1.
    pub fn to_text(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_accuracy\n");
        for (i, (l, a)) in self.train_loss.iter().zip(&self.val_accuracy).enumerate() {
            let _ = writeln!(s, "{},{l:.6},{a:.6}", i + 1);
        }
        s
    }
}

/// Stratified split: from each class, `round(val_fraction * n_c)` samples
/// (at least one when the class has two or more) go to validation.
pub fn split_train_val(labels: &[usize], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream_rng(seed, STREAM_SPLIT);
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let mut n_val = (val_fraction * idx.len() as f64).round() as usize;
        if idx.len() >= 2 {
            n_val = n_val.clamp(1, idx.len() - 1);
        } else {
            n_val = 0;
        }
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Accumulates the mean-loss gradient of one mini-batch (augmenting each
/// sequence when `augment` is given). Returns the mean loss.
pub(crate) fn accumulate_batch(
    model: &mut Model,
    batch: &[&RdSequence],
    augment: Option<&AugmentParams>,
    rng: &mut impl Rng,
) -> Result<f64> {
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for seq in batch {
        total += match augment {
            Some(p) => model.accumulate_gradients(&augment_sequence(seq, p, rng)?, scale)?,
            None => model.accumulate_gradients(seq, scale)?,
        };
    }
    Ok(total * scale)
}

/// Adam update of every parameter followed by LIF parameter clamping.
pub(crate) fn optimizer_step(model: &mut Model, adam: &mut Adam) -> Result<()> {
    adam.step(&mut model.params_mut())?;
    model.clamp_params();
    Ok(())
}

pub(crate) fn accuracy_on(model: &Model, data: &[RdSequence], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0;
    for &i in idx {
        if model.infer(&data[i])?.0 == data[i].label {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len() as f64)
}

/// Trains encoder and head jointly with Adam on a stratified 90/10
/// train/validation split of `data`, keeping the weights of the best
/// validation epoch.
pub fn train(spec: ModelSpec, data: &[RdSequence], cfg: &TrainConfig) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(s) = data.iter().find(|s| s.label >= spec.n_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {} outside {} classes",
            s.label, spec.n_classes
        )));
    }
    let labels: Vec<usize> = data.iter().map(|s| s.label).collect();
    let (mut train_idx, val_idx) = split_train_val(&labels, cfg.val_fraction, cfg.seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = Model::new(spec, &mut stream_rng(cfg.seed, STREAM_INIT))?;
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut rng = stream_rng(cfg.seed, STREAM_BATCHES);
    let augment = cfg.augment.then_some(&cfg.augment_params);
    let mut history = TrainHistory::default();
    let mut best = model.clone();
    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in train_idx.chunks(cfg.batch) {
            let batch: Vec<&RdSequence> = chunk.iter().map(|&i| &data[i]).collect();
            model.zero_grad();
            let loss = accumulate_batch(&mut model, &batch, augment, &mut rng)?;
            optimizer_step(&mut model, &mut adam)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let val_acc = accuracy_on(&model, data, &val_idx)?;
        info!(
            "{} epoch {}/{}: train loss {train_loss:.4}, val accuracy {val_acc:.4}",
            model.kind(),
            epoch + 1,
            cfg.epochs
        );
        history.train_loss.push(train_loss);
        history.val_accuracy.push(val_acc);
        if epoch == 0 || val_acc > history.best_val_accuracy {
            history.best_val_accuracy = val_acc;
            history.best_epoch = epoch;
            best = model.clone();
        }
        if cfg.early_stop.is_some_and(|t| val_acc >= t) {
            break;
        }
    }
    best.zero_grad();
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_round_trip() {
        let mut s = TrainSettings::new(ModelKind::Gru, 11);
        s.train.seed = 42;
        s.train.early_stop = Some(0.95);
        let back = TrainSettings::parse(&s.to_text()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), s.to_text());
    }

    #[test]
    fn settings_reject_unknown_and_bad_values() {
        assert!(TrainSettings::parse("kind = snn\ndropout = 0.5\n").is_err());
        assert!(TrainSettings::parse("epochs = many\n").is_err());
        assert!(TrainSettings::parse("epochs = 0\n").is_err());
        assert!(TrainSettings::parse("val_fraction = 1.0\n").is_err());
        let s = TrainSettings::parse("# comment\nkind = lstm  # trailing\n\nepochs = 3\n").unwrap();
        assert_eq!((s.kind, s.train.epochs, s.train.batch), (ModelKind::Lstm, 3, 16));
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let labels: Vec<usize> = (0..200).map(|i| i % 4).collect();
        let (tr, va) = split_train_val(&labels, 0.1, 7);
        assert_eq!(va.len(), 20);
        assert_eq!(tr.len() + va.len(), 200);
        for c in 0..4 {
            assert_eq!(va.iter().filter(|&&i| labels[i] == c).count(), 5);
        }
        assert_eq!((tr.clone(), va.clone()), split_train_val(&labels, 0.1, 7));
        assert_ne!(va, split_train_val(&labels, 0.1, 8).1);
    }
}
