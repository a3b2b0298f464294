//! Gradual global magnitude pruning with fine-tuning between events.
//!
//! Only dense/conv/recurrent/LIF weight matrices are prunable; biases and
//! the LIF decay/threshold vectors are never masked.

use std::fmt::Write as _;

use log::info;
use rand::seq::SliceRandom;

use crate::augment::AugmentParams;
use crate::error::{Error, Result};
use crate::models::train::{accumulate_batch, accuracy_on, optimizer_step, stream_rng, STREAM_FINETUNE};
use crate::models::{Model, ParamRole};
use crate::nn::{Adam, AdamConfig};
use crate::radar_dsp::RdSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSchedule {
    pub s_initial: f64,
    pub s_final: f64,
    pub n_steps: usize,
    /// Mini-batch updates after each pruning event.
    pub finetune_iters: usize,
}

impl PruneSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.s_initial && self.s_initial <= self.s_final && self.s_final < 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= s_initial <= s_final < 1, got {} and {}",
                self.s_initial, self.s_final
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be >= 1".into()));
        }
        Ok(())
    }

    /// `s_k = s_f + (s_i - s_f) (1 - k/n)^3`
    pub fn sparsity_at(&self, k: usize) -> Result<f64> {
        if k > self.n_steps {
            return Err(Error::InvalidArgument(format!("pruning event {k} beyond {} steps", self.n_steps)));
        }
        // Endpoints returned verbatim; the polynomial is off by an ulp at k = 0.
        if k == 0 {
            return Ok(self.s_initial);
        }
        let r = 1.0 - k as f64 / self.n_steps as f64;
        Ok(self.s_final + (self.s_initial - self.s_final) * r * r * r)
    }
}

/// Keep-flags per parameter tensor, aligned with [`Model::params`];
/// `None` for tensors that are not prunable.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    pub keep: Vec<Option<Vec<bool>>>,
}

impl PruneMask {
    pub fn all_ones(model: &Model) -> Self {
        let keep = model
            .params()
            .iter()
            .zip(model.param_roles())
            .map(|(p, r)| (r == ParamRole::Weight).then(|| vec![true; p.numel()]))
            .collect();
        Self { keep }
    }

    pub fn prunable_count(&self) -> usize {
        self.keep.iter().flatten().map(Vec::len).sum()
    }

    pub fn pruned_count(&self) -> usize {
        self.keep.iter().flatten().flatten().filter(|&&k| !k).count()
    }

    /// Fraction of prunable weights that are masked.
    pub fn sparsity(&self) -> f64 {
        let n = self.prunable_count();
        if n == 0 {
            0.0
        } else {
            self.pruned_count() as f64 / n as f64
        }
    }

    fn check(&self, model: &Model) -> Result<()> {
        let params = model.params();
        if params.len() != self.keep.len()
            || params.iter().zip(&self.keep).any(|(p, k)| k.as_ref().is_some_and(|k| k.len() != p.numel()))
        {
            return Err(Error::Shape("prune mask does not match model parameters".into()));
        }
        Ok(())
    }

    /// Sets masked weights to zero.
    pub fn apply(&self, model: &mut Model) -> Result<()> {
        self.check(model)?;
        for (p, k) in model.params_mut().into_iter().zip(&self.keep) {
            if let Some(k) = k {
                p.values_mut().iter_mut().zip(k).filter(|(_, &k)| !k).for_each(|(v, _)| *v = 0.0);
            }
        }
        Ok(())
    }

    /// Zeroes the gradients of masked weights.
    pub fn mask_grads(&self, model: &mut Model) -> Result<()> {
        self.check(model)?;
        for (p, k) in model.params_mut().into_iter().zip(&self.keep) {
            if let (Some(k), Some(_)) = (k, p.grad()) {
                p.grad_mut().iter_mut().zip(k).filter(|(_, &k)| !k).for_each(|(g, _)| *g = 0.0);
            }
        }
        Ok(())
    }

    /// Masked weights that are not bitwise zero (+0.0).
    pub fn violations(&self, model: &Model) -> usize {
        model
            .params()
            .iter()
            .zip(&self.keep)
            .filter_map(|(p, k)| k.as_ref().map(|k| (p, k)))
            .map(|(p, k)| p.values().iter().zip(k).filter(|(v, &k)| !k && v.to_bits() != 0).count())
            .sum()
    }
}

/// Global magnitude mask: the `floor(target * n)` prunable weights with the
/// smallest `|w|` are masked; ties go to earlier tensors, then lower indices.
pub fn magnitude_mask(model: &Model, target: f64) -> Result<PruneMask> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::InvalidArgument(format!("target sparsity {target} outside [0, 1)")));
    }
    let mut mask = PruneMask::all_ones(model);
    let params = model.params();
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(mask.prunable_count());
    for (ti, (p, k)) in params.iter().zip(&mask.keep).enumerate() {
        if k.is_some() {
            entries.extend(p.values().iter().enumerate().map(|(i, v)| (v.abs(), ti, i)));
        }
    }
    let n_zero = (target * entries.len() as f64).floor() as usize;
    // Stable sort keeps (tensor, index) order among equal magnitudes.
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(_, ti, i) in &entries[..n_zero] {
        mask.keep[ti].as_mut().expect("prunable tensor")[i] = false;
    }
    Ok(mask)
}

/// Zeroes the smallest-magnitude weights in place and returns the mask.
pub fn apply_magnitude_prune(model: &mut Model, target: f64) -> Result<PruneMask> {
    let mask = magnitude_mask(model, target)?;
    mask.apply(model)?;
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub augment: Option<AugmentParams>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            batch: 16,
            lr: 1e-3,
            seed: 0,
            augment: Some(AugmentParams::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PruneLevel {
    pub event: usize,
    pub target_sparsity: f64,
    pub achieved_sparsity: f64,
    pub accuracy: f64,
    /// Masked weights found non-zero after any optimiser step of this event.
    pub mask_violations: usize,
    pub model: Model,
}

/// Runs the schedule from a trained model: at each event, prune to `s_k`,
/// fine-tune with masked updates (skipped when the mask did not change),
/// and record the accuracy on `eval_data`.
pub fn prune_and_finetune(
    model: &Model,
    train_data: &[RdSequence],
    eval_data: &[RdSequence],
    schedule: &PruneSchedule,
    cfg: &FinetuneConfig,
) -> Result<Vec<PruneLevel>> {
    schedule.validate()?;
    if train_data.is_empty() || eval_data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch must be >= 1".into()));
    }
    let mut model = model.clone();
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut rng = stream_rng(cfg.seed, STREAM_FINETUNE);
    let eval_idx: Vec<usize> = (0..eval_data.len()).collect();
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut prev_mask = PruneMask::all_ones(&model);
    let mut levels = Vec::with_capacity(schedule.n_steps + 1);
    for k in 0..=schedule.n_steps {
        let target = schedule.sparsity_at(k)?;
        let mask = apply_magnitude_prune(&mut model, target)?;
        let mut violations = mask.violations(&model);
        if mask != prev_mask {
            for _ in 0..schedule.finetune_iters {
                let mut batch = Vec::with_capacity(cfg.batch);
                while batch.len() < cfg.batch.min(train_data.len()) {
                    if cursor == order.len() {
                        order = (0..train_data.len()).collect();
                        order.shuffle(&mut rng);
                        cursor = 0;
                    }
                    batch.push(&train_data[order[cursor]]);
                    cursor += 1;
                }
                model.zero_grad();
                accumulate_batch(&mut model, &batch, cfg.augment.as_ref(), &mut rng)?;
                mask.mask_grads(&mut model)?;
                optimizer_step(&mut model, &mut adam)?;
                mask.apply(&mut model)?;
                violations += mask.violations(&model);
            }
        }
        model.zero_grad();
        let accuracy = accuracy_on(&model, eval_data, &eval_idx)?;
        info!(
            "prune event {k}/{}: sparsity {:.4} (target {target:.4}), accuracy {accuracy:.4}",
            schedule.n_steps,
            mask.sparsity()
        );
        levels.push(PruneLevel {
            event: k,
            target_sparsity: target,
            achieved_sparsity: mask.sparsity(),
            accuracy,
            mask_violations: violations,
            model: model.clone(),
        });
        prev_mask = mask;
    }
    Ok(levels)
}

/// One point of the sparsity/accuracy curve aggregated over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub sparsity: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

/// Aggregates per-run level lists event by event (sparsity averaged too).
pub fn aggregate_curve(runs: &[Vec<PruneLevel>]) -> Result<Vec<CurvePoint>> {
    let n_levels = runs.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
    if runs.iter().any(|r| r.len() != n_levels) {
        return Err(Error::InvalidArgument("runs have different numbers of levels".into()));
    }
    Ok((0..n_levels)
        .map(|i| {
            let acc: Vec<f64> = runs.iter().map(|r| r[i].accuracy).collect();
            let sp: Vec<f64> = runs.iter().map(|r| r[i].achieved_sparsity).collect();
            let (accuracy_mean, accuracy_std) = crate::eval::mean_std(&acc);
            CurvePoint {
                sparsity: crate::eval::mean_std(&sp).0,
                accuracy_mean,
                accuracy_std,
            }
        })
        .collect())
}

/// `sparsity,accuracy_mean,accuracy_std` lines.
pub fn curve_to_text(curve: &[CurvePoint]) -> String {
    let mut s = String::from("sparsity,accuracy_mean,accuracy_std\n");
    for p in curve {
        let _ = writeln!(s, "{:.6},{:.6},{:.6}", p.sparsity, p.accuracy_mean, p.accuracy_std);
    }
    s
}

pub fn parse_curve(text: &str) -> Result<Vec<CurvePoint>> {
    let mut lines = text.lines();
    if lines.next() != Some("sparsity,accuracy_mean,accuracy_std") {
        return Err(Error::format("missing curve header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<f64> = l
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::format(format!("bad number in '{l}'"))))
                .collect::<Result<_>>()?;
            match f[..] {
                [sparsity, accuracy_mean, accuracy_std] => Ok(CurvePoint {
                    sparsity,
                    accuracy_mean,
                    accuracy_std,
                }),
                _ => Err(Error::format(format!("expected 3 fields in '{l}'"))),
            }
        })
        .collect()
}
