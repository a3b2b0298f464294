//! Classification metrics, multi-seed aggregation and the SNN latency curve.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::models::{train, Model, ModelKind, ModelSpec, TrainConfig};
use crate::radar_dsp::RdSequence;

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n: n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != n_classes * n_classes {
            return Err(Error::Shape(format!(
                "{} counts for {n_classes} classes",
                counts.len()
            )));
        }
        Ok(Self { n: n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n + pred]
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.n || pred >= self.n {
            return Err(Error::InvalidArgument(format!(
                "class pair ({truth}, {pred}) outside {} classes",
                self.n
            )));
        }
        self.counts[truth * self.n + pred] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Space-separated grid, one row per true class.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for row in self.counts.chunks(self.n.max(1)) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<Vec<u64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|v| v.parse().map_err(|_| Error::format(format!("bad count '{v}'"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::format("confusion matrix must be square and non-empty"));
        }
        Self::from_counts(n, rows.concat())
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    match cm.total() {
        0 => 0.0,
        t => cm.trace() as f64 / t as f64,
    }
}

/// Mean over classes of `2 TP / (2 TP + FP + FN)`; a class with a zero
/// denominator contributes 0.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let n = cm.n_classes();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = (0..n)
        .map(|i| {
            let tp = cm.get(i, i);
            let fp: u64 = (0..n).map(|r| cm.get(r, i)).sum::<u64>() - tp;
            let fn_: u64 = (0..n).map(|c| cm.get(i, c)).sum::<u64>() - tp;
            let den = 2 * tp + fp + fn_;
            if den == 0 {
                0.0
            } else {
                2.0 * tp as f64 / den as f64
            }
        })
        .sum();
    sum / n as f64
}

/// Runs inference over `data`.
pub fn confusion(model: &Model, data: &[RdSequence]) -> Result<ConfusionMatrix> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cm = ConfusionMatrix::new(model.spec.n_classes);
    for seq in data {
        let (pred, _) = model.infer(seq)?;
        cm.add(seq.label, pred)?;
    }
    Ok(cm)
}

/// Accuracy of the SNN prediction from the first `t` frames, `t = 1..=T`.
pub fn latency_curve(model: &Model, data: &[RdSequence]) -> Result<Vec<(usize, f64)>> {
    if model.kind() != ModelKind::Snn {
        return Err(Error::InvalidArgument(format!(
            "latency curve needs an snn model, got {} (its head needs the full sequence)",
            model.kind()
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let t_len = data[0].len();
    if data.iter().any(|s| s.len() != t_len) {
        return Err(Error::Shape("sequences differ in length".into()));
    }
    let mut hits = vec![0usize; t_len];
    for seq in data {
        for (t, counts) in model.prefix_counts(seq)?.iter().enumerate() {
            if crate::snn::argmax_first(counts) == seq.label {
                hits[t] += 1;
            }
        }
    }
    Ok(hits
        .iter()
        .enumerate()
        .map(|(t, &h)| (t + 1, h as f64 / data.len() as f64))
        .collect())
}

pub fn curve_to_text(curve: &[(usize, f64)]) -> String {
    let mut s = String::from("t,accuracy\n");
    for (t, a) in curve {
        let _ = writeln!(s, "{t},{a:.6}");
    }
    s
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub seeds: Vec<u64>,
    pub accuracy: Vec<f64>,
    pub macro_f1: Vec<f64>,
}

impl RunStats {
    pub fn push(&mut self, seed: u64, cm: &ConfusionMatrix) {
        self.seeds.push(seed);
        self.accuracy.push(accuracy(cm));
        self.macro_f1.push(macro_f1(cm));
    }

    pub fn accuracy_stats(&self) -> (f64, f64) {
        mean_std(&self.accuracy)
    }

    pub fn macro_f1_stats(&self) -> (f64, f64) {
        mean_std(&self.macro_f1)
    }

    /// Key-value metrics file.
    pub fn to_text(&self) -> String {
        let (am, asd) = self.accuracy_stats();
        let (fm, fsd) = self.macro_f1_stats();
        let mut s = String::new();
        let _ = writeln!(s, "runs = {}", self.seeds.len());
        let _ = writeln!(s, "accuracy = {am:.6}");
        let _ = writeln!(s, "accuracy_std = {asd:.6}");
        let _ = writeln!(s, "macro_f1 = {fm:.6}");
        let _ = writeln!(s, "macro_f1_std = {fsd:.6}");
        for (i, seed) in self.seeds.iter().enumerate() {
            let _ = writeln!(
                s,
                "run.{seed} = {:.6} {:.6}",
                self.accuracy[i], self.macro_f1[i]
            );
        }
        s
    }
}

/// Trains one model per seed on `train_data` and evaluates it on `test_data`.
pub fn repeat_runs(
    spec: &ModelSpec,
    train_data: &[RdSequence],
    test_data: &[RdSequence],
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<(RunStats, Vec<Model>)> {
    if seeds.is_empty() {
        return Err(Error::Config("need at least one seed".into()));
    }
    let mut stats = RunStats {
        seeds: Vec::new(),
        accuracy: Vec::new(),
        macro_f1: Vec::new(),
    };
    let mut models = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (m, _) = train(spec.clone(), train_data, &TrainConfig { seed, ..cfg.clone() })?;
        stats.push(seed, &confusion(&m, test_data)?);
        models.push(m);
    }
    Ok((stats, models))
}
