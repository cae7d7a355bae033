//! Confusion matrices, precision/recall/F1 and the focusing-parameter sweep.

use std::io::Write;

use rayon::prelude::*;

use crate::conflict_sim::{new_topology, synth_dataset, ConflictLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::gap::{compute_alpha, train, FocalConfig, TrainConfig};

/// Entry `(t, p)` counts samples of true class `t` predicted as `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn off_diagonal(&self) -> usize {
        self.total() - (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum::<usize>()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for t in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                self.counts[t][p] += other.counts[t][p];
            }
        }
    }

    /// CSV with header `true,pred_0,pred_1,pred_2,pred_3`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "true,pred_0,pred_1,pred_2,pred_3")?;
        for (t, row) in self.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            writeln!(out, "{t},{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn confusion(preds: &[ConflictLabel], truth: &[ConflictLabel]) -> Result<ConfusionMatrix> {
    if preds.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", preds.len(), truth.len())));
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions"));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truth) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Averaging {
    /// Per-class scores weighted by class support.
    Weighted,
    /// Unweighted mean over classes with non-zero support.
    Macro,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn mean<I: IntoIterator<Item = Prf>>(items: I) -> Prf {
        let mut acc = Prf::default();
        let mut n = 0;
        for p in items {
            acc.precision += p.precision;
            acc.recall += p.recall;
            acc.f1 += p.f1;
            n += 1;
        }
        if n > 0 {
            let inv = 1.0 / n as f64;
            acc.precision *= inv;
            acc.recall *= inv;
            acc.f1 *= inv;
        }
        acc
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest precision, recall and F1 per class, averaged. A zero
/// denominator yields 0 for that class.
pub fn prf(cm: &ConfusionMatrix, averaging: Averaging) -> Result<Prf> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Domain("confusion matrix is empty".into()));
    }
    let mut out = Prf::default();
    let mut weight_sum = 0.0;
    for c in 0..NUM_CLASSES {
        let tp = cm.counts[c][c];
        let support: usize = cm.counts[c].iter().sum();
        let predicted: usize = (0..NUM_CLASSES).map(|t| cm.counts[t][c]).sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, support);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let w = match averaging {
            Averaging::Weighted => support as f64 / total as f64,
            Averaging::Macro if support > 0 => 1.0,
            Averaging::Macro => 0.0,
        };
        out.precision += w * p;
        out.recall += w * r;
        out.f1 += w * f;
        weight_sum += w;
    }
    if averaging == Averaging::Macro {
        out.precision /= weight_sum;
        out.recall /= weight_sum;
        out.f1 /= weight_sum;
    }
    Ok(out)
}

/// A dataset setting in a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub n_rows: usize,
    pub conflict_fraction: f64,
}

impl DatasetSpec {
    /// Imbalanced dataset with `percent`% conflicts.
    pub fn conflict_percent(percent: u32, n_rows: usize) -> Self {
        DatasetSpec { name: percent.to_string(), n_rows, conflict_fraction: percent as f64 / 100.0 }
    }

    /// Evenly distributed classes.
    pub fn balanced(n_rows: usize) -> Self {
        DatasetSpec { name: "balanced".into(), n_rows, conflict_fraction: 0.75 }
    }

    pub fn is_balanced(&self) -> bool {
        (self.conflict_fraction - 0.75).abs() < 1e-12
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub n_apps: usize,
    pub n_params: usize,
    pub n_kpis: usize,
    pub train: TrainConfig,
    /// Repetition `r` uses seed `base_seed + r` for topology, data and training.
    pub base_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub dataset: String,
    pub gamma: f64,
    pub metrics: Prf,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// CSV `dataset,gamma,precision,recall,f1`, four decimals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "dataset,gamma,precision,recall,f1")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{:.1},{:.4},{:.4},{:.4}",
                c.dataset, c.gamma, c.metrics.precision, c.metrics.recall, c.metrics.f1
            )?;
        }
        Ok(())
    }
}

/// The default focusing-parameter grid `0.0, 0.5, …, 4.0`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=8).map(|i| i as f64 * 0.5).collect()
}

/// Cross-validated held-out metrics of one repetition.
pub fn run_cell(spec: &DatasetSpec, gamma: f64, cfg: &SweepConfig, repetition: usize) -> Result<Prf> {
    let seed = cfg.base_seed + repetition as u64;
    let topology = new_topology(cfg.n_apps, cfg.n_params, cfg.n_kpis, seed)?;
    let dataset = synth_dataset(&topology, spec.n_rows, spec.conflict_fraction, seed)?;
    let focal = FocalConfig::new(gamma, compute_alpha(&dataset.labels())?)?;
    let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
    Ok(train(&dataset, &train_cfg, &focal)?.history.mean_metrics())
}

/// Trains every `(dataset, γ)` cell `repetitions` times and averages the
/// held-out metrics. Balanced datasets run with `γ = 0` only.
pub fn gamma_sweep(
    specs: &[DatasetSpec],
    grid: &[f64],
    repetitions: usize,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if grid.is_empty() || specs.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one dataset and one gamma"));
    }
    if repetitions == 0 {
        return Err(Error::Domain("sweep needs at least one repetition".into()));
    }
    if let Some(g) = grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::Domain(format!("gamma {g} must be >= 0")));
    }
    let mut cells: Vec<(usize, f64)> = Vec::new();
    for (si, spec) in specs.iter().enumerate() {
        if spec.is_balanced() {
            cells.push((si, 0.0));
        } else {
            cells.extend(grid.iter().map(|&g| (si, g)));
        }
    }
    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..repetitions).map(move |r| (c, r))).collect();
    let results: Vec<Result<Prf>> = jobs
        .par_iter()
        .map(|&(c, r)| run_cell(&specs[cells[c].0], cells[c].1, cfg, r))
        .collect();
    let mut per_cell: Vec<Vec<Prf>> = vec![Vec::new(); cells.len()];
    for (&(c, _), res) in jobs.iter().zip(results) {
        per_cell[c].push(res?);
    }
    Ok(SweepResult {
        cells: cells
            .iter()
            .zip(per_cell)
            .map(|(&(si, gamma), runs)| SweepCell {
                dataset: specs[si].name.clone(),
                gamma,
                metrics: Prf::mean(runs),
            })
            .collect(),
    })
}
