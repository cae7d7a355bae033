//! The conflict classifier: two GCN layers, global mean pooling and a linear
//! head over four classes, trained with focal loss under stratified k-fold
//! cross-validation with mini-batches and early stopping.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conflict_sim::{ConflictLabel, Dataset, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::gsc::{batch_graphs, build_labeled_graph, ConflictGraph, GraphBatch, FEATURE_DIM, NUM_EDGE_KINDS};
use crate::metrics::{confusion, prf, Averaging, ConfusionMatrix, Prf};
use crate::numerics::{
    adam_step, gcn_layer, gcn_layer_backward, global_mean_pool, global_mean_pool_backward,
    glorot_uniform, normalize_adjacency, softmax_rows, AdamConfig, AdamState, DenseMatrix,
    GcnLayerOutput, NormalizedAdjacency, ParamBlock,
};

pub const HIDDEN_DIM: usize = 16;
/// Lower bound kept on learned edge-kind weights so the adjacency stays valid.
pub const MIN_KIND_WEIGHT: f64 = 1e-3;
/// Floor applied to the true-class probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

/// All trainable values in one flat vector, in block order
/// `W1, b1, W2, b2, Wc, bc, edge-kind weights`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    feature_dim: usize,
    hidden_dim: usize,
    classes: usize,
    values: Vec<f64>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, unit edge-kind weights.
    pub fn init(feature_dim: usize, hidden_dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(Self::count(feature_dim, hidden_dim, classes));
        values.extend(glorot_uniform(&mut rng, feature_dim, hidden_dim));
        values.extend(std::iter::repeat(0.0).take(hidden_dim));
        values.extend(glorot_uniform(&mut rng, hidden_dim, hidden_dim));
        values.extend(std::iter::repeat(0.0).take(hidden_dim));
        values.extend(glorot_uniform(&mut rng, hidden_dim, classes));
        values.extend(std::iter::repeat(0.0).take(classes));
        values.extend([1.0; NUM_EDGE_KINDS]);
        ModelParams { feature_dim, hidden_dim, classes, values }
    }

    /// Default architecture: 5 features, 16 hidden units, 4 classes.
    pub fn new(seed: u64) -> Self {
        Self::init(FEATURE_DIM, HIDDEN_DIM, NUM_CLASSES, seed)
    }

    pub fn from_values(feature_dim: usize, hidden_dim: usize, classes: usize, values: Vec<f64>) -> Result<Self> {
        let expected = Self::count(feature_dim, hidden_dim, classes);
        if values.len() != expected {
            return Err(Error::Compatibility(format!(
                "expected {expected} weights for F={feature_dim}, H={hidden_dim}, C={classes}, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { block: "weights".into(), reason: "non-finite weight".into() });
        }
        let p = ModelParams { feature_dim, hidden_dim, classes, values };
        if p.kind_weights().iter().any(|&w| w <= 0.0) {
            return Err(Error::Domain("edge-kind weights must be positive".into()));
        }
        Ok(p)
    }

    fn count(f: usize, h: usize, c: usize) -> usize {
        f * h + h + h * h + h + h * c + c + NUM_EDGE_KINDS
    }

    pub fn layout(&self) -> Vec<ParamBlock> {
        let (f, h, c) = (self.feature_dim, self.hidden_dim, self.classes);
        let sizes = [("W1", f * h), ("b1", h), ("W2", h * h), ("b2", h), ("Wc", h * c), ("bc", c), ("edge_weights", NUM_EDGE_KINDS)];
        let mut offset = 0;
        sizes
            .iter()
            .map(|&(name, len)| {
                let b = ParamBlock { name, offset, len };
                offset += len;
                b
            })
            .collect()
    }

    fn slice(&self, idx: usize) -> &[f64] {
        let b = &self.layout()[idx];
        &self.values[b.offset..b.offset + b.len]
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn w1(&self) -> DenseMatrix {
        DenseMatrix::from_raw(self.feature_dim, self.hidden_dim, self.slice(0).to_vec())
    }

    pub fn b1(&self) -> &[f64] {
        self.slice(1)
    }

    pub fn w2(&self) -> DenseMatrix {
        DenseMatrix::from_raw(self.hidden_dim, self.hidden_dim, self.slice(2).to_vec())
    }

    pub fn b2(&self) -> &[f64] {
        self.slice(3)
    }

    pub fn wc(&self) -> DenseMatrix {
        DenseMatrix::from_raw(self.hidden_dim, self.classes, self.slice(4).to_vec())
    }

    pub fn bc(&self) -> &[f64] {
        self.slice(5)
    }

    pub fn kind_weights(&self) -> [f64; NUM_EDGE_KINDS] {
        let s = self.slice(6);
        [s[0], s[1], s[2]]
    }

    fn clamp_kind_weights(&mut self) {
        let n = self.values.len();
        for w in &mut self.values[n - NUM_EDGE_KINDS..] {
            *w = w.max(MIN_KIND_WEIGHT);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FocalConfig {
    pub gamma: f64,
    pub alpha: [f64; NUM_CLASSES],
}

impl FocalConfig {
    pub fn new(gamma: f64, alpha: [f64; NUM_CLASSES]) -> Result<Self> {
        let cfg = FocalConfig { gamma, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Plain cross-entropy: `γ = 0`, unit class weights.
    pub fn cross_entropy() -> Self {
        FocalConfig { gamma: 0.0, alpha: [1.0; NUM_CLASSES] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Domain(format!("gamma {} must be >= 0", self.gamma)));
        }
        if self.alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Domain("alpha entries must be >= 0".into()));
        }
        Ok(())
    }
}

/// Inverse-frequency class weights `N / (C · n_c)`; balanced labels give ones.
pub fn compute_alpha(labels: &[ConflictLabel]) -> Result<[f64; NUM_CLASSES]> {
    let mut counts = [0usize; NUM_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    let n = labels.len() as f64;
    let mut alpha = [0.0; NUM_CLASSES];
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::Domain(format!(
                "class {c} ({}) is absent, cannot weight it",
                ConflictLabel::ALL[c].name()
            )));
        }
        alpha[c] = n / (NUM_CLASSES as f64 * count as f64);
    }
    Ok(alpha)
}

/// Batch-mean focal loss and its gradient with respect to the logits.
pub struct FocalOutput {
    pub loss: f64,
    pub d_logits: DenseMatrix,
}

/// `mean_b −α_y (1 − p_y)^γ log p_y`, with the gradient taken through the
/// softmax that produced `probs`.
pub fn focal_loss(probs: &DenseMatrix, labels: &[ConflictLabel], cfg: &FocalConfig) -> Result<FocalOutput> {
    if probs.rows() != labels.len() || probs.cols() != NUM_CLASSES {
        return Err(Error::Shape(format!(
            "focal loss: probabilities {}x{} for {} labels",
            probs.rows(),
            probs.cols(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("focal loss over an empty batch"));
    }
    for r in 0..probs.rows() {
        let row = probs.row(r);
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p)) {
            return Err(Error::Domain(format!("row {r} is not a probability distribution (sum {sum})")));
        }
    }
    let gamma = cfg.gamma;
    let inv_b = 1.0 / labels.len() as f64;
    let mut loss = 0.0;
    let mut d_logits = DenseMatrix::zeros(probs.rows(), NUM_CLASSES);
    for (r, label) in labels.iter().enumerate() {
        let y = label.index();
        let alpha = cfg.alpha[y];
        let p = probs.get(r, y).clamp(PROB_FLOOR, 1.0);
        let q = 1.0 - p;
        let log_p = p.ln();
        let modulating = if gamma == 0.0 { 1.0 } else { q.powf(gamma) };
        loss -= alpha * modulating * log_p;

        // p · dL/dp for one sample; the softmax Jacobian then gives
        // dL/dz_j = (p · dL/dp) · (δ_jy − p_j).
        let focusing = if gamma == 0.0 || q == 0.0 { 0.0 } else { gamma * p * q.powf(gamma - 1.0) * log_p };
        let p_dldp = alpha * (focusing - modulating);
        for j in 0..NUM_CLASSES {
            let delta = if j == y { 1.0 } else { 0.0 };
            d_logits.set(r, j, p_dldp * (delta - probs.get(r, j)) * inv_b);
        }
    }
    Ok(FocalOutput { loss: loss * inv_b, d_logits })
}

struct ForwardCache {
    ahat: NormalizedAdjacency,
    layer1: GcnLayerOutput,
    layer2: GcnLayerOutput,
    pooled: DenseMatrix,
    probs: DenseMatrix,
}

fn check_batch(model: &ModelParams, batch: &GraphBatch) -> Result<()> {
    if batch.features().cols() != model.feature_dim {
        return Err(Error::Shape(format!(
            "batch has {} features per node, model expects {}",
            batch.features().cols(),
            model.feature_dim
        )));
    }
    Ok(())
}

fn forward_cached(model: &ModelParams, batch: &GraphBatch) -> Result<ForwardCache> {
    check_batch(model, batch)?;
    let ahat = normalize_adjacency(batch, &model.kind_weights())?;
    let layer1 = gcn_layer(&ahat, batch.features(), &model.w1(), model.b1())?;
    let layer2 = gcn_layer(&ahat, &layer1.output, &model.w2(), model.b2())?;
    let pooled = global_mean_pool(&layer2.output, batch.membership(), batch.n_graphs())?;
    let mut logits = pooled.matmul(&model.wc())?;
    for r in 0..logits.rows() {
        for (v, &b) in logits.row_mut(r).iter_mut().zip(model.bc()) {
            *v += b;
        }
    }
    let probs = softmax_rows(&logits);
    Ok(ForwardCache { ahat, layer1, layer2, pooled, probs })
}

/// Class probabilities (`B × C`) for every graph in the batch.
pub fn forward(model: &ModelParams, batch: &GraphBatch) -> Result<DenseMatrix> {
    Ok(forward_cached(model, batch)?.probs)
}

/// Focal loss of the batch and its gradient with respect to every parameter,
/// flattened in [`ModelParams`] block order.
pub fn loss_and_grad(
    model: &ModelParams,
    batch: &GraphBatch,
    labels: &[ConflictLabel],
    focal: &FocalConfig,
) -> Result<(f64, Vec<f64>)> {
    let cache = forward_cached(model, batch)?;
    let FocalOutput { loss, d_logits } = focal_loss(&cache.probs, labels, focal)?;

    let wc = model.wc();
    let d_wc = cache.pooled.t_matmul(&d_logits);
    let mut d_bc = vec![0.0; model.classes];
    for r in 0..d_logits.rows() {
        for (acc, &g) in d_bc.iter_mut().zip(d_logits.row(r)) {
            *acc += g;
        }
    }
    let d_pooled = d_logits.matmul_t(&wc);
    let d_h2 = global_mean_pool_backward(&d_pooled, batch.membership(), &batch.graph_sizes());
    let w2 = model.w2();
    let g2 = gcn_layer_backward(&cache.ahat, &cache.layer1.output, &w2, &cache.layer2, &d_h2);
    let w1 = model.w1();
    let g1 = gcn_layer_backward(&cache.ahat, batch.features(), &w1, &cache.layer1, &g2.d_input);

    let mut grad = Vec::with_capacity(model.values.len());
    grad.extend_from_slice(g1.d_weight.data());
    grad.extend_from_slice(&g1.d_bias);
    grad.extend_from_slice(g2.d_weight.data());
    grad.extend_from_slice(&g2.d_bias);
    grad.extend_from_slice(d_wc.data());
    grad.extend_from_slice(&d_bc);
    for k in 0..NUM_EDGE_KINDS {
        grad.push(g1.d_kind_weights[k] + g2.d_kind_weights[k]);
    }
    Ok((loss, grad))
}

/// Index of the largest probability; ties go to the smaller class index.
pub fn argmax_label(probs: &[f64]) -> ConflictLabel {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    ConflictLabel::ALL[best]
}

/// Predicted class and class probabilities of a single graph.
pub fn predict(model: &ModelParams, graph: &ConflictGraph) -> Result<(ConflictLabel, [f64; NUM_CLASSES])> {
    let probs = forward(model, &batch_graphs(&[graph])?)?;
    let row = probs.row(0);
    let mut out = [0.0; NUM_CLASSES];
    out.copy_from_slice(&row[..NUM_CLASSES]);
    Ok((argmax_label(&out), out))
}

/// Batched prediction over many graphs.
pub fn predict_many(
    model: &ModelParams,
    graphs: &[&ConflictGraph],
    chunk: usize,
) -> Result<Vec<(ConflictLabel, [f64; NUM_CLASSES])>> {
    let mut out = Vec::with_capacity(graphs.len());
    for part in graphs.chunks(chunk.max(1)) {
        let probs = forward(model, &batch_graphs(part)?)?;
        for r in 0..probs.rows() {
            let mut p = [0.0; NUM_CLASSES];
            p.copy_from_slice(probs.row(r));
            out.push((argmax_label(&p), p));
        }
    }
    Ok(out)
}

/// Splits indices into `k` folds that each mirror the overall class mix.
/// Members of each class are shuffled and dealt round-robin, continuing the
/// fold pointer from one class to the next so fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[ConflictLabel], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 folds, got {k}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::Stratification { class: c as u8, count: members.len(), k });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub folds: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 1e-4,
            batch_size: 128,
            folds: 5,
            max_epochs: 2000,
            patience: 50,
            min_delta: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.learning_rate) || !finite_nonneg(self.weight_decay) || !finite_nonneg(self.min_delta) {
            return Err(Error::Domain("learning rate, weight decay and delta must be finite and >= 0".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Domain("batch size, epochs and patience must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Domain("need at least 2 folds".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::Domain(format!(
                "patience {} must be below max epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, weight_decay: self.weight_decay, ..AdamConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub fold: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct FoldSummary {
    pub fold: usize,
    pub best_epoch: usize,
    pub stop_epoch: usize,
    pub best_val_loss: f64,
    /// Loss of the returned (best) parameters on the training folds.
    pub final_train_loss: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: Prf,
}

#[derive(Clone, Debug, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub folds: Vec<FoldSummary>,
}

impl TrainHistory {
    pub fn fold_records(&self, fold: usize) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.fold == fold)
    }

    /// Mean of the per-fold held-out metrics.
    pub fn mean_metrics(&self) -> Prf {
        Prf::mean(self.folds.iter().map(|f| f.metrics))
    }

    /// CSV `epoch,fold,train_loss,val_loss`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,fold,train_loss,val_loss")?;
        for r in &self.records {
            writeln!(out, "{},{},{:.8},{:.8}", r.epoch, r.fold, r.train_loss, r.val_loss)?;
        }
        Ok(())
    }
}

/// One trained fold.
#[derive(Clone, Debug)]
pub struct FoldModel {
    pub fold: usize,
    pub params: ModelParams,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub models: Vec<FoldModel>,
    pub history: TrainHistory,
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64 + 1)
}

/// Cross-validated training. Folds are independent and run in parallel; each
/// owns its model and optimizer state.
pub fn train(dataset: &Dataset, cfg: &TrainConfig, focal: &FocalConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    focal.validate()?;
    let graphs = dataset
        .rows
        .iter()
        .map(|row| build_labeled_graph(&dataset.topology, row))
        .collect::<Result<Vec<_>>>()?;
    let folds = stratified_kfold(&dataset.labels(), cfg.folds, cfg.seed)?;
    let results: Vec<Result<(FoldModel, Vec<EpochRecord>, FoldSummary)>> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let val = folds[f].clone();
            let train_idx: Vec<usize> = (0..cfg.folds)
                .filter(|&g| g != f)
                .flat_map(|g| folds[g].iter().copied())
                .collect();
            train_fold(&graphs, &train_idx, &val, cfg, focal, f)
        })
        .collect();
    let mut outcome = TrainOutcome { models: Vec::new(), history: TrainHistory::default() };
    for r in results {
        let (model, records, summary) = r?;
        outcome.models.push(model);
        outcome.history.records.extend(records);
        outcome.history.folds.push(summary);
    }
    Ok(outcome)
}

fn labels_of(graphs: &[&ConflictGraph]) -> Vec<ConflictLabel> {
    graphs.iter().map(|g| g.label.expect("training graphs carry labels")).collect()
}

/// Mean focal loss over a prebuilt set of batches.
fn dataset_loss(model: &ModelParams, batches: &[(GraphBatch, Vec<ConflictLabel>)], focal: &FocalConfig) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0;
    for (batch, labels) in batches {
        let probs = forward(model, batch)?;
        total += focal_loss(&probs, labels, focal)?.loss * labels.len() as f64;
        n += labels.len();
    }
    Ok(total / n.max(1) as f64)
}

fn prebatch(graphs: &[ConflictGraph], indices: &[usize], size: usize) -> Result<Vec<(GraphBatch, Vec<ConflictLabel>)>> {
    indices
        .chunks(size)
        .map(|chunk| {
            let refs: Vec<&ConflictGraph> = chunk.iter().map(|&i| &graphs[i]).collect();
            Ok((batch_graphs(&refs)?, labels_of(&refs)))
        })
        .collect()
}

/// Trains one fold. Stops once the validation loss has failed to improve by
/// more than `min_delta` for `patience` consecutive epochs and returns the
/// parameters of the lowest validation loss seen.
pub fn train_fold(
    graphs: &[ConflictGraph],
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
    focal: &FocalConfig,
    fold: usize,
) -> Result<(FoldModel, Vec<EpochRecord>, FoldSummary)> {
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::EmptyInput("fold has an empty train or validation split"));
    }
    let seed = fold_seed(cfg.seed, fold);
    let mut params = ModelParams::new(seed);
    let mut adam = AdamState::with_blocks(cfg.adam(), params.layout());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66);
    let val_batches = prebatch(graphs, val_idx, cfg.batch_size)?;

    let mut order = train_idx.to_vec();
    let mut records = Vec::new();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut reference = f64::INFINITY;
    let mut waited = 0;
    let mut stop_epoch = cfg.max_epochs - 1;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&ConflictGraph> = chunk.iter().map(|&i| &graphs[i]).collect();
            let batch = batch_graphs(&refs)?;
            let labels = labels_of(&refs);
            let (loss, grad) = loss_and_grad(&params, &batch, &labels, focal)?;
            if !loss.is_finite() {
                return Err(Error::Training { fold, epoch, reason: "training loss is not finite".into() });
            }
            adam_step(params.values_mut(), &grad, &mut adam)
                .map_err(|e| Error::Training { fold, epoch, reason: e.to_string() })?;
            params.clamp_kind_weights();
            epoch_loss += loss * chunk.len() as f64;
        }
        let train_loss = epoch_loss / order.len() as f64;
        let val_loss = dataset_loss(&params, &val_batches, focal)?;
        if !val_loss.is_finite() {
            return Err(Error::Training { fold, epoch, reason: "validation loss is not finite".into() });
        }
        records.push(EpochRecord { fold, epoch, train_loss, val_loss });

        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
        }
        if val_loss < reference - cfg.min_delta {
            reference = val_loss;
            waited = 0;
        } else {
            waited += 1;
            if waited >= cfg.patience {
                stop_epoch = epoch;
                break;
            }
        }
    }
    let (best_val_loss, best_params, best_epoch) = best;
    let train_batches = prebatch(graphs, train_idx, cfg.batch_size)?;
    let final_train_loss = dataset_loss(&best_params, &train_batches, focal)?;

    let val_refs: Vec<&ConflictGraph> = val_idx.iter().map(|&i| &graphs[i]).collect();
    let predicted: Vec<ConflictLabel> = predict_many(&best_params, &val_refs, cfg.batch_size)?
        .into_iter()
        .map(|(l, _)| l)
        .collect();
    let cm = confusion(&predicted, &labels_of(&val_refs))?;
    let metrics = prf(&cm, Averaging::Weighted)?;
    Ok((
        FoldModel { fold, params: best_params, train_indices: train_idx.to_vec(), val_indices: val_idx.to_vec() },
        records,
        FoldSummary { fold, best_epoch, stop_epoch, best_val_loss, final_train_loss, confusion: cm, metrics },
    ))
}

/// Predictions and metrics of a model over selected rows of a dataset.
pub fn evaluate(model: &ModelParams, dataset: &Dataset, indices: &[usize]) -> Result<(Vec<ConflictLabel>, ConfusionMatrix, Prf)> {
    let graphs = indices
        .iter()
        .map(|&i| build_labeled_graph(&dataset.topology, &dataset.rows[i]))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ConflictGraph> = graphs.iter().collect();
    let predicted: Vec<ConflictLabel> = predict_many(model, &refs, 128)?.into_iter().map(|(l, _)| l).collect();
    let truth: Vec<ConflictLabel> = indices.iter().map(|&i| dataset.rows[i].label).collect();
    let cm = confusion(&predicted, &truth)?;
    let metrics = prf(&cm, Averaging::Weighted)?;
    Ok((predicted, cm, metrics))
}

/// Checkpoint: a JSON header plus the flat weight vector, either inline under
/// `weights` or in a little-endian f64 sidecar file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    #[serde(rename = "F")]
    pub feature_dim: usize,
    #[serde(rename = "H")]
    pub hidden_dim: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    pub seed: u64,
    pub gamma: f64,
    pub alpha: Vec<f64>,
    /// Held-out fold this model was validated on, and the fold count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
}

impl Checkpoint {
    pub fn new(model: &ModelParams, seed: u64, focal: &FocalConfig) -> Self {
        Checkpoint {
            feature_dim: model.feature_dim,
            hidden_dim: model.hidden_dim,
            classes: model.classes,
            seed,
            gamma: focal.gamma,
            alpha: focal.alpha.to_vec(),
            fold: None,
            folds: None,
            weights: Some(model.values.clone()),
            sidecar: None,
        }
    }

    pub fn with_fold(mut self, fold: usize, folds: usize) -> Self {
        self.fold = Some(fold);
        self.folds = Some(folds);
        self
    }

    /// Writes the checkpoint. With `binary`, weights go to `<path>.bin`.
    pub fn save(&self, path: &Path, binary: bool) -> Result<()> {
        let mut header = self.clone();
        if binary {
            let weights = header.weights.take().unwrap_or_default();
            let side = sidecar_path(path);
            let bytes: Vec<u8> = weights.iter().flat_map(|w| w.to_le_bytes()).collect();
            std::fs::write(&side, bytes).map_err(|e| Error::io(&side, e))?;
            header.sidecar = side.file_name().map(|n| n.to_string_lossy().into_owned());
        }
        let text = serde_json::to_string(&header).expect("checkpoint serializes") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        if ckpt.weights.is_none() {
            let side = match &ckpt.sidecar {
                Some(name) => path.with_file_name(name),
                None => sidecar_path(path),
            };
            let bytes = std::fs::read(&side).map_err(|e| Error::io(&side, e))?;
            if bytes.len() % 8 != 0 {
                return Err(Error::parse(side.display().to_string(), "length is not a multiple of 8"));
            }
            ckpt.weights = Some(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            );
        }
        Ok(ckpt)
    }

    pub fn model(&self) -> Result<ModelParams> {
        if self.feature_dim != FEATURE_DIM || self.classes != NUM_CLASSES {
            return Err(Error::Compatibility(format!(
                "checkpoint has F={}, C={}; this build uses F={FEATURE_DIM}, C={NUM_CLASSES}",
                self.feature_dim, self.classes
            )));
        }
        let values = self.weights.clone().ok_or_else(|| Error::Compatibility("checkpoint has no weights".into()))?;
        ModelParams::from_values(self.feature_dim, self.hidden_dim, self.classes, values)
    }

    pub fn focal(&self) -> Result<FocalConfig> {
        let alpha: [f64; NUM_CLASSES] = self
            .alpha
            .as_slice()
            .try_into()
            .map_err(|_| Error::Compatibility(format!("alpha has {} entries", self.alpha.len())))?;
        FocalConfig::new(self.gamma, alpha)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".bin");
    PathBuf::from(s)
}
