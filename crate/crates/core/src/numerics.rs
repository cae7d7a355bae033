//! Dense linear algebra, adjacency normalization, GCN layer primitives, Adam
//! and finite-difference gradient checking.
//!
//! Everything is 64-bit. Graphs are tiny (a few dozen nodes) so matrices are
//! dense, except the normalized adjacency, which is block diagonal over a batch
//! and kept in compressed sparse rows.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gsc::{EdgeKind, GraphBatch, NUM_EDGE_KINDS};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Row-major construction. Rejects a length mismatch and any NaN or
    /// infinite value.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                block: "matrix".into(),
                reason: format!("non-finite value at ({}, {})", pos / cols.max(1), pos % cols.max(1)),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.matmul_unchecked(other))
    }

    fn matmul_unchecked(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = other.cols;
        let mut out = vec![0.0; self.rows * n];
        for (r, out_row) in out.chunks_exact_mut(n.max(1)).enumerate().take(self.rows) {
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        DenseMatrix::from_raw(self.rows, n, out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub(crate) fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.rows, other.rows);
        let n = other.cols;
        let mut out = vec![0.0; self.cols * n];
        for r in 0..self.rows {
            let b = other.row(r);
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &bv) in out[k * n..(k + 1) * n].iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        DenseMatrix::from_raw(self.cols, n, out)
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub(crate) fn matmul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.cols, other.cols);
        let mut out = vec![0.0; self.rows * other.rows];
        for r in 0..self.rows {
            let a = self.row(r);
            for c in 0..other.rows {
                out[r * other.rows + c] = dot(a, other.row(c));
            }
        }
        DenseMatrix::from_raw(self.rows, other.rows, out)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Anything that can left-multiply node features: `Â · X`.
pub trait Propagate {
    fn n_nodes(&self) -> usize;
    fn propagate(&self, x: &DenseMatrix) -> DenseMatrix;
}

impl Propagate for DenseMatrix {
    fn n_nodes(&self) -> usize {
        self.rows
    }

    fn propagate(&self, x: &DenseMatrix) -> DenseMatrix {
        self.matmul_unchecked(x)
    }
}

/// `D^{-1/2}(A + I)D^{-1/2}` for a batch, in CSR form, with what backprop into
/// the per-kind edge weights needs.
#[derive(Clone, Debug)]
pub struct NormalizedAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    /// Entries of `A + I`.
    raw: Vec<f64>,
    /// Entries of the normalized matrix.
    val: Vec<f64>,
    /// `d_i^{-1/2}`.
    inv_sqrt_deg: Vec<f64>,
    degree: Vec<f64>,
    /// Per input edge: kind and CSR positions of `(u, v)` and `(v, u)`.
    edge_slots: Vec<(EdgeKind, usize, usize)>,
}

/// Builds the symmetric renormalized adjacency of a batch. An edge of kind `t`
/// contributes `kind_weights[t]` to both `(u, v)` and `(v, u)`; every node gets
/// a unit self-loop.
pub fn normalize_adjacency(
    batch: &GraphBatch,
    kind_weights: &[f64; NUM_EDGE_KINDS],
) -> Result<NormalizedAdjacency> {
    if let Some(w) = kind_weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Domain(format!("edge-kind weight {w} must be strictly positive")));
    }
    let n = batch.n_nodes();
    let mut neighbors: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
    let mut add = |u: usize, v: usize, w: f64| {
        let list = &mut neighbors[u];
        match list.iter_mut().find(|(c, _)| *c == v) {
            Some(entry) => entry.1 += w,
            None => list.push((v, w)),
        }
    };
    for e in batch.edges() {
        let w = kind_weights[e.kind as usize];
        add(e.source, e.target, w);
        add(e.target, e.source, w);
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col = Vec::new();
    let mut raw = Vec::new();
    row_ptr.push(0);
    for list in &mut neighbors {
        list.sort_unstable_by_key(|&(c, _)| c);
        for &(c, w) in list.iter() {
            col.push(c);
            raw.push(w);
        }
        row_ptr.push(col.len());
    }
    let degree: Vec<f64> = (0..n).map(|i| raw[row_ptr[i]..row_ptr[i + 1]].iter().sum()).collect();
    let inv_sqrt_deg: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut val = raw.clone();
    for i in 0..n {
        for p in row_ptr[i]..row_ptr[i + 1] {
            val[p] *= inv_sqrt_deg[i] * inv_sqrt_deg[col[p]];
        }
    }
    let slot = |u: usize, v: usize| -> usize {
        let range = row_ptr[u]..row_ptr[u + 1];
        range.start + col[range].binary_search(&v).expect("edge present in CSR")
    };
    let edge_slots = batch
        .edges()
        .iter()
        .map(|e| (e.kind, slot(e.source, e.target), slot(e.target, e.source)))
        .collect();
    Ok(NormalizedAdjacency { n, row_ptr, col, raw, val, inv_sqrt_deg, degree, edge_slots })
}

impl NormalizedAdjacency {
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m.set(i, self.col[p], self.val[p]);
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    /// `∂L/∂Â` at the stored entries, given `∂L/∂(ÂZ)` and `Z`.
    pub(crate) fn entry_grads(&self, d_out: &DenseMatrix, z: &DenseMatrix) -> Vec<f64> {
        let mut g = vec![0.0; self.val.len()];
        for i in 0..self.n {
            let d = d_out.row(i);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                g[p] = dot(d, z.row(self.col[p]));
            }
        }
        g
    }

    /// Chains `∂L/∂Â` (at stored entries) back to the edge-kind weights.
    pub(crate) fn kind_weight_grads(&self, entry_grads: &[f64]) -> [f64; NUM_EDGE_KINDS] {
        let s = &self.inv_sqrt_deg;
        // dL/dd_i through both normalization factors touching row/column i.
        let mut d_deg = vec![0.0; self.n];
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[p];
                let gm = entry_grads[p] * self.raw[p];
                d_deg[i] += gm * s[j];
                d_deg[j] += gm * s[i];
            }
        }
        for i in 0..self.n {
            d_deg[i] *= -0.5 / (self.degree[i] * self.degree[i].sqrt());
        }
        let d_raw = |p: usize, row: usize| entry_grads[p] * s[row] * s[self.col[p]] + d_deg[row];
        let mut out = [0.0; NUM_EDGE_KINDS];
        for &(kind, uv, vu) in &self.edge_slots {
            let u = self.row_of(uv);
            let v = self.row_of(vu);
            out[kind as usize] += d_raw(uv, u) + d_raw(vu, v);
        }
        out
    }

    fn row_of(&self, pos: usize) -> usize {
        self.row_ptr.partition_point(|&start| start <= pos) - 1
    }
}

impl Propagate for NormalizedAdjacency {
    fn n_nodes(&self) -> usize {
        self.n
    }

    fn propagate(&self, x: &DenseMatrix) -> DenseMatrix {
        let f = x.cols();
        let mut out = vec![0.0; self.n * f];
        for i in 0..self.n {
            let o = &mut out[i * f..(i + 1) * f];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.val[p];
                for (a, &b) in o.iter_mut().zip(x.row(self.col[p])) {
                    *a += w * b;
                }
            }
        }
        DenseMatrix::from_raw(self.n, f, out)
    }
}

/// Forward results of one GCN layer.
#[derive(Clone, Debug)]
pub struct GcnLayerOutput {
    /// `H · W`.
    pub projected: DenseMatrix,
    /// `Â · H · W + b`.
    pub pre_activation: DenseMatrix,
    /// `ReLU(pre_activation)`.
    pub output: DenseMatrix,
}

/// `ReLU(Â · H · W + b)` with row-broadcast bias.
pub fn gcn_layer<A: Propagate>(
    ahat: &A,
    h: &DenseMatrix,
    w: &DenseMatrix,
    b: &[f64],
) -> Result<GcnLayerOutput> {
    if ahat.n_nodes() != h.rows() || h.cols() != w.rows() || b.len() != w.cols() {
        return Err(Error::Shape(format!(
            "gcn layer: adjacency {n}x{n}, features {}x{}, weights {}x{}, bias {}",
            h.rows(),
            h.cols(),
            w.rows(),
            w.cols(),
            b.len(),
            n = ahat.n_nodes()
        )));
    }
    let projected = h.matmul_unchecked(w);
    let mut pre = ahat.propagate(&projected);
    for r in 0..pre.rows() {
        for (v, &bias) in pre.row_mut(r).iter_mut().zip(b) {
            *v += bias;
        }
    }
    let output = DenseMatrix::from_raw(
        pre.rows(),
        pre.cols(),
        pre.data().iter().map(|&v| v.max(0.0)).collect(),
    );
    Ok(GcnLayerOutput { projected, pre_activation: pre, output })
}

/// Gradients of one GCN layer.
pub struct GcnLayerGrads {
    pub d_input: DenseMatrix,
    pub d_weight: DenseMatrix,
    pub d_bias: Vec<f64>,
    pub d_kind_weights: [f64; NUM_EDGE_KINDS],
}

/// Backward pass of [`gcn_layer`] over a (symmetric) normalized adjacency.
pub fn gcn_layer_backward(
    ahat: &NormalizedAdjacency,
    h: &DenseMatrix,
    w: &DenseMatrix,
    fwd: &GcnLayerOutput,
    d_output: &DenseMatrix,
) -> GcnLayerGrads {
    let mut d_pre = d_output.clone();
    for (g, &p) in d_pre.data.iter_mut().zip(fwd.pre_activation.data()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
    let mut d_bias = vec![0.0; d_pre.cols()];
    for r in 0..d_pre.rows() {
        for (acc, &g) in d_bias.iter_mut().zip(d_pre.row(r)) {
            *acc += g;
        }
    }
    let entry = ahat.entry_grads(&d_pre, &fwd.projected);
    let d_kind_weights = ahat.kind_weight_grads(&entry);
    // Â is symmetric, so Âᵀ · dP = Â · dP.
    let d_projected = ahat.propagate(&d_pre);
    let d_weight = h.t_matmul(&d_projected);
    let d_input = d_projected.matmul_t(w);
    GcnLayerGrads { d_input, d_weight, d_bias, d_kind_weights }
}

/// Per-graph mean of node rows.
pub fn global_mean_pool(h: &DenseMatrix, membership: &[usize], n_graphs: usize) -> Result<DenseMatrix> {
    if membership.len() != h.rows() {
        return Err(Error::Shape(format!(
            "membership has {} entries for {} nodes",
            membership.len(),
            h.rows()
        )));
    }
    let mut counts = vec![0usize; n_graphs];
    let mut out = DenseMatrix::zeros(n_graphs, h.cols());
    for (r, &g) in membership.iter().enumerate() {
        if g >= n_graphs {
            return Err(Error::Domain(format!("membership index {g} outside 0..{n_graphs}")));
        }
        counts[g] += 1;
        for (o, &v) in out.row_mut(g).iter_mut().zip(h.row(r)) {
            *o += v;
        }
    }
    if let Some(g) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Domain(format!("graph {g} has no nodes")));
    }
    for (g, &c) in counts.iter().enumerate() {
        let inv = 1.0 / c as f64;
        out.row_mut(g).iter_mut().for_each(|v| *v *= inv);
    }
    Ok(out)
}

pub(crate) fn global_mean_pool_backward(
    d_pooled: &DenseMatrix,
    membership: &[usize],
    counts: &[usize],
) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(membership.len(), d_pooled.cols());
    for (r, &g) in membership.iter().enumerate() {
        let inv = 1.0 / counts[g] as f64;
        for (o, &v) in d.row_mut(r).iter_mut().zip(d_pooled.row(g)) {
            *o = v * inv;
        }
    }
    d
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Glorot-style uniform initialization in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect()
}

/// A named contiguous range of a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient, added to the gradient as `λ·w`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 1e-4 }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    blocks: Vec<ParamBlock>,
}

impl AdamState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self::with_blocks(config, vec![ParamBlock { name: "params", offset: 0, len: n_params }])
    }

    /// State over a parameter vector described by named blocks; errors refer
    /// to these names.
    pub fn with_blocks(config: AdamConfig, blocks: Vec<ParamBlock>) -> Self {
        let n = blocks.iter().map(|b| b.offset + b.len).max().unwrap_or(0);
        AdamState { config, first_moment: vec![0.0; n], second_moment: vec![0.0; n], step: 0, blocks }
    }

    fn block_name(&self, index: usize) -> String {
        self.blocks
            .iter()
            .find(|b| (b.offset..b.offset + b.len).contains(&index))
            .map_or_else(|| "params".to_string(), |b| b.name.to_string())
    }
}

/// One Adam update with bias correction. Weight decay is coupled: `λ·w` joins
/// the gradient before the moment updates.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric {
            block: state.block_name(i),
            reason: format!("non-finite gradient at offset {i}"),
        });
    }
    let AdamConfig { learning_rate, beta1, beta2, epsilon, weight_decay } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i] + weight_decay * params[i];
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// Compares an analytic gradient against central differences. Returns the
/// largest `|a − n| / max(1e-8, |a| + |n|)` over coordinates.
pub fn grad_check<F>(mut loss_fn: F, analytic: &[f64], params: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Domain(format!("eps {eps} outside [1e-7, 1e-3]")));
    }
    if analytic.len() != params.len() {
        return Err(Error::Shape("analytic gradient length differs from params".into()));
    }
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        probe[i] = params[i] + eps;
        let up = loss_fn(&probe);
        probe[i] = params[i] - eps;
        let down = loss_fn(&probe);
        probe[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric {
                block: "loss".into(),
                reason: format!("non-finite loss while probing coordinate {i}"),
            });
        }
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
