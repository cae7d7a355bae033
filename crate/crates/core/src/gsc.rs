//! Graph construction: one binary-state row becomes a directed conflict graph.
//!
//! The graph is the union of three edge kinds, each drawn only between nodes
//! that are both in state 1:
//!
//! * `PA`: xApp → parameter it controls,
//! * `KP`: parameter → KPI it drives,
//! * `PP`: source parameter → target parameter.
//!
//! Every xApp, parameter and KPI is a node (inactive ones stay isolated), so all
//! graphs over a topology have the same node count. Nodes are ordered xApps,
//! then parameters, then KPIs.

use std::fmt;

use crate::conflict_sim::{BinaryStateRow, ConflictLabel, NodeRef, States, Topology};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Node feature width: role one-hot (3), state bit, normalized degree.
pub const FEATURE_DIM: usize = 5;
pub const NUM_EDGE_KINDS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    PA = 0,
    KP = 1,
    PP = 2,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; NUM_EDGE_KINDS] = [EdgeKind::PA, EdgeKind::KP, EdgeKind::PP];

    /// Edge kind whose in-degree pattern defines the given conflict class.
    pub fn for_label(label: ConflictLabel) -> Option<EdgeKind> {
        match label {
            ConflictLabel::Normal => None,
            ConflictLabel::Direct => Some(EdgeKind::PA),
            ConflictLabel::Implicit => Some(EdgeKind::KP),
            ConflictLabel::Indirect => Some(EdgeKind::PP),
        }
    }

    pub fn conflict_label(self) -> ConflictLabel {
        match self {
            EdgeKind::PA => ConflictLabel::Direct,
            EdgeKind::KP => ConflictLabel::Implicit,
            EdgeKind::PP => ConflictLabel::Indirect,
        }
    }

    pub fn one_hot(self) -> [f64; NUM_EDGE_KINDS] {
        let mut v = [0.0; NUM_EDGE_KINDS];
        v[self as usize] = 1.0;
        v
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeKind::PA => "PA",
            EdgeKind::KP => "KP",
            EdgeKind::PP => "PP",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    App,
    Param,
    Kpi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphNode {
    pub node: NodeRef,
    pub kind: NodeKind,
    pub state: bool,
}

/// Directed edge between node positions (influencer → influenced).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphEdge {
    pub source: usize,
    pub target: usize,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug)]
pub struct ConflictGraph {
    n_apps: usize,
    n_params: usize,
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    features: DenseMatrix,
    pub label: Option<ConflictLabel>,
}

/// Builds the merged conflict graph of one row.
pub fn build_graph(topology: &Topology, states: &States) -> Result<ConflictGraph> {
    if states.apps.len() != topology.n_apps()
        || states.params.len() != topology.n_params()
        || states.kpis.len() != topology.n_kpis()
    {
        return Err(Error::Shape(format!(
            "row width {} does not match topology width {}",
            states.width(),
            topology.width()
        )));
    }
    let (na, np) = (topology.n_apps(), topology.n_params());
    let mut nodes = Vec::with_capacity(topology.width());
    nodes.extend(states.apps.iter().enumerate().map(|(i, &s)| GraphNode {
        node: NodeRef::App(i),
        kind: NodeKind::App,
        state: s,
    }));
    nodes.extend(states.params.iter().enumerate().map(|(i, &s)| GraphNode {
        node: NodeRef::Param(i),
        kind: NodeKind::Param,
        state: s,
    }));
    nodes.extend(states.kpis.iter().enumerate().map(|(i, &s)| GraphNode {
        node: NodeRef::Kpi(i),
        kind: NodeKind::Kpi,
        state: s,
    }));

    let mut edges = Vec::new();
    for p in 0..np {
        if !states.params[p] {
            continue;
        }
        for &a in topology.controllers(p) {
            if states.apps[a] {
                edges.push(GraphEdge { source: a, target: na + p, kind: EdgeKind::PA });
            }
        }
    }
    for k in 0..topology.n_kpis() {
        if !states.kpis[k] {
            continue;
        }
        for &p in topology.kpi_sources(k) {
            if states.params[p] {
                edges.push(GraphEdge { source: na + p, target: na + np + k, kind: EdgeKind::KP });
            }
        }
    }
    for t in 0..np {
        if !states.params[t] {
            continue;
        }
        for &s in topology.param_sources(t) {
            if states.params[s] {
                edges.push(GraphEdge { source: na + s, target: na + t, kind: EdgeKind::PP });
            }
        }
    }
    let mut graph = ConflictGraph {
        n_apps: na,
        n_params: np,
        nodes,
        edges,
        features: DenseMatrix::zeros(0, FEATURE_DIM),
        label: None,
    };
    graph.features = node_features(&graph);
    Ok(graph)
}

/// [`build_graph`] carrying the row's label.
pub fn build_labeled_graph(topology: &Topology, row: &BinaryStateRow) -> Result<ConflictGraph> {
    let mut g = build_graph(topology, &row.states)?;
    g.label = Some(row.label);
    Ok(g)
}

/// `[is_xApp, is_parameter, is_KPI, state, degree / max(1, N − 1)]` per node,
/// where degree counts incoming and outgoing edges.
pub fn node_features(graph: &ConflictGraph) -> DenseMatrix {
    let n = graph.nodes.len();
    let mut degree = vec![0usize; n];
    for e in &graph.edges {
        degree[e.source] += 1;
        degree[e.target] += 1;
    }
    let scale = 1.0 / (n.saturating_sub(1).max(1)) as f64;
    let mut data = Vec::with_capacity(n * FEATURE_DIM);
    for (node, &deg) in graph.nodes.iter().zip(&degree) {
        let role = match node.kind {
            NodeKind::App => [1.0, 0.0, 0.0],
            NodeKind::Param => [0.0, 1.0, 0.0],
            NodeKind::Kpi => [0.0, 0.0, 1.0],
        };
        data.extend_from_slice(&role);
        data.push(if node.state { 1.0 } else { 0.0 });
        data.push(deg as f64 * scale);
    }
    DenseMatrix::from_raw(n, FEATURE_DIM, data)
}

/// One-hot edge kind per edge (`E × 3`).
pub fn edge_attributes(graph: &ConflictGraph) -> DenseMatrix {
    let data = graph.edges.iter().flat_map(|e| e.kind.one_hot()).collect();
    DenseMatrix::from_raw(graph.edges.len(), NUM_EDGE_KINDS, data)
}

impl ConflictGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    /// Node position of a topology node.
    pub fn position(&self, node: NodeRef) -> usize {
        match node {
            NodeRef::App(i) => i,
            NodeRef::Param(i) => self.n_apps + i,
            NodeRef::Kpi(i) => self.n_apps + self.n_params + i,
        }
    }

    pub fn node_ref(&self, position: usize) -> NodeRef {
        self.nodes[position].node
    }

    pub fn state(&self, node: NodeRef) -> bool {
        self.nodes[self.position(node)].state
    }

    /// Incoming edge count per node, optionally restricted to one kind.
    pub fn in_degrees(&self, kind: Option<EdgeKind>) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in self.edges.iter().filter(|e| kind.map_or(true, |k| e.kind == k)) {
            deg[e.target] += 1;
        }
        deg
    }

    /// Sources of edges of `kind` entering `position`, in edge order.
    pub fn incoming(&self, position: usize, kind: EdgeKind) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.target == position && e.kind == kind)
            .map(|e| e.source)
            .collect()
    }

    /// Debug export: one `source kind target` line per edge, one-based names.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&format!(
                "{} {} {}\n",
                self.node_ref(e.source),
                e.kind,
                self.node_ref(e.target)
            ));
        }
        out
    }
}

/// Disjoint union of graphs for mini-batch processing.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    features: DenseMatrix,
    membership: Vec<usize>,
    offsets: Vec<usize>,
    edges: Vec<GraphEdge>,
    labels: Vec<Option<ConflictLabel>>,
}

/// Stacks graphs into one block-diagonal batch; no edges cross graphs.
pub fn batch_graphs(graphs: &[&ConflictGraph]) -> Result<GraphBatch> {
    if graphs.is_empty() {
        return Err(Error::EmptyInput("no graphs to batch"));
    }
    let f = graphs[0].features.cols();
    if graphs.iter().any(|g| g.features.cols() != f) {
        return Err(Error::Shape("graphs in a batch must share the feature dimension".into()));
    }
    let total: usize = graphs.iter().map(|g| g.n_nodes()).sum();
    let mut data = Vec::with_capacity(total * f);
    let mut membership = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(graphs.len() + 1);
    let mut edges = Vec::new();
    let mut offset = 0;
    for (gi, g) in graphs.iter().enumerate() {
        offsets.push(offset);
        data.extend_from_slice(g.features.data());
        membership.extend(std::iter::repeat(gi).take(g.n_nodes()));
        edges.extend(g.edges.iter().map(|e| GraphEdge {
            source: e.source + offset,
            target: e.target + offset,
            kind: e.kind,
        }));
        offset += g.n_nodes();
    }
    offsets.push(offset);
    Ok(GraphBatch {
        features: DenseMatrix::from_raw(total, f, data),
        membership,
        offsets,
        edges,
        labels: graphs.iter().map(|g| g.label).collect(),
    })
}

impl GraphBatch {
    #[cfg(test)]
    pub(crate) fn from_parts(
        features: DenseMatrix,
        membership: Vec<usize>,
        offsets: Vec<usize>,
        edges: Vec<GraphEdge>,
        labels: Vec<Option<ConflictLabel>>,
    ) -> Self {
        GraphBatch { features, membership, offsets, edges, labels }
    }

    pub fn n_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.membership.len()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn labels(&self) -> &[Option<ConflictLabel>] {
        &self.labels
    }

    /// Node count of each graph.
    pub fn graph_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Unnormalized block-diagonal adjacency (directed, unit weights).
    pub fn adjacency_dense(&self) -> DenseMatrix {
        let n = self.n_nodes();
        let mut m = DenseMatrix::zeros(n, n);
        for e in &self.edges {
            m.set(e.source, e.target, m.get(e.source, e.target) + 1.0);
        }
        m
    }
}
