//! Dependency topologies, binary-state rows, the rule-based labeling oracle and
//! the synthetic dataset generator.
//!
//! A topology relates three node sets: xApps, the parameters they control and
//! the KPIs those parameters drive. Parameters can also drive other parameters.
//! A row records, for one timestamp, which xApps are active and which
//! parameters and KPIs changed. A conflict is a node that changed while at
//! least two of its influencers were simultaneously active:
//!
//! * direct: a parameter with two or more active controlling xApps,
//! * implicit: a KPI with two or more changed source parameters,
//! * indirect: a parameter with two or more changed source parameters.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 4;

/// Bounded retry budget for topology generation.
pub const TOPOLOGY_ATTEMPTS: usize = 100;
/// Bounded retry budget for building one clean synthetic row.
pub const ROW_ATTEMPTS: usize = 64;
/// Probability that a bit outside the injected pattern is set.
pub const BACKGROUND_RATE: f64 = 0.15;
/// Upper bound on controllers per parameter and sources per KPI.
pub const MAX_FAN_IN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ConflictLabel {
    Normal = 0,
    Direct = 1,
    Implicit = 2,
    Indirect = 3,
}

impl ConflictLabel {
    pub const ALL: [ConflictLabel; NUM_CLASSES] = [
        ConflictLabel::Normal,
        ConflictLabel::Direct,
        ConflictLabel::Implicit,
        ConflictLabel::Indirect,
    ];

    pub fn from_index(value: usize) -> Result<Self> {
        Self::ALL
            .get(value)
            .copied()
            .ok_or_else(|| Error::Domain(format!("label {value} outside 0..=3")))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ConflictLabel::Normal => "Normal",
            ConflictLabel::Direct => "Direct",
            ConflictLabel::Implicit => "Implicit",
            ConflictLabel::Indirect => "Indirect",
        }
    }
}

impl fmt::Display for ConflictLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// A node of the dependency structure, by kind and zero-based index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    App(usize),
    Param(usize),
    Kpi(usize),
}

impl NodeRef {
    /// One-based display name: `a3`, `p12`, `k5`.
    pub fn name(self) -> String {
        match self {
            NodeRef::App(i) => format!("a{}", i + 1),
            NodeRef::Param(i) => format!("p{}", i + 1),
            NodeRef::Kpi(i) => format!("k{}", i + 1),
        }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Static dependency structure between xApps, parameters and KPIs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n_apps: usize,
    n_params: usize,
    n_kpis: usize,
    seed: u64,
    /// `(param, app)`: app controls param.
    controls: Vec<(usize, usize)>,
    /// `(kpi, param)`: param drives kpi.
    kpi_deps: Vec<(usize, usize)>,
    /// `(target, source)`: source param drives target param.
    param_deps: Vec<(usize, usize)>,
    controllers: Vec<Vec<usize>>,
    kpi_sources: Vec<Vec<usize>>,
    param_sources: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct TopologyFile {
    n_apps: usize,
    n_params: usize,
    n_kpis: usize,
    controls: Vec<[usize; 2]>,
    kpi_deps: Vec<[usize; 2]>,
    param_deps: Vec<[usize; 2]>,
    seed: u64,
}

impl Topology {
    /// Builds a topology from explicit relations. Pairs are deduplicated and
    /// sorted; indices must be in range and no parameter may drive itself.
    pub fn from_relations(
        n_apps: usize,
        n_params: usize,
        n_kpis: usize,
        controls: Vec<(usize, usize)>,
        kpi_deps: Vec<(usize, usize)>,
        param_deps: Vec<(usize, usize)>,
        seed: u64,
    ) -> Result<Self> {
        if n_apps == 0 || n_params == 0 {
            return Err(Error::Size("need at least one xApp and one parameter".into()));
        }
        let check = |what: &str, v: usize, n: usize| {
            if v >= n {
                Err(Error::Domain(format!("{what} index {v} out of range (< {n})")))
            } else {
                Ok(())
            }
        };
        for &(p, a) in &controls {
            check("parameter", p, n_params)?;
            check("xApp", a, n_apps)?;
        }
        for &(k, p) in &kpi_deps {
            check("KPI", k, n_kpis)?;
            check("parameter", p, n_params)?;
        }
        for &(t, s) in &param_deps {
            check("parameter", t, n_params)?;
            check("parameter", s, n_params)?;
            if t == s {
                return Err(Error::Domain(format!("parameter p{} depends on itself", t + 1)));
            }
        }
        let normalize = |mut v: Vec<(usize, usize)>| {
            v.sort_unstable();
            v.dedup();
            v
        };
        let controls = normalize(controls);
        let kpi_deps = normalize(kpi_deps);
        let param_deps = normalize(param_deps);

        let mut controllers = vec![Vec::new(); n_params];
        for &(p, a) in &controls {
            controllers[p].push(a);
        }
        let mut kpi_sources = vec![Vec::new(); n_kpis];
        for &(k, p) in &kpi_deps {
            kpi_sources[k].push(p);
        }
        let mut param_sources = vec![Vec::new(); n_params];
        for &(t, s) in &param_deps {
            param_sources[t].push(s);
        }
        Ok(Topology {
            n_apps,
            n_params,
            n_kpis,
            seed,
            controls,
            kpi_deps,
            param_deps,
            controllers,
            kpi_sources,
            param_sources,
        })
    }

    pub fn n_apps(&self) -> usize {
        self.n_apps
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_kpis(&self) -> usize {
        self.n_kpis
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total number of state bits (and graph nodes) per row.
    pub fn width(&self) -> usize {
        self.n_apps + self.n_params + self.n_kpis
    }

    pub fn controls(&self) -> &[(usize, usize)] {
        &self.controls
    }

    pub fn kpi_deps(&self) -> &[(usize, usize)] {
        &self.kpi_deps
    }

    pub fn param_deps(&self) -> &[(usize, usize)] {
        &self.param_deps
    }

    /// xApps controlling parameter `p`, ascending.
    pub fn controllers(&self, p: usize) -> &[usize] {
        &self.controllers[p]
    }

    /// Parameters driving KPI `k`, ascending.
    pub fn kpi_sources(&self, k: usize) -> &[usize] {
        &self.kpi_sources[k]
    }

    /// Parameters driving parameter `p`, ascending.
    pub fn param_sources(&self, p: usize) -> &[usize] {
        &self.param_sources[p]
    }

    /// Nodes that can host a conflict of the given class (two or more
    /// influencers in the matching relation).
    pub fn conflict_sites(&self, label: ConflictLabel) -> Vec<NodeRef> {
        match label {
            ConflictLabel::Normal => Vec::new(),
            ConflictLabel::Direct => (0..self.n_params)
                .filter(|&p| self.controllers[p].len() >= 2)
                .map(NodeRef::Param)
                .collect(),
            ConflictLabel::Implicit => (0..self.n_kpis)
                .filter(|&k| self.kpi_sources[k].len() >= 2)
                .map(NodeRef::Kpi)
                .collect(),
            ConflictLabel::Indirect => (0..self.n_params)
                .filter(|&p| self.param_sources[p].len() >= 2)
                .map(NodeRef::Param)
                .collect(),
        }
    }

    /// Checks the invariants a generated topology must hold, naming the first
    /// one that fails.
    pub fn check_invariants(&self) -> std::result::Result<(), &'static str> {
        if self.param_deps.iter().any(|&(t, s)| t == s) {
            return Err("no parameter depends on itself");
        }
        if (0..self.n_params).any(|p| self.controllers[p].is_empty()) {
            return Err("every parameter has a controlling xApp");
        }
        if self.conflict_sites(ConflictLabel::Direct).is_empty() {
            return Err("some parameter has two or more controlling xApps");
        }
        if self.conflict_sites(ConflictLabel::Implicit).is_empty() {
            return Err("some KPI has two or more source parameters");
        }
        if self.conflict_sites(ConflictLabel::Indirect).is_empty() {
            return Err("some parameter has two or more source parameters");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = TopologyFile {
            n_apps: self.n_apps,
            n_params: self.n_params,
            n_kpis: self.n_kpis,
            controls: self.controls.iter().map(|&(p, a)| [p, a]).collect(),
            kpi_deps: self.kpi_deps.iter().map(|&(k, p)| [k, p]).collect(),
            param_deps: self.param_deps.iter().map(|&(t, s)| [t, s]).collect(),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&file).expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile =
            serde_json::from_str(text).map_err(|e| Error::parse("topology JSON", e))?;
        let pairs = |v: Vec<[usize; 2]>| v.into_iter().map(|[x, y]| (x, y)).collect();
        Topology::from_relations(
            file.n_apps,
            file.n_params,
            file.n_kpis,
            pairs(file.controls),
            pairs(file.kpi_deps),
            pairs(file.param_deps),
            file.seed,
        )
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// CSV header: `a1..aA,p1..pP,k1..kK,label`.
    pub fn csv_header(&self) -> String {
        let mut cols: Vec<String> = Vec::with_capacity(self.width() + 1);
        cols.extend((0..self.n_apps).map(|i| NodeRef::App(i).name()));
        cols.extend((0..self.n_params).map(|i| NodeRef::Param(i).name()));
        cols.extend((0..self.n_kpis).map(|i| NodeRef::Kpi(i).name()));
        cols.push("label".into());
        cols.join(",")
    }
}

/// Generates a random topology. Each parameter gets 1..=3 controlling xApps,
/// each KPI 1..=3 source parameters and each parameter one target parameter
/// other than itself. Generation is retried until the multi-source invariants
/// hold.
pub fn new_topology(n_apps: usize, n_params: usize, n_kpis: usize, seed: u64) -> Result<Topology> {
    if n_apps < 2 || n_params < 3 || n_kpis < 1 {
        return Err(Error::Size(format!(
            "need n_apps >= 2, n_params >= 3, n_kpis >= 1 (got {n_apps}, {n_params}, {n_kpis})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failing = "";
    for _ in 0..TOPOLOGY_ATTEMPTS {
        let mut apps: Vec<usize> = (0..n_apps).collect();
        let mut params: Vec<usize> = (0..n_params).collect();

        let mut controls = Vec::new();
        for p in 0..n_params {
            let m = rng.gen_range(1..=MAX_FAN_IN.min(n_apps));
            apps.shuffle(&mut rng);
            controls.extend(apps[..m].iter().map(|&a| (p, a)));
        }
        let mut kpi_deps = Vec::new();
        for k in 0..n_kpis {
            let m = rng.gen_range(1..=MAX_FAN_IN.min(n_params));
            params.shuffle(&mut rng);
            kpi_deps.extend(params[..m].iter().map(|&p| (k, p)));
        }
        let mut param_deps = Vec::new();
        for p in 0..n_params {
            let mut target = rng.gen_range(0..n_params - 1);
            if target >= p {
                target += 1;
            }
            param_deps.push((target, p));
        }
        let topology =
            Topology::from_relations(n_apps, n_params, n_kpis, controls, kpi_deps, param_deps, seed)?;
        match topology.check_invariants() {
            Ok(()) => return Ok(topology),
            Err(name) => failing = name,
        }
    }
    Err(Error::Generation { invariant: failing, attempts: TOPOLOGY_ATTEMPTS })
}

/// State bits of one timestamp.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct States {
    pub apps: Vec<bool>,
    pub params: Vec<bool>,
    pub kpis: Vec<bool>,
}

impl States {
    pub fn zeros(topology: &Topology) -> Self {
        States {
            apps: vec![false; topology.n_apps],
            params: vec![false; topology.n_params],
            kpis: vec![false; topology.n_kpis],
        }
    }

    /// Splits a flat `apps ++ params ++ kpis` bit vector.
    pub fn from_bits(topology: &Topology, bits: &[u8]) -> Result<Self> {
        if bits.len() != topology.width() {
            return Err(Error::Shape(format!(
                "row has {} state bits, topology expects {}",
                bits.len(),
                topology.width()
            )));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Domain(format!("state value {b} is not 0 or 1")));
        }
        let (a, rest) = bits.split_at(topology.n_apps);
        let (p, k) = rest.split_at(topology.n_params);
        let conv = |s: &[u8]| s.iter().map(|&b| b == 1).collect();
        Ok(States { apps: conv(a), params: conv(p), kpis: conv(k) })
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.apps
            .iter()
            .chain(&self.params)
            .chain(&self.kpis)
            .map(|&b| b as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.apps.len() + self.params.len() + self.kpis.len()
    }

    pub fn get(&self, node: NodeRef) -> bool {
        match node {
            NodeRef::App(i) => self.apps[i],
            NodeRef::Param(i) => self.params[i],
            NodeRef::Kpi(i) => self.kpis[i],
        }
    }

    pub fn set(&mut self, node: NodeRef, value: bool) {
        match node {
            NodeRef::App(i) => self.apps[i] = value,
            NodeRef::Param(i) => self.params[i] = value,
            NodeRef::Kpi(i) => self.kpis[i] = value,
        }
    }

    fn check_shape(&self, topology: &Topology) -> Result<()> {
        if self.apps.len() != topology.n_apps
            || self.params.len() != topology.n_params
            || self.kpis.len() != topology.n_kpis
        {
            return Err(Error::Shape(format!(
                "row shape {}/{}/{} does not match topology {}/{}/{}",
                self.apps.len(),
                self.params.len(),
                self.kpis.len(),
                topology.n_apps,
                topology.n_params,
                topology.n_kpis
            )));
        }
        Ok(())
    }
}

/// A changed node together with its two or more concurrently active
/// influencers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictPattern {
    pub kind: ConflictLabel,
    pub affected: NodeRef,
    pub sources: Vec<NodeRef>,
}

/// All conflict patterns present in a row, grouped by kind (direct, implicit,
/// indirect) and ordered by affected-node index within each kind.
pub fn find_patterns(topology: &Topology, states: &States) -> Vec<ConflictPattern> {
    let mut out = Vec::new();
    for p in 0..topology.n_params {
        if !states.params[p] {
            continue;
        }
        let sources: Vec<NodeRef> = topology.controllers[p]
            .iter()
            .filter(|&&a| states.apps[a])
            .map(|&a| NodeRef::App(a))
            .collect();
        if sources.len() >= 2 {
            out.push(ConflictPattern { kind: ConflictLabel::Direct, affected: NodeRef::Param(p), sources });
        }
    }
    for k in 0..topology.n_kpis {
        if !states.kpis[k] {
            continue;
        }
        let sources: Vec<NodeRef> = topology.kpi_sources[k]
            .iter()
            .filter(|&&p| states.params[p])
            .map(|&p| NodeRef::Param(p))
            .collect();
        if sources.len() >= 2 {
            out.push(ConflictPattern { kind: ConflictLabel::Implicit, affected: NodeRef::Kpi(k), sources });
        }
    }
    for t in 0..topology.n_params {
        if !states.params[t] {
            continue;
        }
        let sources: Vec<NodeRef> = topology.param_sources[t]
            .iter()
            .filter(|&&p| states.params[p])
            .map(|&p| NodeRef::Param(p))
            .collect();
        if sources.len() >= 2 {
            out.push(ConflictPattern { kind: ConflictLabel::Indirect, affected: NodeRef::Param(t), sources });
        }
    }
    out
}

/// Ground-truth label of a row. When several patterns co-occur the priority is
/// direct > implicit > indirect.
pub fn label_row(topology: &Topology, states: &States) -> Result<ConflictLabel> {
    states.check_shape(topology)?;
    Ok(find_patterns(topology, states)
        .iter()
        .map(|p| p.kind)
        .min()
        .unwrap_or(ConflictLabel::Normal))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryStateRow {
    pub states: States,
    pub label: ConflictLabel,
}

/// A synthesized row together with the pattern that was injected into it.
#[derive(Clone, Debug)]
pub struct SynthesizedRow {
    pub states: States,
    pub injected: Option<ConflictPattern>,
}

/// Builds one row whose oracle label is `label`. Conflict rows carry exactly
/// one pattern: a qualifying node picked uniformly, with itself and all its
/// influencers set. Remaining bits are background noise; a repair pass clears
/// unlocked bits until no other pattern remains.
pub fn synthesize_row<R: Rng + ?Sized>(
    topology: &Topology,
    label: ConflictLabel,
    rng: &mut R,
) -> Result<SynthesizedRow> {
    let sites = topology.conflict_sites(label);
    if label != ConflictLabel::Normal && sites.is_empty() {
        return Err(Error::Domain(format!(
            "topology has no node able to host a {} conflict",
            label.name().to_lowercase()
        )));
    }
    for _ in 0..ROW_ATTEMPTS {
        let mut states = States::zeros(topology);
        let mut locked = States::zeros(topology);
        let mut injected = None;
        if label != ConflictLabel::Normal {
            let affected = sites[rng.gen_range(0..sites.len())];
            let sources = influencers(topology, label, affected);
            for &node in sources.iter().chain(std::iter::once(&affected)) {
                states.set(node, true);
                locked.set(node, true);
            }
            injected = Some(ConflictPattern { kind: label, affected, sources });
        }
        for (bits, fixed) in [
            (&mut states.apps, &locked.apps),
            (&mut states.params, &locked.params),
            (&mut states.kpis, &locked.kpis),
        ] {
            for (bit, &fixed) in bits.iter_mut().zip(fixed) {
                if !fixed {
                    *bit = rng.gen_bool(BACKGROUND_RATE);
                }
            }
        }
        if repair(topology, &mut states, &locked, injected.as_ref())
            && label_row(topology, &states)? == label
        {
            return Ok(SynthesizedRow { states, injected });
        }
    }
    Err(Error::Synthesis { label: label as u8 })
}

fn influencers(topology: &Topology, kind: ConflictLabel, affected: NodeRef) -> Vec<NodeRef> {
    match (kind, affected) {
        (ConflictLabel::Direct, NodeRef::Param(p)) => {
            topology.controllers[p].iter().map(|&a| NodeRef::App(a)).collect()
        }
        (ConflictLabel::Implicit, NodeRef::Kpi(k)) => {
            topology.kpi_sources[k].iter().map(|&p| NodeRef::Param(p)).collect()
        }
        (ConflictLabel::Indirect, NodeRef::Param(p)) => {
            topology.param_sources[p].iter().map(|&s| NodeRef::Param(s)).collect()
        }
        _ => Vec::new(),
    }
}

/// Clears unlocked bits until the only pattern left is `keep`. Clearing bits
/// never creates a pattern, so this terminates. Returns false when an unwanted
/// pattern consists solely of locked bits.
fn repair(
    topology: &Topology,
    states: &mut States,
    locked: &States,
    keep: Option<&ConflictPattern>,
) -> bool {
    loop {
        let unwanted = find_patterns(topology, states).into_iter().find(|pat| {
            keep.map_or(true, |k| k.kind != pat.kind || k.affected != pat.affected)
        });
        let Some(pat) = unwanted else {
            return true;
        };
        if !locked.get(pat.affected) {
            states.set(pat.affected, false);
        } else if let Some(&src) = pat.sources.iter().rev().find(|&&s| !locked.get(s)) {
            states.set(src, false);
        } else {
            return false;
        }
    }
}

/// An ordered list of labeled rows over one topology.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub topology: Topology,
    pub rows: Vec<BinaryStateRow>,
    /// Declared fraction per label.
    pub mix: [f64; NUM_CLASSES],
}

/// Per-class row counts for a dataset of `n_rows` with the given conflict
/// fraction. Conflict rows are split equally over the three conflict classes;
/// any remainder goes to the lower class indices.
pub fn class_counts(n_rows: usize, conflict_fraction: f64) -> [usize; NUM_CLASSES] {
    let n_conflict = ((n_rows as f64) * conflict_fraction).round() as usize;
    let n_conflict = n_conflict.min(n_rows);
    let base = n_conflict / 3;
    let extra = n_conflict % 3;
    let mut counts = [n_rows - n_conflict, base, base, base];
    for c in counts.iter_mut().skip(1).take(extra) {
        *c += 1;
    }
    counts
}

/// Synthesizes `n_rows` labeled rows with the requested share of conflicts.
pub fn synth_dataset(
    topology: &Topology,
    n_rows: usize,
    conflict_fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_rows < 8 {
        return Err(Error::Size(format!("need at least 8 rows, got {n_rows}")));
    }
    if !(0.0..=1.0).contains(&conflict_fraction) {
        return Err(Error::Domain(format!("conflict fraction {conflict_fraction} outside [0, 1]")));
    }
    let counts = class_counts(n_rows, conflict_fraction);
    let mut labels: Vec<ConflictLabel> = ConflictLabel::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&l, n)| std::iter::repeat(l).take(n))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels.shuffle(&mut rng);

    let mut rows = Vec::with_capacity(n_rows);
    for label in labels {
        let row = synthesize_row(topology, label, &mut rng)?;
        rows.push(BinaryStateRow { states: row.states, label });
    }
    let third = conflict_fraction / 3.0;
    Ok(Dataset {
        topology: topology.clone(),
        rows,
        mix: [1.0 - conflict_fraction, third, third, third],
    })
}

/// Row count per label.
pub fn class_distribution(dataset: &Dataset) -> Result<[usize; NUM_CLASSES]> {
    if dataset.rows.is_empty() {
        return Err(Error::EmptyInput("dataset has no rows"));
    }
    let mut counts = [0; NUM_CLASSES];
    for row in &dataset.rows {
        counts[row.label.index()] += 1;
    }
    Ok(counts)
}

impl Dataset {
    /// Wraps rows, checking each stored label against the oracle. The declared
    /// mix is taken from the realized counts.
    pub fn from_rows(topology: Topology, rows: Vec<BinaryStateRow>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            let oracle = label_row(&topology, &row.states)?;
            if oracle != row.label {
                return Err(Error::Domain(format!(
                    "row {i}: stored label {} disagrees with oracle label {oracle}",
                    row.label
                )));
            }
        }
        let mut mix = [0.0; NUM_CLASSES];
        for row in &rows {
            mix[row.label.index()] += 1.0;
        }
        let n = rows.len().max(1) as f64;
        mix.iter_mut().for_each(|m| *m /= n);
        Ok(Dataset { topology, rows, mix })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<ConflictLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let rows: Vec<_> = indices.iter().map(|&i| self.rows[i].clone()).collect();
        Dataset { topology: self.topology.clone(), rows, mix: self.mix }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.topology.csv_header())?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for bit in row.states.to_bits() {
                line.push(if bit == 1 { '1' } else { '0' });
                line.push(',');
            }
            line.push_str(&row.label.to_string());
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Parses the CSV produced by [`Dataset::write_csv`]. The header must match
    /// the topology and every label must agree with the oracle.
    pub fn read_csv<R: BufRead>(topology: &Topology, input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or(Error::EmptyInput("dataset CSV has no header"))?
            .map_err(|e| Error::parse("dataset CSV", e))?;
        if header.trim_end() != topology.csv_header() {
            return Err(Error::Compatibility(
                "dataset CSV header does not match the topology sizes".into(),
            ));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::parse("dataset CSV", e))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let ctx = || format!("dataset CSV line {}", n + 2);
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != topology.width() + 1 {
                return Err(Error::parse(ctx(), format!("expected {} fields", topology.width() + 1)));
            }
            let bits = fields[..topology.width()]
                .iter()
                .map(|f| match *f {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::parse(ctx(), format!("state `{other}` is not 0/1"))),
                })
                .collect::<Result<Vec<u8>>>()?;
            let label: usize = fields[topology.width()]
                .parse()
                .map_err(|e| Error::parse(ctx(), e))?;
            rows.push(BinaryStateRow {
                states: States::from_bits(topology, &bits)?,
                label: ConflictLabel::from_index(label)?,
            });
        }
        Dataset::from_rows(topology.clone(), rows)
    }

    pub fn load_csv(topology: &Topology, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(topology, BufReader::new(file))
    }
}
