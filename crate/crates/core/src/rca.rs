//! Root cause tracing for predicted conflicts.
//!
//! The affected node is the one receiving two or more concurrent edges of the
//! kind matching the predicted class; the sources of those edges are the root
//! cause nodes, and the active xApps behind them are the root cause xApps.

use std::fmt::Write as _;
use std::io::Write;

use crate::conflict_sim::{ConflictLabel, NodeRef, Topology};
use crate::error::{Error, Result};
use crate::gsc::{ConflictGraph, EdgeKind};

pub const UNLOCALIZED: &str = "unlocalized";

/// Where a predicted conflict sits in the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Localization {
    Node { node: NodeRef, kind: EdgeKind, in_degree: usize },
    Unlocalized,
}

fn max_in_degree(graph: &ConflictGraph, kinds: &[EdgeKind]) -> Option<(usize, EdgeKind, usize)> {
    let mut best: Option<(usize, EdgeKind, usize)> = None;
    for &kind in kinds {
        for (pos, &deg) in graph.in_degrees(Some(kind)).iter().enumerate() {
            if deg < 2 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bp, bk, bd)) => deg > bd || (deg == bd && (pos, kind) < (bp, bk)),
            };
            if better {
                best = Some((pos, kind, deg));
            }
        }
    }
    best
}

/// Finds the node with the largest in-degree (at least 2) among edges of the
/// kind matching `predicted`, smallest node index on ties. Falls back to all
/// kinds when the predicted kind has no such node.
pub fn find_affected(graph: &ConflictGraph, predicted: ConflictLabel) -> Result<Localization> {
    let kind = EdgeKind::for_label(predicted)
        .ok_or_else(|| Error::Domain("normal predictions have no affected node".into()))?;
    let hit = max_in_degree(graph, &[kind]).or_else(|| max_in_degree(graph, &EdgeKind::ALL));
    Ok(match hit {
        Some((pos, kind, in_degree)) => Localization::Node { node: graph.node_ref(pos), kind, in_degree },
        None => Localization::Unlocalized,
    })
}

/// Root-cause nodes (sources of the affected node's incoming edges of the
/// located kind) and root-cause xApps. For parameter roots the xApps are their
/// controllers that are active in the row.
pub fn trace_roots(
    graph: &ConflictGraph,
    affected: NodeRef,
    kind: EdgeKind,
    topology: &Topology,
) -> Result<(Vec<NodeRef>, Vec<NodeRef>)> {
    let roots: Vec<NodeRef> = graph
        .incoming(graph.position(affected), kind)
        .into_iter()
        .map(|p| graph.node_ref(p))
        .collect();
    if roots.len() < 2 {
        return Err(Error::Domain(format!(
            "{affected} has {} incoming {kind} edges, a conflict needs at least 2",
            roots.len()
        )));
    }
    let mut apps: Vec<usize> = Vec::new();
    for root in &roots {
        match *root {
            NodeRef::App(a) => apps.push(a),
            NodeRef::Param(p) => apps.extend(
                topology.controllers(p).iter().copied().filter(|&a| graph.state(NodeRef::App(a))),
            ),
            NodeRef::Kpi(_) => {}
        }
    }
    apps.sort_unstable();
    apps.dedup();
    Ok((roots, apps.into_iter().map(NodeRef::App).collect()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RcaRow {
    pub predicted: ConflictLabel,
    pub conflict_type: &'static str,
    /// Node name, or `unlocalized` when no node has two concurrent influencers.
    pub affected_node: String,
    pub root_cause_nodes: Vec<String>,
    pub root_cause_xapps: Vec<String>,
}

impl RcaRow {
    /// One CSV record without the trailing newline.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},\"{}\",\"{}\"",
            self.predicted,
            self.conflict_type,
            self.affected_node,
            self.root_cause_nodes.join(";"),
            self.root_cause_xapps.join(";")
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RcaReport {
    pub rows: Vec<RcaRow>,
}

/// Analyzes one non-normal prediction.
pub fn analyze(graph: &ConflictGraph, predicted: ConflictLabel, topology: &Topology) -> Result<RcaRow> {
    let names = |v: Vec<NodeRef>| v.into_iter().map(NodeRef::name).collect();
    let (affected_node, root_cause_nodes, root_cause_xapps) = match find_affected(graph, predicted)? {
        Localization::Node { node, kind, .. } => {
            let (roots, apps) = trace_roots(graph, node, kind, topology)?;
            (node.name(), names(roots), names(apps))
        }
        Localization::Unlocalized => (UNLOCALIZED.to_string(), Vec::new(), Vec::new()),
    };
    Ok(RcaRow {
        predicted,
        conflict_type: predicted.name(),
        affected_node,
        root_cause_nodes,
        root_cause_xapps,
    })
}

/// One row per non-normal prediction, in input order.
pub fn build_report(predictions: &[(ConflictLabel, &ConflictGraph)], topology: &Topology) -> Result<RcaReport> {
    let rows = predictions
        .iter()
        .filter(|(label, _)| *label != ConflictLabel::Normal)
        .map(|&(label, graph)| analyze(graph, label, topology))
        .collect::<Result<Vec<_>>>()?;
    Ok(RcaReport { rows })
}

impl RcaReport {
    /// CSV with multi-valued fields joined by `;` and always quoted.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "predicted_label,conflict_type,affected_node,root_cause_nodes,root_cause_xapps")?;
        for r in &self.rows {
            writeln!(out, "{}", r.csv_line())?;
        }
        Ok(())
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let header = ["Predicted Label", "Conflict Type", "Affected Node", "Root Causes Nodes", "Root Causes xApps"];
        let body: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.predicted.to_string(),
                    r.conflict_type.to_string(),
                    r.affected_node.clone(),
                    r.root_cause_nodes.join(", "),
                    r.root_cause_xapps.join(", "),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let rule: String = widths.iter().map(|w| format!("+{}", "-".repeat(w + 2))).collect::<String>() + "+\n";
        let line = |cells: &[&str]| {
            let mut s = String::new();
            for (w, c) in widths.iter().zip(cells) {
                let _ = write!(s, "| {c:<w$} ");
            }
            s + "|\n"
        };
        let mut out = rule.clone();
        out += &line(&header);
        out += &rule;
        for row in &body {
            let cells: Vec<&str> = row.iter().map(String::as_str).collect();
            out += &line(&cells);
        }
        out += &rule;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict_sim::States;
    use crate::gsc::build_graph;

    /// Relations behind the seven example report rows (zero-based).
    fn report_topology() -> Topology {
        let controls = vec![
            (11, 0), (11, 2),          // p12 <- a1, a3
            (0, 0), (2, 2),            // p1 <- a1, p3 <- a3
            (1, 1), (1, 3), (1, 5),    // p2 <- a2, a4, a6
            (8, 8),                    // p9 <- a9
            (9, 1), (9, 4), (9, 7),    // p10 <- a2, a5, a8
            (6, 6), (9, 9),            // p7 <- a7, p10 <- a10
            (3, 3),                    // p4 <- a4
        ];
        let kpi_deps = vec![(9, 0), (9, 8), (4, 3), (4, 1)];
        let param_deps = vec![(7, 0), (7, 2), (12, 6), (12, 8), (12, 9)];
        let mut controls = controls;
        for p in 0..13 {
            if !controls.iter().any(|&(q, _)| q == p) {
                controls.push((p, p % 10));
            }
        }
        Topology::from_relations(10, 13, 10, controls, kpi_deps, param_deps, 0).unwrap()
    }

    fn graph(t: &Topology, on: &[NodeRef]) -> ConflictGraph {
        let mut s = States::zeros(t);
        for &n in on {
            s.set(n, true);
        }
        build_graph(t, &s).unwrap()
    }

    use NodeRef::{App as A, Kpi as K, Param as P};

    #[test]
    fn direct_conflict_on_p12() {
        let t = report_topology();
        let g = graph(&t, &[A(0), A(2), P(11)]);
        let loc = find_affected(&g, ConflictLabel::Direct).unwrap();
        assert_eq!(loc, Localization::Node { node: P(11), kind: EdgeKind::PA, in_degree: 2 });
        let row = analyze(&g, ConflictLabel::Direct, &t).unwrap();
        assert_eq!(row.root_cause_nodes, vec!["a1", "a3"]);
        assert_eq!(row.root_cause_xapps, row.root_cause_nodes);
    }

    #[test]
    fn indirect_conflict_on_p8() {
        let t = report_topology();
        let g = graph(&t, &[A(0), A(2), P(0), P(2), P(7)]);
        let row = analyze(&g, ConflictLabel::Indirect, &t).unwrap();
        assert_eq!(row.affected_node, "p8");
        assert_eq!(row.root_cause_nodes, vec!["p1", "p3"]);
        assert_eq!(row.root_cause_xapps, vec!["a1", "a3"]);
    }

    #[test]
    fn implicit_conflicts_on_k10_and_k5() {
        let t = report_topology();
        let g = graph(&t, &[A(0), A(8), P(0), P(8), K(9)]);
        let row = analyze(&g, ConflictLabel::Implicit, &t).unwrap();
        assert_eq!((row.affected_node.as_str(), row.root_cause_xapps.clone()), ("k10", vec!["a1".to_string(), "a9".into()]));

        let g = graph(&t, &[A(3), A(1), P(3), P(1), K(4)]);
        let row = analyze(&g, ConflictLabel::Implicit, &t).unwrap();
        assert_eq!(row.affected_node, "k5");
        assert_eq!(row.root_cause_nodes, vec!["p2", "p4"]);
        assert_eq!(row.root_cause_xapps, vec!["a2", "a4"]);
    }

    #[test]
    fn direct_with_three_apps() {
        let t = report_topology();
        let g = graph(&t, &[A(1), A(4), A(7), P(9)]);
        let row = analyze(&g, ConflictLabel::Direct, &t).unwrap();
        assert_eq!(row.affected_node, "p10");
        assert_eq!(row.root_cause_xapps, vec!["a2", "a5", "a8"]);
    }

    #[test]
    fn inactive_controllers_are_not_blamed() {
        let t = report_topology();
        // p13 <- p7, p9, p10; only a7 and a9 active.
        let g = graph(&t, &[A(6), A(8), P(6), P(8), P(9), P(12)]);
        let row = analyze(&g, ConflictLabel::Indirect, &t).unwrap();
        assert_eq!(row.affected_node, "p13");
        assert_eq!(row.root_cause_nodes, vec!["p7", "p9", "p10"]);
        assert_eq!(row.root_cause_xapps, vec!["a7", "a9"]);
    }

    #[test]
    fn fallback_and_unlocalized() {
        let t = report_topology();
        let g = graph(&t, &[A(0), A(2), P(11)]);
        // Predicted implicit, but only a PA pattern exists.
        let loc = find_affected(&g, ConflictLabel::Implicit).unwrap();
        assert_eq!(loc, Localization::Node { node: P(11), kind: EdgeKind::PA, in_degree: 2 });

        let g = graph(&t, &[A(0), P(0)]);
        assert_eq!(find_affected(&g, ConflictLabel::Direct).unwrap(), Localization::Unlocalized);
        let row = analyze(&g, ConflictLabel::Direct, &t).unwrap();
        assert_eq!(row.affected_node, UNLOCALIZED);
        assert!(matches!(find_affected(&g, ConflictLabel::Normal), Err(Error::Domain(_))));
    }

    #[test]
    fn trace_requires_two_incoming_edges() {
        let t = report_topology();
        let g = graph(&t, &[A(0), P(0)]);
        assert!(matches!(trace_roots(&g, P(0), EdgeKind::PA, &t), Err(Error::Domain(_))));
    }

    #[test]
    fn report_filters_normal_and_formats_csv() {
        let t = report_topology();
        let g1 = graph(&t, &[A(0), A(2), P(11)]);
        let g0 = graph(&t, &[]);
        let report = build_report(&[(ConflictLabel::Normal, &g0), (ConflictLabel::Direct, &g1)], &t).unwrap();
        assert_eq!(report.rows.len(), 1);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "predicted_label,conflict_type,affected_node,root_cause_nodes,root_cause_xapps\n1,Direct,p12,\"a1;a3\",\"a1;a3\"\n"
        );
        assert!(report.to_table().contains("| 1               | Direct        | p12"));

        let empty = build_report(&[(ConflictLabel::Normal, &g0)], &t).unwrap();
        assert!(empty.rows.is_empty());
    }
}
