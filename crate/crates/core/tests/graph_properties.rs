use std::collections::BTreeSet;

use graphica::conflict_sim::{label_row, ConflictLabel, States, Topology};
use graphica::gsc::{build_graph, EdgeKind};
use proptest::prelude::*;

fn topology_strategy() -> impl Strategy<Value = Topology> {
    (1usize..5, 1usize..6, 1usize..5).prop_flat_map(|(na, np, nk)| {
        let controls = prop::collection::vec((0..np, 0..na), 0..12);
        let kpi = prop::collection::vec((0..nk, 0..np), 0..12);
        let pp = prop::collection::vec((0..np, 0..np), 0..10);
        (Just((na, np, nk)), controls, kpi, pp).prop_map(|((na, np, nk), c, k, p)| {
            let p: Vec<_> = p.into_iter().filter(|(t, s)| t != s).collect();
            Topology::from_relations(na, np, nk, c, k, p, 0).unwrap()
        })
    })
}

fn with_states() -> impl Strategy<Value = (Topology, Vec<u8>)> {
    topology_strategy().prop_flat_map(|t| {
        let w = t.width();
        (Just(t), prop::collection::vec(0u8..2, w))
    })
}

// Edge set listed straight from the relations: an edge exists when both ends are on.
fn expected_edges(t: &Topology, bits: &[u8]) -> BTreeSet<(usize, usize, EdgeKind)> {
    let (na, np) = (t.n_apps(), t.n_params());
    let on = |i: usize| bits[i] == 1;
    let mut out = BTreeSet::new();
    for &(p, a) in t.controls() {
        if on(a) && on(na + p) {
            out.insert((a, na + p, EdgeKind::PA));
        }
    }
    for &(k, p) in t.kpi_deps() {
        if on(na + p) && on(na + np + k) {
            out.insert((na + p, na + np + k, EdgeKind::KP));
        }
    }
    for &(tg, s) in t.param_deps() {
        if on(na + s) && on(na + tg) {
            out.insert((na + s, na + tg, EdgeKind::PP));
        }
    }
    out
}

proptest! {
    #[test]
    fn edges_match_relations((t, bits) in with_states()) {
        let g = build_graph(&t, &States::from_bits(&t, &bits).unwrap()).unwrap();
        let got: BTreeSet<_> = g.edges().iter().map(|e| (e.source, e.target, e.kind)).collect();
        prop_assert_eq!(got.len(), g.edges().len());
        prop_assert_eq!(got, expected_edges(&t, &bits));
        prop_assert_eq!(g.n_nodes(), t.width());
    }

    #[test]
    fn label_follows_in_degrees((t, bits) in with_states()) {
        let states = States::from_bits(&t, &bits).unwrap();
        let g = build_graph(&t, &states).unwrap();
        let label = label_row(&t, &states).unwrap();
        let hits = |k: EdgeKind| g.in_degrees(Some(k)).into_iter().any(|d| d >= 2);
        let expected = if hits(EdgeKind::PA) {
            ConflictLabel::Direct
        } else if hits(EdgeKind::KP) {
            ConflictLabel::Implicit
        } else if hits(EdgeKind::PP) {
            ConflictLabel::Indirect
        } else {
            ConflictLabel::Normal
        };
        prop_assert_eq!(label, expected);
    }

    #[test]
    fn features_are_role_state_degree((t, bits) in with_states()) {
        let g = build_graph(&t, &States::from_bits(&t, &bits).unwrap()).unwrap();
        let f = g.features();
        let n = g.n_nodes();
        let mut degree = vec![0usize; n];
        for e in g.edges() {
            degree[e.source] += 1;
            degree[e.target] += 1;
        }
        for i in 0..n {
            let role = (f.get(i, 0) + f.get(i, 1) + f.get(i, 2)) as usize;
            prop_assert_eq!(role, 1);
            prop_assert_eq!(f.get(i, 3), bits[i] as f64);
            let scale = (n.saturating_sub(1)).max(1) as f64;
            prop_assert!((f.get(i, 4) - degree[i] as f64 / scale).abs() < 1e-12);
        }
    }

    #[test]
    fn all_off_row_is_normal(t in topology_strategy()) {
        let states = States::zeros(&t);
        prop_assert_eq!(label_row(&t, &states).unwrap(), ConflictLabel::Normal);
        prop_assert!(build_graph(&t, &states).unwrap().edges().is_empty());
    }
}
