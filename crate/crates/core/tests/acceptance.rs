//! Acceptance runner. Prints one verdict line per criterion.
//!
//! Exact property criteria (1, 2, 3, 8, 10) make the run fail when they do not
//! hold. Quantitative criteria (4, 5, 6, 7, 9) report the measured value and a
//! PASS/FAIL verdict against their threshold without aborting the run.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use graphica::conflict_sim::{new_topology, synth_dataset, synthesize_row, ConflictLabel, States, Topology};
use graphica::gap::{compute_alpha, focal_loss, loss_and_grad, train, FocalConfig, ModelParams, TrainConfig, TrainOutcome};
use graphica::gsc::{batch_graphs, build_graph, build_labeled_graph, ConflictGraph, FEATURE_DIM};
use graphica::numerics::{grad_check, softmax_rows, DenseMatrix};
use graphica::rca::analyze;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    exact: bool,
    detail: String,
    elapsed: Duration,
}

fn report(v: &Verdict) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {:>2} {:<24} {} ({}; {:.1}s)",
        v.id,
        v.name,
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        v.elapsed.as_secs_f64()
    );
    let _ = out.flush();
}

/// Labels by direct reading of the definitions over the raw relation lists.
fn brute_force_label(t: &Topology, bits: &[u8]) -> u8 {
    let (na, np) = (t.n_apps(), t.n_params());
    let app = |a: usize| bits[a] == 1;
    let param = |p: usize| bits[na + p] == 1;
    let kpi = |k: usize| bits[na + np + k] == 1;
    let mut direct = false;
    let mut implicit = false;
    let mut indirect = false;
    for p in 0..np {
        let n = t.controls().iter().filter(|&&(q, a)| q == p && app(a)).count();
        direct |= param(p) && n >= 2;
    }
    for k in 0..t.n_kpis() {
        let n = t.kpi_deps().iter().filter(|&&(j, p)| j == k && param(p)).count();
        implicit |= kpi(k) && n >= 2;
    }
    for target in 0..np {
        let n = t.param_deps().iter().filter(|&&(q, src)| q == target && param(src)).count();
        indirect |= param(target) && n >= 2;
    }
    if direct {
        1
    } else if implicit {
        2
    } else if indirect {
        3
    } else {
        0
    }
}

fn random_relations(rng: &mut ChaCha8Rng) -> Topology {
    let na = rng.gen_range(1..=4);
    let np = rng.gen_range(2..=5);
    let nk = rng.gen_range(1..=(12 - na - np).clamp(1, 3));
    let mut controls = Vec::new();
    let mut kpi_deps = Vec::new();
    let mut param_deps = Vec::new();
    for p in 0..np {
        for a in 0..na {
            if rng.gen_bool(0.5) {
                controls.push((p, a));
            }
        }
        for q in 0..np {
            if q != p && rng.gen_bool(0.35) {
                param_deps.push((q, p));
            }
        }
    }
    for k in 0..nk {
        for p in 0..np {
            if rng.gen_bool(0.5) {
                kpi_deps.push((k, p));
            }
        }
    }
    Topology::from_relations(na, np, nk, controls, kpi_deps, param_deps, 0).expect("valid relations")
}

fn criterion_oracle() -> Verdict {
    let start = Instant::now();
    let mut topologies = Vec::new();
    let sizes = [(2, 3, 1), (3, 4, 2), (3, 5, 3), (4, 5, 3), (2, 6, 2), (4, 4, 4)];
    let mut seed = 0;
    while topologies.len() < 20 {
        let (a, p, k) = sizes[seed as usize % sizes.len()];
        if let Ok(t) = new_topology(a, p, k, seed) {
            topologies.push(t);
        }
        seed += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    topologies.extend((0..20).map(|_| random_relations(&mut rng)));

    let mut rows = 0usize;
    let mut mismatches = 0usize;
    for t in &topologies {
        let width = t.width();
        assert!(width <= 12);
        for code in 0u32..(1 << width) {
            let bits: Vec<u8> = (0..width).map(|i| ((code >> i) & 1) as u8).collect();
            let states = States::from_bits(t, &bits).unwrap();
            let got = graphica::label_row(t, &states).unwrap().index() as u8;
            mismatches += usize::from(got != brute_force_label(t, &bits));
            rows += 1;
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        id: 1,
        name: "oracle equivalence",
        pass: mismatches == 0 && elapsed < Duration::from_secs(10),
        exact: true,
        detail: format!("{} topologies, {rows} rows, {mismatches} mismatches", topologies.len()),
        elapsed,
    }
}

fn criterion_gradients() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0f64;
    for trial in 0..10u64 {
        let t = new_topology(10, 13, 10, 100 + trial).unwrap();
        let data = synth_dataset(&t, 16, 0.75, trial).unwrap();
        let graphs: Vec<ConflictGraph> = (0..3)
            .map(|_| build_labeled_graph(&t, &data.rows[rng.gen_range(0..data.len())]).unwrap())
            .collect();
        let refs: Vec<&ConflictGraph> = graphs.iter().collect();
        let labels: Vec<ConflictLabel> = graphs.iter().map(|g| g.label.unwrap()).collect();
        let batch = batch_graphs(&refs).unwrap();

        let mut model = ModelParams::new(trial);
        let layout = model.layout();
        for block in layout.iter().filter(|b| b.name.starts_with('b')) {
            for v in &mut model.values_mut()[block.offset..block.offset + block.len] {
                *v = rng.gen_range(-0.2..0.2);
            }
        }
        let kinds = layout.last().unwrap();
        for v in &mut model.values_mut()[kinds.offset..kinds.offset + kinds.len] {
            *v = rng.gen_range(0.5..2.0);
        }
        let alpha = [0.0; 4].map(|_: f64| rng.gen_range(0.2..3.0));
        let focal = FocalConfig::new(rng.gen_range(0.0..4.0), alpha).unwrap();
        let (_, grad) = loss_and_grad(&model, &batch, &labels, &focal).unwrap();
        let loss = |v: &[f64]| {
            let m = ModelParams::from_values(FEATURE_DIM, model.hidden_dim(), model.classes(), v.to_vec()).unwrap();
            loss_and_grad(&m, &batch, &labels, &focal).unwrap().0
        };
        worst = worst.max(grad_check(loss, &grad, model.values(), 1e-6).unwrap());
    }
    let elapsed = start.elapsed();
    Verdict {
        id: 2,
        name: "gradient correctness",
        pass: worst < 1e-4 && elapsed < Duration::from_secs(30),
        exact: true,
        detail: format!("10 batches of 3 graphs, max relative error {worst:.2e}"),
        elapsed,
    }
}

fn criterion_focal_degeneration() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = FocalConfig::new(0.0, [1.0; 4]).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=64);
        let logits: Vec<f64> = (0..n * 4).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let probs = softmax_rows(&DenseMatrix::from_vec(n, 4, logits).unwrap());
        let labels: Vec<ConflictLabel> = (0..n).map(|_| ConflictLabel::ALL[rng.gen_range(0..4)]).collect();
        let ce = labels.iter().enumerate().map(|(r, l)| -probs.get(r, l.index()).ln()).sum::<f64>() / n as f64;
        let focal = focal_loss(&probs, &labels, &cfg).unwrap().loss;
        worst = worst.max((focal - ce).abs());
    }
    Verdict {
        id: 3,
        name: "focal degeneration",
        pass: worst <= 1e-10,
        exact: true,
        detail: format!("100 batches, max |focal - ce| {worst:.1e}"),
        elapsed: start.elapsed(),
    }
}

fn run_cv(seed: u64, rows: usize, fraction: f64, gamma: f64) -> TrainOutcome {
    let t = new_topology(10, 13, 10, seed).unwrap();
    let data = synth_dataset(&t, rows, fraction, seed).unwrap();
    let focal = FocalConfig::new(gamma, compute_alpha(&data.labels()).unwrap()).unwrap();
    train(&data, &TrainConfig { seed, ..TrainConfig::default() }, &focal).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn criterion_balanced() -> Verdict {
    let start = Instant::now();
    let f1: Vec<f64> = SEEDS.iter().map(|&s| run_cv(s, 800, 0.75, 0.0).history.mean_metrics().f1).collect();
    let elapsed = start.elapsed();
    Verdict {
        id: 4,
        name: "balanced performance",
        pass: mean(&f1) >= 0.95 && elapsed <= Duration::from_secs(600),
        exact: false,
        detail: format!("weighted F1 per seed [{}], mean {:.4}, need >= 0.95", fmt_list(&f1), mean(&f1)),
        elapsed,
    }
}

fn criteria_imbalanced() -> Vec<Verdict> {
    let start = Instant::now();
    let focused: Vec<TrainOutcome> = SEEDS.iter().map(|&s| run_cv(s, 570, 0.10, 2.0)).collect();
    let focused_time = start.elapsed();
    let plain_start = Instant::now();
    let plain: Vec<TrainOutcome> = SEEDS.iter().map(|&s| run_cv(s, 570, 0.10, 0.0)).collect();
    let plain_time = plain_start.elapsed();

    let f1_focused: Vec<f64> = focused.iter().map(|o| o.history.mean_metrics().f1).collect();
    let f1_plain: Vec<f64> = plain.iter().map(|o| o.history.mean_metrics().f1).collect();

    let folds: Vec<_> = focused.iter().flat_map(|o| o.history.folds.iter()).collect();
    let train_loss = mean(&folds.iter().map(|f| f.final_train_loss).collect::<Vec<_>>());
    let val_loss = mean(&folds.iter().map(|f| f.best_val_loss).collect::<Vec<_>>());

    let errors: Vec<usize> = focused
        .iter()
        .map(|o| {
            let fold0 = &o.history.folds[0];
            assert_eq!(fold0.confusion.total(), 114);
            fold0.confusion.off_diagonal()
        })
        .collect();
    let good = errors.iter().filter(|&&e| e <= 3).count();

    vec![
        Verdict {
            id: 5,
            name: "imbalanced performance",
            pass: mean(&f1_focused) >= 0.95 && focused_time <= Duration::from_secs(600),
            exact: false,
            detail: format!(
                "gamma 2, weighted F1 per seed [{}], mean {:.4}, need >= 0.95",
                fmt_list(&f1_focused),
                mean(&f1_focused)
            ),
            elapsed: focused_time,
        },
        Verdict {
            id: 6,
            name: "gamma trend",
            pass: mean(&f1_focused) >= mean(&f1_plain),
            exact: false,
            detail: format!(
                "mean F1 gamma 2 {:.4} vs gamma 0 {:.4} (gamma 0 per seed [{}])",
                mean(&f1_focused),
                mean(&f1_plain),
                fmt_list(&f1_plain)
            ),
            elapsed: plain_time,
        },
        Verdict {
            id: 7,
            name: "loss convergence",
            pass: train_loss < 0.10 && val_loss < 0.10,
            exact: false,
            detail: format!(
                "mean over {} folds at restored epoch: train {train_loss:.4}, validation {val_loss:.4}, need < 0.10",
                folds.len()
            ),
            elapsed: Duration::ZERO,
        },
        Verdict {
            id: 9,
            name: "confusion sanity",
            pass: good >= 2,
            exact: false,
            detail: format!("off-diagonal errors on held-out fold 0 per seed {errors:?}, need <= 3 in 2 of 3"),
            elapsed: Duration::ZERO,
        },
    ]
}

fn criterion_rca() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut total = 0usize;
    let mut recovered = 0usize;
    for seed in 0..4u64 {
        let t = new_topology(10, 13, 10, 300 + seed).unwrap();
        for i in 0..150 {
            let label = ConflictLabel::ALL[1 + i % 3];
            let row = synthesize_row(&t, label, &mut rng).unwrap();
            let injected = row.injected.expect("conflict rows carry their pattern");
            let graph = build_graph(&t, &row.states).unwrap();
            let rca = analyze(&graph, label, &t).unwrap();
            let want: BTreeSet<String> = injected.sources.iter().map(|n| n.name()).collect();
            let got: BTreeSet<String> = rca.root_cause_nodes.iter().cloned().collect();
            total += 1;
            recovered += usize::from(rca.affected_node == injected.affected.name() && got == want);
        }
    }
    Verdict {
        id: 8,
        name: "rca recovery",
        pass: total >= 500 && recovered == total,
        exact: true,
        detail: format!("{recovered}/{total} injected patterns recovered"),
        elapsed: start.elapsed(),
    }
}

fn cli_pipeline(dir: &std::path::Path) -> Vec<u8> {
    let out = dir.to_str().unwrap();
    graphica::cli::run(["graphica", "-q", "synth", "--seed", "11", "-o", out]).unwrap();
    graphica::cli::run(["graphica", "-q", "train", "--seed", "11", "-o", out]).unwrap();
    graphica::cli::run(["graphica", "-q", "eval", "-o", out]).unwrap();
    std::fs::read(dir.join("metrics.csv")).unwrap()
}

fn criterion_determinism() -> Verdict {
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = cli_pipeline(a.path());
    let second = cli_pipeline(b.path());
    Verdict {
        id: 10,
        name: "determinism",
        pass: !first.is_empty() && first == second,
        exact: true,
        detail: format!("metrics.csv {} bytes, identical: {}", first.len(), first == second),
        elapsed: start.elapsed(),
    }
}

fn main() {
    // Test discovery passes `--list`; there is nothing to enumerate.
    if std::env::args().skip(1).any(|a| a == "--list") {
        return;
    }
    let mut verdicts = Vec::new();
    let mut run = |v: Verdict| {
        report(&v);
        verdicts.push(v);
    };
    run(criterion_oracle());
    run(criterion_gradients());
    run(criterion_focal_degeneration());
    run(criterion_balanced());
    let mut pending = criteria_imbalanced();
    pending.push(criterion_rca());
    pending.sort_by_key(|v| v.id);
    for v in pending {
        run(v);
    }
    run(criterion_determinism());

    verdicts.sort_by_key(|v| v.id);
    let met = verdicts.iter().filter(|v| v.pass).count();
    println!("acceptance: {met}/{} criteria met", verdicts.len());
    let broken: Vec<usize> = verdicts.iter().filter(|v| v.exact && !v.pass).map(|v| v.id).collect();
    if !broken.is_empty() {
        eprintln!("exact property criteria failed: {broken:?}");
        std::process::exit(1);
    }
}
