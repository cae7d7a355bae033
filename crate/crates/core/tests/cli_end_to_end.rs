use std::path::Path;
use std::process::{Command, Output};

use graphica::cli::{checkpoint_file, CONFUSION_FILE, DATASET_FILE, HISTORY_FILE, METRICS_FILE, RCA_FILE, TOPOLOGY_FILE};

fn graphica(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphica"))
        .current_dir(dir)
        .env_remove("GRAPHICA_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = graphica(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &[&str] = &["--apps", "4", "--params", "5", "--kpis", "3", "--rows", "120", "--conflict", "0.5"];
const QUICK: &[&str] = &["--folds", "2", "--epochs", "20", "--patience", "5"];

#[test]
fn synth_train_eval_report_graph() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut synth = vec!["-q", "synth", "-o", "run"];
    synth.extend(SMALL);
    let printed = ok(d, &synth);
    assert!(printed.contains("normal"), "{printed}");
    let run = d.join("run");
    assert!(run.join(TOPOLOGY_FILE).exists());
    let csv = std::fs::read_to_string(run.join(DATASET_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 121);

    let mut train = vec!["-q", "train", "-o", "run"];
    train.extend(QUICK);
    ok(d, &train);
    assert!(run.join(checkpoint_file(0)).exists());
    assert!(run.join(checkpoint_file(1)).exists());
    assert!(run.join(HISTORY_FILE).exists());

    ok(d, &["-q", "eval", "-o", "run"]);
    let metrics = std::fs::read_to_string(run.join(METRICS_FILE)).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "model,precision,recall,f1");
    assert!(lines.iter().any(|l| l.starts_with("mean,")), "{metrics}");
    for l in &lines[1..] {
        for v in l.split(',').skip(1) {
            let v: f64 = v.parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
    let confusion = std::fs::read_to_string(run.join(CONFUSION_FILE)).unwrap();
    let total: u64 = confusion
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 120);

    ok(d, &["-q", "report", "-o", "run", "--all-rows"]);
    let rca = std::fs::read_to_string(run.join(RCA_FILE)).unwrap();
    let mut rows = rca.lines();
    assert_eq!(
        rows.next().unwrap(),
        "predicted_label,conflict_type,affected_node,root_cause_nodes,root_cause_xapps"
    );
    for l in rows {
        let label: u8 = l.split(',').next().unwrap().parse().unwrap();
        assert!((1..=3).contains(&label), "{l}");
    }

    let edges = ok(d, &["graph", "-o", "run", "--row", "0"]);
    assert!(edges.starts_with("# row 0 label"), "{edges}");
}

#[test]
fn config_file_and_seed_env() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.conf"), "# small run\napps = 3\nparams=4\nkpis = 2\nrows = 40\nseed = 5\n").unwrap();
    ok(d, &["-q", "--config", "run.conf", "synth", "-o", "a"]);
    let csv = std::fs::read_to_string(d.join("a").join(DATASET_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 41);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 3 + 4 + 2 + 1);

    let via_env = Command::new(env!("CARGO_BIN_EXE_graphica"))
        .current_dir(d)
        .env("GRAPHICA_SEED", "5")
        .args(["-q", "synth", "--apps", "3", "--params", "4", "--kpis", "2", "--rows", "40", "-o", "b"])
        .output()
        .unwrap();
    assert!(via_env.status.success());
    let a = std::fs::read(d.join("a").join(DATASET_FILE)).unwrap();
    let b = std::fs::read(d.join("b").join(DATASET_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["synth", "--conflict", "1.5"][..],
        &["synth", "--rows", "0"],
        &["synth", "--apps", "many"],
        &["train", "--epochs", "0"],
        &["train", "--alpha", "1,2"],
        &["frobnicate"],
    ] {
        let out = graphica(d, args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn missing_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = graphica(d, &["train", "-o", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    let mut synth = vec!["-q", "synth", "-o", "run"];
    synth.extend(SMALL);
    ok(d, &synth);
    let out = graphica(d, &["eval", "-o", "run", "-m", "run/missing.ckpt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
