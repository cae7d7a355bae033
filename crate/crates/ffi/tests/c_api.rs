use std::ffi::{CStr, CString};
use std::ptr;

use graphica_ffi::*;

fn last_error() -> String {
    let p = graphica_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { graphica_string_free(p) };
    s
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { graphica_string_free(p) };
    s
}

fn topology(seed: u64) -> *mut GraphicaTopology {
    let mut t = ptr::null_mut();
    let st = unsafe { graphica_topology_new(3, 4, 3, seed, &mut t) };
    assert_eq!(st, GraphicaStatus::Ok);
    assert!(!t.is_null());
    t
}

#[test]
fn topology_json_roundtrip() {
    let t = topology(3);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { graphica_topology_to_json(t, &mut json) }, GraphicaStatus::Ok);
    let json = CString::new(take_string(json)).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { graphica_topology_from_json(json.as_ptr(), &mut back) }, GraphicaStatus::Ok);
    assert_eq!(unsafe { graphica_topology_width(back) }, 10);
    assert_eq!(unsafe { graphica_topology_width(t) }, 10);
    unsafe {
        graphica_topology_free(t);
        graphica_topology_free(back);
    }
}

#[test]
fn dataset_rows_match_oracle() {
    let t = topology(5);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { graphica_dataset_synth(t, 60, 0.5, 9, &mut d) }, GraphicaStatus::Ok);
    let n = unsafe { graphica_dataset_len(d) };
    assert_eq!(n, 60);
    let mut bits = [0u8; 10];
    for i in 0..n {
        let (mut stored, mut oracle) = (9u8, 9u8);
        assert_eq!(unsafe { graphica_dataset_row(d, i, bits.as_mut_ptr(), 10, &mut stored) }, GraphicaStatus::Ok);
        assert_eq!(unsafe { graphica_label_row(t, bits.as_ptr(), 10, &mut oracle) }, GraphicaStatus::Ok);
        assert_eq!(stored, oracle);
        if stored != 0 {
            let mut line = ptr::null_mut();
            assert_eq!(unsafe { graphica_rca(t, bits.as_ptr(), 10, stored, &mut line) }, GraphicaStatus::Ok);
            let line = take_string(line);
            assert!(line.starts_with(&format!("{stored},")), "{line}");
        }
    }
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { graphica_dataset_to_csv(d, &mut csv) }, GraphicaStatus::Ok);
    assert_eq!(take_string(csv).lines().count(), n + 1);
    unsafe {
        graphica_dataset_free(d);
        graphica_topology_free(t);
    }
}

#[test]
fn errors_report_status_and_message() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { graphica_topology_new(0, 4, 3, 0, &mut t) }, GraphicaStatus::Size);
    assert!(t.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { graphica_topology_new(3, 4, 3, 0, ptr::null_mut()) }, GraphicaStatus::NullPointer);
    assert!(last_error().contains("out"));

    let t = topology(1);
    let bits = [0u8; 4];
    let mut label = 0u8;
    assert_eq!(unsafe { graphica_label_row(t, bits.as_ptr(), 4, &mut label) }, GraphicaStatus::Shape);

    let bad = CString::new("{not json").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { graphica_topology_from_json(bad.as_ptr(), &mut out) }, GraphicaStatus::Parse);

    let missing = CString::new("/nonexistent/fold0.ckpt").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { graphica_model_load(missing.as_ptr(), &mut m) }, GraphicaStatus::Io);

    let mut d = ptr::null_mut();
    assert_eq!(unsafe { graphica_dataset_synth(t, 20, 2.0, 0, &mut d) }, GraphicaStatus::Domain);

    unsafe {
        graphica_topology_free(t);
        graphica_topology_free(ptr::null_mut());
        graphica_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { graphica_topology_width(ptr::null()) }, 0);
}

#[test]
fn predict_with_trained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for cmd in [
        vec!["synth", "--apps", "3", "--params", "4", "--kpis", "3", "--rows", "80", "--conflict", "0.5", "-o", out],
        vec!["train", "-o", out, "--folds", "2", "--epochs", "5", "--patience", "2"],
    ] {
        let mut args = vec!["graphica", "-q"];
        args.extend(cmd.iter().copied());
        graphica::cli::run(args).unwrap();
    }
    let topo_json = std::fs::read_to_string(dir.path().join(graphica::cli::TOPOLOGY_FILE)).unwrap();
    let topo_json = CString::new(topo_json).unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { graphica_topology_from_json(topo_json.as_ptr(), &mut t) }, GraphicaStatus::Ok);

    let ckpt = CString::new(dir.path().join(graphica::cli::checkpoint_file(0)).to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { graphica_model_load(ckpt.as_ptr(), &mut m) }, GraphicaStatus::Ok);

    let bits = [1u8, 0, 1, 1, 0, 0, 1, 0, 1, 0];
    let mut label = 9u8;
    let mut probs = [0.0f64; 4];
    assert_eq!(
        unsafe { graphica_predict(m, t, bits.as_ptr(), 10, &mut label, probs.as_mut_ptr()) },
        GraphicaStatus::Ok
    );
    assert!(label < 4);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let argmax = (0..4).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap();
    assert_eq!(argmax, label as usize);
    assert_eq!(
        unsafe { graphica_predict(m, t, bits.as_ptr(), 10, &mut label, ptr::null_mut()) },
        GraphicaStatus::Ok
    );
    unsafe {
        graphica_model_free(m);
        graphica_topology_free(t);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(graphica_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
