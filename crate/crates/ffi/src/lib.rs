//! C interface to graphica.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style functions and released with the matching `*_free`. Every fallible
//! call returns a [`GraphicaStatus`]; on failure the message is available from
//! [`graphica_last_error_message`] on the same thread. Strings handed out by
//! the library are released with [`graphica_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use graphica::conflict_sim::{label_row, new_topology, synth_dataset, Dataset, States, Topology, NUM_CLASSES};
use graphica::gap::{predict, Checkpoint, ModelParams};
use graphica::gsc::build_graph;
use graphica::rca::analyze;
use graphica::{ConflictLabel, Error};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphicaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Size = 3,
    Generation = 4,
    Shape = 5,
    Synthesis = 6,
    EmptyInput = 7,
    Domain = 8,
    Numeric = 9,
    Stratification = 10,
    Training = 11,
    Io = 12,
    Parse = 13,
    Compatibility = 14,
    Usage = 15,
    Panic = 16,
}

impl From<&Error> for GraphicaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Size(_) => GraphicaStatus::Size,
            Error::Generation { .. } => GraphicaStatus::Generation,
            Error::Shape(_) => GraphicaStatus::Shape,
            Error::Synthesis { .. } => GraphicaStatus::Synthesis,
            Error::EmptyInput(_) => GraphicaStatus::EmptyInput,
            Error::Domain(_) => GraphicaStatus::Domain,
            Error::Numeric { .. } => GraphicaStatus::Numeric,
            Error::Stratification { .. } => GraphicaStatus::Stratification,
            Error::Training { .. } => GraphicaStatus::Training,
            Error::Io { .. } => GraphicaStatus::Io,
            Error::Parse { .. } => GraphicaStatus::Parse,
            Error::Compatibility(_) => GraphicaStatus::Compatibility,
            Error::Usage(_) => GraphicaStatus::Usage,
        }
    }
}

/// Opaque dependency topology.
pub struct GraphicaTopology {
    inner: Topology,
}

/// Opaque labeled dataset.
pub struct GraphicaDataset {
    inner: Dataset,
}

/// Opaque trained model.
pub struct GraphicaModel {
    inner: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(GraphicaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(GraphicaStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GraphicaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> GraphicaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GraphicaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            GraphicaStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GraphicaStatus::InvalidString, format!("{what} is not valid UTF-8")))
}

unsafe fn states_arg(t: &Topology, bits: *const u8, len: usize) -> Result<States, Failure> {
    if bits.is_null() {
        return Err(null("bits"));
    }
    let bits = std::slice::from_raw_parts(bits, len);
    Ok(States::from_bits(t, bits)?)
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior nul removed").into_raw()
}

/// Message of the last failed call on this thread, or null. The caller owns
/// the returned string.
#[no_mangle]
pub extern "C" fn graphica_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn graphica_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn graphica_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a random topology.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn graphica_topology_new(
    n_apps: usize,
    n_params: usize,
    n_kpis: usize,
    seed: u64,
    out: *mut *mut GraphicaTopology,
) -> GraphicaStatus {
    guard(|| {
        let inner = new_topology(n_apps, n_params, n_kpis, seed)?;
        write_out(out, Box::into_raw(Box::new(GraphicaTopology { inner })), "out")
    })
}

/// Parses a topology from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn graphica_topology_from_json(
    json: *const c_char,
    out: *mut *mut GraphicaTopology,
) -> GraphicaStatus {
    guard(|| {
        let inner = Topology::from_json(str_arg(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(GraphicaTopology { inner })), "out")
    })
}

/// Serializes a topology to JSON. The caller owns `*out`.
///
/// # Safety
/// `topology` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn graphica_topology_to_json(
    topology: *const GraphicaTopology,
    out: *mut *mut c_char,
) -> GraphicaStatus {
    guard(|| {
        let t = borrow(topology, "topology")?;
        write_out(out, to_c_string(t.inner.to_json()), "out")
    })
}

/// Number of state bits in a row (xApps + parameters + KPIs); 0 for null.
///
/// # Safety
/// `topology` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn graphica_topology_width(topology: *const GraphicaTopology) -> usize {
    topology.as_ref().map_or(0, |t| t.inner.width())
}

/// # Safety
/// `topology` must be a live handle or null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn graphica_topology_free(topology: *mut GraphicaTopology) {
    if !topology.is_null() {
        drop(Box::from_raw(topology));
    }
}

/// Oracle label (0 normal, 1 direct, 2 implicit, 3 indirect) of a row of
/// `len` 0/1 bytes ordered xApps, parameters, KPIs.
///
/// # Safety
/// `bits` must point to `len` readable bytes; `topology` must be live.
#[no_mangle]
pub unsafe extern "C" fn graphica_label_row(
    topology: *const GraphicaTopology,
    bits: *const u8,
    len: usize,
    out_label: *mut u8,
) -> GraphicaStatus {
    guard(|| {
        let t = &borrow(topology, "topology")?.inner;
        let label = label_row(t, &states_arg(t, bits, len)?)?;
        write_out(out_label, label.index() as u8, "out_label")
    })
}

/// Synthesizes a labeled dataset over a copy of `topology`.
///
/// # Safety
/// `topology` must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn graphica_dataset_synth(
    topology: *const GraphicaTopology,
    n_rows: usize,
    conflict_fraction: f64,
    seed: u64,
    out: *mut *mut GraphicaDataset,
) -> GraphicaStatus {
    guard(|| {
        let t = &borrow(topology, "topology")?.inner;
        let inner = synth_dataset(t, n_rows, conflict_fraction, seed)?;
        write_out(out, Box::into_raw(Box::new(GraphicaDataset { inner })), "out")
    })
}

/// Row count; 0 for null.
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn graphica_dataset_len(dataset: *const GraphicaDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// Copies row `index` into `bits` (`len` must equal the topology width) and
/// its label into `out_label`.
///
/// # Safety
/// `bits` must point to `len` writable bytes; `dataset` must be live.
#[no_mangle]
pub unsafe extern "C" fn graphica_dataset_row(
    dataset: *const GraphicaDataset,
    index: usize,
    bits: *mut u8,
    len: usize,
    out_label: *mut u8,
) -> GraphicaStatus {
    guard(|| {
        let d = &borrow(dataset, "dataset")?.inner;
        let row = d.rows.get(index).ok_or_else(|| {
            Failure(GraphicaStatus::Domain, format!("row {index} out of range ({} rows)", d.len()))
        })?;
        let src = row.states.to_bits();
        if bits.is_null() {
            return Err(null("bits"));
        }
        if len != src.len() {
            return Err(Error::Shape(format!("buffer holds {len} bits, row has {}", src.len())).into());
        }
        std::slice::from_raw_parts_mut(bits, len).copy_from_slice(&src);
        write_out(out_label, row.label.index() as u8, "out_label")
    })
}

/// Dataset as CSV text. The caller owns `*out`.
///
/// # Safety
/// `dataset` must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn graphica_dataset_to_csv(
    dataset: *const GraphicaDataset,
    out: *mut *mut c_char,
) -> GraphicaStatus {
    guard(|| {
        let d = borrow(dataset, "dataset")?;
        write_out(out, to_c_string(d.inner.to_csv_string()), "out")
    })
}

/// # Safety
/// `dataset` must be a live handle or null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn graphica_dataset_free(dataset: *mut GraphicaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Loads a model checkpoint written by `graphica train`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn graphica_model_load(path: *const c_char, out: *mut *mut GraphicaModel) -> GraphicaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let inner = Checkpoint::load(Path::new(path))?.model()?;
        write_out(out, Box::into_raw(Box::new(GraphicaModel { inner })), "out")
    })
}

/// # Safety
/// `model` must be a live handle or null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn graphica_model_free(model: *mut GraphicaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts the conflict class of one row. `out_probs`, when not null,
/// receives the four class probabilities.
///
/// # Safety
/// `bits` must point to `len` readable bytes, `out_probs` to 4 writable
/// doubles or be null; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn graphica_predict(
    model: *const GraphicaModel,
    topology: *const GraphicaTopology,
    bits: *const u8,
    len: usize,
    out_label: *mut u8,
    out_probs: *mut f64,
) -> GraphicaStatus {
    guard(|| {
        let m = &borrow(model, "model")?.inner;
        let t = &borrow(topology, "topology")?.inner;
        let graph = build_graph(t, &states_arg(t, bits, len)?)?;
        let (label, probs) = predict(m, &graph)?;
        if !out_probs.is_null() {
            std::slice::from_raw_parts_mut(out_probs, NUM_CLASSES).copy_from_slice(&probs);
        }
        write_out(out_label, label.index() as u8, "out_label")
    })
}

/// Root cause record for a row with the given non-normal label, formatted as
/// `label,type,affected,"roots","xapps"`. The caller owns `*out`.
///
/// # Safety
/// `bits` must point to `len` readable bytes; `topology` must be live.
#[no_mangle]
pub unsafe extern "C" fn graphica_rca(
    topology: *const GraphicaTopology,
    bits: *const u8,
    len: usize,
    label: u8,
    out: *mut *mut c_char,
) -> GraphicaStatus {
    guard(|| {
        let t = &borrow(topology, "topology")?.inner;
        let graph = build_graph(t, &states_arg(t, bits, len)?)?;
        let label = ConflictLabel::from_index(label as usize)?;
        let row = analyze(&graph, label, t)?;
        write_out(out, to_c_string(row.csv_line()), "out")
    })
}
