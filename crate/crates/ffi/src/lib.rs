//! C ABI over `iclust`.
//!
//! Every fallible function returns an [`IclustStatus`]; on failure the
//! message is available from [`iclust_last_error`] on the same thread.
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use iclust::cli::with_threads;
use iclust::data::{CategoricalData, ContinuousData, CountData, Dataset, Graph};
use iclust::fit::{resolve_prior, run_fit, Algorithm, FitConfig, FitResult};
use iclust::io::{load_dataset, Loaded};
use iclust::models::{detect_kind, ModelKind, Overrides};
use iclust::optim::GaParams;
use iclust::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IclustStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Input data malformed or inconsistent with the model.
    Data = 3,
    /// Option or hyperparameter out of range, or an argument outside its domain.
    Config = 4,
    Numerical = 5,
    Io = 6,
    Json = 7,
    /// Caller buffer too small; the required length is written back.
    BufferTooSmall = 8,
    Panic = 9,
}

/// Search algorithm selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IclustAlgorithm {
    Hybrid = 0,
    Genetic = 1,
    Multistart = 2,
}

/// Fit settings; obtain defaults from [`iclust_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IclustFitOptions {
    pub algorithm: IclustAlgorithm,
    /// Dirichlet concentration on cluster proportions.
    pub alpha: f64,
    /// Clusters in each initial partition.
    pub k_init: usize,
    pub seed: u64,
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    pub threads: usize,
    pub pop_size: usize,
    pub nb_max_gen: usize,
    pub prob_mutation: f64,
    pub k_max: usize,
    pub nb_start: usize,
}

/// Opaque dataset with the model kind chosen for it.
pub struct IclustDataset {
    loaded: Loaded,
}

/// Opaque fitted clustering.
pub struct IclustFit {
    result: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IclustStatus {
    match e {
        Error::Data(_) | Error::LengthMismatch { .. } => IclustStatus::Data,
        Error::Numerical { .. } => IclustStatus::Numerical,
        Error::Io(_) => IclustStatus::Io,
        Error::Json(_) => IclustStatus::Json,
        _ => IclustStatus::Config,
    }
}

enum Failure {
    Status(IclustStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(IclustStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IclustStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IclustStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            IclustStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or points to `len` readable elements.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` is null or a nul-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Status(IclustStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn product(a: usize, b: usize) -> Result<usize, Failure> {
    a.checked_mul(b)
        .ok_or_else(|| Failure::Status(IclustStatus::Data, format!("{a} x {b} overflows")))
}

/// # Safety
/// `out` is null or writable.
unsafe fn emit_dataset(out: *mut *mut IclustDataset, dataset: Dataset) -> Result<(), Failure> {
    let kind = detect_kind(&dataset);
    *out = Box::into_raw(Box::new(IclustDataset {
        loaded: Loaded {
            dataset,
            kind,
            view_kinds: Vec::new(),
        },
    }));
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iclust_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn iclust_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn iclust_fit_options_default() -> IclustFitOptions {
    let ga = GaParams::default();
    let config = FitConfig::default();
    IclustFitOptions {
        algorithm: IclustAlgorithm::Hybrid,
        alpha: config.alpha,
        k_init: ga.k_init,
        seed: ga.seed,
        threads: 0,
        pop_size: ga.pop_size,
        nb_max_gen: ga.nb_max_gen,
        prob_mutation: ga.prob_mutation,
        k_max: ga.k_max,
        nb_start: config.nb_start,
    }
}

/// Reads a file in any supported format. `model` is null for automatic
/// detection or one of `sbm`, `gmm`, `diag_gmm`, `lca`, `mom`.
///
/// # Safety
/// `path` and `model` are null or nul-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_dataset_load(path: *const c_char, model: *const c_char, out: *mut *mut IclustDataset) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = string(path, "path")?.ok_or_else(|| null("path"))?;
        let kind = string(model, "model")?.map(str::parse::<ModelKind>).transpose()?;
        let loaded = load_dataset(Path::new(path), kind)?;
        *out = Box::into_raw(Box::new(IclustDataset { loaded }));
        Ok(())
    })
}

/// Graph on `n` nodes from `m` edges `src[e] -> dst[e]`.
///
/// # Safety
/// `src` and `dst` hold `m` elements; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_dataset_from_edges(
    n: usize,
    src: *const u32,
    dst: *const u32,
    m: usize,
    directed: bool,
    out: *mut *mut IclustDataset,
) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = slice(src, m, "src")?;
        let dst = slice(dst, m, "dst")?;
        let edges = src.iter().zip(dst).map(|(&a, &b)| (a as usize, b as usize));
        let (graph, _): (Graph, _) = Graph::from_edges(n, edges, directed)?;
        emit_dataset(out, Dataset::Graph(graph))
    })
}

/// Real-valued `n × p` table, row-major.
///
/// # Safety
/// `values` holds `n * p` elements; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_dataset_from_continuous(n: usize, p: usize, values: *const f64, out: *mut *mut IclustDataset) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let values = slice(values, product(n, p)?, "values")?;
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        emit_dataset(out, Dataset::Continuous(ContinuousData::new(names, n, values.to_vec())?))
    })
}

/// Categorical `n × p` table of codes, row-major; column `j` takes values
/// in `0..arities[j]`.
///
/// # Safety
/// `arities` holds `p` elements, `codes` holds `n * p`; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_dataset_from_categorical(
    n: usize,
    p: usize,
    arities: *const usize,
    codes: *const u32,
    out: *mut *mut IclustDataset,
) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let arities = slice(arities, p, "arities")?;
        let codes = slice(codes, product(n, p)?, "codes")?;
        let rows: Vec<Vec<u32>> = if p == 0 { vec![Vec::new(); n] } else { codes.chunks(p).map(<[u32]>::to_vec).collect() };
        emit_dataset(out, Dataset::Categorical(CategoricalData::from_codes(arities, &rows)?))
    })
}

/// Count `n × p` table, row-major.
///
/// # Safety
/// `counts` holds `n * p` elements; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_dataset_from_counts(n: usize, p: usize, counts: *const u64, out: *mut *mut IclustDataset) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let counts = slice(counts, product(n, p)?, "counts")?;
        let rows: Vec<Vec<u64>> = if p == 0 { vec![Vec::new(); n] } else { counts.chunks(p).map(<[u64]>::to_vec).collect() };
        let names = (1..=p).map(|j| format!("w{j}")).collect();
        emit_dataset(out, Dataset::Counts(CountData::from_dense(names, &rows)?))
    })
}

/// Number of objects in the dataset, or 0 for a null handle.
///
/// # Safety
/// `dataset` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iclust_dataset_n(dataset: *const IclustDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.loaded.dataset.n())
}

/// # Safety
/// `dataset` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iclust_dataset_free(dataset: *mut IclustDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fits the dataset. `options` null means defaults; `overrides` is null or
/// a list of `key=value` prior settings separated by `;`.
///
/// # Safety
/// Pointers are null or valid as described; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit(
    dataset: *const IclustDataset,
    options: *const IclustFitOptions,
    overrides: *const c_char,
    out: *mut *mut IclustFit,
) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dataset = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| iclust_fit_options_default());
        let items: Vec<&str> = string(overrides, "overrides")?
            .map(|s| s.split(';').map(str::trim).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default();
        let prior = resolve_prior(&dataset.loaded, &Overrides::parse(&items)?)?;
        let config = FitConfig {
            algorithm: match opts.algorithm {
                IclustAlgorithm::Hybrid => Algorithm::Hybrid,
                IclustAlgorithm::Genetic => Algorithm::Genetic,
                IclustAlgorithm::Multistart => Algorithm::Multistart,
            },
            alpha: opts.alpha,
            ga: GaParams {
                pop_size: opts.pop_size,
                nb_max_gen: opts.nb_max_gen,
                prob_mutation: opts.prob_mutation,
                k_max: opts.k_max,
                k_init: opts.k_init,
                seed: opts.seed,
            },
            nb_start: opts.nb_start,
        };
        let result = with_threads(opts.threads, || run_fit(&dataset.loaded.dataset, prior, &config))?;
        *out = Box::into_raw(Box::new(IclustFit { result }));
        Ok(())
    })
}

/// Parses a fit previously serialized with [`iclust_fit_to_json`].
///
/// # Safety
/// `json` is nul-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_from_json(json: *const c_char, out: *mut *mut IclustFit) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let json = string(json, "json")?.ok_or_else(|| null("json"))?;
        *out = Box::into_raw(Box::new(IclustFit {
            result: FitResult::from_json(json)?,
        }));
        Ok(())
    })
}

/// # Safety
/// `fit` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_free(fit: *mut IclustFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of objects, or 0 for a null handle.
///
/// # Safety
/// `fit` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_n(fit: *const IclustFit) -> usize {
    fit.as_ref().map_or(0, |f| f.result.n)
}

/// Number of clusters, or 0 for a null handle.
///
/// # Safety
/// `fit` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_k(fit: *const IclustFit) -> usize {
    fit.as_ref().map_or(0, |f| f.result.k)
}

/// Observational, partition and total ICL. Any output may be null.
///
/// # Safety
/// `fit` is a live handle; outputs are null or writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_icl(fit: *const IclustFit, obs: *mut f64, partition: *mut f64, total: *mut f64) -> IclustStatus {
    guard(|| {
        let icl = fit.as_ref().ok_or_else(|| null("fit"))?.result.icl;
        for (dst, v) in [(obs, icl.obs), (partition, icl.partition), (total, icl.total)] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `labels` holds `len` writable elements; `len` is writable.
unsafe fn write_labels(src: &[usize], labels: *mut usize, len: *mut usize) -> Result<(), Failure> {
    if len.is_null() {
        return Err(null("len"));
    }
    let capacity = *len;
    *len = src.len();
    if capacity < src.len() {
        return Err(Failure::Status(
            IclustStatus::BufferTooSmall,
            format!("buffer holds {capacity} labels, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if labels.is_null() {
            return Err(null("labels"));
        }
        std::slice::from_raw_parts_mut(labels, src.len()).copy_from_slice(src);
    }
    Ok(())
}

/// Copies the MAP labels into `labels`. On entry `*len` is the buffer
/// capacity; on return it is the number of objects.
///
/// # Safety
/// `fit` is a live handle; `labels` holds `*len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_labels(fit: *const IclustFit, labels: *mut usize, len: *mut usize) -> IclustStatus {
    guard(|| write_labels(&fit.as_ref().ok_or_else(|| null("fit"))?.result.labels, labels, len))
}

/// Labels of the `k`-cluster level of the merge path, `1 <= k <= K`.
/// Buffer convention as in [`iclust_fit_labels`].
///
/// # Safety
/// `fit` is a live handle; `labels` holds `*len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_cut(fit: *const IclustFit, k: usize, labels: *mut usize, len: *mut usize) -> IclustStatus {
    guard(|| {
        let cut = fit.as_ref().ok_or_else(|| null("fit"))?.result.cut(k)?;
        write_labels(&cut, labels, len)
    })
}

/// # Safety
/// `out` is writable.
unsafe fn emit_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    *out = CString::new(s)
        .map_err(|_| Failure::Status(IclustStatus::Json, "output contains a nul byte".into()))?
        .into_raw();
    Ok(())
}

/// Full fit as a JSON document; release with [`iclust_string_free`].
///
/// # Safety
/// `fit` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_to_json(fit: *const IclustFit, out: *mut *mut c_char) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit_string(fit.as_ref().ok_or_else(|| null("fit"))?.result.to_json()?, out)
    })
}

/// Point estimates as JSON; `view` is null, or names one view of a
/// combined model. Release with [`iclust_string_free`].
///
/// # Safety
/// `fit` is a live handle; `view` is null or nul-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_coef(fit: *const IclustFit, view: *const c_char, out: *mut *mut c_char) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let params = fit.result.coef(string(view, "view")?)?;
        emit_string(serde_json::to_string(&params).map_err(Error::from)?, out)
    })
}

/// Dendrogram of the merge path in Newick form; release with
/// [`iclust_string_free`].
///
/// # Safety
/// `fit` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn iclust_fit_newick(fit: *const IclustFit, out: *mut *mut c_char) -> IclustStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit_string(fit.as_ref().ok_or_else(|| null("fit"))?.result.hierarchy.newick(), out)
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iclust_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
