//! C ABI for the autosample library.
//!
//! Conventions: every function returns an [`AsStatus`] code; datasets, splits
//! and models are opaque handles owned by the library and released with the
//! matching `_free` function; string arguments are NUL-terminated UTF-8; the
//! message behind the most recent error on the calling thread is available
//! from [`autosample_last_error_message`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use autosample::data::{
    generate_synthetic, load_interactions, read_split, split_dataset, DataSplit,
};
use autosample::error::Error;
use autosample::eval::evaluate;
use autosample::model::{init_params, ModelKind};
use autosample::rng::Seeds;
use autosample::samplers::SamplerSpec;
use autosample::search::run_search;
use autosample::trainer::{retrain, train_fixed, TrainingConfig};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A spec or file failed to parse.
    Parse = 3,
    /// A domain precondition was violated.
    Domain = 4,
    /// File system failure.
    Io = 5,
    /// Training aborted (e.g. non-finite loss).
    Train = 6,
    /// Unexpected internal failure; see the last error message.
    Internal = 7,
}

/// Opaque interaction dataset.
pub struct AsDataset(autosample::data::InteractionDataset);

/// Opaque train/valid/test split.
pub struct AsSplit(DataSplit);

/// Opaque model (embedding tables plus scoring-function tag).
pub struct AsModel(autosample::model::ModelParams);

/// Metric values for one evaluation, averaged over evaluable users.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsMetrics {
    pub k: u32,
    pub recall: f64,
    pub ndcg: f64,
    pub precision: f64,
    pub hit_ratio: f64,
    pub users_evaluated: u64,
}

/// Training configuration; obtain defaults from
/// [`autosample_train_config_default`] and adjust fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsTrainConfig {
    pub epochs: u64,
    pub batch_size: u64,
    pub lr_w: f64,
    pub lr_theta: f64,
    pub l2: f64,
    /// Negatives per positive.
    pub negatives: u64,
    pub dim: u64,
    pub eval_every: u64,
    pub patience: u64,
    pub seed: u64,
    /// 0 = inner product, 1 = graph propagation (see `lightgcn_layers`).
    pub model_kind: u32,
    pub lightgcn_layers: u32,
    pub tau0: f64,
    pub tau_min: f64,
    pub tau_decay: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_for(err: &Error) -> AsStatus {
    match err {
        Error::Parse { .. } | Error::Config(_) | Error::Json(_) => AsStatus::Parse,
        Error::Domain(_) | Error::Checkpoint(_) => AsStatus::Domain,
        Error::NonFiniteLoss { .. } => AsStatus::Train,
        Error::Io(_) => AsStatus::Io,
    }
}

fn fail(err: Error) -> AsStatus {
    let status = status_for(&err);
    set_error(err.to_string());
    status
}

/// Run a fallible body with panic containment.
fn guarded<F: FnOnce() -> AsStatus>(body: F) -> AsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            AsStatus::Internal
        }
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, AsStatus> {
    if ptr.is_null() {
        set_error("NULL string argument".into());
        return Err(AsStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8".into());
        AsStatus::InvalidUtf8
    })
}

fn train_config(cfg: &AsTrainConfig) -> TrainingConfig {
    let mut out = TrainingConfig {
        epochs: cfg.epochs as usize,
        batch_size: cfg.batch_size as usize,
        lr_w: cfg.lr_w,
        lr_theta: cfg.lr_theta,
        l2: cfg.l2,
        negatives: cfg.negatives as usize,
        dim: cfg.dim as usize,
        eval_every: cfg.eval_every as usize,
        patience: cfg.patience as usize,
        ..TrainingConfig::default()
    };
    out.search.tau0 = cfg.tau0;
    out.search.tau_min = cfg.tau_min;
    out.search.tau_decay = cfg.tau_decay;
    out
}

fn model_kind(cfg: &AsTrainConfig) -> Result<ModelKind, AsStatus> {
    match cfg.model_kind {
        0 => Ok(ModelKind::Mf),
        1 => Ok(ModelKind::LightGcn {
            layers: cfg.lightgcn_layers as usize,
        }),
        other => {
            set_error(format!(
                "unknown model kind {other}; use 0 (mf) or 1 (lightgcn)"
            ));
            Err(AsStatus::Parse)
        }
    }
}

fn metrics_out(report: &autosample::eval::MetricsReport) -> AsMetrics {
    AsMetrics {
        k: report.k as u32,
        recall: report.recall,
        ndcg: report.ndcg,
        precision: report.precision,
        hit_ratio: report.hit_ratio,
        users_evaluated: report.users_evaluated as u64,
    }
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn autosample_version() -> *const c_char {
    concat!("autosample ", env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn autosample_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Default training configuration (30 epochs, batch 1024, dim 64, one
/// negative per positive, seed 42, inner-product model).
#[no_mangle]
pub extern "C" fn autosample_train_config_default() -> AsTrainConfig {
    let cfg = TrainingConfig::default();
    AsTrainConfig {
        epochs: cfg.epochs as u64,
        batch_size: cfg.batch_size as u64,
        lr_w: cfg.lr_w,
        lr_theta: cfg.lr_theta,
        l2: cfg.l2,
        negatives: cfg.negatives as u64,
        dim: cfg.dim as u64,
        eval_every: cfg.eval_every as u64,
        patience: cfg.patience as u64,
        seed: 42,
        model_kind: 0,
        lightgcn_layers: 3,
        tau0: cfg.search.tau0,
        tau_min: cfg.search.tau_min,
        tau_decay: cfg.search.tau_decay,
    }
}

/// Generate a synthetic dataset with planted block structure.
///
/// # Safety
/// `out` must be a valid pointer to an `AsDataset*` slot.
#[no_mangle]
pub unsafe extern "C" fn autosample_dataset_generate(
    users: u64,
    items: u64,
    blocks: u64,
    density: f64,
    noise: f64,
    seed: u64,
    out: *mut *mut AsDataset,
) -> AsStatus {
    guarded(|| {
        if out.is_null() {
            set_error("NULL output pointer".into());
            return AsStatus::NullArgument;
        }
        match generate_synthetic(
            users as usize,
            items as usize,
            blocks as usize,
            density,
            noise,
            seed,
        ) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(AsDataset(ds)));
                AsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a `user<TAB>item` interaction file with iterative degree filtering.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn autosample_dataset_load(
    path: *const c_char,
    min_count: u64,
    out: *mut *mut AsDataset,
) -> AsStatus {
    guarded(|| {
        if out.is_null() {
            set_error("NULL output pointer".into());
            return AsStatus::NullArgument;
        }
        let path = match utf8_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_interactions(Path::new(path), min_count as usize) {
            Ok(loaded) => {
                *out = Box::into_raw(Box::new(AsDataset(loaded.data)));
                AsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

macro_rules! dataset_getter {
    ($name:ident, $method:ident) => {
        /// # Safety
        /// `ds` must be a live dataset handle and `out` a valid slot.
        #[no_mangle]
        pub unsafe extern "C" fn $name(ds: *const AsDataset, out: *mut u64) -> AsStatus {
            if ds.is_null() || out.is_null() {
                set_error("NULL argument".into());
                return AsStatus::NullArgument;
            }
            *out = (*ds).0.$method() as u64;
            AsStatus::Ok
        }
    };
}

dataset_getter!(autosample_dataset_num_users, num_users);
dataset_getter!(autosample_dataset_num_items, num_items);
dataset_getter!(autosample_dataset_num_positives, len);

/// # Safety
/// `ds` must be a handle produced by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn autosample_dataset_free(ds: *mut AsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Randomly partition a dataset 3:1:1 into train/valid/test.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn autosample_split_create(
    ds: *const AsDataset,
    seed: u64,
    out: *mut *mut AsSplit,
) -> AsStatus {
    guarded(|| {
        if ds.is_null() || out.is_null() {
            set_error("NULL argument".into());
            return AsStatus::NullArgument;
        }
        match split_dataset(&(*ds).0, (3, 1, 1), seed) {
            Ok(split) => {
                *out = Box::into_raw(Box::new(AsSplit(split)));
                AsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a split directory written by the CLI `split` command.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn autosample_split_load(
    dir: *const c_char,
    out: *mut *mut AsSplit,
) -> AsStatus {
    guarded(|| {
        if out.is_null() {
            set_error("NULL output pointer".into());
            return AsStatus::NullArgument;
        }
        let dir = match utf8_arg(dir) {
            Ok(d) => d,
            Err(status) => return status,
        };
        match read_split(Path::new(dir)) {
            Ok(split) => {
                *out = Box::into_raw(Box::new(AsSplit(split)));
                AsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `split` must be a handle produced by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn autosample_split_free(split: *mut AsSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// Train with one fixed sampler spec (`"rns"`, `"pns:beta=0.75"`,
/// `"dns:c=10"`, `"aobpr:lambda=64"`). On success `out_model` receives the
/// best-validation snapshot and `out_metrics` its test-split report.
///
/// # Safety
/// All pointers must be valid; `sampler_spec` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn autosample_train_fixed(
    split: *const AsSplit,
    sampler_spec: *const c_char,
    cfg: *const AsTrainConfig,
    out_model: *mut *mut AsModel,
    out_metrics: *mut AsMetrics,
) -> AsStatus {
    guarded(|| {
        if split.is_null() || cfg.is_null() || out_model.is_null() || out_metrics.is_null() {
            set_error("NULL argument".into());
            return AsStatus::NullArgument;
        }
        let spec_text = match utf8_arg(sampler_spec) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let spec: SamplerSpec = match spec_text.parse() {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let kind = match model_kind(&*cfg) {
            Ok(k) => k,
            Err(status) => return status,
        };
        let split = &(*split).0;
        let tc = train_config(&*cfg);
        let seeds = Seeds::new((*cfg).seed);
        let params = match init_params(
            split.num_users(),
            split.num_items(),
            tc.dim,
            kind,
            seeds.scoped("model").seed("init"),
        ) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match train_fixed(split, &spec, &params, &tc, &seeds.scoped("train")) {
            Ok(result) => {
                *out_metrics = metrics_out(&result.test);
                *out_model = Box::into_raw(Box::new(AsModel(result.params)));
                AsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Search over a comma-separated list of sampler specs, then retrain with the
/// winner warm-started from the best search tables. `alpha_out` must hold one
/// slot per spec; `selected_out` receives the winning index.
///
/// # Safety
/// All pointers must be valid; `alpha_out` must have room for every spec.
#[no_mangle]
pub unsafe extern "C" fn autosample_auto(
    split: *const AsSplit,
    specs_csv: *const c_char,
    cfg: *const AsTrainConfig,
    alpha_out: *mut f64,
    alpha_len: u64,
    selected_out: *mut u64,
    out_model: *mut *mut AsModel,
    out_metrics: *mut AsMetrics,
) -> AsStatus {
    guarded(|| {
        if split.is_null()
            || cfg.is_null()
            || alpha_out.is_null()
            || selected_out.is_null()
            || out_model.is_null()
            || out_metrics.is_null()
        {
            set_error("NULL argument".into());
            return AsStatus::NullArgument;
        }
        let specs_text = match utf8_arg(specs_csv) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let specs = match SamplerSpec::parse_list(specs_text) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        if specs.len() as u64 > alpha_len {
            set_error(format!(
                "alpha buffer holds {alpha_len} entries but {} specs were given",
                specs.len()
            ));
            return AsStatus::Domain;
        }
        let kind = match model_kind(&*cfg) {
            Ok(k) => k,
            Err(status) => return status,
        };
        let split = &(*split).0;
        let tc = train_config(&*cfg);
        let seeds = Seeds::new((*cfg).seed);
        let params = match init_params(
            split.num_users(),
            split.num_items(),
            tc.dim,
            kind,
            seeds.scoped("model").seed("init"),
        ) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let outcome = match run_search(split, &specs, &params, &tc, &seeds.scoped("search")) {
            Ok(o) => o,
            Err(e) => return fail(e),
        };
        for (i, &a) in outcome.alpha_star.iter().enumerate() {
            *alpha_out.add(i) = a;
        }
        match retrain(
            split,
            &outcome.alpha_star,
            &specs,
            &outcome.best_params,
            &tc,
            &seeds.scoped("retrain"),
        ) {
            Ok((result, selected)) => {
                *selected_out = selected as u64;
                *out_metrics = metrics_out(&result.test);
                *out_model = Box::into_raw(Box::new(AsModel(result.params)));
                AsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Evaluate a model on one split: `which` 0 scores validation (train items
/// excluded), 1 scores test (train and validation items excluded).
///
/// # Safety
/// All pointers must be valid handles/slots.
#[no_mangle]
pub unsafe extern "C" fn autosample_evaluate(
    model: *const AsModel,
    split: *const AsSplit,
    which: u32,
    k: u32,
    out: *mut AsMetrics,
) -> AsStatus {
    guarded(|| {
        if model.is_null() || split.is_null() || out.is_null() {
            set_error("NULL argument".into());
            return AsStatus::NullArgument;
        }
        let split = &(*split).0;
        let params = &(*model).0;
        let result = match which {
            0 => evaluate(params, &split.train, &split.valid, None, k as usize),
            1 => evaluate(
                params,
                &split.train,
                &split.test,
                Some(&split.valid),
                k as usize,
            ),
            other => {
                set_error(format!("which must be 0 (valid) or 1 (test), got {other}"));
                return AsStatus::Domain;
            }
        };
        match result {
            Ok(report) => {
                *out = metrics_out(&report);
                AsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Persist a model checkpoint.
///
/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn autosample_model_save(
    model: *const AsModel,
    path: *const c_char,
) -> AsStatus {
    guarded(|| {
        if model.is_null() {
            set_error("NULL model".into());
            return AsStatus::NullArgument;
        }
        let path = match utf8_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match autosample::checkpoint::save(&(*model).0, Path::new(path)) {
            Ok(()) => AsStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Load a model checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid slot.
#[no_mangle]
pub unsafe extern "C" fn autosample_model_load(
    path: *const c_char,
    out: *mut *mut AsModel,
) -> AsStatus {
    guarded(|| {
        if out.is_null() {
            set_error("NULL output pointer".into());
            return AsStatus::NullArgument;
        }
        let path = match utf8_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match autosample::checkpoint::load(Path::new(path)) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(AsModel(params)));
                AsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must be a handle produced by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn autosample_model_free(model: *mut AsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
