//! C ABI for the rareuq rare-event estimation library.
//!
//! Conventions shared by every function here:
//!
//! - Fallible calls return [`RareuqStatus`]. Anything other than
//!   `Ok` left the output parameters untouched; call
//!   [`rareuq_last_error_message`] on the same thread for the detail.
//! - Handles (`RareuqModel`, `RareuqFitted`, `RareuqBatch`) are opaque
//!   pointers created by this library and released with the matching
//!   `*_free`. Freeing null is a no-op; double-freeing is undefined
//!   behaviour, as in C.
//! - Strings cross the boundary as NUL-terminated UTF-8. Strings the
//!   library allocates are released with `rareuq_string_free`.
//! - Sample data crosses as a flat row-major `double` buffer:
//!   `count` points of `dim` coordinates each.
//! - Randomized routines take an explicit `seed` and are deterministic
//!   in it, independent of thread count.
//! - Pointer arguments must stay valid for the duration of the call;
//!   nulls are rejected with `NullArgument` except where a function
//!   documents accepting them.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rareuq::{
    crude_estimate, fit_mle, is_estimate, lr_uq_interval, run_batch, BootstrapKind,
    BootstrapScheme, Error, EstimateKind, EstimateWithCI, ExperimentBatch, FittedModel,
    ParametricModel, PerformanceFunction, RngStream, Samples,
};

/// Outcome of a fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RareuqStatus {
    /// The call succeeded and all output parameters are set.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// JSON input could not be parsed or did not describe a model.
    Json = 3,
    /// An argument value was rejected (bad parameter, dimension
    /// mismatch, empty or degenerate data, unknown scheme code).
    InvalidInput = 4,
    /// The computation itself failed (callback error, I/O, resampling
    /// stuck, mismatched models).
    Runtime = 5,
    /// A panic was caught at the boundary; state may be inconsistent.
    Panic = 6,
}

/// Opaque parametric input model handle.
pub struct RareuqModel {
    _private: [u8; 0],
}

/// Opaque fitted-model handle: parameter estimates plus the Fisher
/// information needed by the asymptotic bootstrap schemes.
pub struct RareuqFitted {
    _private: [u8; 0],
}

/// Opaque handle to a stored batch of importance-sampling draws with
/// their performance outputs and sampling log-densities.
pub struct RareuqBatch {
    _private: [u8; 0],
}

/// Point estimate with a confidence interval. The standard error field
/// avoids the name `stderr`, which C's stdio.h claims as a macro.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RareuqEstimate {
    pub point: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    /// Nominal miscoverage of `[lower, upper]`.
    pub alpha: f64,
    /// `RAREUQ_ESTIMATE_SIMULATION_ONLY` or
    /// `RAREUQ_ESTIMATE_BOOTSTRAP_QUANTILE`.
    pub kind: i32,
}

/// Interval from the central limit theorem on one batch; covers
/// simulation noise only.
pub const RAREUQ_ESTIMATE_SIMULATION_ONLY: i32 = 0;
/// Interval from bootstrap replicate quantiles; covers input-model
/// uncertainty.
pub const RAREUQ_ESTIMATE_BOOTSTRAP_QUANTILE: i32 = 1;

/// Resample the original data with replacement and refit.
pub const RAREUQ_BOOTSTRAP_PLAIN: i32 = 0;
/// Draw fresh data of the original size from the fitted model and refit.
pub const RAREUQ_BOOTSTRAP_PARAMETRIC: i32 = 1;
/// Draw parameters from the closed-form Fisher normal approximation.
pub const RAREUQ_BOOTSTRAP_CLOSED_FISHER: i32 = 2;
/// Draw parameters from the empirical Fisher normal approximation.
pub const RAREUQ_BOOTSTRAP_EMPIRICAL_FISHER: i32 = 3;

/// Performance function supplied by the caller.
///
/// Receives one sample point (`dim` doubles) and the context pointer
/// passed to `rareuq_run_batch`. Returning NaN reports evaluation
/// failure and aborts the batch. Batches are filled from multiple
/// threads, so the callback and its context must be safe to call
/// concurrently.
pub type RareuqPerfFn = Option<extern "C" fn(point: *const f64, dim: usize, ctx: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: RareuqStatus, message: impl std::fmt::Display) -> RareuqStatus {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).unwrap_or_default());
    status
}

fn fail_error(err: &Error) -> RareuqStatus {
    let status = match err {
        Error::Json(_) => RareuqStatus::Json,
        Error::DimensionMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidArgument(_)
        | Error::EmptyData
        | Error::DegenerateData(_)
        | Error::Config(_) => RareuqStatus::InvalidInput,
        _ => RareuqStatus::Runtime,
    };
    fail(status, err)
}

fn guarded(body: impl FnOnce() -> RareuqStatus) -> RareuqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RareuqStatus::Panic, format!("panic: {message}"))
        }
    }
}

/// Borrows the payload behind an opaque handle. Sound because every
/// handle of type `H` is only ever created from a `Box<T>` for the one
/// `T` paired with it below.
unsafe fn payload<'a, H, T>(handle: *const H) -> Option<&'a T> {
    (handle as *const T).as_ref()
}

fn model_handle(model: ParametricModel) -> *mut RareuqModel {
    Box::into_raw(Box::new(model)) as *mut RareuqModel
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, RareuqStatus> {
    if ptr.is_null() {
        return Err(fail(RareuqStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| fail(RareuqStatus::Utf8, format!("{name}: {e}")))
}

fn estimate_out(estimate: &EstimateWithCI) -> RareuqEstimate {
    RareuqEstimate {
        point: estimate.point,
        std_error: estimate.stderr,
        lower: estimate.lower,
        upper: estimate.upper,
        alpha: estimate.alpha,
        kind: match estimate.kind {
            EstimateKind::CltSimulationOnly => RAREUQ_ESTIMATE_SIMULATION_ONLY,
            EstimateKind::BootstrapQuantile => RAREUQ_ESTIMATE_BOOTSTRAP_QUANTILE,
        },
    }
}

macro_rules! require_mut {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => return fail(RareuqStatus::NullArgument, concat!($name, " is null")),
        }
    };
}

macro_rules! require_handle {
    ($ptr:expr, $ty:ty, $name:literal) => {
        match unsafe { payload::<_, $ty>($ptr) } {
            Some(r) => r,
            None => return fail(RareuqStatus::NullArgument, concat!($name, " is null")),
        }
    };
}

/// Library version as a static string. Do not free.
#[no_mangle]
pub extern "C" fn rareuq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread, or an
/// empty string if none. The pointer stays valid until the next failing
/// call on this thread. Do not free.
#[no_mangle]
pub extern "C" fn rareuq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string allocated by this library.
#[no_mangle]
pub unsafe extern "C" fn rareuq_string_free(string: *mut c_char) {
    if !string.is_null() {
        drop(CString::from_raw(string));
    }
}

/// Creates an exponential model with the given mean.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_exponential(
    mean: f64,
    out_model: *mut *mut RareuqModel,
) -> RareuqStatus {
    guarded(|| {
        let out = require_mut!(out_model, "out_model");
        match ParametricModel::exponential(mean) {
            Ok(model) => {
                *out = model_handle(model);
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Creates a Gaussian model with the given mean and standard deviation.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_gaussian(
    mean: f64,
    stdev: f64,
    out_model: *mut *mut RareuqModel,
) -> RareuqStatus {
    guarded(|| {
        let out = require_mut!(out_model, "out_model");
        match ParametricModel::gaussian(mean, stdev) {
            Ok(model) => {
                *out = model_handle(model);
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Creates a product model over independent components. The components
/// are copied; the caller still owns (and frees) the inputs.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_product(
    components: *const *const RareuqModel,
    count: usize,
    out_model: *mut *mut RareuqModel,
) -> RareuqStatus {
    guarded(|| {
        let out = require_mut!(out_model, "out_model");
        if components.is_null() {
            return fail(RareuqStatus::NullArgument, "components is null");
        }
        let handles = std::slice::from_raw_parts(components, count);
        let mut parts = Vec::with_capacity(count);
        for (i, handle) in handles.iter().enumerate() {
            match payload::<_, ParametricModel>(*handle) {
                Some(model) => parts.push(model.clone()),
                None => return fail(RareuqStatus::NullArgument, format!("component {i} is null")),
            }
        }
        match ParametricModel::product(parts) {
            Ok(model) => {
                *out = model_handle(model);
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Parses a model from its JSON form.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_from_json(
    json: *const c_char,
    out_model: *mut *mut RareuqModel,
) -> RareuqStatus {
    guarded(|| {
        let out = require_mut!(out_model, "out_model");
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        match serde_json::from_str::<ParametricModel>(text) {
            Ok(model) => {
                *out = model_handle(model);
                RareuqStatus::Ok
            }
            Err(e) => fail(RareuqStatus::Json, e),
        }
    })
}

/// Serializes a model to JSON. The caller frees the string with
/// `rareuq_string_free`.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_to_json(
    model: *const RareuqModel,
    out_json: *mut *mut c_char,
) -> RareuqStatus {
    guarded(|| {
        let model = require_handle!(model, ParametricModel, "model");
        let out = require_mut!(out_json, "out_json");
        match serde_json::to_string(model) {
            Ok(text) => match CString::new(text) {
                Ok(cstring) => {
                    *out = cstring.into_raw();
                    RareuqStatus::Ok
                }
                Err(e) => fail(RareuqStatus::Runtime, e),
            },
            Err(e) => fail(RareuqStatus::Json, e),
        }
    })
}

/// Writes the model's sample dimension.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_dim(
    model: *const RareuqModel,
    out_dim: *mut usize,
) -> RareuqStatus {
    guarded(|| {
        let model = require_handle!(model, ParametricModel, "model");
        let out = require_mut!(out_dim, "out_dim");
        *out = model.dim();
        RareuqStatus::Ok
    })
}

/// Evaluates the model's log-density at one point of `dim` coordinates.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_log_density(
    model: *const RareuqModel,
    point: *const f64,
    dim: usize,
    out_log_density: *mut f64,
) -> RareuqStatus {
    guarded(|| {
        let model = require_handle!(model, ParametricModel, "model");
        let out = require_mut!(out_log_density, "out_log_density");
        if point.is_null() {
            return fail(RareuqStatus::NullArgument, "point is null");
        }
        let coords = std::slice::from_raw_parts(point, dim);
        match model.log_density(coords) {
            Ok(value) => {
                *out = value;
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Creates the exponentially tilted version of a model, one tilt
/// coordinate per sample coordinate.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_tilt(
    model: *const RareuqModel,
    tilt: *const f64,
    dim: usize,
    out_model: *mut *mut RareuqModel,
) -> RareuqStatus {
    guarded(|| {
        let model = require_handle!(model, ParametricModel, "model");
        let out = require_mut!(out_model, "out_model");
        if tilt.is_null() {
            return fail(RareuqStatus::NullArgument, "tilt is null");
        }
        let coords = std::slice::from_raw_parts(tilt, dim);
        match model.exponential_tilt(coords) {
            Ok(tilted) => {
                *out = model_handle(tilted);
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Releases a model handle.
#[no_mangle]
pub unsafe extern "C" fn rareuq_model_free(model: *mut RareuqModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| {
            drop(Box::from_raw(model as *mut ParametricModel));
        }));
    }
}

/// Fits the template model's family to data by maximum likelihood.
/// `data` holds `count` points of the template's dimension, row-major.
/// Only the template's family matters; its parameter values do not.
#[no_mangle]
pub unsafe extern "C" fn rareuq_fit(
    template_model: *const RareuqModel,
    data: *const f64,
    count: usize,
    out_fitted: *mut *mut RareuqFitted,
) -> RareuqStatus {
    guarded(|| {
        let template = require_handle!(template_model, ParametricModel, "template_model");
        let out = require_mut!(out_fitted, "out_fitted");
        if data.is_null() {
            return fail(RareuqStatus::NullArgument, "data is null");
        }
        let dim = template.dim();
        let values = std::slice::from_raw_parts(data, count * dim).to_vec();
        let samples = match Samples::new(dim, values) {
            Ok(s) => s,
            Err(e) => return fail_error(&e),
        };
        match fit_mle(&template.family(), &samples) {
            Ok(fitted) => {
                *out = Box::into_raw(Box::new(fitted)) as *mut RareuqFitted;
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Copies the fitted model out as a fresh model handle.
#[no_mangle]
pub unsafe extern "C" fn rareuq_fitted_model(
    fitted: *const RareuqFitted,
    out_model: *mut *mut RareuqModel,
) -> RareuqStatus {
    guarded(|| {
        let fitted = require_handle!(fitted, FittedModel, "fitted");
        let out = require_mut!(out_model, "out_model");
        *out = model_handle(fitted.model.clone());
        RareuqStatus::Ok
    })
}

/// Writes the number of data points the model was fitted on.
#[no_mangle]
pub unsafe extern "C" fn rareuq_fitted_sample_count(
    fitted: *const RareuqFitted,
    out_count: *mut usize,
) -> RareuqStatus {
    guarded(|| {
        let fitted = require_handle!(fitted, FittedModel, "fitted");
        let out = require_mut!(out_count, "out_count");
        *out = fitted.sample_count;
        RareuqStatus::Ok
    })
}

/// Releases a fitted-model handle.
#[no_mangle]
pub unsafe extern "C" fn rareuq_fitted_free(fitted: *mut RareuqFitted) {
    if !fitted.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| {
            drop(Box::from_raw(fitted as *mut FittedModel));
        }));
    }
}

struct CallbackPerf {
    callback: extern "C" fn(*const f64, usize, *mut c_void) -> f64,
    ctx: *mut c_void,
}

// The run_batch contract requires the callback to tolerate concurrent
// calls; see RareuqPerfFn.
unsafe impl Sync for CallbackPerf {}

impl PerformanceFunction for CallbackPerf {
    fn name(&self) -> &str {
        "c-callback"
    }

    fn evaluate(&self, point: &[f64]) -> Result<f64, String> {
        let value = (self.callback)(point.as_ptr(), point.len(), self.ctx);
        if value.is_nan() {
            Err("callback returned NaN".into())
        } else {
            Ok(value)
        }
    }
}

/// Draws `n` points from `sampling_model`, evaluates the performance
/// callback on each, and stores the batch together with the densities
/// needed for importance-sampling estimates against `nominal_model`.
/// Pass the same model for both to sample crudely. Deterministic in
/// `seed` regardless of thread count.
#[no_mangle]
pub unsafe extern "C" fn rareuq_run_batch(
    sampling_model: *const RareuqModel,
    nominal_model: *const RareuqModel,
    perf: RareuqPerfFn,
    perf_ctx: *mut c_void,
    n: usize,
    seed: u64,
    out_batch: *mut *mut RareuqBatch,
) -> RareuqStatus {
    guarded(|| {
        let sampling = require_handle!(sampling_model, ParametricModel, "sampling_model");
        let nominal = require_handle!(nominal_model, ParametricModel, "nominal_model");
        let out = require_mut!(out_batch, "out_batch");
        let callback = match perf {
            Some(f) => f,
            None => return fail(RareuqStatus::NullArgument, "perf is null"),
        };
        let perf = CallbackPerf {
            callback,
            ctx: perf_ctx,
        };
        match run_batch(sampling, nominal, &perf, n, &RngStream::root(seed)) {
            Ok(batch) => {
                *out = Box::into_raw(Box::new(batch)) as *mut RareuqBatch;
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Writes the number of stored draws.
#[no_mangle]
pub unsafe extern "C" fn rareuq_batch_n(
    batch: *const RareuqBatch,
    out_n: *mut usize,
) -> RareuqStatus {
    guarded(|| {
        let batch = require_handle!(batch, ExperimentBatch, "batch");
        let out = require_mut!(out_n, "out_n");
        *out = batch.n();
        RareuqStatus::Ok
    })
}

/// Saves a batch as a CSV of draws plus a JSON sidecar holding the
/// models. Both paths are created or truncated.
#[no_mangle]
pub unsafe extern "C" fn rareuq_batch_save(
    batch: *const RareuqBatch,
    csv_path: *const c_char,
    sidecar_path: *const c_char,
) -> RareuqStatus {
    guarded(|| {
        let batch = require_handle!(batch, ExperimentBatch, "batch");
        let csv = match str_arg(csv_path, "csv_path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let sidecar = match str_arg(sidecar_path, "sidecar_path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match batch.save(Path::new(csv), Path::new(sidecar)) {
            Ok(()) => RareuqStatus::Ok,
            Err(e) => fail_error(&e),
        }
    })
}

/// Loads a batch saved by `rareuq_batch_save`.
#[no_mangle]
pub unsafe extern "C" fn rareuq_batch_load(
    csv_path: *const c_char,
    sidecar_path: *const c_char,
    out_batch: *mut *mut RareuqBatch,
) -> RareuqStatus {
    guarded(|| {
        let out = require_mut!(out_batch, "out_batch");
        let csv = match str_arg(csv_path, "csv_path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let sidecar = match str_arg(sidecar_path, "sidecar_path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match ExperimentBatch::load(Path::new(csv), Path::new(sidecar)) {
            Ok(batch) => {
                *out = Box::into_raw(Box::new(batch)) as *mut RareuqBatch;
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Releases a batch handle.
#[no_mangle]
pub unsafe extern "C" fn rareuq_batch_free(batch: *mut RareuqBatch) {
    if !batch.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| {
            drop(Box::from_raw(batch as *mut ExperimentBatch));
        }));
    }
}

/// Importance-sampling estimate of the mean performance under
/// `target_model`, reweighting the stored batch. Pass a null target to
/// estimate under the batch's own nominal model. The interval is the
/// CLT one: simulation noise only.
#[no_mangle]
pub unsafe extern "C" fn rareuq_is_estimate(
    batch: *const RareuqBatch,
    target_model: *const RareuqModel,
    alpha: f64,
    out_estimate: *mut RareuqEstimate,
) -> RareuqStatus {
    guarded(|| {
        let batch = require_handle!(batch, ExperimentBatch, "batch");
        let out = require_mut!(out_estimate, "out_estimate");
        let target = match payload::<_, ParametricModel>(target_model) {
            Some(model) => model,
            None => batch.nominal_model(),
        };
        match is_estimate(batch, target, alpha) {
            Ok(estimate) => {
                *out = estimate_out(&estimate);
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Sample-mean estimate for a batch drawn directly from its nominal
/// model. Fails on tilted batches; use `rareuq_is_estimate` there.
#[no_mangle]
pub unsafe extern "C" fn rareuq_crude_estimate(
    batch: *const RareuqBatch,
    alpha: f64,
    out_estimate: *mut RareuqEstimate,
) -> RareuqStatus {
    guarded(|| {
        let batch = require_handle!(batch, ExperimentBatch, "batch");
        let out = require_mut!(out_estimate, "out_estimate");
        match crude_estimate(batch, alpha) {
            Ok(estimate) => {
                *out = estimate_out(&estimate);
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Input-uncertainty interval by bootstrap with likelihood-ratio reuse:
/// resamples parameters from `fitted` under the given scheme, then
/// reweights the one stored batch per replicate, with no new
/// performance evaluations.
///
/// `scheme` is one of the `RAREUQ_BOOTSTRAP_*` codes. `data` holds the
/// original fitting data (`data_count` rows, like `rareuq_fit`) and is
/// required for `RAREUQ_BOOTSTRAP_PLAIN`; the other schemes accept null.
/// On success writes the estimate whose `[lower, upper]` is the
/// replicate quantile interval at miscoverage `alpha`, and, if
/// `out_replicates` is non-null, fills it with `replicate_count`
/// replicate estimates.
#[no_mangle]
pub unsafe extern "C" fn rareuq_lr_uq_interval(
    batch: *const RareuqBatch,
    fitted: *const RareuqFitted,
    data: *const f64,
    data_count: usize,
    scheme: i32,
    replicate_count: usize,
    alpha: f64,
    seed: u64,
    out_estimate: *mut RareuqEstimate,
    out_replicates: *mut f64,
) -> RareuqStatus {
    guarded(|| {
        let batch = require_handle!(batch, ExperimentBatch, "batch");
        let fitted = require_handle!(fitted, FittedModel, "fitted");
        let out = require_mut!(out_estimate, "out_estimate");
        let kind = match scheme {
            RAREUQ_BOOTSTRAP_PLAIN => BootstrapKind::Plain,
            RAREUQ_BOOTSTRAP_PARAMETRIC => BootstrapKind::Parametric,
            RAREUQ_BOOTSTRAP_CLOSED_FISHER => BootstrapKind::AsymptoticClosedFisher,
            RAREUQ_BOOTSTRAP_EMPIRICAL_FISHER => BootstrapKind::AsymptoticEmpiricalFisher,
            other => {
                return fail(
                    RareuqStatus::InvalidInput,
                    format!("unknown bootstrap scheme code {other}"),
                )
            }
        };
        let samples;
        let data = if data.is_null() {
            None
        } else {
            let dim = fitted.model.dim();
            let values = std::slice::from_raw_parts(data, data_count * dim).to_vec();
            samples = match Samples::new(dim, values) {
                Ok(s) => s,
                Err(e) => return fail_error(&e),
            };
            Some(&samples)
        };
        let scheme = match BootstrapScheme::new(kind, replicate_count) {
            Ok(s) => s,
            Err(e) => return fail_error(&e),
        };
        match lr_uq_interval(batch, fitted, data, &scheme, alpha, &RngStream::root(seed)) {
            Ok((estimate, replicates)) => {
                if !out_replicates.is_null() {
                    let buffer = std::slice::from_raw_parts_mut(out_replicates, replicate_count);
                    buffer.copy_from_slice(&replicates.estimates);
                }
                *out = estimate_out(&estimate);
                RareuqStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}
