//! C ABI for the chainstitch simulator.
//!
//! The surface is deliberately small: parse an instance from JSON into an
//! opaque handle, query it, run a mechanism or a benchmark on one seeded
//! realization, and free what you were given. Strings returned by this
//! library must be released with `csx_string_free`; handles with
//! `csx_instance_free`. Every fallible call reports a `CsxStatus` and writes
//! its result through an out-pointer only on `Ok`.
//!
//! The exhaustive-search budget honors the `CHAINSTITCH_SEARCH_BUDGET`
//! environment variable, like the command-line interface.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use chainstitch::benchmarks;
use chainstitch::graph::{CompatGraph, Instance};
use chainstitch::incentives::Mechanism;
use chainstitch::params::{FPolicy, MechConfig};
use chainstitch::trace::Status;
use chainstitch::{Error, SearchBudget};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsxStatus {
    /// The call succeeded and any out-pointer now holds a result.
    CsxOk = 0,
    /// A required pointer argument was null.
    CsxNullArgument = 1,
    /// A string argument was not valid UTF-8.
    CsxInvalidUtf8 = 2,
    /// The instance JSON was malformed or structurally invalid.
    CsxInvalidInstance = 3,
    /// An argument value was out of range or unknown.
    CsxInvalidArgument = 4,
    /// The exact-search budget refused an instance of this size.
    CsxBudgetExceeded = 5,
    /// An internal invariant failed; the result is unusable.
    CsxInternal = 6,
}

/// Opaque handle to a parsed instance.
pub struct CsxInstance {
    instance: Arc<Instance>,
}

fn status_of(err: &Error) -> CsxStatus {
    match err {
        Error::InvalidInstance(_) | Error::InvalidReport(_) => CsxStatus::CsxInvalidInstance,
        Error::BudgetExceeded { .. } => CsxStatus::CsxBudgetExceeded,
        Error::Precondition(_) | Error::Uncertified(_) => CsxStatus::CsxInvalidArgument,
        Error::DegenerateNormalization { .. } | Error::InvariantViolation(_) => {
            CsxStatus::CsxInternal
        }
    }
}

/// Shield the C boundary from panics: any unwind becomes `CsxInternal`.
fn guarded(body: impl FnOnce() -> CsxStatus) -> CsxStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(CsxStatus::CsxInternal)
}

unsafe fn c_str<'a>(ptr: *const c_char) -> Result<&'a str, CsxStatus> {
    if ptr.is_null() {
        return Err(CsxStatus::CsxNullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| CsxStatus::CsxInvalidUtf8)
}

/// Parse an instance from a JSON document.
///
/// On `CsxOk`, `*out` owns a new handle that must be released with
/// `csx_instance_free`. Certificates embedded in the document are validated
/// syntactically and then ignored by this layer.
///
/// # Safety
///
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csx_instance_parse_json(
    json: *const c_char,
    out: *mut *mut CsxInstance,
) -> CsxStatus {
    guarded(|| {
        if out.is_null() {
            return CsxStatus::CsxNullArgument;
        }
        let text = match c_str(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match Instance::from_json(text) {
            Ok((instance, _certificates)) => {
                let handle = Box::new(CsxInstance {
                    instance: Arc::new(instance),
                });
                *out = Box::into_raw(handle);
                CsxStatus::CsxOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a handle returned by `csx_instance_parse_json`. Null is ignored.
///
/// # Safety
///
/// `instance` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn csx_instance_free(instance: *mut CsxInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of nodes in the instance; 0 when the handle is null.
///
/// # Safety
///
/// `instance` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn csx_instance_node_count(instance: *const CsxInstance) -> u32 {
    if instance.is_null() {
        return 0;
    }
    (*instance).instance.n() as u32
}

fn outcome_json(outcome: &chainstitch::trace::Outcome) -> String {
    serde_json::json!({
        "status": match outcome.status {
            Status::Success => "success",
            Status::Failure => "failure",
        },
        "path": outcome.path.0,
        "welfare": outcome.welfare,
        "utilities": outcome.utilities,
        "trace_digest": outcome.trace.digest(),
    })
    .to_string()
}

/// Run a mechanism on the realization drawn by `seed` with every hospital
/// reporting truthfully.
///
/// `mechanism` is one of `"segment"`, `"average"`, or `"naive-opt"`; `s` is
/// the target segment length; `f` is the fixed scale parameter, with 0
/// meaning "derive it from the view size". On `CsxOk`, `*out_json` owns a
/// NUL-terminated JSON object with fields `status`, `path`, `welfare`,
/// `utilities`, and `trace_digest`; free it with `csx_string_free`.
///
/// # Safety
///
/// `instance` must be a live handle, `mechanism` a valid NUL-terminated
/// string, and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csx_run_mechanism(
    instance: *const CsxInstance,
    mechanism: *const c_char,
    s: u32,
    f: u32,
    seed: u64,
    out_json: *mut *mut c_char,
) -> CsxStatus {
    guarded(|| {
        if instance.is_null() || out_json.is_null() {
            return CsxStatus::CsxNullArgument;
        }
        let name = match c_str(mechanism) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let Ok(mechanism) = name.parse::<Mechanism>() else {
            return CsxStatus::CsxInvalidArgument;
        };
        let mut config = MechConfig::new(s).with_budget(SearchBudget::from_env());
        if f > 0 {
            config = config.with_f(FPolicy::Fixed(f));
        }
        let handle = &*instance;
        let view = CompatGraph::sample(Arc::clone(&handle.instance), seed).full_view();
        match mechanism.run(&view, &config) {
            Ok(outcome) => {
                let json = outcome_json(&outcome);
                let c = CString::new(json).expect("JSON has no interior NUL");
                *out_json = c.into_raw();
                CsxStatus::CsxOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Compute one benchmark on the realization drawn by `seed` and write the
/// resulting chain length to `*out_length`.
///
/// `kind` is one of `"opt"`, `"sopt"`, `"avgopt"`, or `"pi-ir"`; `s` is the
/// segment threshold and is ignored by kinds that do not use one.
///
/// # Safety
///
/// `instance` must be a live handle, `kind` a valid NUL-terminated string,
/// and `out_length` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csx_benchmark(
    instance: *const CsxInstance,
    kind: *const c_char,
    s: u32,
    seed: u64,
    out_length: *mut u32,
) -> CsxStatus {
    guarded(|| {
        if instance.is_null() || out_length.is_null() {
            return CsxStatus::CsxNullArgument;
        }
        let kind = match c_str(kind) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let handle = &*instance;
        let view = CompatGraph::sample(Arc::clone(&handle.instance), seed).full_view();
        let budget = SearchBudget::from_env();
        let result = match kind {
            "opt" => benchmarks::opt(&view, budget),
            "sopt" => benchmarks::sopt(&view, s, budget),
            "avgopt" => benchmarks::avgopt(&view, s, budget),
            "pi-ir" => benchmarks::pi_ir(&view, budget),
            _ => return CsxStatus::CsxInvalidArgument,
        };
        match result {
            Ok(path) => {
                *out_length = path.len() as u32;
                CsxStatus::CsxOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
///
/// `s` must be null or a string from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn csx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
