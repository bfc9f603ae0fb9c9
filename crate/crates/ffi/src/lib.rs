//! C ABI over `sta-core`.
//!
//! Schemes are opaque handles created by `sta_scheme_*` constructors and
//! released with `sta_scheme_free`. Every fallible call returns a
//! [`StaStatus`]; on failure the message is available from
//! `sta_last_error` on the same thread. Strings returned through `char**`
//! are owned by the caller and released with `sta_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sta_core::ancillary::{AncillaryScheme, SchemeKind};
use sta_core::dynamics::{evolve_ground, HamiltonianSpec};
use sta_core::optimize::{minimize_sensitivity, report_json, OptProblem};
use sta_core::sensitivity::{self, PerturbedModel};
use sta_core::synthesis::pulse_metrics;
use sta_core::tables::pulse_for;
use sta_core::StaError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaStatus {
    Ok = 0,
    InvalidArgument = 1,
    SynthesisFailure = 2,
    NumericFailure = 3,
    OptimizationFailure = 4,
    ConfigError = 5,
    IoError = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaSchemeKind {
    FlatPi = 0,
    ArcsinEps = 1,
    QuarticLargeDelta = 2,
    Optimized2l = 3,
    Ref3l = 4,
    Num1_4L = 5,
    Num2_4L = 6,
}

impl From<StaSchemeKind> for SchemeKind {
    fn from(k: StaSchemeKind) -> Self {
        match k {
            StaSchemeKind::FlatPi => SchemeKind::FlatPi,
            StaSchemeKind::ArcsinEps => SchemeKind::ArcsinEps,
            StaSchemeKind::QuarticLargeDelta => SchemeKind::QuarticLargeDelta,
            StaSchemeKind::Optimized2l => SchemeKind::Optimized2L,
            StaSchemeKind::Ref3l => SchemeKind::Ref3L,
            StaSchemeKind::Num1_4L => SchemeKind::Num1_4L,
            StaSchemeKind::Num2_4L => SchemeKind::Num2_4L,
        }
    }
}

/// Opaque scheme handle.
pub struct StaScheme {
    inner: AncillaryScheme,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StaSensitivityReport {
    pub value: f64,
    pub quadrature_error: f64,
    pub lower_bound: f64,
    pub asymptotic_estimate: f64,
    pub delta_t: f64,
    pub forms_difference: f64,
    /// Non-zero when the scheme's boundary conditions hold only approximately.
    pub approximate_boundary: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StaMetrics {
    pub area_pi: f64,
    pub energy_pi2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StaEvolution {
    pub p_target: f64,
    pub infidelity: f64,
    pub norm_drift: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &StaError) -> StaStatus {
    match e {
        StaError::InvalidArgument(_) => StaStatus::InvalidArgument,
        StaError::SynthesisFailure { .. } => StaStatus::SynthesisFailure,
        StaError::NumericFailure { .. } => StaStatus::NumericFailure,
        StaError::OptimizationFailure(_) => StaStatus::OptimizationFailure,
        StaError::Config(_) => StaStatus::ConfigError,
        StaError::Io(_) => StaStatus::IoError,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), (StaStatus, String)>>(f: F) -> StaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            StaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StaStatus::Panic
        }
    }
}

fn core<T>(r: sta_core::Result<T>) -> Result<T, (StaStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (StaStatus, String) {
    (StaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn scheme_ref<'a>(s: *const StaScheme) -> Result<&'a AncillaryScheme, (StaStatus, String)> {
    // SAFETY: the caller passes a handle from a constructor that has not been freed.
    unsafe { s.as_ref() }.map(|s| &s.inner).ok_or_else(|| null("scheme"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (StaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (StaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn put_string(out: *mut *mut c_char, s: String) -> Result<(), (StaStatus, String)> {
    let c = CString::new(s).map_err(|_| (StaStatus::InvalidArgument, "string contains NUL".to_string()))?;
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn put_scheme(out: *mut *mut StaScheme, s: AncillaryScheme) {
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(StaScheme { inner: s })) };
}

/// Message of the last failed call on this thread (empty after success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sta_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sta_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a catalog scheme of duration `duration` from `n_params` values in
/// the family's parameter order.
///
/// # Safety
/// `params` must point to `n_params` doubles (or be null when zero) and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sta_scheme_new(
    kind: StaSchemeKind,
    duration: f64,
    params: *const f64,
    n_params: usize,
    out: *mut *mut StaScheme,
) -> StaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let values: &[f64] = if n_params == 0 {
            &[]
        } else if params.is_null() {
            return Err(null("params"));
        } else {
            // SAFETY: caller guarantees `n_params` readable doubles.
            unsafe { std::slice::from_raw_parts(params, n_params) }
        };
        put_scheme(out, core(AncillaryScheme::from_kind(kind.into(), duration, values))?);
        Ok(())
    })
}

/// Builds a scheme from a JSON descriptor.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sta_scheme_from_json(json: *const c_char, out: *mut *mut StaScheme) -> StaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let text = unsafe { c_str(json, "json") }?;
        put_scheme(out, core(sta_core::descriptor::scheme_from_json(text))?);
        Ok(())
    })
}

/// Serializes a scheme to its JSON descriptor; free with `sta_string_free`.
///
/// # Safety
/// `scheme` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sta_scheme_to_json(scheme: *const StaScheme, out: *mut *mut c_char) -> StaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let s = unsafe { scheme_ref(scheme) }?;
        put_string(out, sta_core::descriptor::scheme_to_json(s))
    })
}

/// Releases a scheme handle. Null is ignored.
///
/// # Safety
/// `scheme` must come from a constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sta_scheme_free(scheme: *mut StaScheme) {
    if !scheme.is_null() {
        // SAFETY: pointer was produced by Box::into_raw in put_scheme.
        drop(unsafe { Box::from_raw(scheme) });
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sta_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: pointer was produced by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// q for two-level schemes or Q for three-level ones, at detuning `delta`.
///
/// # Safety
/// `scheme` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sta_sensitivity(
    scheme: *const StaScheme,
    delta: f64,
    out: *mut StaSensitivityReport,
) -> StaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let s = unsafe { scheme_ref(scheme) }?;
        let r = core(sensitivity::sensitivity(s, delta, sensitivity::DEFAULT_TOL))?;
        let report = StaSensitivityReport {
            value: r.value,
            quadrature_error: r.quadrature_error,
            lower_bound: r.lower_bound,
            asymptotic_estimate: r.asymptotic_estimate,
            delta_t: r.delta_t,
            forms_difference: r.forms_difference,
            approximate_boundary: r.approximate_boundary as i32,
        };
        // SAFETY: checked non-null.
        unsafe { *out = report };
        Ok(())
    })
}

/// Closed-form q of the flat π pulse at ΔT = `delta_t`.
#[no_mangle]
pub extern "C" fn sta_q_flat_pi_closed_form(delta_t: f64) -> f64 {
    sensitivity::q_flat_pi_closed_form(delta_t)
}

/// Pulse area (units of π) and energy (units of π²ħ/T) of the scheme's
/// physical controls.
///
/// # Safety
/// `scheme` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sta_pulse_metrics(scheme: *const StaScheme, out: *mut StaMetrics) -> StaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let s = unsafe { scheme_ref(scheme) }?;
        let m = core(pulse_for(s).and_then(|p| pulse_metrics(&p)))?;
        // SAFETY: checked non-null.
        unsafe {
            *out = StaMetrics {
                area_pi: m.area_pi,
                energy_pi2: m.energy_pi2,
            }
        };
        Ok(())
    })
}

/// Simulates the perturbed system from |1⟩ and reports the target
/// probability at t = T.
///
/// # Safety
/// `scheme` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sta_evolve(
    scheme: *const StaScheme,
    delta: f64,
    beta: f64,
    out: *mut StaEvolution,
) -> StaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let s = unsafe { scheme_ref(scheme) }?;
        let pulse = core(pulse_for(s))?;
        let r = core(evolve_ground(&HamiltonianSpec::new(
            pulse,
            PerturbedModel::new(delta, beta),
        )))?;
        // SAFETY: checked non-null.
        unsafe {
            *out = StaEvolution {
                p_target: r.p_target,
                infidelity: r.infidelity,
                norm_drift: r.norm_drift,
            }
        };
        Ok(())
    })
}

/// Runs an optimization. `problem_json` needs `family` and `DeltaT`; any
/// other problem field overrides its default. The JSON report is written to
/// `out` and must be released with `sta_string_free`.
///
/// # Safety
/// `problem_json` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sta_optimize_json(problem_json: *const c_char, out: *mut *mut c_char) -> StaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let text = unsafe { c_str(problem_json, "problem_json") }?;
        let p = core(parse_problem(text))?;
        let r = core(minimize_sensitivity(&p))?;
        put_string(out, report_json(&p, &r))
    })
}

fn parse_problem(text: &str) -> sta_core::Result<OptProblem> {
    let given: serde_json::Value = serde_json::from_str(text)?;
    let obj = given
        .as_object()
        .ok_or_else(|| StaError::Config("problem must be a JSON object".into()))?;
    let family = obj
        .get("family")
        .and_then(|v| v.as_str())
        .ok_or_else(|| StaError::Config("problem needs a `family`".into()))?;
    let delta_t = obj
        .get("DeltaT")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| StaError::Config("problem needs a numeric `DeltaT`".into()))?;
    let defaults = OptProblem::new(SchemeKind::parse(family)?, delta_t)?;
    let mut merged = serde_json::to_value(&defaults)?;
    let slot = merged.as_object_mut().expect("problem serializes to an object");
    for (k, v) in obj {
        slot.insert(k.clone(), v.clone());
    }
    let p: OptProblem = serde_json::from_value(merged)?;
    p.validate()?;
    Ok(p)
}
