//! C interface to `fragsim`.
//!
//! Every function returns a [`FragsimStatus`]; on failure the message is
//! available from [`fragsim_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings
//! returned through `char **` are owned by the caller and released with
//! [`fragsim_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fragsim::config::ModelConfig;
use fragsim::lyapunov::classify_regime;
use fragsim::sim::run_trajectory_with;
use fragsim::{CompartmentModel, Model4Params, SimulationReport, StopReason};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidModel = 4,
    SimulationError = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragsimStopReason {
    Time = 0,
    Budget = 1,
    Absorbed = 2,
    BoundHit = 3,
}

impl From<StopReason> for FragsimStopReason {
    fn from(s: StopReason) -> Self {
        match s {
            StopReason::Time => FragsimStopReason::Time,
            StopReason::Budget => FragsimStopReason::Budget,
            StopReason::Absorbed => FragsimStopReason::Absorbed,
            StopReason::BoundHit => FragsimStopReason::BoundHit,
        }
    }
}

/// Scalar results of one trajectory.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FragsimSummary {
    pub final_time: f64,
    pub event_count: u64,
    pub final_compartments: u64,
    pub final_mass: u64,
    pub stop_reason: FragsimStopReason,
    pub suspected_explosion: bool,
    pub overflowed: bool,
}

/// A parsed model configuration.
pub struct FragsimModel {
    config: ModelConfig,
    model: CompartmentModel,
}

/// The result of one trajectory.
pub struct FragsimReport {
    report: SimulationReport,
    species: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: FragsimStatus, message: impl AsRef<str>) -> FragsimStatus {
    set_error(message.as_ref());
    status
}

fn guard<F: FnOnce() -> FragsimStatus>(f: F) -> FragsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(FragsimStatus::Panic, "internal panic"),
    }
}

unsafe fn out_string(s: String, out: *mut *mut c_char) -> FragsimStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            FragsimStatus::Ok
        }
        Err(_) => fail(FragsimStatus::InvalidUtf8, "output contains a nul byte"),
    }
}

/// Message of the last failure on this thread; empty when none. Valid until
/// the next call on this thread.
#[no_mangle]
pub extern "C" fn fragsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn fragsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML model configuration.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fragsim_model_from_toml(
    toml: *const c_char,
    out: *mut *mut FragsimModel,
) -> FragsimStatus {
    guard(|| {
        if toml.is_null() || out.is_null() {
            return fail(FragsimStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let text = match CStr::from_ptr(toml).to_str() {
            Ok(t) => t,
            Err(_) => return fail(FragsimStatus::InvalidUtf8, "config is not UTF-8"),
        };
        let config = match ModelConfig::from_toml_str(text) {
            Ok(c) => c,
            Err(e) => return fail(FragsimStatus::ParseError, e.to_string()),
        };
        let model = match config.to_model() {
            Ok(m) => m,
            Err(e) => return fail(FragsimStatus::InvalidModel, e.to_string()),
        };
        *out = Box::into_raw(Box::new(FragsimModel { config, model }));
        FragsimStatus::Ok
    })
}

/// # Safety
/// `model` must come from [`fragsim_model_from_toml`] and not be freed yet;
/// null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fragsim_model_free(model: *mut FragsimModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fragsim_model_species_count(
    model: *const FragsimModel,
    out: *mut usize,
) -> FragsimStatus {
    if model.is_null() || out.is_null() {
        return fail(FragsimStatus::NullPointer, "null argument");
    }
    *out = (*model).model.dim();
    FragsimStatus::Ok
}

/// Runs one trajectory from the configured initial state. `t_max <= 0` or
/// NaN and `event_budget == 0` keep the configured values.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fragsim_simulate(
    model: *const FragsimModel,
    seed: u64,
    t_max: f64,
    event_budget: u64,
    out: *mut *mut FragsimReport,
) -> FragsimStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return fail(FragsimStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let m = &*model;
        let mut cfg = m.config.clone();
        if t_max > 0.0 {
            cfg.simulation.t_max = t_max;
        }
        if event_budget > 0 {
            cfg.simulation.event_budget = event_budget;
        }
        let run = || -> Result<SimulationReport, String> {
            let initial = cfg.initial_state().map_err(|e| e.to_string())?;
            let options = cfg.run_options().map_err(|e| e.to_string())?;
            run_trajectory_with(&m.model, &initial, &cfg.stop_condition(), seed, &options)
                .map_err(|e| e.to_string())
        };
        match run() {
            Ok(report) => {
                *out = Box::into_raw(Box::new(FragsimReport {
                    report,
                    species: m.model.dim(),
                }));
                FragsimStatus::Ok
            }
            Err(e) => fail(FragsimStatus::SimulationError, e),
        }
    })
}

/// # Safety
/// `report` must come from [`fragsim_simulate`] and not be freed yet; null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn fragsim_report_free(report: *mut FragsimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fragsim_report_summary(
    report: *const FragsimReport,
    out: *mut FragsimSummary,
) -> FragsimStatus {
    if report.is_null() || out.is_null() {
        return fail(FragsimStatus::NullPointer, "null argument");
    }
    let r = &(*report).report;
    *out = FragsimSummary {
        final_time: r.final_time,
        event_count: r.event_count,
        final_compartments: r.final_compartments(),
        final_mass: r.final_mass(),
        stop_reason: r.stop_reason.into(),
        suspected_explosion: r.suspected_explosion,
        overflowed: r.overflowed,
    };
    FragsimStatus::Ok
}

/// Writes the final per-species totals into `buf`. `written` receives the
/// number of species even when `len` is too small.
///
/// # Safety
/// `buf` must hold `len` values; `report` and `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fragsim_report_species_totals(
    report: *const FragsimReport,
    buf: *mut u64,
    len: usize,
    written: *mut usize,
) -> FragsimStatus {
    if report.is_null() || written.is_null() {
        return fail(FragsimStatus::NullPointer, "null argument");
    }
    let r = &(*report).report;
    let d = (*report).species;
    *written = d;
    if d == 0 {
        return FragsimStatus::Ok;
    }
    if buf.is_null() {
        return fail(FragsimStatus::NullPointer, "null buffer");
    }
    if len < d {
        return fail(FragsimStatus::BufferTooSmall, format!("need {d} slots"));
    }
    let totals = r.final_state.species_totals(d).expect("dimension checked");
    ptr::copy_nonoverlapping(totals.as_ptr(), buf, d);
    FragsimStatus::Ok
}

/// The full report as JSON.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fragsim_report_json(
    report: *const FragsimReport,
    out: *mut *mut c_char,
) -> FragsimStatus {
    guard(|| {
        if report.is_null() || out.is_null() {
            return fail(FragsimStatus::NullPointer, "null argument");
        }
        let json = serde_json::to_string(&(*report).report).expect("serializable");
        out_string(json, out)
    })
}

/// Regime classification of a one-species model as JSON.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fragsim_classify(
    model: *const FragsimModel,
    out: *mut *mut c_char,
) -> FragsimStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return fail(FragsimStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let c = Model4Params::from_model(&(*model).model).and_then(|p| classify_regime(&p));
        match c {
            Ok(c) => out_string(serde_json::to_string(&c).expect("serializable"), out),
            Err(e) => fail(FragsimStatus::InvalidModel, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be freed yet; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fragsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
