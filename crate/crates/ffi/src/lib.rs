//! C ABI over `episel`.
//!
//! Every fallible call returns an `int32_t` status (`EPISEL_OK` on success)
//! and writes results through out-pointers. After a failure,
//! [`episel_last_error`] returns a message for the calling thread. Handles are
//! opaque and released with their `*_free` function; passing NULL to a free
//! function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use episel::dynamics::simulate;
use episel::experiment::{generate_instance, Template};
use episel::io::{pims_instance, NetworkFile, PemsFile, PimsCostFile};
use episel::oracle::brute_force_pems;
use episel::pems::{greedy, guarantee, Criterion, Design, PemsInstance};
use episel::pims::{algorithm1, proposition_bound, PimsInstance};
use episel::{Error, Theta};

pub const EPISEL_OK: i32 = 0;
/// Internal failure, I/O or a numerical breakdown.
pub const EPISEL_ERR_INTERNAL: i32 = 1;
/// Invalid instance, argument or precondition.
pub const EPISEL_ERR_INVALID: i32 = 2;
/// An oracle refused a search space above its guard.
pub const EPISEL_ERR_GUARD: i32 = 3;
pub const EPISEL_ERR_NULL: i32 = 4;
/// The output buffer is shorter than required.
pub const EPISEL_ERR_BUFFER: i32 = 5;
/// The rank condition cannot be met.
pub const EPISEL_ERR_INFEASIBLE: i32 = 6;
pub const EPISEL_ERR_PANIC: i32 = 7;

/// Random-measurement instance.
pub struct EpiselPemsInstance(PemsInstance);

/// Information atoms and costs of a random-measurement instance on a fixed grid.
pub struct EpiselDesign(Design);

/// Exact-measurement instance.
pub struct EpiselPimsInstance(PimsInstance);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::GuardExceeded { .. } => EPISEL_ERR_GUARD,
            Error::Infeasible(_) => EPISEL_ERR_INFEASIBLE,
            Error::Validation(_)
            | Error::InvalidInstance(_)
            | Error::Precondition(_)
            | Error::Json(_)
            | Error::NotSymmetric(_)
            | Error::NotPositiveDefinite(_) => EPISEL_ERR_INVALID,
            _ => EPISEL_ERR_INTERNAL,
        };
        Failure(code, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(EPISEL_ERR_INVALID, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EPISEL_ERR_NULL, format!("{what} is NULL"))
}

fn guarded(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EPISEL_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("panic inside episel");
            EPISEL_ERR_PANIC
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EPISEL_ERR_INVALID, format!("{what} is not UTF-8")))
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

fn criterion(c: c_char) -> Result<Criterion, Failure> {
    match c as u8 {
        b'a' | b'A' => Ok(Criterion::A),
        b'd' | b'D' => Ok(Criterion::D),
        other => Err(Failure(EPISEL_ERR_INVALID, format!("objective must be 'a' or 'd', got {other}"))),
    }
}

unsafe fn fill_counts(out: *mut u32, len: usize, counts: &[u32]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("counts"));
    }
    if len < counts.len() {
        return Err(Failure(EPISEL_ERR_BUFFER, format!("counts buffer holds {len}, need {}", counts.len())));
    }
    ptr::copy_nonoverlapping(counts.as_ptr(), out, counts.len());
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn episel_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a random-measurement instance file (1-based JSON).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn episel_pems_instance_from_json(json: *const c_char, out: *mut *mut EpiselPemsInstance) -> i32 {
    guarded(|| {
        let file: PemsFile = serde_json::from_str(text(json, "json")?)?;
        let inst = file.to_instance()?;
        write(out, Box::into_raw(Box::new(EpiselPemsInstance(inst))), "out")
    })
}

/// Generates a template instance (`"paper_small"` or `"paper_large"`).
///
/// # Safety
/// `template_name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn episel_generate_instance(
    seed: u64,
    template_name: *const c_char,
    out: *mut *mut EpiselPemsInstance,
) -> i32 {
    guarded(|| {
        let t: Template = text(template_name, "template_name")?.parse()?;
        let inst = generate_instance(seed, t)?.to_instance()?;
        write(out, Box::into_raw(Box::new(EpiselPemsInstance(inst))), "out")
    })
}

/// # Safety
/// `inst` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn episel_pems_instance_free(inst: *mut EpiselPemsInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Budget stored in the instance file.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn episel_pems_instance_budget(inst: *const EpiselPemsInstance, out: *mut f64) -> i32 {
    guarded(|| write(out, reference(inst, "inst")?.0.budget, "out"))
}

/// Builds the information atoms on a `grid_points × grid_points` grid.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn episel_design_prepare(
    inst: *const EpiselPemsInstance,
    grid_points: usize,
    out: *mut *mut EpiselDesign,
) -> i32 {
    guarded(|| {
        let design = Design::prepare(&reference(inst, "inst")?.0, grid_points)?;
        write(out, Box::into_raw(Box::new(EpiselDesign(design))), "out")
    })
}

/// # Safety
/// `design` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn episel_design_free(design: *mut EpiselDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Number of measurement groups, which is the length of every counts vector.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn episel_design_len(design: *const EpiselDesign, out: *mut usize) -> i32 {
    guarded(|| write(out, reference(design, "design")?.0.len(), "out"))
}

/// Objective value `f_P` of a counts vector.
///
/// # Safety
/// `counts` must point to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn episel_design_value(
    design: *const EpiselDesign,
    objective: c_char,
    counts: *const u32,
    len: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let d = &reference(design, "design")?.0;
        if counts.is_null() {
            return Err(null("counts"));
        }
        if len != d.len() {
            return Err(Failure(EPISEL_ERR_BUFFER, format!("counts has length {len}, need {}", d.len())));
        }
        let counts = std::slice::from_raw_parts(counts, len);
        if counts.iter().zip(&d.caps).any(|(c, cap)| c > cap) {
            return Err(Failure(EPISEL_ERR_INVALID, "counts exceed the per-measurement caps".into()));
        }
        write(out, d.value(counts, criterion(objective)?), "out")
    })
}

/// Greedy selection within `budget`; writes its value and counts.
///
/// # Safety
/// `counts_out` must have room for `counts_len` values.
#[no_mangle]
pub unsafe extern "C" fn episel_greedy(
    design: *const EpiselDesign,
    objective: c_char,
    budget: f64,
    value_out: *mut f64,
    counts_out: *mut u32,
    counts_len: usize,
) -> i32 {
    guarded(|| {
        let d = &reference(design, "design")?.0;
        let trace = greedy(d, criterion(objective)?, budget)?;
        fill_counts(counts_out, counts_len, &d.counts_of(&trace.selection))?;
        write(value_out, trace.value, "value_out")
    })
}

/// Exhaustive optimum within `budget`; `EPISEL_ERR_GUARD` on large lattices.
///
/// # Safety
/// `counts_out` must have room for `counts_len` values.
#[no_mangle]
pub unsafe extern "C" fn episel_brute_force(
    design: *const EpiselDesign,
    objective: c_char,
    budget: f64,
    value_out: *mut f64,
    counts_out: *mut u32,
    counts_len: usize,
) -> i32 {
    guarded(|| {
        let d = &reference(design, "design")?.0;
        let r = brute_force_pems(d, criterion(objective)?, budget)?;
        fill_counts(counts_out, counts_len, &r.counts)?;
        write(value_out, r.value, "value_out")
    })
}

/// Worst-case greedy guarantee `fraction · f(OPT) − slack`.
///
/// # Safety
/// Out-pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn episel_guarantee(
    objective: c_char,
    gamma1: f64,
    gamma2: f64,
    budget: f64,
    c_min: f64,
    c_max: f64,
    eps: f64,
    fraction_out: *mut f64,
    slack_out: *mut f64,
) -> i32 {
    guarded(|| {
        let g = guarantee(criterion(objective)?, gamma1, gamma2, budget, c_min, c_max, eps);
        write(fraction_out, g.fraction, "fraction_out")?;
        write(slack_out, g.slack, "slack_out")
    })
}

/// Simulates a network file and writes `x` and `r` row-major as
/// `(horizon + 1) × n` arrays.
///
/// # Safety
/// `x_out` and `r_out` must each have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn episel_simulate(
    network_json: *const c_char,
    beta: f64,
    delta: f64,
    horizon: usize,
    x_out: *mut f64,
    r_out: *mut f64,
    len: usize,
) -> i32 {
    guarded(|| {
        let file: NetworkFile = serde_json::from_str(text(network_json, "network_json")?)?;
        let (net, init) = file.to_model()?;
        let traj = simulate(&net, &init, Theta::new(beta, delta), horizon)?;
        let need = (horizon + 1) * net.n();
        if x_out.is_null() || r_out.is_null() {
            return Err(null("x_out or r_out"));
        }
        if len < need {
            return Err(Failure(EPISEL_ERR_BUFFER, format!("buffers hold {len}, need {need}")));
        }
        for k in 0..=horizon {
            for i in 0..net.n() {
                *x_out.add(k * net.n() + i) = traj.x.at(k, i);
                *r_out.add(k * net.n() + i) = traj.r.at(k, i);
            }
        }
        Ok(())
    })
}

/// Parses a network file and a cost file for the exact-measurement problem.
///
/// # Safety
/// Strings must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn episel_pims_instance_from_json(
    network_json: *const c_char,
    costs_json: *const c_char,
    out: *mut *mut EpiselPimsInstance,
) -> i32 {
    guarded(|| {
        let net: NetworkFile = serde_json::from_str(text(network_json, "network_json")?)?;
        let costs: PimsCostFile = serde_json::from_str(text(costs_json, "costs_json")?)?;
        let inst = pims_instance(&net, &costs)?;
        write(out, Box::into_raw(Box::new(EpiselPimsInstance(inst))), "out")
    })
}

/// # Safety
/// `inst` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn episel_pims_instance_free(inst: *mut EpiselPimsInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Runs the pairwise exact-selection algorithm. `selected_out` receives a
/// newly allocated `;`-separated list of 1-based ids such as `x_1[2];r_1[2]`,
/// released with [`episel_string_free`]. `bound_out` receives the approximation
/// ratio bound, or NaN when it is undefined.
///
/// # Safety
/// Out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn episel_pims_solve(
    inst: *const EpiselPimsInstance,
    cost_out: *mut f64,
    bound_out: *mut f64,
    selected_out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let inst = &reference(inst, "inst")?.0;
        let strategy = algorithm1(inst)?;
        let bound = proposition_bound(inst)?.map_or(f64::NAN, |b| b.ratio);
        let ids: Vec<String> = strategy.selected.iter().map(|m| m.to_string()).collect();
        let s = CString::new(ids.join(";")).expect("ids contain no NUL");
        write(cost_out, strategy.cost, "cost_out")?;
        write(bound_out, bound, "bound_out")?;
        write(selected_out, s.into_raw(), "selected_out")
    })
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn episel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
