//! C interface to `modalreg`.
//!
//! Scenarios and solutions are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns an
//! [`MrStatus`]; on failure [`mr_last_error`] describes the cause for the
//! calling thread. Complex numbers cross the boundary as separate real and
//! imaginary arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use modalreg::exosystem::ExoState;
use modalreg::regulator::{
    build_feedforward, build_feedforward_unchecked, check_assumption1, check_assumption2, residual_first_equation,
    residual_second_equation, solve_regulator, transfer_function,
};
use modalreg::scenarios::{build_random_scenario, build_scenario, RandomBounds};
use modalreg::simulator::simulate_closed_loop;
use modalreg::{Error, FeedforwardGain, Scenario, ScenarioConfig, SpectralVector, SylvesterSolution};
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A transfer-function value at an exosystem frequency is below the floor.
    AssumptionFailed = 3,
    /// A resolvent was evaluated on the spectrum.
    Singular = 4,
    /// A caller-supplied buffer has the wrong length.
    LengthMismatch = 5,
    /// A panic was caught at the boundary.
    Internal = 6,
}

/// A plant, its coupling and the exosystem space.
pub struct MrScenario {
    inner: Scenario,
}

/// Feedforward gain and Sylvester solution for one scenario.
pub struct MrSolution {
    scenario: Scenario,
    gain: FeedforwardGain,
    pi: SylvesterSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> MrStatus {
    match err {
        Error::Assumption1 { .. } => MrStatus::AssumptionFailed,
        Error::SingularResolvent { .. } => MrStatus::Singular,
        Error::ModeRangeMismatch { .. } => MrStatus::LengthMismatch,
        _ => MrStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MrStatus>) -> MrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MrStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            MrStatus::Internal
        }
    }
}

fn fail<T>(err: Error) -> Result<T, MrStatus> {
    set_error(err.to_string());
    Err(status_of(&err))
}

fn check<T>(r: modalreg::Result<T>) -> Result<T, MrStatus> {
    r.or_else(fail)
}

fn null(what: &str) -> MrStatus {
    set_error(format!("{what} is null"));
    MrStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, MrStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), MrStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

fn mode_count(n: i64) -> Result<i64, MrStatus> {
    if n < 1 {
        set_error(format!("mode count must be at least 1, got {n}"));
        return Err(MrStatus::InvalidArgument);
    }
    Ok(n)
}

unsafe fn publish_scenario(s: Scenario, out: *mut *mut MrScenario) -> Result<(), MrStatus> {
    write(out, Box::into_raw(Box::new(MrScenario { inner: s })), "out")
}

unsafe fn complex_slice(re: *const f64, im: *const f64, len: usize, what: &str) -> Result<Vec<Complex64>, MrStatus> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if re.is_null() || im.is_null() {
        return Err(null(what));
    }
    let re = std::slice::from_raw_parts(re, len);
    let im = std::slice::from_raw_parts(im, len);
    Ok(re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect())
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Damped wave plant with `2 n_plant` modes and `2 n_exo + 1` exosystem harmonics.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_wave(nu: f64, period: f64, gamma: f64, n_plant: i64, n_exo: i64, out: *mut *mut MrScenario) -> MrStatus {
    guard(|| {
        let cfg = ScenarioConfig { nu, period, gamma, n_plant: mode_count(n_plant)?, n_exo: mode_count(n_exo)?, ..ScenarioConfig::wave() };
        publish_scenario(check(build_scenario(&cfg))?, out)
    })
}

/// Diagonal example plant with `2 n_plant + 1` modes.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_diagonal(period: f64, gamma: f64, n_plant: i64, n_exo: i64, out: *mut *mut MrScenario) -> MrStatus {
    guard(|| {
        let cfg = ScenarioConfig { period, gamma, n_plant: mode_count(n_plant)?, n_exo: mode_count(n_exo)?, ..ScenarioConfig::diagonal() };
        publish_scenario(check(build_scenario(&cfg))?, out)
    })
}

/// Small random scenario, deterministic in `seed`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_random(seed: u64, out: *mut *mut MrScenario) -> MrStatus {
    guard(|| publish_scenario(check(build_random_scenario(seed, &RandomBounds::default()))?, out))
}

/// # Safety
/// `s` must come from an `mr_scenario_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_free(s: *mut MrScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of retained plant modes and exosystem modes.
///
/// # Safety
/// `s` must be a live scenario handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_sizes(s: *const MrScenario, plant_modes: *mut usize, exo_modes: *mut usize) -> MrStatus {
    guard(|| {
        let s = &deref(s, "scenario")?.inner;
        write(plant_modes, s.gen.modes().len(), "plant_modes")?;
        write(exo_modes, s.space.modes().len(), "exo_modes")
    })
}

/// Mode indices in storage order. `plant` and `exo` must hold the counts
/// reported by [`mr_scenario_sizes`].
///
/// # Safety
/// Buffers must be writable for `plant_len` and `exo_len` elements.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_modes(s: *const MrScenario, plant: *mut i64, plant_len: usize, exo: *mut i64, exo_len: usize) -> MrStatus {
    guard(|| {
        let s = &deref(s, "scenario")?.inner;
        for (buf, len, modes, what) in [(plant, plant_len, s.gen.modes().indices(), "plant"), (exo, exo_len, s.space.modes().indices(), "exo")] {
            if len != modes.len() {
                set_error(format!("{what} buffer holds {len} entries, {} needed", modes.len()));
                return Err(MrStatus::LengthMismatch);
            }
            if buf.is_null() {
                return Err(null(what));
            }
            std::slice::from_raw_parts_mut(buf, len).copy_from_slice(modes);
        }
        Ok(())
    })
}

/// `H(lambda) = sum_n c_n b_n / (lambda - mu_n)`.
///
/// # Safety
/// `s` must be a live scenario handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_transfer_function(s: *const MrScenario, re: f64, im: f64, out_re: *mut f64, out_im: *mut f64) -> MrStatus {
    guard(|| {
        let s = &deref(s, "scenario")?.inner;
        let h = check(transfer_function(&s.gen, &s.coupling, Complex64::new(re, im)))?.value;
        write(out_re, h.re, "out_re")?;
        write(out_im, h.im, "out_im")
    })
}

/// Smallest `|H(i omega_k)|` and whether both gain assumptions hold.
///
/// # Safety
/// `s` must be a live scenario handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_check_assumptions(
    s: *const MrScenario,
    floor: f64,
    min_magnitude: *mut f64,
    assumption1: *mut bool,
    assumption2: *mut bool,
) -> MrStatus {
    guard(|| {
        let s = &deref(s, "scenario")?.inner;
        let a1 = check(check_assumption1(&s.gen, &s.coupling, &s.space, floor))?;
        let a2 = match build_feedforward_unchecked(&s.gen, &s.coupling, &s.space) {
            Ok(gain) => check(check_assumption2(&gain, &s.space))?.passes(),
            Err(_) => false,
        };
        write(min_magnitude, a1.min_magnitude, "min_magnitude")?;
        write(assumption1, a1.passes, "assumption1")?;
        write(assumption2, a2, "assumption2")
    })
}

/// Builds the feedforward gain and solves for `Pi`. Fails with
/// `AssumptionFailed` when some `|H(i omega_k)|` is below `floor`.
///
/// # Safety
/// `s` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mr_solve(s: *const MrScenario, floor: f64, out: *mut *mut MrSolution) -> MrStatus {
    guard(|| {
        let s = &deref(s, "scenario")?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let gain = check(build_feedforward(&s.gen, &s.coupling, &s.space, floor))?;
        let pi = check(solve_regulator(&s.gen, &s.coupling, &gain, &s.space))?;
        let sol = MrSolution { scenario: s.clone(), gain, pi };
        write(out, Box::into_raw(Box::new(sol)), "out")
    })
}

/// # Safety
/// `sol` must come from [`mr_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mr_solution_free(sol: *mut MrSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Residuals of `A Pi + B L + P = Pi S` and `C Pi = delta_0`.
///
/// # Safety
/// `sol` must be a live solution handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_solution_residuals(sol: *const MrSolution, first: *mut f64, second: *mut f64) -> MrStatus {
    guard(|| {
        let sol = deref(sol, "solution")?;
        let s = &sol.scenario;
        let r1 = check(residual_first_equation(&sol.pi, &s.gen, &s.coupling, &sol.gain, &s.space))?;
        let r2 = check(residual_second_equation(&sol.pi, &s.coupling, &s.space))?;
        write(first, r1, "first")?;
        write(second, r2, "second")
    })
}

/// Gain `l_k` for exosystem mode `k`.
///
/// # Safety
/// `sol` must be a live solution handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_solution_gain(sol: *const MrSolution, k: i64, out_re: *mut f64, out_im: *mut f64) -> MrStatus {
    guard(|| {
        let sol = deref(sol, "solution")?;
        let Some(g) = sol.gain.gain(k) else {
            set_error(format!("exosystem mode {k} is not retained"));
            return Err(MrStatus::InvalidArgument);
        };
        write(out_re, g.re, "out_re")?;
        write(out_im, g.im, "out_im")
    })
}

/// Entry `pi_{n,k}` of the Sylvester solution.
///
/// # Safety
/// `sol` must be a live solution handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_solution_pi(sol: *const MrSolution, n: i64, k: i64, out_re: *mut f64, out_im: *mut f64) -> MrStatus {
    guard(|| {
        let sol = deref(sol, "solution")?;
        let Some(p) = sol.pi.entry(n, k) else {
            set_error(format!("entry ({n}, {k}) is not retained"));
            return Err(MrStatus::InvalidArgument);
        };
        write(out_re, p.re, "out_re")?;
        write(out_im, p.im, "out_im")
    })
}

/// Tracking error `e(t) = y(t) - y_r(t)` of the closed loop at each time in
/// `t`. `z0` has one entry per plant mode (both pointers may be null for a
/// zero start), `w0` one per exosystem mode, in the order of
/// [`mr_scenario_modes`].
///
/// # Safety
/// Input arrays must be readable and `e_re`, `e_im` writable for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mr_simulate_error(
    sol: *const MrSolution,
    z0_re: *const f64,
    z0_im: *const f64,
    z0_len: usize,
    w0_re: *const f64,
    w0_im: *const f64,
    w0_len: usize,
    t: *const f64,
    t_len: usize,
    e_re: *mut f64,
    e_im: *mut f64,
) -> MrStatus {
    guard(|| {
        let sol = deref(sol, "solution")?;
        let s = &sol.scenario;
        let z0 = if z0_re.is_null() && z0_im.is_null() {
            SpectralVector::zeros(s.gen.modes().clone())
        } else {
            check(SpectralVector::new(s.gen.modes().clone(), complex_slice(z0_re, z0_im, z0_len, "z0")?))?
        };
        let w0 = check(ExoState::new(Arc::clone(&s.space), complex_slice(w0_re, w0_im, w0_len, "w0")?))?;
        if t_len == 0 {
            return Ok(());
        }
        if t.is_null() || e_re.is_null() || e_im.is_null() {
            return Err(null("time or output buffer"));
        }
        let grid = std::slice::from_raw_parts(t, t_len);
        let res = check(simulate_closed_loop(&s.gen, &s.coupling, &sol.gain, &z0, &w0, grid))?;
        let (re, im) = (std::slice::from_raw_parts_mut(e_re, t_len), std::slice::from_raw_parts_mut(e_im, t_len));
        for (i, e) in res.e.iter().enumerate() {
            re[i] = e.re;
            im[i] = e.im;
        }
        Ok(())
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn mr_status_name(status: MrStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        MrStatus::Ok => b"ok\0",
        MrStatus::NullPointer => b"null pointer\0",
        MrStatus::InvalidArgument => b"invalid argument\0",
        MrStatus::AssumptionFailed => b"assumption failed\0",
        MrStatus::Singular => b"singular resolvent\0",
        MrStatus::LengthMismatch => b"length mismatch\0",
        MrStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}
