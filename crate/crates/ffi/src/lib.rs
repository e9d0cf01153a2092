//! C ABI over the boussinesq solver.
//!
//! Every fallible call returns a [`BsqStatus`]; on failure the message is
//! kept per thread and read with [`bsq_last_error_message`]. Handles are
//! opaque and must be released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use boussinesq::asymptotics::{soliton_amplitude, soliton_speed};
use boussinesq::cli::RunConfig;
use boussinesq::integrator::{reconstruct, simulate_with};
use boussinesq::scattering::{
    find_k0, norming_constant, scattering_matrix, PotentialSampler, RootSearch, ScatteringOptions,
    NORMING_SPREAD_TOLERANCE,
};
use boussinesq::scheme::{SchemeConfig, SpectralState};
use boussinesq::spectral::PeriodicGrid;
use boussinesq::waves::{GaussianTerm, InitialProfile, SolitonDescriptor};
use boussinesq::Error;
use num_complex::Complex64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonZeroMean = 3,
    BlowUp = 4,
    Domain = 5,
    Conditioning = 6,
    DataInconsistency = 7,
    NormingSpread = 8,
    SymmetryViolation = 9,
    Branch = 10,
    MissingPrerequisite = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

pub const BSQ_PROFILE_SOLITON: u32 = 0;
pub const BSQ_PROFILE_GAUSSIAN: u32 = 1;
pub const BSQ_PROFILE_THREE_GAUSSIANS: u32 = 2;
pub const BSQ_PROFILE_PERTURBED_SOLITON: u32 = 3;
pub const BSQ_PROFILE_ZERO: u32 = 4;

/// Catalog initial data. `kind` is one of the `BSQ_PROFILE_*` constants.
///
/// soliton: `amplitude`, `x0`; gaussian: `a exp(-c (x - b)^2)`;
/// three gaussians: `a`, `b`, `c`; perturbed soliton: `amplitude`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BsqProfile {
    pub kind: u32,
    pub amplitude: f64,
    pub x0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Scheme settings; zero or negative `modes`, `dt` or `d0` select the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BsqSchemeParams {
    pub half_period: f64,
    pub modes: i64,
    pub damping: bool,
    pub d0: f64,
    pub dt: f64,
}

/// A running simulation.
pub struct BsqSimulation {
    config: SchemeConfig,
    grid: PeriodicGrid,
    state: SpectralState,
}

/// Scattering data of one initial profile.
pub struct BsqScattering {
    potential: PotentialSampler,
    options: ScatteringOptions,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> BsqStatus {
    match e {
        Error::Config { .. } | Error::Json(_) => BsqStatus::InvalidArgument,
        Error::NonZeroMean { .. } => BsqStatus::NonZeroMean,
        Error::BlowUp { .. } => BsqStatus::BlowUp,
        Error::Domain(_) => BsqStatus::Domain,
        Error::Conditioning { .. } => BsqStatus::Conditioning,
        Error::DataInconsistency(_) => BsqStatus::DataInconsistency,
        Error::NormingSpread { .. } => BsqStatus::NormingSpread,
        Error::SymmetryViolation { .. } => BsqStatus::SymmetryViolation,
        Error::Branch { .. } => BsqStatus::Branch,
        Error::MissingPrerequisite(_) => BsqStatus::MissingPrerequisite,
        Error::Io(_) => BsqStatus::Io,
    }
}

/// Run `f`, turning errors and panics into a status plus the thread's message.
fn guard(f: impl FnOnce() -> Result<(), (BsqStatus, String)>) -> BsqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BsqStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            BsqStatus::Panic
        }
    }
}

fn lift<T>(r: boussinesq::Result<T>) -> Result<T, (BsqStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (BsqStatus, String) {
    (BsqStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (BsqStatus, String) {
    (BsqStatus::InvalidArgument, msg.into())
}

fn profile_from(p: &BsqProfile) -> Result<InitialProfile, (BsqStatus, String)> {
    let prof = match p.kind {
        BSQ_PROFILE_SOLITON => InitialProfile::Soliton {
            amplitude: p.amplitude,
            x0: p.x0,
        },
        BSQ_PROFILE_GAUSSIAN => InitialProfile::Gaussian {
            terms: vec![GaussianTerm {
                a: p.a,
                b: p.b,
                c: p.c,
            }],
        },
        BSQ_PROFILE_THREE_GAUSSIANS => InitialProfile::ThreeGaussians {
            a: p.a,
            b: p.b,
            c: p.c,
        },
        BSQ_PROFILE_PERTURBED_SOLITON => InitialProfile::PerturbedSoliton {
            amplitude: p.amplitude,
        },
        BSQ_PROFILE_ZERO => InitialProfile::Zero,
        k => return Err(invalid(format!("unknown profile kind {k}"))),
    };
    lift(prof.validate())?;
    Ok(prof)
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (BsqStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn bsq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bsq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `A sech^2(sqrt(A/6)(x - x0 - c t))`; NaN for `A <= 0`.
#[no_mangle]
pub extern "C" fn bsq_soliton_value(amplitude: f64, x0: f64, x: f64, t: f64) -> f64 {
    SolitonDescriptor::new(amplitude, x0).map_or(f64::NAN, |s| s.value(x, t))
}

/// Amplitude `(3/8)(k0 - 1/k0)^2` of the soliton generated by a zero `k0`.
#[no_mangle]
pub extern "C" fn bsq_soliton_amplitude_from_k0(k0: f64) -> f64 {
    soliton_amplitude(k0)
}

/// Speed `(k0 + 1/k0)/2` of the soliton generated by a zero `k0`.
#[no_mangle]
pub extern "C" fn bsq_soliton_speed_from_k0(k0: f64) -> f64 {
    soliton_speed(k0)
}

fn new_simulation(
    config: SchemeConfig,
    state: impl FnOnce(PeriodicGrid, &SchemeConfig) -> boussinesq::Result<SpectralState>,
    out: *mut *mut BsqSimulation,
) -> Result<(), (BsqStatus, String)> {
    lift(config.validate())?;
    let grid = lift(config.grid())?;
    let state = lift(state(grid, &config))?;
    let sim = Box::new(BsqSimulation {
        config,
        grid,
        state,
    });
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = Box::into_raw(sim) };
    Ok(())
}

/// Create a simulation of catalog data at `t = 0`.
///
/// # Safety
/// `params`, `profile` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bsq_simulation_new(
    params: *const BsqSchemeParams,
    profile: *const BsqProfile,
    out: *mut *mut BsqSimulation,
) -> BsqStatus {
    guard(|| {
        if params.is_null() || profile.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        // SAFETY: checked non-null above.
        let (params, profile) = unsafe { (*params, *profile) };
        let prof = profile_from(&profile)?;
        let mut cfg = lift(SchemeConfig::new(params.half_period, 0.0))?;
        if params.modes > 0 {
            cfg = cfg.with_modes(params.modes as usize);
        }
        cfg.damping = params.damping;
        if params.d0 > 0.0 {
            cfg.d0 = params.d0;
        }
        if params.dt > 0.0 {
            cfg.dt = params.dt;
        }
        new_simulation(cfg, |g, c| prof.initial_state(g, c.antiderivative), out)
    })
}

/// Create a simulation from a JSON run config (the CLI schema).
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bsq_simulation_from_json(
    json: *const c_char,
    out: *mut *mut BsqSimulation,
) -> BsqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let text = unsafe { read_str(json, "json") }?;
        let cfg = lift(RunConfig::from_json(text, None).and_then(|c| c.resolved()))?;
        let scheme = lift(cfg.scheme_config())?;
        new_simulation(scheme, |g, c| cfg.initial_state(g, c.antiderivative), out)
    })
}

/// Release a simulation; null is ignored.
///
/// # Safety
/// `sim` must come from a constructor above and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bsq_simulation_free(sim: *mut BsqSimulation) {
    if !sim.is_null() {
        // SAFETY: ownership returns to Rust.
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// March to time `t`. On blow-up the simulation keeps its last finite state.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsq_simulation_advance(sim: *mut BsqSimulation, t: f64) -> BsqStatus {
    guard(|| {
        // SAFETY: caller contract.
        let sim = unsafe { sim.as_mut() }.ok_or_else(|| null("sim"))?;
        if !(t.is_finite() && t >= sim.state.t) {
            return Err(invalid(format!(
                "target time {t} precedes the current time {}",
                sim.state.t
            )));
        }
        let mut cfg = sim.config.clone();
        cfg.t_final = t;
        let mut last = None;
        let res = simulate_with(&cfg, &sim.state, &[], |s| {
            last = Some(s.clone());
            Ok(())
        });
        match res {
            Ok(()) => {
                if let Some(s) = last {
                    sim.state = s;
                }
                Ok(())
            }
            Err(Error::BlowUp { time, last_finite }) => {
                sim.state = *last_finite;
                Err((
                    BsqStatus::BlowUp,
                    format!("blew up at t = {time}; state kept at t = {}", sim.state.t),
                ))
            }
            Err(e) => lift(Err(e)),
        }
    })
}

/// Current time; NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsq_simulation_time(sim: *const BsqSimulation) -> f64 {
    // SAFETY: caller contract.
    unsafe { sim.as_ref() }.map_or(f64::NAN, |s| s.state.t)
}

/// Mode cutoff `N`; the state holds `2N` coefficients per field.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsq_simulation_modes(sim: *const BsqSimulation) -> usize {
    // SAFETY: caller contract.
    unsafe { sim.as_ref() }.map_or(0, |s| s.grid.modes())
}

/// Evaluate `U(x, t)` at `n` points.
///
/// # Safety
/// `xs` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn bsq_simulation_sample(
    sim: *const BsqSimulation,
    xs: *const f64,
    n: usize,
    out: *mut f64,
) -> BsqStatus {
    guard(|| {
        // SAFETY: caller contract.
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        if n == 0 {
            return Ok(());
        }
        if xs.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        // SAFETY: caller guarantees `n` elements.
        let (xs, out) = unsafe {
            (
                std::slice::from_raw_parts(xs, n),
                std::slice::from_raw_parts_mut(out, n),
            )
        };
        out.copy_from_slice(&reconstruct(&sim.state, sim.grid, xs));
        Ok(())
    })
}

/// Mass mode `U^(0, t)`.
///
/// # Safety
/// `sim`, `re` and `im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bsq_simulation_mass(
    sim: *const BsqSimulation,
    re: *mut f64,
    im: *mut f64,
) -> BsqStatus {
    guard(|| {
        // SAFETY: caller contract.
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        let m = sim.state.mass_mode();
        // SAFETY: checked non-null.
        unsafe {
            *re = m.re;
            *im = m.im;
        }
        Ok(())
    })
}

/// Scattering handle for catalog data, with the default solver options.
///
/// # Safety
/// `profile` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bsq_scattering_new(
    profile: *const BsqProfile,
    out: *mut *mut BsqScattering,
) -> BsqStatus {
    guard(|| {
        if profile.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        // SAFETY: checked non-null.
        let prof = profile_from(unsafe { &*profile })?;
        let h = Box::new(BsqScattering {
            potential: PotentialSampler::from_profile(&prof),
            options: ScatteringOptions::default(),
        });
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(h) };
        Ok(())
    })
}

/// Release a scattering handle; null is ignored.
///
/// # Safety
/// `h` must come from [`bsq_scattering_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bsq_scattering_free(h: *mut BsqScattering) {
    if !h.is_null() {
        // SAFETY: ownership returns to Rust.
        drop(unsafe { Box::from_raw(h) });
    }
}

/// `s(k)` row-major as 9 `(re, im)` pairs in `out[18]`. Entries that cannot be
/// computed at this `k` are NaN; `r1_out[2]` receives `s12/s11` or NaN.
///
/// # Safety
/// `out` must hold 18 doubles and `r1_out` 2 (or be null).
#[no_mangle]
pub unsafe extern "C" fn bsq_scattering_matrix(
    h: *const BsqScattering,
    k_re: f64,
    k_im: f64,
    out: *mut f64,
    r1_out: *mut f64,
) -> BsqStatus {
    guard(|| {
        // SAFETY: caller contract.
        let h = unsafe { h.as_ref() }.ok_or_else(|| null("handle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let res = lift(scattering_matrix(
            Complex64::new(k_re, k_im),
            &h.potential,
            &h.options,
        ))?;
        // SAFETY: caller guarantees 18 elements.
        let buf = unsafe { std::slice::from_raw_parts_mut(out, 18) };
        for i in 0..3 {
            for j in 0..3 {
                let v = res.s[(i, j)];
                buf[2 * (3 * i + j)] = v.re;
                buf[2 * (3 * i + j) + 1] = v.im;
            }
        }
        if !r1_out.is_null() {
            let r = res.r1.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            // SAFETY: caller guarantees 2 elements.
            unsafe {
                *r1_out = r.re;
                *r1_out.add(1) = r.im;
            }
        }
        Ok(())
    })
}

/// Zeros of `s11` on `(a, b)`, written to `zeros[..capacity]`; `count`
/// receives the number found (0 for solitonless data). Returns
/// `BufferTooSmall` if more than `capacity` zeros exist.
///
/// # Safety
/// `zeros` must hold `capacity` doubles; `count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bsq_scattering_find_k0(
    h: *const BsqScattering,
    a: f64,
    b: f64,
    zeros: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> BsqStatus {
    guard(|| {
        // SAFETY: caller contract.
        let h = unsafe { h.as_ref() }.ok_or_else(|| null("handle"))?;
        if count.is_null() || (zeros.is_null() && capacity > 0) {
            return Err(null("output"));
        }
        let found = match lift(find_k0(&h.potential, (a, b), h.options.step))? {
            RootSearch::Solitonless => Vec::new(),
            RootSearch::Zeros { zeros } => zeros,
        };
        // SAFETY: checked non-null.
        unsafe { *count = found.len() };
        for (i, z) in found.iter().take(capacity).enumerate() {
            // SAFETY: `i < capacity`.
            unsafe { *zeros.add(i) = *z };
        }
        if found.len() > capacity {
            return Err((
                BsqStatus::BufferTooSmall,
                format!("{} zeros found, room for {capacity}", found.len()),
            ));
        }
        Ok(())
    })
}

/// Norming constant `c_k0` at a zero and the spread of its estimates.
///
/// # Safety
/// Output pointers must be valid; `spread` may be null.
#[no_mangle]
pub unsafe extern "C" fn bsq_scattering_norming_constant(
    h: *const BsqScattering,
    k0: f64,
    re: *mut f64,
    im: *mut f64,
    spread: *mut f64,
) -> BsqStatus {
    guard(|| {
        // SAFETY: caller contract.
        let h = unsafe { h.as_ref() }.ok_or_else(|| null("handle"))?;
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        let c = lift(norming_constant(
            k0,
            &h.potential,
            h.options.step,
            NORMING_SPREAD_TOLERANCE,
        ))?;
        // SAFETY: checked non-null.
        unsafe {
            *re = c.value.re;
            *im = c.value.im;
            if !spread.is_null() {
                *spread = c.spread;
            }
        }
        Ok(())
    })
}
