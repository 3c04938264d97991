//! C ABI over `dosc`.
//!
//! Objects are opaque handles created by `dosc_*_new`-style calls and released
//! with the matching `dosc_*_free`. Every fallible call returns a [`DoscStatus`];
//! on failure, [`dosc_last_error_message`] describes the error for the calling
//! thread. Output pointers are written only on success. Panics never cross the
//! boundary and are reported as `DOSC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dosc::dynamics;
use dosc::groundstate::{ground_state_moments, GroundStateSummary};
use dosc::oracle::{
    discretize, ground_covariance, normal_modes, DiscretizationScheme, FiniteBathModel,
    NormalModeDecomposition,
};
use dosc::spectra::positivity_integral;
use dosc::{
    compute_pi, CouplingFamily, CouplingSpectrum, DoscError, FanoOptions, FrequencyMeasure,
    SpectralSolution, UnitSystem,
};

/// Result of every fallible call. The first four values match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoscStatus {
    Ok = 0,
    InvalidArgument = 1,
    /// The coupling violates `ω₀ > ∫V²/ω`.
    Positivity = 2,
    /// A numerical procedure failed to converge.
    Numerical = 3,
    NullPointer = 4,
    /// A caller buffer is shorter than the data.
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoscScheme {
    Uniform = 0,
    GaussLike = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoscUnits {
    pub hbar: f64,
    pub mass: f64,
    pub omega0: f64,
}

/// Reduced ground state of the oscillator.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoscGroundState {
    pub var_x: f64,
    pub var_p: f64,
    pub mean: f64,
    pub mean_inverse: f64,
    pub omega_c: f64,
    pub n_bar_c: f64,
    pub t_eff: f64,
    pub entropy: f64,
    pub mutual_info: f64,
    pub mean_energy: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoscSolutionInfo {
    /// Grid nodes, excluding bound states.
    pub nodes: usize,
    pub bound_states: usize,
    pub norm_defect: f64,
    pub sum_rule_defect: f64,
    pub resolution: f64,
}

/// A validated coupling spectrum `V(ω)`.
pub struct DoscSpectrum(CouplingSpectrum);

/// `π(ω)` for one spectrum and unit system.
pub struct DoscSolution(SpectralSolution);

/// A finite bath and its normal modes.
pub struct DoscOracle {
    model: FiniteBathModel,
    decomp: NormalModeDecomposition,
    units: UnitSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: DoscError) -> DoscStatus {
    let status = match e.exit_code() {
        2 => DoscStatus::Positivity,
        3 => DoscStatus::Numerical,
        _ => DoscStatus::InvalidArgument,
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> DoscStatus {
    set_error(format!("{what} is NULL"));
    DoscStatus::NullPointer
}

fn guard<F: FnOnce() -> Result<(), DoscStatus>>(f: F) -> DoscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DoscStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            DoscStatus::Panic
        }
    }
}

fn units(u: DoscUnits) -> Result<UnitSystem, DoscStatus> {
    UnitSystem::new(u.hbar, u.mass, u.omega0).map_err(fail)
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, DoscStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], DoscStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Copies `src` into `dst` unless `dst` is NULL.
unsafe fn fill(dst: *mut f64, src: &[f64]) {
    if !dst.is_null() {
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), DoscStatus> {
    if out.is_null() {
        return Err(null("output handle pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn summary_to_c(g: &GroundStateSummary) -> DoscGroundState {
    DoscGroundState {
        var_x: g.var_x,
        var_p: g.var_p,
        mean: g.moments.mean,
        mean_inverse: g.moments.mean_inverse,
        omega_c: g.omega_c,
        n_bar_c: g.n_bar_c,
        t_eff: g.t_eff,
        entropy: g.entropy,
        mutual_info: g.mutual_info,
        mean_energy: g.mean_energy,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dosc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dosc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `ħ = m = ω₀ = 1`.
#[no_mangle]
pub extern "C" fn dosc_units_default() -> DoscUnits {
    DoscUnits {
        hbar: 1.0,
        mass: 1.0,
        omega0: 1.0,
    }
}

fn new_spectrum(family: CouplingFamily, omega_max: f64, out: *mut *mut DoscSpectrum) -> DoscStatus {
    guard(|| {
        let max = (omega_max > 0.0).then_some(omega_max);
        let s = CouplingSpectrum::new(family, max).map_err(fail)?;
        unsafe { emit(out, DoscSpectrum(s)) }
    })
}

/// `|V(ω)|² = κ²ω e^{-ω/Λ}`. `omega_max <= 0` selects the default `20Λ`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dosc_spectrum_ohmic_exp(
    amplitude: f64,
    cutoff: f64,
    omega_max: f64,
    out: *mut *mut DoscSpectrum,
) -> DoscStatus {
    new_spectrum(
        CouplingFamily::OhmicExp { amplitude, cutoff },
        omega_max,
        out,
    )
}

/// `V(ω) = level` on `[lower, upper]`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dosc_spectrum_flat_band(
    level: f64,
    lower: f64,
    upper: f64,
    out: *mut *mut DoscSpectrum,
) -> DoscStatus {
    new_spectrum(
        CouplingFamily::FlatBand {
            level,
            lower,
            upper,
        },
        0.0,
        out,
    )
}

/// `|V(ω)|² = level²(ω/center) exp(-(ω-center)²/2width²)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dosc_spectrum_gaussian_peak(
    level: f64,
    center: f64,
    width: f64,
    omega_max: f64,
    out: *mut *mut DoscSpectrum,
) -> DoscStatus {
    new_spectrum(
        CouplingFamily::GaussianPeak {
            level,
            center,
            width,
        },
        omega_max,
        out,
    )
}

/// Piecewise-linear `V` through `n` nodes.
///
/// # Safety
/// `omegas` and `values` must point to `n` readable doubles; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn dosc_spectrum_tabulated(
    omegas: *const f64,
    values: *const f64,
    n: usize,
    out: *mut *mut DoscSpectrum,
) -> DoscStatus {
    guard(|| {
        let w = slice(omegas, n, "omegas")?.to_vec();
        let v = slice(values, n, "values")?.to_vec();
        let s = CouplingSpectrum::tabulated(w, v).map_err(fail)?;
        emit(out, DoscSpectrum(s))
    })
}

/// # Safety
/// `spec` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dosc_spectrum_free(spec: *mut DoscSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// `V(ω)`, or NaN for a NULL handle.
///
/// # Safety
/// `spec` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dosc_spectrum_coupling(spec: *const DoscSpectrum, omega: f64) -> f64 {
    spec.as_ref().map_or(f64::NAN, |s| s.0.coupling(omega))
}

/// `∫V²/ω dω` and `ω₀` minus it. A non-positive margin is not an error here.
///
/// # Safety
/// `spec` must be a live handle; `integral` and `margin` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dosc_positivity(
    spec: *const DoscSpectrum,
    u: DoscUnits,
    integral: *mut f64,
    margin: *mut f64,
) -> DoscStatus {
    guard(|| {
        let s = deref(spec, "spectrum")?;
        let u = units(u)?;
        let i = positivity_integral(&s.0).map_err(fail)?;
        if !integral.is_null() {
            *integral = i;
        }
        if !margin.is_null() {
            *margin = u.omega0 - i;
        }
        Ok(())
    })
}

/// Solves for `π(ω)` with default tolerances.
///
/// # Safety
/// `spec` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dosc_solve(
    spec: *const DoscSpectrum,
    u: DoscUnits,
    out: *mut *mut DoscSolution,
) -> DoscStatus {
    guard(|| {
        let s = deref(spec, "spectrum")?;
        let sol = compute_pi(&s.0, &units(u)?, &FanoOptions::default()).map_err(fail)?;
        emit(out, DoscSolution(sol))
    })
}

/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dosc_solution_free(sol: *mut DoscSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// # Safety
/// `sol` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dosc_solution_info(
    sol: *const DoscSolution,
    out: *mut DoscSolutionInfo,
) -> DoscStatus {
    guard(|| {
        let s = &deref(sol, "solution")?.0;
        if out.is_null() {
            return Err(null("info"));
        }
        *out = DoscSolutionInfo {
            nodes: s.omega.len(),
            bound_states: s.bound_states.len(),
            norm_defect: s.norm_defect,
            sum_rule_defect: s.sum_rule_defect(),
            resolution: s.resolution(),
        };
        Ok(())
    })
}

/// Copies the grid nodes, `π` at each node and the quadrature weights
/// (`Σ weight·pi` is the continuum part of `∫π`). Any output may be NULL;
/// each non-NULL buffer must hold `capacity >= nodes` doubles.
///
/// # Safety
/// `sol` must be a live handle; non-NULL buffers must be writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dosc_solution_copy(
    sol: *const DoscSolution,
    omega: *mut f64,
    pi: *mut f64,
    weight: *mut f64,
    capacity: usize,
) -> DoscStatus {
    guard(|| {
        let s = &deref(sol, "solution")?.0;
        if capacity < s.omega.len() {
            set_error(format!(
                "buffer holds {capacity} values, {} needed",
                s.omega.len()
            ));
            return Err(DoscStatus::BufferTooSmall);
        }
        fill(omega, &s.omega);
        fill(pi, &s.pi);
        fill(weight, &s.quad_weights);
        Ok(())
    })
}

/// Copies bound-state frequencies and weights; buffers as in [`dosc_solution_copy`].
///
/// # Safety
/// As for [`dosc_solution_copy`].
#[no_mangle]
pub unsafe extern "C" fn dosc_solution_bound_states(
    sol: *const DoscSolution,
    omega: *mut f64,
    weight: *mut f64,
    capacity: usize,
) -> DoscStatus {
    guard(|| {
        let s = &deref(sol, "solution")?.0;
        let n = s.bound_states.len();
        if capacity < n {
            set_error(format!("buffer holds {capacity} values, {n} needed"));
            return Err(DoscStatus::BufferTooSmall);
        }
        let w: Vec<f64> = s.bound_states.iter().map(|b| b.omega).collect();
        let m: Vec<f64> = s.bound_states.iter().map(|b| b.weight).collect();
        fill(omega, &w);
        fill(weight, &m);
        Ok(())
    })
}

fn ground_state(
    m: &FrequencyMeasure,
    u: &UnitSystem,
    out: *mut DoscGroundState,
) -> Result<(), DoscStatus> {
    if out.is_null() {
        return Err(null("ground state"));
    }
    let g = ground_state_moments(m, u).map_err(fail)?;
    unsafe { *out = summary_to_c(&g) };
    Ok(())
}

/// # Safety
/// `sol` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dosc_solution_ground_state(
    sol: *const DoscSolution,
    out: *mut DoscGroundState,
) -> DoscStatus {
    guard(|| {
        let s = &deref(sol, "solution")?.0;
        ground_state(&s.measure().map_err(fail)?, &s.units, out)
    })
}

/// `⟨⟨cos ωt⟩⟩`, `⟨⟨ω⁻¹sin ωt⟩⟩`, `⟨⟨ω sin ωt⟩⟩` at `n` sorted times. Times beyond
/// the grid's anti-aliasing bound are rejected with `DOSC_STATUS_NUMERICAL`.
///
/// # Safety
/// `times` must hold `n` doubles and each non-NULL output must be writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dosc_solution_kernels(
    sol: *const DoscSolution,
    times: *const f64,
    n: usize,
    k_cos: *mut f64,
    k_sin_over: *mut f64,
    k_sin_times: *mut f64,
) -> DoscStatus {
    guard(|| {
        let s = &deref(sol, "solution")?.0;
        let t = slice(times, n, "times")?;
        let k = dynamics::kernels(&s.measure().map_err(fail)?, t).map_err(fail)?;
        fill(k_cos, &k.k_cos);
        fill(k_sin_over, &k.k_sin_over);
        fill(k_sin_times, &k.k_sin_times);
        Ok(())
    })
}

fn new_oracle(
    model: FiniteBathModel,
    u: UnitSystem,
    out: *mut *mut DoscOracle,
) -> Result<(), DoscStatus> {
    let decomp = normal_modes(&model).map_err(fail)?;
    unsafe {
        emit(
            out,
            DoscOracle {
                model,
                decomp,
                units: u,
            },
        )
    }
}

/// Discretises `spec` into `modes` bath oscillators and diagonalises the result.
///
/// # Safety
/// `spec` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dosc_oracle_discretize(
    spec: *const DoscSpectrum,
    u: DoscUnits,
    modes: usize,
    scheme: DoscScheme,
    out: *mut *mut DoscOracle,
) -> DoscStatus {
    guard(|| {
        let s = deref(spec, "spectrum")?;
        let u = units(u)?;
        let scheme = match scheme {
            DoscScheme::Uniform => DiscretizationScheme::Uniform,
            DoscScheme::GaussLike => DiscretizationScheme::GaussLike,
        };
        new_oracle(discretize(&s.0, &u, modes, scheme).map_err(fail)?, u, out)
    })
}

/// A bath given mode by mode: `K₀k = couplings[k]·√(ω₀·bath_freqs[k])`.
///
/// # Safety
/// `bath_freqs` and `couplings` must hold `n` doubles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dosc_oracle_manual(
    u: DoscUnits,
    bath_freqs: *const f64,
    couplings: *const f64,
    n: usize,
    out: *mut *mut DoscOracle,
) -> DoscStatus {
    guard(|| {
        let u = units(u)?;
        let w = slice(bath_freqs, n, "bath_freqs")?.to_vec();
        let v = slice(couplings, n, "couplings")?.to_vec();
        new_oracle(
            FiniteBathModel::manual(u.omega0, w, v).map_err(fail)?,
            u,
            out,
        )
    })
}

/// # Safety
/// `oracle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dosc_oracle_free(oracle: *mut DoscOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}

/// Number of normal modes (bath modes + 1), or 0 for NULL.
///
/// # Safety
/// `oracle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dosc_oracle_len(oracle: *const DoscOracle) -> usize {
    oracle.as_ref().map_or(0, |o| o.decomp.len())
}

/// Copies the eigenfrequencies `Ω_k` and oscillator weights `π_k`.
///
/// # Safety
/// `oracle` must be a live handle; non-NULL buffers writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dosc_oracle_modes(
    oracle: *const DoscOracle,
    omega: *mut f64,
    pi: *mut f64,
    capacity: usize,
) -> DoscStatus {
    guard(|| {
        let o = deref(oracle, "oracle")?;
        if capacity < o.decomp.len() {
            set_error(format!(
                "buffer holds {capacity} values, {} needed",
                o.decomp.len()
            ));
            return Err(DoscStatus::BufferTooSmall);
        }
        fill(omega, &o.decomp.omegas);
        fill(pi, &o.decomp.pi);
        Ok(())
    })
}

/// Ground state of the finite system. `var_x`/`var_p` come straight from the
/// normal-mode covariance; the remaining fields from the discrete moments.
///
/// # Safety
/// `oracle` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dosc_oracle_ground_state(
    oracle: *const DoscOracle,
    out: *mut DoscGroundState,
) -> DoscStatus {
    guard(|| {
        let o = deref(oracle, "oracle")?;
        ground_state(&o.decomp.measure().map_err(fail)?, &o.units, out)?;
        let g = ground_covariance(&o.decomp, &o.units);
        (*out).var_x = g.var_x;
        (*out).var_p = g.var_p;
        Ok(())
    })
}

/// `Σ V_k²/ω_k` of the finite bath (positivity requires it below `ω₀`).
///
/// # Safety
/// `oracle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dosc_oracle_positivity_sum(oracle: *const DoscOracle) -> f64 {
    oracle
        .as_ref()
        .map_or(f64::NAN, |o| o.model.positivity_sum())
}
