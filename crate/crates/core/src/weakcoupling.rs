//! Weak-damping limit: frequency shift, approximate `|α|²`, and how closely
//! `π(ω)` approaches a Lorentzian.

use std::f64::consts::PI;
use std::io::Write;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, Dyn, OMatrix, OVector, Vector3, U3};
use serde::{Deserialize, Serialize};

use crate::error::{DoscError, Result};
use crate::fano::{
    compute_alpha_sq, compute_beta_ratio, shift_integral, FanoOptions, SpectralSolution,
};
use crate::spectra::{CouplingSpectrum, UnitSystem};

/// `F(ω) = ¼∫(ℙ/(ω-ω') - 1/(ω+ω'))|V(ω')|² dω'`.
pub fn lamb_shift(spec: &CouplingSpectrum, omega: f64, opts: &FanoOptions) -> Result<f64> {
    if spec.is_uncoupled() {
        return Ok(0.0);
    }
    Ok(0.25 * shift_integral(spec, omega, opts)?)
}

/// `|α|² ≈ (|V|²/4)/((ω-ω₀-F)² + (π|V|²/4)²)`, valid near resonance when
/// `π|V(ω₀)|²/4 ≪ ω₀`.
pub fn approx_alpha_sq(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    omega: f64,
    opts: &FanoOptions,
) -> Result<f64> {
    let v2 = spec.coupling_sq(omega);
    if v2 == 0.0 {
        return Ok(0.0);
    }
    let f = lamb_shift(spec, omega, opts)?;
    let det = omega - units.omega0 - f;
    let g = 0.25 * PI * v2;
    Ok(0.25 * v2 / (det * det + g * g))
}

/// `π|V(ω₀)|²/4`.
pub fn predicted_hwhm(spec: &CouplingSpectrum, units: &UnitSystem) -> f64 {
    0.25 * PI * spec.coupling_sq(units.omega0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakCouplingReport {
    #[serde(rename = "F0")]
    pub f0: f64,
    pub hwhm_pred: f64,
    /// `2·hwhm_pred`.
    pub fwhm_pred: f64,
    pub center_fit: f64,
    pub hwhm_fit: f64,
    /// Area of the fitted Lorentzian.
    pub amplitude_fit: f64,
    /// `∫|π - L| dω` over the fit window.
    pub residual_l1: f64,
    /// Largest `|β/α|` over `center_fit ± hwhm_fit`.
    pub max_beta_ratio_peak: f64,
    /// Largest `|approx |α|² / |α|² - 1|` over `center_fit ± hwhm_fit`.
    pub max_alpha_ratio_error: f64,
    pub window: (f64, f64),
    pub window_nodes: usize,
}

impl WeakCouplingReport {
    pub fn hwhm_rel_error(&self) -> f64 {
        (self.hwhm_fit / self.hwhm_pred - 1.0).abs()
    }

    /// `|center_fit - (ω₀ + F(ω₀))|` in units of `hwhm_pred`.
    pub fn center_offset(&self, omega0: f64) -> f64 {
        (self.center_fit - omega0 - self.f0).abs() / self.hwhm_pred
    }
}

/// Half-width of the fit window in units of the HWHM.
pub const FIT_WINDOW: f64 = 10.0;

fn lorentzian(w: f64, p: &Vector3<f64>) -> f64 {
    let (a, c, g) = (p[0], p[1], p[2]);
    a * g / (PI * ((w - c).powi(2) + g * g))
}

/// Quadrature-weighted least squares, so the fit approximates a continuous L² fit.
struct LorentzFit<'a> {
    omega: &'a [f64],
    pi: &'a [f64],
    sqrt_w: Vec<f64>,
    p: Vector3<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U3> for LorentzFit<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, x: &Vector3<f64>) {
        self.p = *x;
    }

    fn params(&self) -> Vector3<f64> {
        self.p
    }

    fn residuals(&self) -> Option<OVector<f64, Dyn>> {
        Some(OVector::<f64, Dyn>::from_iterator(
            self.omega.len(),
            self.omega
                .iter()
                .zip(self.pi)
                .zip(&self.sqrt_w)
                .map(|((w, p), s)| s * (lorentzian(*w, &self.p) - p)),
        ))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U3>> {
        let (a, c, g) = (self.p[0], self.p[1], self.p[2]);
        let mut j = OMatrix::<f64, Dyn, U3>::zeros(self.omega.len());
        for (i, (w, s)) in self.omega.iter().zip(&self.sqrt_w).enumerate() {
            let d = w - c;
            let q = d * d + g * g;
            j[(i, 0)] = s * g / (PI * q);
            j[(i, 1)] = s * a * g * 2.0 * d / (PI * q * q);
            j[(i, 2)] = s * a * (d * d - g * g) / (PI * q * q);
        }
        Some(j)
    }
}

/// Peak of the continuum part of `π` and its half-maximum width.
fn peak_estimate(sol: &SpectralSolution) -> Result<(f64, f64)> {
    let (imax, pmax) =
        sol.pi.iter().enumerate().fold(
            (usize::MAX, 0.0),
            |acc, (i, p)| if *p > acc.1 { (i, *p) } else { acc },
        );
    if imax == usize::MAX || imax == 0 || imax + 1 == sol.pi.len() {
        return Err(DoscError::FitFailure("pi has no interior peak".into()));
    }
    let half = 0.5 * pmax;
    let left = sol.pi[..imax].iter().rposition(|p| *p < half);
    let right = sol.pi[imax..]
        .iter()
        .position(|p| *p < half)
        .map(|k| imax + k);
    match (left, right) {
        (Some(l), Some(r)) => Ok((sol.omega[imax], 0.5 * (sol.omega[r] - sol.omega[l]))),
        _ => Err(DoscError::FitFailure(
            "pi peak has no half-maximum on both sides".into(),
        )),
    }
}

fn window_indices(sol: &SpectralSolution, lo: f64, hi: f64) -> (usize, usize) {
    let a = sol.omega.partition_point(|w| *w < lo);
    let b = sol.omega.partition_point(|w| *w <= hi);
    (a, b)
}

fn fit_window(
    sol: &SpectralSolution,
    p0: Vector3<f64>,
    lo: f64,
    hi: f64,
) -> Result<(Vector3<f64>, usize, usize)> {
    let (a, b) = window_indices(sol, lo, hi);
    if b < a + 6 {
        return Err(DoscError::FitFailure(format!(
            "only {} grid nodes in the fit window",
            b.saturating_sub(a)
        )));
    }
    let problem = LorentzFit {
        omega: &sol.omega[a..b],
        pi: &sol.pi[a..b],
        sqrt_w: sol.quad_weights[a..b].iter().map(|w| w.sqrt()).collect(),
        p: p0,
    };
    let (fitted, report) = LevenbergMarquardt::new().minimize(problem);
    if !report.termination.was_successful() {
        return Err(DoscError::FitFailure(format!(
            "Levenberg-Marquardt stopped: {:?}",
            report.termination
        )));
    }
    let mut p = fitted.p;
    p[2] = p[2].abs();
    if !(p.iter().all(|v| v.is_finite()) && p[2] > 0.0) {
        return Err(DoscError::FitFailure(format!(
            "degenerate Lorentzian parameters {:?}",
            p.as_slice()
        )));
    }
    Ok((p, a, b))
}

/// Fits a Lorentzian to the peak of `π` over `center ± 10·HWHM`.
pub fn lorentzian_fit(sol: &SpectralSolution, opts: &FanoOptions) -> Result<WeakCouplingReport> {
    let spec = &sol.spectrum;
    let units = &sol.units;
    let w0 = units.omega0;
    let f0 = lamb_shift(spec, w0, opts)?;
    let hwhm_pred = predicted_hwhm(spec, units);
    let (c0, g0) = peak_estimate(sol)?;
    let mut p = Vector3::new(1.0, c0, g0);
    let (mut a, mut b) = (0, 0);
    // The window follows the fitted parameters until it settles.
    for _ in 0..3 {
        let (lo, hi) = (p[1] - FIT_WINDOW * p[2], p[1] + FIT_WINDOW * p[2]);
        let (q, qa, qb) = fit_window(sol, p, lo, hi)?;
        let moved = (q[1] - p[1]).abs() + (q[2] - p[2]).abs();
        p = q;
        (a, b) = (qa, qb);
        if moved <= 1e-3 * p[2] {
            break;
        }
    }
    let residual_l1 = (a..b)
        .map(|i| sol.quad_weights[i] * (sol.pi[i] - lorentzian(sol.omega[i], &p)).abs())
        .sum();
    let (center_fit, hwhm_fit) = (p[1], p[2]);
    let (fa, fb) = window_indices(sol, center_fit - hwhm_fit, center_fit + hwhm_fit);
    let mut max_beta_ratio_peak: f64 = 0.0;
    let mut max_alpha_ratio_error: f64 = 0.0;
    for i in fa..fb {
        let w = sol.omega[i];
        max_beta_ratio_peak = max_beta_ratio_peak.max(compute_beta_ratio(w, w0).abs());
        let exact = sol.alpha_sq[i];
        if exact > 0.0 {
            let approx = approx_alpha_sq(spec, units, w, opts)?;
            max_alpha_ratio_error = max_alpha_ratio_error.max((approx / exact - 1.0).abs());
        }
    }
    Ok(WeakCouplingReport {
        f0,
        hwhm_pred,
        fwhm_pred: 2.0 * hwhm_pred,
        center_fit,
        hwhm_fit,
        amplitude_fit: p[0],
        residual_l1,
        max_beta_ratio_peak,
        max_alpha_ratio_error,
        window: (
            center_fit - FIT_WINDOW * hwhm_fit,
            center_fit + FIT_WINDOW * hwhm_fit,
        ),
        window_nodes: b - a,
    })
}

/// CSV `omega,pi_exact,pi_lorentz` over the fit window.
pub fn write_fit_csv<W: Write>(
    sol: &SpectralSolution,
    report: &WeakCouplingReport,
    out: W,
) -> Result<()> {
    let p = Vector3::new(report.amplitude_fit, report.center_fit, report.hwhm_fit);
    let (a, b) = window_indices(sol, report.window.0, report.window.1);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "pi_exact", "pi_lorentz"])?;
    for i in a..b {
        w.write_record([
            sol.omega[i].to_string(),
            sol.pi[i].to_string(),
            lorentzian(sol.omega[i], &p).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Exact `|α|²` next to its weak-coupling approximation, for side-by-side scans.
pub fn alpha_sq_comparison(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    omegas: &[f64],
    opts: &FanoOptions,
) -> Result<Vec<(f64, f64, f64)>> {
    omegas
        .iter()
        .map(|w| {
            Ok((
                *w,
                compute_alpha_sq(spec, units, *w, opts)?,
                approx_alpha_sq(spec, units, *w, opts)?,
            ))
        })
        .collect()
}
