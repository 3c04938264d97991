//! Observables of the reduced oscillator in the global ground state, all
//! derived from the moments `⟨⟨ω⟩⟩`, `⟨⟨ω⁻¹⟩⟩` and `⟨⟨ω²⟩⟩` of `π`.
//!
//! Temperatures use `k_B = 1`, entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{DoscError, Result};
use crate::measure::FrequencyMeasure;
use crate::spectra::UnitSystem;

/// Moments of `π` that the ground state depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub total: f64,
    pub mean: f64,
    pub mean_inverse: f64,
    pub mean_sq: f64,
}

impl Moments {
    pub fn of(m: &FrequencyMeasure) -> Moments {
        Moments {
            total: m.total(),
            mean: m.mean(),
            mean_inverse: m.mean_inverse(),
            mean_sq: m.power_moment(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSummary {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    /// `⟨px + xp⟩/2`.
    pub sym_xp: f64,
    /// Standard deviation of `(a + a†)/√2`.
    pub quad_x_unc: f64,
    /// Standard deviation of `-i(a - a†)/√2`.
    pub quad_p_unc: f64,
    pub omega_c: f64,
    pub n_bar_c: f64,
    pub t_eff: f64,
    pub entropy: f64,
    pub mutual_info: f64,
    pub mean_energy: f64,
    pub moments: Moments,
}

/// Full summary from a normalised frequency measure.
pub fn ground_state_moments(
    m: &FrequencyMeasure,
    units: &UnitSystem,
) -> Result<GroundStateSummary> {
    units.validate()?;
    let mo = Moments::of(m);
    let UnitSystem { hbar, mass, omega0 } = *units;
    let n_bar = occupation_from_moments(mo.mean, mo.mean_inverse)?;
    let omega_c = (mo.mean / mo.mean_inverse).sqrt();
    let entropy = entropy_from_occupation(n_bar);
    Ok(GroundStateSummary {
        mean_x: 0.0,
        mean_p: 0.0,
        var_x: hbar * mo.mean_inverse / (2.0 * mass),
        var_p: hbar * mass * mo.mean / 2.0,
        sym_xp: 0.0,
        quad_x_unc: (mo.mean_inverse * omega0 / 2.0).sqrt(),
        quad_p_unc: (mo.mean / (2.0 * omega0)).sqrt(),
        omega_c,
        n_bar_c: n_bar,
        t_eff: temperature_from_occupation(omega_c, n_bar, hbar),
        entropy,
        mutual_info: 2.0 * entropy,
        mean_energy: energy_from_moments(mo.mean, mo.mean_inverse, units),
        moments: mo,
    })
}

/// `ω_c = √(⟨⟨ω⟩⟩/⟨⟨ω⁻¹⟩⟩)`.
pub fn effective_frequency(m: &FrequencyMeasure) -> f64 {
    (m.mean() / m.mean_inverse()).sqrt()
}

/// `n̄_c = (√(⟨⟨ω⟩⟩⟨⟨ω⁻¹⟩⟩) - 1)/2`.
pub fn thermal_occupation(m: &FrequencyMeasure) -> Result<f64> {
    occupation_from_moments(m.mean(), m.mean_inverse())
}

/// Round-off below this is clamped to an occupation of zero.
const OCCUPATION_CLAMP: f64 = 1e-12;

pub fn occupation_from_moments(mean: f64, mean_inverse: f64) -> Result<f64> {
    let n = 0.5 * ((mean * mean_inverse).sqrt() - 1.0);
    if n >= 0.0 {
        Ok(n)
    } else if n > -OCCUPATION_CLAMP {
        Ok(0.0)
    } else {
        Err(DoscError::InvariantViolation(format!(
            "negative thermal occupation {n:.3e}: <<w>><<1/w>> = {} < 1",
            mean * mean_inverse
        )))
    }
}

/// `T = ħω_c/ln(1 + 1/n̄)`; zero for `n̄ = 0`.
pub fn temperature_from_occupation(omega_c: f64, n_bar: f64, hbar: f64) -> f64 {
    if n_bar <= 0.0 {
        0.0
    } else {
        hbar * omega_c / (1.0 / n_bar).ln_1p()
    }
}

/// `S = (n̄+1)ln(n̄+1) - n̄ ln n̄`; zero for `n̄ = 0`.
pub fn entropy_from_occupation(n_bar: f64) -> f64 {
    if n_bar <= 0.0 {
        0.0
    } else {
        (n_bar + 1.0) * n_bar.ln_1p() - n_bar * n_bar.ln()
    }
}

pub fn effective_temperature(m: &FrequencyMeasure, units: &UnitSystem) -> Result<f64> {
    Ok(temperature_from_occupation(
        effective_frequency(m),
        thermal_occupation(m)?,
        units.hbar,
    ))
}

/// Entropy of the oscillator and the oscillator–environment mutual information `2S`.
pub fn entanglement_entropy(m: &FrequencyMeasure) -> Result<(f64, f64)> {
    let s = entropy_from_occupation(thermal_occupation(m)?);
    Ok((s, 2.0 * s))
}

fn energy_from_moments(mean: f64, mean_inverse: f64, units: &UnitSystem) -> f64 {
    let w0 = units.omega0;
    0.25 * units.hbar * w0 * (mean / w0 + w0 * mean_inverse)
}

/// `⟨p²/2m + mω₀²x²/2⟩ = (ħω₀/4)(⟨⟨ω⟩⟩/ω₀ + ω₀⟨⟨ω⁻¹⟩⟩)`.
pub fn mean_energy(m: &FrequencyMeasure, units: &UnitSystem) -> f64 {
    energy_from_moments(m.mean(), m.mean_inverse(), units)
}

/// `χ(ξ) = exp(-½(⟨⟨ω⟩⟩/ω₀·ξ_r² + ω₀⟨⟨ω⁻¹⟩⟩·ξ_i²))`.
pub fn characteristic_function(
    m: &FrequencyMeasure,
    units: &UnitSystem,
    xi_r: f64,
    xi_i: f64,
) -> f64 {
    let w0 = units.omega0;
    (-0.5 * (m.mean() / w0 * xi_r * xi_r + w0 * m.mean_inverse() * xi_i * xi_i)).exp()
}

/// Defects of the identities linking `π` to the oscillator state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `|(n̄_c + ½)ω_c - ½⟨⟨ω⟩⟩| / ½⟨⟨ω⟩⟩`.
    pub effective_energy_defect: f64,
    /// `|mutual_info - 2S|`.
    pub mutual_info_defect: f64,
    /// Relative gap between `⟨x²⟩` as a mixture of ground states and as `ħ⟨⟨ω⁻¹⟩⟩/2m`.
    pub var_x_mixture_defect: f64,
    pub var_p_mixture_defect: f64,
    /// `⟨⟨ω²⟩⟩`, the coefficient of `mx²/2` in the oscillator Hamiltonian.
    pub potential_coefficient: f64,
    /// `|⟨⟨ω²⟩⟩/ω₀² - 1|`.
    pub potential_defect: f64,
    /// `|2√(var_x·var_p)/ħ - (2n̄_c + 1)|`.
    pub symplectic_defect: f64,
}

/// Tolerance for identities that hold by construction.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Checks the algebraic identities; fails only on a defect above [`IDENTITY_TOL`],
/// which would signal an internal inconsistency. The potential coefficient is a
/// quadrature result and is reported, not enforced.
pub fn interpretation_identities(
    m: &FrequencyMeasure,
    units: &UnitSystem,
) -> Result<IdentityReport> {
    let g = ground_state_moments(m, units)?;
    let UnitSystem { hbar, mass, omega0 } = *units;
    let mixture_x = m.moment(|w| hbar / (2.0 * mass * w));
    let mixture_p = m.moment(|w| hbar * mass * w / 2.0);
    let half_mean = 0.5 * g.moments.mean;
    let report = IdentityReport {
        effective_energy_defect: ((g.n_bar_c + 0.5) * g.omega_c - half_mean).abs() / half_mean,
        mutual_info_defect: (g.mutual_info - 2.0 * g.entropy).abs(),
        var_x_mixture_defect: (mixture_x - g.var_x).abs() / g.var_x,
        var_p_mixture_defect: (mixture_p - g.var_p).abs() / g.var_p,
        potential_coefficient: g.moments.mean_sq,
        potential_defect: (g.moments.mean_sq / (omega0 * omega0) - 1.0).abs(),
        symplectic_defect: (2.0 * (g.var_x * g.var_p).sqrt() / hbar - (2.0 * g.n_bar_c + 1.0))
            .abs(),
    };
    let worst = [
        ("effective energy", report.effective_energy_defect),
        ("mutual information", report.mutual_info_defect),
        ("position mixture", report.var_x_mixture_defect),
        ("momentum mixture", report.var_p_mixture_defect),
        ("symplectic eigenvalue", report.symplectic_defect),
    ]
    .into_iter()
    .find(|(_, d)| !(*d <= IDENTITY_TOL));
    if let Some((name, d)) = worst {
        return Err(DoscError::InvariantViolation(format!(
            "{name} identity defect {d:.3e} above {IDENTITY_TOL:e}"
        )));
    }
    Ok(report)
}

impl GroundStateSummary {
    /// Human-readable report block.
    pub fn report_text(&self) -> String {
        let rows = [
            ("<x>", self.mean_x),
            ("<p>", self.mean_p),
            ("var x", self.var_x),
            ("var p", self.var_p),
            ("<px+xp>/2", self.sym_xp),
            ("quadrature X uncertainty", self.quad_x_unc),
            ("quadrature P uncertainty", self.quad_p_unc),
            ("<<w>>", self.moments.mean),
            ("<<1/w>>", self.moments.mean_inverse),
            ("<<w^2>>", self.moments.mean_sq),
            ("omega_c", self.omega_c),
            ("n_bar_c", self.n_bar_c),
            ("T_eff (k_B = 1)", self.t_eff),
            ("entropy S [nats]", self.entropy),
            ("mutual information 2S [nats]", self.mutual_info),
            ("mean energy", self.mean_energy),
        ];
        let mut out = String::from("ground state of the damped oscillator\n");
        for (k, v) in rows {
            out.push_str(&format!("  {k:<30} {v}\n"));
        }
        out
    }
}
