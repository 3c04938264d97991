//! Coupling spectra `V(ω)`, the unit system and the positivity gate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{DoscError, Result};
use crate::quadrature::{integrate_with, QuadratureOptions};

/// Physical constants of a run. `ħ = m = ω₀ = 1` unless overridden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSystem {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub omega0: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem {
            hbar: 1.0,
            mass: 1.0,
            omega0: 1.0,
        }
    }
}

impl UnitSystem {
    pub fn new(hbar: f64, mass: f64, omega0: f64) -> Result<Self> {
        let u = UnitSystem { hbar, mass, omega0 };
        u.validate()?;
        Ok(u)
    }

    pub fn with_omega0(omega0: f64) -> Result<Self> {
        UnitSystem::new(1.0, 1.0, omega0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("omega0", self.omega0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DoscError::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Parametric families of the coupling `V(ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum CouplingFamily {
    /// `|V(ω)|² = κ² ω e^{-ω/Λ}`.
    OhmicExp { amplitude: f64, cutoff: f64 },
    /// `V(ω) = v` on `[lower, upper]`, zero elsewhere.
    FlatBand { level: f64, lower: f64, upper: f64 },
    /// `|V(ω)|² = v² (ω/ω_c) exp(-(ω-ω_c)²/2σ²)`.
    GaussianPeak { level: f64, center: f64, width: f64 },
    /// Piecewise-linear `V` through the given nodes, zero outside them.
    Tabulated { omegas: Vec<f64>, values: Vec<f64> },
}

/// A validated coupling spectrum with its effective support bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpectrum {
    family: CouplingFamily,
    omega_max: f64,
}

impl CouplingSpectrum {
    pub fn new(family: CouplingFamily, omega_max: Option<f64>) -> Result<Self> {
        let default_max = match &family {
            CouplingFamily::OhmicExp { cutoff, .. } => 20.0 * cutoff,
            CouplingFamily::FlatBand { upper, .. } => *upper,
            CouplingFamily::GaussianPeak { center, width, .. } => center + 12.0 * width,
            CouplingFamily::Tabulated { omegas, .. } => omegas.last().copied().unwrap_or(0.0),
        };
        let spec = CouplingSpectrum {
            family,
            omega_max: omega_max.unwrap_or(default_max),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ohmic_exp(amplitude: f64, cutoff: f64) -> Result<Self> {
        CouplingSpectrum::new(CouplingFamily::OhmicExp { amplitude, cutoff }, None)
    }

    /// Ohmic spectrum with `κ²Λ = strength·ω₀` for the given cutoff.
    pub fn ohmic_with_strength(strength: f64, cutoff: f64, omega0: f64) -> Result<Self> {
        if !(strength >= 0.0) {
            return Err(DoscError::InvalidSpectrum(format!(
                "negative strength {strength}"
            )));
        }
        CouplingSpectrum::ohmic_exp((strength * omega0 / cutoff).sqrt(), cutoff)
    }

    pub fn flat_band(level: f64, lower: f64, upper: f64) -> Result<Self> {
        CouplingSpectrum::new(
            CouplingFamily::FlatBand {
                level,
                lower,
                upper,
            },
            None,
        )
    }

    pub fn gaussian_peak(level: f64, center: f64, width: f64) -> Result<Self> {
        CouplingSpectrum::new(
            CouplingFamily::GaussianPeak {
                level,
                center,
                width,
            },
            None,
        )
    }

    pub fn tabulated(omegas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        CouplingSpectrum::new(CouplingFamily::Tabulated { omegas, values }, None)
    }

    pub fn with_omega_max(self, omega_max: f64) -> Result<Self> {
        let spec = CouplingSpectrum { omega_max, ..self };
        spec.validate()?;
        Ok(spec)
    }

    pub fn family(&self) -> &CouplingFamily {
        &self.family
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            CouplingFamily::OhmicExp { .. } => "ohmic_exp",
            CouplingFamily::FlatBand { .. } => "flat_band",
            CouplingFamily::GaussianPeak { .. } => "gaussian_peak",
            CouplingFamily::Tabulated { .. } => "tabulated",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DoscError::InvalidSpectrum(msg));
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return bad(format!(
                "omega_max must be positive and finite, got {}",
                self.omega_max
            ));
        }
        match &self.family {
            CouplingFamily::OhmicExp { amplitude, cutoff } => {
                if !amplitude.is_finite() || !(*cutoff > 0.0 && cutoff.is_finite()) {
                    return bad(format!("ohmic_exp needs finite amplitude and cutoff > 0, got {amplitude}, {cutoff}"));
                }
            }
            CouplingFamily::FlatBand {
                level,
                lower,
                upper,
            } => {
                // lower = 0 is constructible; the positivity gate rejects it because
                // the V²/ω integral diverges there.
                if !level.is_finite() || !(*lower >= 0.0 && lower < upper && upper.is_finite()) {
                    return bad(format!(
                        "flat_band needs 0 <= lower < upper, got [{lower}, {upper}]"
                    ));
                }
                if self.omega_max < *upper {
                    return bad(format!(
                        "omega_max {} below the band edge {upper}",
                        self.omega_max
                    ));
                }
            }
            CouplingFamily::GaussianPeak {
                level,
                center,
                width,
            } => {
                if !level.is_finite()
                    || !(*center > 0.0 && *width > 0.0)
                    || !center.is_finite()
                    || !width.is_finite()
                {
                    return bad(format!(
                        "gaussian_peak needs center, width > 0, got {center}, {width}"
                    ));
                }
            }
            CouplingFamily::Tabulated { omegas, values } => {
                if omegas.len() < 2 || omegas.len() != values.len() {
                    return bad(format!(
                        "tabulated needs >= 2 nodes with matching values ({} omegas, {} values)",
                        omegas.len(),
                        values.len()
                    ));
                }
                if omegas.iter().chain(values).any(|v| !v.is_finite()) {
                    return bad("tabulated entries must be finite".into());
                }
                if omegas[0] < 0.0 {
                    return bad(format!("tabulated grid starts below zero at {}", omegas[0]));
                }
                if let Some(w) = omegas.windows(2).position(|w| w[1] <= w[0]) {
                    return bad(format!(
                        "tabulated grid is not strictly increasing at index {}",
                        w + 1
                    ));
                }
                if omegas[0] == 0.0 && values[0] != 0.0 {
                    return bad("tabulated V(0) must vanish when the grid starts at 0".into());
                }
            }
        }
        Ok(())
    }

    /// `V(ω)`; zero outside the support and above `omega_max`.
    pub fn coupling(&self, omega: f64) -> f64 {
        if !(omega >= 0.0) || omega > self.omega_max {
            return 0.0;
        }
        match &self.family {
            CouplingFamily::OhmicExp { amplitude, cutoff } => {
                amplitude * omega.sqrt() * (-0.5 * omega / cutoff).exp()
            }
            CouplingFamily::FlatBand {
                level,
                lower,
                upper,
            } => {
                if omega >= *lower && omega <= *upper {
                    *level
                } else {
                    0.0
                }
            }
            CouplingFamily::GaussianPeak {
                level,
                center,
                width,
            } => {
                let z = (omega - center) / width;
                level * (omega / center).sqrt() * (-0.25 * z * z).exp()
            }
            CouplingFamily::Tabulated { omegas, values } => interpolate(omegas, values, omega),
        }
    }

    /// `|V(ω)|²`.
    pub fn coupling_sq(&self, omega: f64) -> f64 {
        let v = self.coupling(omega);
        v * v
    }

    /// Closed interval outside which `V` vanishes identically.
    pub fn support(&self) -> (f64, f64) {
        match &self.family {
            CouplingFamily::OhmicExp { .. } | CouplingFamily::GaussianPeak { .. } => {
                (0.0, self.omega_max)
            }
            CouplingFamily::FlatBand { lower, upper, .. } => (*lower, *upper),
            CouplingFamily::Tabulated { omegas, .. } => {
                (omegas[0], omegas[omegas.len() - 1].min(self.omega_max))
            }
        }
    }

    /// True when `V ≡ 0`.
    pub fn is_uncoupled(&self) -> bool {
        match &self.family {
            CouplingFamily::OhmicExp { amplitude, .. } => *amplitude == 0.0,
            CouplingFamily::FlatBand { level, .. } | CouplingFamily::GaussianPeak { level, .. } => {
                *level == 0.0
            }
            CouplingFamily::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// The spectrum with `V → s·V`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let family = match &self.family {
            CouplingFamily::OhmicExp { amplitude, cutoff } => CouplingFamily::OhmicExp {
                amplitude: amplitude * s,
                cutoff: *cutoff,
            },
            CouplingFamily::FlatBand {
                level,
                lower,
                upper,
            } => CouplingFamily::FlatBand {
                level: level * s,
                lower: *lower,
                upper: *upper,
            },
            CouplingFamily::GaussianPeak {
                level,
                center,
                width,
            } => CouplingFamily::GaussianPeak {
                level: level * s,
                center: *center,
                width: *width,
            },
            CouplingFamily::Tabulated { omegas, values } => CouplingFamily::Tabulated {
                omegas: omegas.clone(),
                values: values.iter().map(|v| v * s).collect(),
            },
        };
        CouplingSpectrum::new(family, Some(self.omega_max))
    }

    /// Closed form of `∫ V²/ω` over the truncated support, where one exists.
    pub fn analytic_positivity_integral(&self) -> Option<f64> {
        match &self.family {
            CouplingFamily::OhmicExp { amplitude, cutoff } => {
                Some(amplitude * amplitude * cutoff * (1.0 - (-self.omega_max / cutoff).exp()))
            }
            CouplingFamily::FlatBand {
                level,
                lower,
                upper,
            } => {
                if *lower == 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(level * level * (upper / lower).ln())
                }
            }
            CouplingFamily::GaussianPeak {
                level,
                center,
                width,
            } => {
                let s = width * std::f64::consts::SQRT_2;
                let erf = statrs::function::erf::erf;
                Some(
                    level * level / center
                        * width
                        * (PI / 2.0).sqrt()
                        * (erf((self.omega_max - center) / s) + erf(center / s)),
                )
            }
            CouplingFamily::Tabulated { .. } => None,
        }
    }

    /// Upper bound on the part of `∫₀^∞ V²/ω` discarded by truncating at `omega_max`.
    pub fn truncation_tail(&self) -> f64 {
        match &self.family {
            CouplingFamily::OhmicExp { amplitude, cutoff } => {
                amplitude * amplitude * cutoff * (-self.omega_max / cutoff).exp()
            }
            CouplingFamily::GaussianPeak {
                level,
                center,
                width,
            } => {
                let s = width * std::f64::consts::SQRT_2;
                level * level / center
                    * width
                    * (PI / 2.0).sqrt()
                    * statrs::function::erf::erfc((self.omega_max - center) / s)
            }
            CouplingFamily::FlatBand { .. } | CouplingFamily::Tabulated { .. } => 0.0,
        }
    }

    /// Whether `⟨⟨ω⁴⟩⟩` is guaranteed finite. Tabulated input carries a tail risk.
    pub fn fourth_moment_guaranteed(&self) -> bool {
        !matches!(self.family, CouplingFamily::Tabulated { .. })
    }

    /// Interior breakpoints where `V` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            CouplingFamily::Tabulated { omegas, .. } => {
                let (lo, hi) = self.support();
                omegas
                    .iter()
                    .copied()
                    .filter(|w| *w > lo && *w < hi)
                    .collect()
            }
            _ => Vec::new(),
        }
    }
}

fn interpolate(omegas: &[f64], values: &[f64], omega: f64) -> f64 {
    let n = omegas.len();
    if omega < omegas[0] || omega > omegas[n - 1] {
        return 0.0;
    }
    let i = match omegas.binary_search_by(|w| w.total_cmp(&omega)) {
        Ok(i) => return values[i],
        Err(i) => i,
    };
    let (w0, w1) = (omegas[i - 1], omegas[i]);
    let t = (omega - w0) / (w1 - w0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// Outcome of the positivity gate `ω₀ > ∫ V²/ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    /// `∫₀^∞ V(ω)²/ω dω`.
    pub integral: f64,
    /// `ω₀ - integral`.
    pub margin: f64,
    /// `Ω₀² = ω₀·margin`, the squared frequency of the minimal-coupling form.
    pub renormalized_sq: f64,
}

impl PositivityReport {
    pub fn admissible(&self) -> bool {
        self.margin > 0.0
    }
}

/// Relative size of the truncation tail tolerated by [`positivity_check`].
pub const TAIL_REL_TOL: f64 = 1e-8;

/// Numerically evaluates the positivity integral; rejects inadmissible models.
pub fn positivity_integral(spec: &CouplingSpectrum) -> Result<f64> {
    if spec.is_uncoupled() {
        return Ok(0.0);
    }
    let (lo, hi) = spec.support();
    if lo == 0.0 {
        if let CouplingFamily::FlatBand { .. } = spec.family() {
            return Ok(f64::INFINITY);
        }
    }
    let opts = QuadratureOptions {
        rel_tol: 1e-12,
        abs_floor: 1e-15,
        max_panels: 10_000,
    };
    let mut edges = vec![lo];
    edges.extend(spec.breakpoints());
    edges.push(hi);
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += integrate_with(
            |x: f64| {
                if x > 0.0 {
                    spec.coupling_sq(x) / x
                } else {
                    0.0
                }
            },
            w[0],
            w[1],
            &opts,
        )?
        .value;
    }
    Ok(total)
}

pub fn positivity_check(spec: &CouplingSpectrum, units: &UnitSystem) -> Result<PositivityReport> {
    units.validate()?;
    let integral = positivity_integral(spec)?;
    let tail = spec.truncation_tail();
    if tail > TAIL_REL_TOL * integral.abs().max(f64::MIN_POSITIVE) && integral > 0.0 {
        return Err(DoscError::InvalidSpectrum(format!(
            "omega_max = {} truncates a tail of {tail:.3e} (> {TAIL_REL_TOL:e} of the coupling integral {integral:.6e}); raise omega_max",
            spec.omega_max()
        )));
    }
    let margin = units.omega0 - integral;
    if !(margin > 0.0) {
        return Err(DoscError::Positivity {
            integral,
            omega0: units.omega0,
            margin,
        });
    }
    Ok(PositivityReport {
        integral,
        margin,
        renormalized_sq: units.omega0 * margin,
    })
}
