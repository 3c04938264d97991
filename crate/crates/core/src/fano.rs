//! Continuum diagonalisation: `Y(ω)`, `|α(ω)|²`, `β/α`, the dressing kernels
//! and the ground-state frequency density `π(ω)` on an adaptive grid.
//!
//! Everything is written in terms of the dispersion function
//! `D(ω) = |V|²·Y = 2(ω²-ω₀²)/ω₀ - I(ω)`, with
//! `I(ω) = ∫ (ℙ/(ω-ω') - 1/(ω+ω')) |V(ω')|² dω'`. Using `D` instead of `Y` keeps
//! `π = 4ω|V|²/(ω₀(D² + π²|V|⁴))` finite where `V` is small.
//!
//! Spectra with a hard edge (a band, a truncation) also carry dressed modes
//! outside the coupling support. They appear as isolated roots of `D` and are
//! kept as point masses of `π` ([`BoundState`]); without them neither the
//! normalisation nor the sum rule closes.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DoscError, Result};
use crate::measure::{FrequencyMeasure, ANTI_ALIASING};
use crate::quadrature::{cauchy_pv_default, gk15_rule, integrate_with, QuadratureOptions};
use crate::spectra::{positivity_check, CouplingSpectrum, UnitSystem};

/// Tolerances and budgets of the `π(ω)` solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FanoOptions {
    /// Relative tolerance of every shift integral `I(ω)`.
    pub pv_rel_tol: f64,
    /// Absolute target for the summed panel error of `∫π(1 + ω²/ω₀² + ω₀/ω)`.
    pub integration_tol: f64,
    /// Largest acceptable `|∫π - 1|`.
    pub norm_tol: f64,
    pub max_panels: usize,
    /// Number of logarithmic panels in the starting grid.
    pub base_panels: usize,
}

impl Default for FanoOptions {
    fn default() -> Self {
        FanoOptions {
            pv_rel_tol: 1e-11,
            integration_tol: 1e-10,
            norm_tol: 1e-6,
            max_panels: 20_000,
            base_panels: 64,
        }
    }
}

impl FanoOptions {
    fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions {
            rel_tol: self.pv_rel_tol,
            abs_floor: 1e-15,
            max_panels: 10_000,
        }
    }
}

fn require_positive(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(DoscError::InvalidArgument(format!(
            "frequency must be positive, got {omega}"
        )));
    }
    Ok(())
}

/// `I(ω) = ∫ (ℙ/(ω-ω') - 1/(ω+ω')) |V(ω')|² dω'`.
///
/// Inside the support this is a single principal-value integral of
/// `-2ω'|V|²/(ω'+ω)` against `1/(ω'-ω)`; outside it is regular.
pub fn shift_integral(spec: &CouplingSpectrum, omega: f64, opts: &FanoOptions) -> Result<f64> {
    require_positive(omega)?;
    if spec.is_uncoupled() {
        return Ok(0.0);
    }
    let (lo, hi) = spec.support();
    let q = opts.quadrature();
    let value = if omega > lo && omega < hi {
        let f = |x: f64| -2.0 * x * spec.coupling_sq(x) / (x + omega);
        cauchy_pv_default(f, omega, lo, hi, &q)?.value
    } else {
        let g = |x: f64| 2.0 * x * spec.coupling_sq(x) / (omega + x);
        let (sign, u_lo, u_hi, x_of) = outside_map(omega, lo, hi);
        sign * integrate_with(|u: f64| g(x_of(u)), u_lo, u_hi, &q)?.value
    };
    Ok(value)
}

/// Substitution `u = ln|ω - x|` for integrals over the support at an exterior `ω`.
///
/// Returns the sign of `1/(ω - x)`, the `u` range and `x(u)`; then
/// `∫ g(x)/(ω-x) dx = sign·∫ g(x(u)) du`, which stays regular as `ω` nears an edge.
fn outside_map(omega: f64, lo: f64, hi: f64) -> (f64, f64, f64, impl Fn(f64) -> f64) {
    let above = omega >= hi;
    let (u_lo, u_hi) = if above {
        ((omega - hi).ln(), (omega - lo).ln())
    } else {
        ((lo - omega).ln(), (hi - omega).ln())
    };
    let sign = if above { 1.0 } else { -1.0 };
    let x_of = move |u: f64| {
        if above {
            omega - u.exp()
        } else {
            omega + u.exp()
        }
    };
    (sign, u_lo, u_hi, x_of)
}

/// `D(ω) = 2(ω²-ω₀²)/ω₀ - I(ω)`.
pub fn dispersion(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    omega: f64,
    opts: &FanoOptions,
) -> Result<f64> {
    let w0 = units.omega0;
    Ok(2.0 * (omega * omega - w0 * w0) / w0 - shift_integral(spec, omega, opts)?)
}

fn require_coupled(spec: &CouplingSpectrum, omega: f64) -> Result<f64> {
    require_positive(omega)?;
    let v2 = spec.coupling_sq(omega);
    if v2 == 0.0 {
        return Err(DoscError::OutsideSupport { omega });
    }
    Ok(v2)
}

/// `Y(ω) = D(ω)/|V(ω)|²`.
pub fn compute_y(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    omega: f64,
    opts: &FanoOptions,
) -> Result<f64> {
    let v2 = require_coupled(spec, omega)?;
    Ok(dispersion(spec, units, omega, opts)? / v2)
}

/// `|α(ω)|² = (ω+ω₀)²/(ω₀²|V|²) · 1/(Y² + π²)`.
pub fn compute_alpha_sq(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    omega: f64,
    opts: &FanoOptions,
) -> Result<f64> {
    require_coupled(spec, omega)?;
    Ok(pi_point(spec, units, omega, opts)?.alpha_sq)
}

/// `β(ω)/α(ω) = (ω-ω₀)/(ω+ω₀)`.
pub fn compute_beta_ratio(omega: f64, omega0: f64) -> f64 {
    (omega - omega0) / (omega + omega0)
}

/// All per-frequency quantities at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiPoint {
    pub omega: f64,
    /// `NaN` where `V(ω) = 0`.
    pub y: f64,
    pub alpha_sq: f64,
    pub beta_ratio: f64,
    pub pi: f64,
}

/// Evaluates `Y`, `|α|²`, `β/α` and `π` at `omega`; `π = 0` where `V = 0`.
pub fn pi_point(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    omega: f64,
    opts: &FanoOptions,
) -> Result<PiPoint> {
    require_positive(omega)?;
    let w0 = units.omega0;
    let v2 = spec.coupling_sq(omega);
    let beta_ratio = compute_beta_ratio(omega, w0);
    if v2 == 0.0 {
        return Ok(PiPoint {
            omega,
            y: f64::NAN,
            alpha_sq: 0.0,
            beta_ratio,
            pi: 0.0,
        });
    }
    let d = dispersion(spec, units, omega, opts)?;
    let denom = d * d + PI * PI * v2 * v2;
    Ok(PiPoint {
        omega,
        y: d / v2,
        alpha_sq: (omega + w0).powi(2) * v2 / (w0 * w0 * denom),
        beta_ratio,
        pi: 4.0 * omega * v2 / (w0 * denom),
    })
}

/// Isolated dressed mode outside the coupling support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub omega: f64,
    /// Point mass of `π` at `omega`.
    pub weight: f64,
}

/// `1/(1 + ω₀∫ω'|V|²/(ω²-ω'²)² dω')`, the residue of the oscillator Green function.
///
/// With `h(x) = x|V|²/(ω+x)²` the integrand is `h/(ω-x)²`; the value of `h` at
/// the nearer edge is integrated in closed form and the remainder in `u = ln|ω-x|`.
fn bound_weight(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    omega: f64,
    opts: &FanoOptions,
) -> Result<f64> {
    let (lo, hi) = spec.support();
    let h = |x: f64| x * spec.coupling_sq(x) / ((omega + x) * (omega + x));
    let edge = if omega >= hi { hi } else { lo };
    let h_edge = h(edge);
    let (_, u_lo, u_hi, x_of) = outside_map(omega, lo, hi);
    let rest = integrate_with(
        |u: f64| (h(x_of(u)) - h_edge) * (-u).exp(),
        u_lo,
        u_hi,
        &opts.quadrature(),
    )?
    .value;
    let j = h_edge * (1.0 / (omega - hi) - 1.0 / (omega - lo)) + rest;
    Ok(1.0 / (1.0 + units.omega0 * j))
}

/// Bisection on `ln d` for the root of `g` between `d_lo` (g > 0) and `d_hi` (g < 0)
/// or the reverse; returns the midpoint once the bracket is below 1e-14 relative.
fn log_bisect<G: Fn(f64) -> Result<f64>>(g: G, d_pos: f64, d_neg: f64) -> Result<f64> {
    let (mut up, mut un) = (d_pos.ln(), d_neg.ln());
    for _ in 0..200 {
        if (up - un).abs() < 1e-14 {
            break;
        }
        let mid = 0.5 * (up + un);
        let v = g(mid.exp())?;
        if v > 0.0 {
            up = mid;
        } else if v < 0.0 {
            un = mid;
        } else {
            return Ok(mid.exp());
        }
    }
    Ok((0.5 * (up + un)).exp())
}

const EDGE_RESOLUTION: f64 = 1e-12;

/// Dressed modes below and above the support.
///
/// `D` is increasing outside the support and `D(0⁺) = -2·margin < 0`, so
/// there is at most one root on either side. A root closer to an edge than
/// `1e-12` relative carries negligible weight and is dropped.
pub fn bound_states(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    opts: &FanoOptions,
) -> Result<Vec<BoundState>> {
    if spec.is_uncoupled() {
        return Ok(vec![BoundState {
            omega: units.omega0,
            weight: 1.0,
        }]);
    }
    let (lo, hi) = spec.support();
    let d = |w: f64| dispersion(spec, units, w, opts);
    let mut out = Vec::new();
    if lo > 0.0 {
        let g = |dist: f64| d(lo - dist);
        let d_min = lo * EDGE_RESOLUTION;
        if g(d_min)? > 0.0 {
            let dist = log_bisect(g, d_min, lo)?;
            let omega = lo - dist;
            out.push(BoundState {
                omega,
                weight: bound_weight(spec, units, omega, opts)?,
            });
        }
    }
    let g = |dist: f64| d(hi + dist);
    let d_min = hi * EDGE_RESOLUTION;
    if g(d_min)? < 0.0 {
        let mut d_max = hi.max(units.omega0);
        let mut tries = 0;
        while g(d_max)? <= 0.0 {
            d_max *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(DoscError::NonConvergence {
                    message: "no sign change of the dispersion above the support".into(),
                });
            }
        }
        let dist = log_bisect(g, d_max, d_min)?;
        let omega = hi + dist;
        out.push(BoundState {
            omega,
            weight: bound_weight(spec, units, omega, opts)?,
        });
    }
    Ok(out)
}

/// Illinois false position for a sign change of `D` on `[a, b]`.
fn locate_root<G: Fn(f64) -> Result<f64>>(
    g: G,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
) -> Result<f64> {
    let mut side = 0i32;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * b.abs() {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let fc = g(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    Ok(0.5 * (a + b))
}

/// One Gauss–Kronrod panel of the solution grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
}

/// Sorted, disjoint panels, each carrying the 15 Kronrod nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    panels: Vec<Panel>,
    /// Resonances (roots of `D` in the support) the grid was clustered around.
    pub peaks: Vec<f64>,
}

impl SpectralGrid {
    /// Grid from sorted panel edges; the first edge may be 0, nodes never are.
    pub fn from_edges(edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 || !(edges[0] >= 0.0) || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DoscError::InvalidArgument(
                "grid edges must be non-negative and strictly increasing".into(),
            ));
        }
        let panels = edges
            .windows(2)
            .map(|w| Panel { a: w[0], b: w[1] })
            .collect();
        Ok(SpectralGrid {
            panels,
            peaks: Vec::new(),
        })
    }

    /// Logarithmic starting grid over the support.
    pub fn base(spec: &CouplingSpectrum, opts: &FanoOptions) -> Result<Self> {
        let (lo, hi) = spec.support();
        let n = opts.base_panels.max(4);
        let start = if lo > 0.0 { lo } else { hi * 1e-6 };
        let ratio = (hi / start).ln() / n as f64;
        let mut edges = Vec::with_capacity(n + 2);
        if lo == 0.0 {
            edges.push(0.0);
        }
        edges.extend((0..n).map(|i| start * (ratio * i as f64).exp()));
        edges.push(hi);
        edges.extend(spec.breakpoints());
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        SpectralGrid::from_edges(&edges)
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.panels
            .iter()
            .flat_map(|p| gk15_rule(p.a, p.b).0)
            .collect()
    }

    /// Largest gap between adjacent nodes.
    pub fn resolution(&self) -> f64 {
        max_gap(&self.nodes())
    }
}

fn max_gap(nodes: &[f64]) -> f64 {
    nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
struct PanelData {
    panel: Panel,
    x: [f64; 15],
    wk: [f64; 15],
    wg: [f64; 15],
    pts: Vec<PiPoint>,
}

impl PanelData {
    fn weighted_error(&self, w0: f64) -> f64 {
        let mut k = 0.0;
        let mut g = 0.0;
        for i in 0..15 {
            let x = self.x[i];
            let v = self.pts[i].pi * (1.0 + x * x / (w0 * w0) + w0 / x);
            k += self.wk[i] * v;
            g += self.wg[i] * v;
        }
        (k - g).abs()
    }

    fn max_jump(&self) -> f64 {
        self.pts
            .windows(2)
            .map(|w| (w[1].pi - w[0].pi).abs())
            .fold(0.0, f64::max)
    }

    fn splittable(&self) -> bool {
        let Panel { a, b } = self.panel;
        b - a > 1e-13 * b
    }
}

fn eval_panel(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    panel: Panel,
    opts: &FanoOptions,
) -> Result<PanelData> {
    let (x, wk, wg) = gk15_rule(panel.a, panel.b);
    let pts = x
        .iter()
        .map(|w| pi_point(spec, units, *w, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(PanelData {
        panel,
        x,
        wk,
        wg,
        pts,
    })
}

fn eval_panels(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    panels: &[Panel],
    opts: &FanoOptions,
) -> Result<Vec<PanelData>> {
    panels
        .par_iter()
        .map(|p| eval_panel(spec, units, *p, opts))
        .collect()
}

fn bisect(p: Panel) -> [Panel; 2] {
    let m = 0.5 * (p.a + p.b);
    [Panel { a: p.a, b: m }, Panel { a: m, b: p.b }]
}

/// `π(ω)` on an adaptively refined grid, with its bound-state atoms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSolution {
    pub spectrum: CouplingSpectrum,
    pub units: UnitSystem,
    pub grid: SpectralGrid,
    pub omega: Vec<f64>,
    pub y: Vec<f64>,
    pub alpha_sq: Vec<f64>,
    pub beta_ratio: Vec<f64>,
    pub pi: Vec<f64>,
    /// Kronrod quadrature weight of each node.
    pub quad_weights: Vec<f64>,
    pub bound_states: Vec<BoundState>,
    /// `|∫π - 1|` including bound states.
    pub norm_defect: f64,
    /// Summed panel error estimate of the weighted functional.
    pub error_estimate: f64,
    pub fourth_moment_reliable: bool,
}

/// Solves for `π(ω)` on an automatically built and refined grid.
pub fn compute_pi(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    opts: &FanoOptions,
) -> Result<SpectralSolution> {
    if spec.is_uncoupled() {
        return Err(DoscError::NonConvergence {
            message: "V is identically zero, so pi(omega) is a delta function at omega0 and cannot be \
                      resolved on a grid; use the point-mass measure (groundstate/compare handle this case)"
                .into(),
        });
    }
    let grid = SpectralGrid::base(spec, opts)?;
    let grid = cluster_on_resonances(spec, units, grid, opts)?;
    compute_pi_on_grid(spec, units, &grid, opts)
}

/// Inserts geometric panel edges around each root of `D` inside the support.
fn cluster_on_resonances(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    grid: SpectralGrid,
    opts: &FanoOptions,
) -> Result<SpectralGrid> {
    let (lo, hi) = spec.support();
    let mut edges: Vec<f64> = grid.panels.iter().map(|p| p.a).collect();
    edges.push(grid.panels.last().map(|p| p.b).unwrap_or(hi));
    let probes: Vec<f64> = edges
        .iter()
        .copied()
        .filter(|w| *w > lo && *w < hi && spec.coupling_sq(*w) > 0.0)
        .collect();
    let values = probes
        .par_iter()
        .map(|w| dispersion(spec, units, *w, opts))
        .collect::<Result<Vec<_>>>()?;
    let d = |w: f64| dispersion(spec, units, w, opts);
    let mut peaks = Vec::new();
    for i in 1..probes.len() {
        let (fa, fb) = (values[i - 1], values[i]);
        if (fa < 0.0) != (fb < 0.0) {
            peaks.push(locate_root(d, probes[i - 1], probes[i], fa, fb)?);
        }
    }
    for &w in &peaks {
        let gamma = (0.25 * PI * spec.coupling_sq(w)).max(1e-12 * w);
        edges.push(w);
        let mut step = 0.25 * gamma;
        while step < 0.5 * w {
            for e in [w - step, w + step] {
                if e > lo && e < hi {
                    edges.push(e);
                }
            }
            step *= 2.0;
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut g = SpectralGrid::from_edges(&edges)?;
    g.peaks = peaks;
    Ok(g)
}

/// Solves on a caller-supplied grid, refining it until the error target is met.
pub fn compute_pi_on_grid(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    grid: &SpectralGrid,
    opts: &FanoOptions,
) -> Result<SpectralSolution> {
    positivity_check(spec, units)?;
    let w0 = units.omega0;
    let mut data = eval_panels(spec, units, &grid.panels, opts)?;
    let mut total_err;
    loop {
        let errs: Vec<f64> = data.iter().map(|d| d.weighted_error(w0)).collect();
        total_err = errs.iter().sum::<f64>();
        let pi_max = data
            .iter()
            .flat_map(|d| d.pts.iter().map(|p| p.pi))
            .fold(0.0, f64::max);
        let threshold = opts.integration_tol / data.len() as f64;
        let split: Vec<bool> = data
            .iter()
            .zip(&errs)
            .map(|(d, e)| d.splittable() && (*e > threshold || d.max_jump() > 0.01 * pi_max))
            .collect();
        let n_split = split.iter().filter(|s| **s).count();
        let jumps_left = data
            .iter()
            .zip(&split)
            .any(|(d, s)| *s && d.max_jump() > 0.01 * pi_max);
        if n_split == 0 || (total_err <= opts.integration_tol && !jumps_left) {
            break;
        }
        if data.len() + n_split > opts.max_panels {
            return Err(DoscError::NonConvergence {
                message: format!(
                    "grid refinement exhausted the budget of {} panels with error estimate {total_err:.3e} \
                     (target {:.1e}); raise max_panels or loosen integration_tol",
                    opts.max_panels, opts.integration_tol
                ),
            });
        }
        data = refine(spec, units, data, &split, opts)?;
    }
    finish(spec, units, data, grid.peaks.clone(), total_err, opts)
}

fn refine(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    data: Vec<PanelData>,
    split: &[bool],
    opts: &FanoOptions,
) -> Result<Vec<PanelData>> {
    let new_panels: Vec<Panel> = data
        .iter()
        .zip(split)
        .filter(|(_, s)| **s)
        .flat_map(|(d, _)| bisect(d.panel))
        .collect();
    let mut fresh = eval_panels(spec, units, &new_panels, opts)?.into_iter();
    let mut out = Vec::with_capacity(data.len() + new_panels.len() / 2);
    for (d, s) in data.into_iter().zip(split) {
        if *s {
            out.push(fresh.next().expect("left half"));
            out.push(fresh.next().expect("right half"));
        } else {
            out.push(d);
        }
    }
    Ok(out)
}

fn finish(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    data: Vec<PanelData>,
    peaks: Vec<f64>,
    error_estimate: f64,
    opts: &FanoOptions,
) -> Result<SpectralSolution> {
    let bound = bound_states(spec, units, opts)?;
    let n = data.len() * 15;
    let mut sol = SpectralSolution {
        spectrum: spec.clone(),
        units: *units,
        grid: SpectralGrid {
            panels: data.iter().map(|d| d.panel).collect(),
            peaks,
        },
        omega: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        alpha_sq: Vec::with_capacity(n),
        beta_ratio: Vec::with_capacity(n),
        pi: Vec::with_capacity(n),
        quad_weights: Vec::with_capacity(n),
        bound_states: bound,
        norm_defect: 0.0,
        error_estimate,
        fourth_moment_reliable: spec.fourth_moment_guaranteed(),
    };
    for d in &data {
        for (i, p) in d.pts.iter().enumerate() {
            sol.omega.push(p.omega);
            sol.y.push(p.y);
            sol.alpha_sq.push(p.alpha_sq);
            sol.beta_ratio.push(p.beta_ratio);
            sol.pi.push(p.pi);
            sol.quad_weights.push(d.wk[i]);
        }
    }
    sol.norm_defect = (sol.moment(|_| 1.0) - 1.0).abs();
    if !(sol.norm_defect <= opts.norm_tol) {
        return Err(DoscError::NonConvergence {
            message: format!(
                "normalisation defect {:.3e} exceeds {:.1e} after refinement ({} panels, error estimate {:.3e})",
                sol.norm_defect,
                opts.norm_tol,
                sol.grid.panels.len(),
                error_estimate
            ),
        });
    }
    Ok(sol)
}

impl SpectralSolution {
    /// `⟨⟨f(ω)⟩⟩ = ∫f π dω`, bound states included.
    pub fn moment<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let continuum: f64 = self
            .omega
            .iter()
            .zip(&self.pi)
            .zip(&self.quad_weights)
            .map(|((w, p), q)| q * p * f(*w))
            .sum();
        continuum
            + self
                .bound_states
                .iter()
                .map(|b| b.weight * f(b.omega))
                .sum::<f64>()
    }

    /// `|⟨⟨ω²⟩⟩/ω₀² - 1|`.
    pub fn sum_rule_defect(&self) -> f64 {
        let w0 = self.units.omega0;
        (self.moment(|w| w * w) / (w0 * w0) - 1.0).abs()
    }

    /// Largest gap between adjacent grid nodes.
    pub fn resolution(&self) -> f64 {
        max_gap(&self.omega)
    }

    /// Node masses as a [`FrequencyMeasure`].
    pub fn measure(&self) -> Result<FrequencyMeasure> {
        let mut nodes = self.omega.clone();
        let mut weights: Vec<f64> = self
            .pi
            .iter()
            .zip(&self.quad_weights)
            .map(|(p, q)| p * q)
            .collect();
        for b in &self.bound_states {
            nodes.push(b.omega);
            weights.push(b.weight);
        }
        FrequencyMeasure::new(
            nodes,
            weights,
            Some(self.resolution()),
            self.fourth_moment_reliable,
        )
    }

    /// The solution on a grid fine enough for kernels up to `t_max`
    /// (`Δω·t_max ≤ 0.1`). `max_panels` bounds the work.
    pub fn refine_for_time(
        &self,
        t_max: f64,
        max_panels: usize,
        opts: &FanoOptions,
    ) -> Result<SpectralSolution> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(DoscError::InvalidArgument(format!(
                "t_max must be positive, got {t_max}"
            )));
        }
        let allowed = ANTI_ALIASING / t_max;
        let spec = &self.spectrum;
        let units = &self.units;
        // Widest panel whose internal node gap is within the bound.
        let (xs, _, _) = gk15_rule(0.0, 1.0);
        let gap_per_width = max_gap(&xs);
        let mut panels: Vec<Panel> = Vec::new();
        for p in &self.grid.panels {
            let w = p.b - p.a;
            let pieces = (w * gap_per_width / allowed).ceil().max(1.0) as usize;
            for j in 0..pieces {
                let a = p.a + w * j as f64 / pieces as f64;
                let b = if j + 1 == pieces {
                    p.b
                } else {
                    p.a + w * (j + 1) as f64 / pieces as f64
                };
                panels.push(Panel { a, b });
            }
        }
        if panels.len() > max_panels {
            return Err(DoscError::NonConvergence {
                message: format!(
                    "resolving t_max = {t_max} needs {} panels, above the budget of {max_panels}",
                    panels.len()
                ),
            });
        }
        let data = eval_panels(spec, units, &panels, opts)?;
        let err = data.iter().map(|d| d.weighted_error(units.omega0)).sum();
        let sol = finish(spec, units, data, self.grid.peaks.clone(), err, opts)?;
        let res = sol.resolution();
        if res * t_max > ANTI_ALIASING * (1.0 + 1e-9) {
            return Err(DoscError::AntiAliasing {
                t_max,
                allowed: ANTI_ALIASING / res,
                resolution: res,
            });
        }
        Ok(sol)
    }

    /// Mass of `π` in each bin `[edges[i], edges[i+1])`, bound states included.
    /// Panels straddling an edge are re-integrated on their pieces.
    pub fn bin_masses(&self, edges: &[f64], opts: &FanoOptions) -> Result<Vec<f64>> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DoscError::InvalidArgument(
                "bin edges must be strictly increasing".into(),
            ));
        }
        let nb = edges.len() - 1;
        let bin_of = |w: f64| {
            let k = edges.partition_point(|e| *e <= w);
            (k >= 1 && k <= nb).then(|| k - 1)
        };
        let mut mass = vec![0.0; nb];
        for (i, p) in self.grid.panels.iter().enumerate() {
            let cuts: Vec<f64> = edges
                .iter()
                .copied()
                .filter(|e| *e > p.a && *e < p.b)
                .collect();
            if cuts.is_empty() {
                let m: f64 = (15 * i..15 * i + 15)
                    .map(|j| self.quad_weights[j] * self.pi[j])
                    .sum();
                if let Some(k) = bin_of(0.5 * (p.a + p.b)) {
                    mass[k] += m;
                }
                continue;
            }
            let mut bounds = vec![p.a];
            bounds.extend(cuts);
            bounds.push(p.b);
            for w in bounds.windows(2) {
                let Some(k) = bin_of(0.5 * (w[0] + w[1])) else {
                    continue;
                };
                let (x, wk, _) = gk15_rule(w[0], w[1]);
                for (xi, wi) in x.iter().zip(&wk) {
                    mass[k] += wi * pi_point(&self.spectrum, &self.units, *xi, opts)?.pi;
                }
            }
        }
        for b in &self.bound_states {
            if let Some(k) = bin_of(b.omega) {
                mass[k] += b.weight;
            }
        }
        Ok(mass)
    }

    /// Largest gap of any single panel; used to predict refinement cost.
    pub fn max_panel_gap(&self) -> f64 {
        self.grid
            .panels
            .iter()
            .map(|p| max_gap(&gk15_rule(p.a, p.b).0))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `omega,Y,alpha_sq,beta_ratio,pi,weight`, where `weight`
    /// is the quadrature weight of the node, so `Σ weight·pi` is the continuum part of `∫π`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega", "Y", "alpha_sq", "beta_ratio", "pi", "weight"])?;
        for i in 0..self.omega.len() {
            w.write_record([
                self.omega[i].to_string(),
                self.y[i].to_string(),
                self.alpha_sq[i].to_string(),
                self.beta_ratio[i].to_string(),
                self.pi[i].to_string(),
                self.quad_weights[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `omega,weight` of the bound-state atoms.
    pub fn write_bound_states_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega", "weight"])?;
        for b in &self.bound_states {
            w.write_record([b.omega.to_string(), b.weight.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Coefficients of the bath part of a dressed annihilation operator, with `α` real and positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressingKernels {
    pub omega: f64,
    pub omega_prime: f64,
    /// Coefficient of `b†(ω')`.
    pub delta: f64,
    /// Coefficient of `b(ω')` multiplying `ℙ/(ω-ω')`.
    pub gamma_regular: f64,
    /// Coefficient of `δ(ω-ω')` in the `b(ω')` part.
    pub gamma_singular_coeff: f64,
}

pub fn compute_kernels(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    omega: f64,
    omega_prime: f64,
    opts: &FanoOptions,
) -> Result<DressingKernels> {
    require_positive(omega_prime)?;
    let v2 = require_coupled(spec, omega)?;
    let p = pi_point(spec, units, omega, opts)?;
    let w0 = units.omega0;
    let alpha = p.alpha_sq.sqrt();
    let common = w0 / (omega + w0) * alpha;
    let v_prime = spec.coupling(omega_prime);
    Ok(DressingKernels {
        omega,
        omega_prime,
        delta: v_prime * common / (omega + omega_prime),
        gamma_regular: v_prime * common,
        gamma_singular_coeff: p.y * v2.sqrt() * common,
    })
}
