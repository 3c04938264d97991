//! Finite-bath brute force: the oscillator coupled to `N` discrete bath modes,
//! diagonalised exactly.
//!
//! In mass-reduced coordinates the Hamiltonian is `½pᵀp + ½qᵀKq` with the
//! arrowhead stiffness matrix `K₀₀ = ω₀²`, `K_kk = ω_k²`, `K₀k = V_k√(ω₀ω_k)`.
//! Its eigenvalues are found from the secular equation in `O(N²)`, and the
//! eigenvectors are rebuilt from the computed eigenvalues so that they stay
//! orthogonal to working precision even for thousands of modes.

use std::f64::consts::PI;
use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DoscError, Result};
use crate::fano::{FanoOptions, SpectralSolution};
use crate::measure::FrequencyMeasure;
use crate::spectra::{positivity_check, CouplingSpectrum, UnitSystem};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizationScheme {
    /// Midpoint rule on a uniform grid.
    #[default]
    Uniform,
    /// Gauss–Legendre nodes and weights on the support.
    GaussLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteBathModel {
    pub omega0: f64,
    pub bath_freqs: Vec<f64>,
    /// `V_k = V(ω_k)√w_k`.
    pub couplings: Vec<f64>,
    /// Quadrature weight behind each mode; 1 for manually specified baths.
    pub weights: Vec<f64>,
}

impl FiniteBathModel {
    /// A bath given mode by mode.
    pub fn manual(omega0: f64, bath_freqs: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(DoscError::InvalidArgument(format!(
                "omega0 must be positive, got {omega0}"
            )));
        }
        if bath_freqs.is_empty() || bath_freqs.len() != couplings.len() {
            return Err(DoscError::InvalidArgument(format!(
                "bath needs matching non-empty frequencies and couplings ({} vs {})",
                bath_freqs.len(),
                couplings.len()
            )));
        }
        if bath_freqs.iter().any(|w| !(*w > 0.0 && w.is_finite()))
            || couplings.iter().any(|v| !v.is_finite())
        {
            return Err(DoscError::InvalidArgument(
                "bath frequencies must be positive and couplings finite".into(),
            ));
        }
        let weights = vec![1.0; bath_freqs.len()];
        Ok(FiniteBathModel {
            omega0,
            bath_freqs,
            couplings,
            weights,
        })
    }

    /// One bath mode at `ω₀ = ω₁ = 1` with `K₀₁ = 0.5`.
    pub fn two_mode() -> Self {
        FiniteBathModel::manual(1.0, vec![1.0], vec![0.5]).expect("valid constants")
    }

    pub fn len(&self) -> usize {
        self.bath_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bath_freqs.is_empty()
    }

    /// `K₀k`.
    pub fn arrow(&self) -> Vec<f64> {
        self.bath_freqs
            .iter()
            .zip(&self.couplings)
            .map(|(w, v)| v * (self.omega0 * w).sqrt())
            .collect()
    }

    /// The `(N+1)×(N+1)` stiffness matrix.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let n = self.len();
        let z = self.arrow();
        let mut k = DMatrix::zeros(n + 1, n + 1);
        k[(0, 0)] = self.omega0 * self.omega0;
        for i in 0..n {
            k[(i + 1, i + 1)] = self.bath_freqs[i] * self.bath_freqs[i];
            k[(0, i + 1)] = z[i];
            k[(i + 1, 0)] = z[i];
        }
        k
    }

    /// `Σ V_k²/ω_k`, the discrete positivity integral.
    pub fn positivity_sum(&self) -> f64 {
        self.bath_freqs
            .iter()
            .zip(&self.couplings)
            .map(|(w, v)| v * v / w)
            .sum()
    }

    /// `ω₀ - Σ V_k²/ω_k`; `K` is positive definite iff this is positive.
    pub fn positivity_margin(&self) -> f64 {
        self.omega0 - self.positivity_sum()
    }

    pub fn check_positivity(&self) -> Result<()> {
        let margin = self.positivity_margin();
        if margin > 0.0 {
            Ok(())
        } else {
            Err(DoscError::DiscretePositivity {
                margin,
                advice: format!(
                    "the {}-mode bath overshoots the positivity bound; use more modes or weaker coupling",
                    self.len()
                ),
            })
        }
    }
}

/// Discretises `spec` into `n` bath modes covering its support.
pub fn discretize(
    spec: &CouplingSpectrum,
    units: &UnitSystem,
    n: usize,
    scheme: DiscretizationScheme,
) -> Result<FiniteBathModel> {
    if n == 0 {
        return Err(DoscError::InvalidArgument(
            "the bath needs at least one mode".into(),
        ));
    }
    positivity_check(spec, units)?;
    let (lo, hi) = spec.support();
    let hi = hi.min(spec.omega_max());
    let (freqs, weights): (Vec<f64>, Vec<f64>) = match scheme {
        DiscretizationScheme::Uniform => {
            let dw = (hi - lo) / n as f64;
            (0..n).map(|k| (lo + (k as f64 + 0.5) * dw, dw)).unzip()
        }
        DiscretizationScheme::GaussLike => {
            let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("n > 0"));
            let half = 0.5 * (hi - lo);
            let mut pairs: Vec<(f64, f64)> = rule
                .as_node_weight_pairs()
                .iter()
                .map(|(x, w)| (lo + half * (x + 1.0), half * w))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs.into_iter().unzip()
        }
    };
    let couplings = freqs
        .iter()
        .zip(&weights)
        .map(|(w, q)| spec.coupling(*w) * q.sqrt())
        .collect();
    let model = FiniteBathModel {
        omega0: units.omega0,
        bath_freqs: freqs,
        couplings,
        weights,
    };
    model.check_positivity()?;
    Ok(model)
}

/// How column `m` of the eigenvector matrix is represented.
#[derive(Debug, Clone, Copy)]
enum Column {
    /// Root `λ = σ + τ` of the secular equation, with `σ` the pole `d[origin]`
    /// (or 0). Keeping `τ` separately gives `d_k - λ` to full precision.
    Root { origin: Option<usize>, tau: f64 },
    /// A bath mode with zero coupling: eigenvector `e_k`.
    Deflated { row: usize },
}

#[derive(Debug, Clone)]
enum Vectors {
    Arrowhead {
        /// Coupled bath modes sorted by `ω_k²`: their rows and squared frequencies.
        rows: Vec<usize>,
        d: Vec<f64>,
        /// Couplings recomputed from the eigenvalues.
        z: Vec<f64>,
        columns: Vec<Column>,
    },
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct NormalModeDecomposition {
    /// `Ω_k`, ascending.
    pub omegas: Vec<f64>,
    /// Oscillator component of each normalised eigenvector, chosen `≥ 0`.
    pub overlaps: Vec<f64>,
    /// `π_k = O₀k²`.
    pub pi: Vec<f64>,
    vectors: Vectors,
}

impl NormalModeDecomposition {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// The weights `π_k` at `Ω_k` as a discrete frequency measure.
    pub fn measure(&self) -> Result<FrequencyMeasure> {
        FrequencyMeasure::new(self.omegas.clone(), self.pi.clone(), None, true)
    }

    /// Orthonormal eigenvectors as columns, in the order of `omegas`; row 0 is
    /// the oscillator, row `k` bath mode `k`.
    pub fn eigenvectors(&self) -> DMatrix<f64> {
        match &self.vectors {
            Vectors::Dense(u) => u.clone(),
            Vectors::Arrowhead {
                rows,
                d,
                z,
                columns,
            } => {
                let n1 = columns.len();
                let mut u = DMatrix::zeros(n1, n1);
                u.as_mut_slice()
                    .par_chunks_mut(n1)
                    .zip(columns.par_iter())
                    .for_each(|(col, c)| match *c {
                        Column::Deflated { row } => col[row] = 1.0,
                        Column::Root { origin, tau } => {
                            let sigma = origin.map_or(0.0, |o| d[o]);
                            col[0] = 1.0;
                            let mut norm = 1.0;
                            for (k, &r) in rows.iter().enumerate() {
                                let v = -z[k] / ((d[k] - sigma) - tau);
                                col[r] = v;
                                norm += v * v;
                            }
                            let s = norm.sqrt().recip();
                            col.iter_mut().for_each(|x| *x *= s);
                        }
                    });
                u
            }
        }
    }
}

/// Exact normal modes of the finite model.
pub fn normal_modes(model: &FiniteBathModel) -> Result<NormalModeDecomposition> {
    model.check_positivity()?;
    let n = model.len();
    let d0 = model.omega0 * model.omega0;
    let z_all = model.arrow();
    let scale = model.bath_freqs.iter().map(|w| w * w).fold(d0, f64::max)
        + z_all.iter().map(|z| z * z).sum::<f64>().sqrt();
    let tol = 8.0 * f64::EPSILON * scale;
    let mut coupled: Vec<usize> = (0..n).filter(|&k| z_all[k].abs() > tol).collect();
    coupled.sort_by(|a, b| model.bath_freqs[*a].total_cmp(&model.bath_freqs[*b]));
    let d: Vec<f64> = coupled
        .iter()
        .map(|&k| model.bath_freqs[k].powi(2))
        .collect();
    if d.windows(2).any(|w| w[1] - w[0] <= tol) {
        return normal_modes_dense(model);
    }
    let z: Vec<f64> = coupled.iter().map(|&k| z_all[k]).collect();
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    let sec = Secular { d0, d: &d, z2: &z2 };
    let upper = d0.max(d.last().copied().unwrap_or(0.0)) + z2.iter().sum::<f64>().sqrt();
    let roots: Vec<(Option<usize>, f64)> = (0..=d.len())
        .into_par_iter()
        .map(|j| sec.root(j, upper))
        .collect();
    let z = recompute_couplings(&d, &z, &roots);

    let mut columns: Vec<(f64, Column)> = roots
        .iter()
        .map(|&(origin, tau)| {
            (
                origin.map_or(0.0, |o| d[o]) + tau,
                Column::Root { origin, tau },
            )
        })
        .collect();
    for k in 0..n {
        if z_all[k].abs() <= tol {
            columns.push((model.bath_freqs[k].powi(2), Column::Deflated { row: k + 1 }));
        }
    }
    columns.sort_by(|a, b| a.0.total_cmp(&b.0));
    if !(columns[0].0 > 0.0) {
        return Err(DoscError::DiscretePositivity {
            margin: model.positivity_margin(),
            advice: format!("stiffness matrix has eigenvalue {:.3e}", columns[0].0),
        });
    }
    let omegas: Vec<f64> = columns.iter().map(|c| c.0.sqrt()).collect();
    let overlaps: Vec<f64> = columns
        .iter()
        .map(|(_, c)| match *c {
            Column::Deflated { .. } => 0.0,
            Column::Root { origin, tau } => {
                let sigma = origin.map_or(0.0, |o| d[o]);
                let s: f64 = z
                    .iter()
                    .zip(&d)
                    .map(|(zk, dk)| (zk / ((dk - sigma) - tau)).powi(2))
                    .sum();
                (1.0 + s).sqrt().recip()
            }
        })
        .collect();
    let pi = overlaps.iter().map(|o| o * o).collect();
    let rows = coupled.iter().map(|k| k + 1).collect();
    Ok(NormalModeDecomposition {
        omegas,
        overlaps,
        pi,
        vectors: Vectors::Arrowhead {
            rows,
            d,
            z,
            columns: columns.into_iter().map(|c| c.1).collect(),
        },
    })
}

/// Normal modes from a dense symmetric eigensolver; `O(N³)`, for cross-checks
/// and degenerate baths.
pub fn normal_modes_dense(model: &FiniteBathModel) -> Result<NormalModeDecomposition> {
    model.check_positivity()?;
    let eig = SymmetricEigen::new(model.stiffness());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let n1 = order.len();
    let mut u = DMatrix::zeros(n1, n1);
    let mut omegas = Vec::with_capacity(n1);
    for (c, &i) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[i];
        if !(lambda > 0.0) {
            return Err(DoscError::DiscretePositivity {
                margin: model.positivity_margin(),
                advice: format!("stiffness matrix has eigenvalue {lambda:.3e}"),
            });
        }
        omegas.push(lambda.sqrt());
        let sign = if eig.eigenvectors[(0, i)] < 0.0 {
            -1.0
        } else {
            1.0
        };
        for r in 0..n1 {
            u[(r, c)] = sign * eig.eigenvectors[(r, i)];
        }
    }
    let overlaps: Vec<f64> = (0..n1).map(|c| u[(0, c)]).collect();
    let pi = overlaps.iter().map(|o| o * o).collect();
    Ok(NormalModeDecomposition {
        omegas,
        overlaps,
        pi,
        vectors: Vectors::Dense(u),
    })
}

/// `g(λ) = d₀ - λ - Σ z_k²/(d_k - λ)`, strictly decreasing between poles.
struct Secular<'a> {
    d0: f64,
    d: &'a [f64],
    z2: &'a [f64],
}

impl Secular<'_> {
    fn g_direct(&self, lambda: f64) -> f64 {
        self.d0
            - lambda
            - self
                .d
                .iter()
                .zip(self.z2)
                .map(|(d, z2)| z2 / (d - lambda))
                .sum::<f64>()
    }

    /// `(sign of g, h, h')` at `λ = σ + τ`, where `h = τ·g` when `σ` is a pole
    /// (removing it) and `h = g` otherwise.
    fn eval(&self, origin: Option<usize>, tau: f64) -> (f64, f64, f64) {
        let sigma = origin.map_or(0.0, |o| self.d[o]);
        match origin {
            None => {
                let mut s = 0.0;
                let mut ds = 0.0;
                for (d, z2) in self.d.iter().zip(self.z2) {
                    let q = d - tau;
                    s += z2 / q;
                    ds += z2 / (q * q);
                }
                let g = self.d0 - tau - s;
                (g, g, -1.0 - ds)
            }
            Some(o) => {
                let mut s = 0.0;
                let mut ds = 0.0;
                for (k, (d, z2)) in self.d.iter().zip(self.z2).enumerate() {
                    if k == o {
                        continue;
                    }
                    let delta = d - sigma;
                    let q = delta - tau;
                    s += z2 / q;
                    ds += z2 * delta / (q * q);
                }
                let c = self.d0 - sigma;
                let h = tau * (c - tau) + self.z2[o] - tau * s;
                let dh = c - 2.0 * tau - ds;
                (h * tau.signum(), h, dh)
            }
        }
    }

    /// Root in the `j`-th interval: `(0, d₀)`, `(d_{j-1}, d_j)`, or `(d_last, upper)`.
    fn root(&self, j: usize, upper: f64) -> (Option<usize>, f64) {
        let n = self.d.len();
        if n == 0 {
            return (None, self.d0);
        }
        let lo = if j == 0 { 0.0 } else { self.d[j - 1] };
        let (origin, mut a, mut b) = if j == n {
            (Some(n - 1), 0.0, upper - self.d[n - 1])
        } else {
            let hi = self.d[j];
            let mid = 0.5 * (lo + hi);
            if self.g_direct(mid) > 0.0 {
                (Some(j), mid - hi, 0.0)
            } else if j == 0 {
                (None, 0.0, mid)
            } else {
                (Some(j - 1), 0.0, mid - lo)
            }
        };
        let mut tau = 0.5 * (a + b);
        for _ in 0..200 {
            let (g, h, dh) = self.eval(origin, tau);
            if g == 0.0 {
                break;
            }
            if g > 0.0 {
                a = tau;
            } else {
                b = tau;
            }
            let mut next = tau - h / dh;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            let done = (next - tau).abs() <= 2.0 * f64::EPSILON * next.abs()
                || b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs());
            tau = next;
            if done {
                break;
            }
        }
        (origin, tau)
    }
}

/// Couplings for which the computed eigenvalues are exact:
/// `ẑ_k² = -Π_m(d_k - λ_m) / Π_{i≠k}(d_k - d_i)`.
///
/// Root `λ_j` lies in `(d_{j-1}, d_j)`. Pairing it with the pole on its far side
/// from `d_k` keeps every factor of the product close to one.
fn recompute_couplings(d: &[f64], z: &[f64], roots: &[(Option<usize>, f64)]) -> Vec<f64> {
    let diff = |k: usize, j: usize| {
        let (origin, tau) = roots[j];
        (d[k] - origin.map_or(0.0, |o| d[o])) - tau
    };
    (0..d.len())
        .into_par_iter()
        .map(|k| {
            let mut prod = -diff(k, k) * diff(k, k + 1);
            for i in 0..k {
                prod *= diff(k, i) / (d[k] - d[i]);
            }
            for i in k + 1..d.len() {
                prod *= diff(k, i + 1) / (d[k] - d[i]);
            }
            if prod > 0.0 && prod.is_finite() {
                prod.sqrt().copysign(z[k])
            } else {
                z[k]
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundCovariance {
    pub var_x: f64,
    pub var_p: f64,
}

/// Oscillator variances in the global ground state:
/// `(ħ/2m)Σπ_k/Ω_k` and `(ħm/2)Σπ_kΩ_k`.
pub fn ground_covariance(decomp: &NormalModeDecomposition, units: &UnitSystem) -> GroundCovariance {
    let (h, m) = (units.hbar, units.mass);
    let inv: f64 = decomp
        .pi
        .iter()
        .zip(&decomp.omegas)
        .map(|(p, w)| p / w)
        .sum();
    let dir: f64 = decomp
        .pi
        .iter()
        .zip(&decomp.omegas)
        .map(|(p, w)| p * w)
        .sum();
    GroundCovariance {
        var_x: 0.5 * h / m * inv,
        var_p: 0.5 * h * m * dir,
    }
}

/// Full `2(N+1)` ground-state covariance, `x` block first: `(ħ/2m)K^{-1/2} ⊕ (ħm/2)K^{1/2}`.
pub fn full_ground_covariance(
    decomp: &NormalModeDecomposition,
    units: &UnitSystem,
) -> DMatrix<f64> {
    let u = decomp.eigenvectors();
    let n1 = decomp.len();
    let (h, m) = (units.hbar, units.mass);
    let scaled = |f: &dyn Fn(f64) -> f64| {
        let mut v = u.clone();
        for (c, w) in decomp.omegas.iter().enumerate() {
            v.column_mut(c).scale_mut(f(*w));
        }
        &v * u.transpose()
    };
    let xx = scaled(&|w| 0.5 * h / (m * w));
    let pp = scaled(&|w| 0.5 * h * m * w);
    let mut cov = DMatrix::zeros(2 * n1, 2 * n1);
    cov.view_mut((0, 0), (n1, n1)).copy_from(&xx);
    cov.view_mut((n1, n1), (n1, n1)).copy_from(&pp);
    cov
}

/// Symplectic eigenvalues of a `2n×2n` covariance (`x` block first), ascending.
/// They are the eigenvalues of `|Σ^{1/2} J Σ^{1/2}|`, each appearing twice.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n2 = cov.nrows();
    if n2 % 2 != 0 || cov.ncols() != n2 {
        return Err(DoscError::InvalidArgument(
            "covariance must be square with even dimension".into(),
        ));
    }
    let n = n2 / 2;
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|l| *l < 0.0) {
        return Err(DoscError::InvariantViolation(
            "covariance is not positive semidefinite".into(),
        ));
    }
    let mut sq = eig.eigenvectors.clone();
    for (c, l) in eig.eigenvalues.iter().enumerate() {
        sq.column_mut(c).scale_mut(l.sqrt());
    }
    let root = &sq * eig.eigenvectors.transpose();
    let mut j = DMatrix::zeros(n2, n2);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    let a = &root * j * &root;
    let m = -(&a * &a);
    let mut nu: Vec<f64> = SymmetricEigen::new(0.5 * (&m + m.transpose()))
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    nu.sort_by(f64::total_cmp);
    Ok(nu.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEvolutionState {
    /// `x` then `p`, `2(N+1)` entries.
    pub means: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianEvolutionState {
    /// Every mode in its own uncoupled ground state, the oscillator displaced to `(x0, p0)`.
    pub fn product_ground(model: &FiniteBathModel, units: &UnitSystem, x0: f64, p0: f64) -> Self {
        let n1 = model.len() + 1;
        let (h, m) = (units.hbar, units.mass);
        let mut means = vec![0.0; 2 * n1];
        means[0] = x0;
        means[n1] = p0;
        let mut cov = DMatrix::zeros(2 * n1, 2 * n1);
        for (i, w) in std::iter::once(&model.omega0)
            .chain(&model.bath_freqs)
            .enumerate()
        {
            cov[(i, i)] = 0.5 * h / (m * w);
            cov[(n1 + i, n1 + i)] = 0.5 * h * m * w;
        }
        GaussianEvolutionState {
            means,
            covariance: cov,
        }
    }

    /// The global ground state of the coupled system.
    pub fn global_ground(decomp: &NormalModeDecomposition, units: &UnitSystem) -> Self {
        let cov = full_ground_covariance(decomp, units);
        GaussianEvolutionState {
            means: vec![0.0; cov.nrows()],
            covariance: cov,
        }
    }

    pub fn reduced(&self, t: f64) -> ReducedState {
        let n1 = self.means.len() / 2;
        ReducedState {
            t,
            mean_x: self.means[0],
            mean_p: self.means[n1],
            var_x: self.covariance[(0, 0)],
            var_p: self.covariance[(n1, n1)],
            sym_xp: self.covariance[(0, n1)],
        }
    }
}

/// Exact evolution of a Gaussian state under the coupled quadratic Hamiltonian,
/// by spectral propagators. Dense `O(N³)` per time: meant for small baths.
pub fn evolve(
    decomp: &NormalModeDecomposition,
    units: &UnitSystem,
    initial: &GaussianEvolutionState,
    times: &[f64],
) -> Result<Vec<GaussianEvolutionState>> {
    let n1 = decomp.len();
    if initial.means.len() != 2 * n1 || initial.covariance.nrows() != 2 * n1 {
        return Err(DoscError::InvalidArgument(
            "initial state dimension does not match the model".into(),
        ));
    }
    let u = decomp.eigenvectors();
    let ut = u.transpose();
    let m = units.mass;
    let x0 = nalgebra::DVector::from_column_slice(&initial.means);
    times
        .iter()
        .map(|&t| {
            let block = |f: &dyn Fn(f64) -> f64| {
                let mut v = u.clone();
                for (c, w) in decomp.omegas.iter().enumerate() {
                    v.column_mut(c).scale_mut(f(*w));
                }
                &v * &ut
            };
            let c = block(&|w| (w * t).cos());
            let s_over = block(&|w| (w * t).sin() / (m * w));
            let s_times = block(&|w| -m * w * (w * t).sin());
            let mut s = DMatrix::zeros(2 * n1, 2 * n1);
            s.view_mut((0, 0), (n1, n1)).copy_from(&c);
            s.view_mut((0, n1), (n1, n1)).copy_from(&s_over);
            s.view_mut((n1, 0), (n1, n1)).copy_from(&s_times);
            s.view_mut((n1, n1), (n1, n1)).copy_from(&c);
            let means = (&s * &x0).iter().copied().collect();
            let covariance = &s * &initial.covariance * s.transpose();
            Ok(GaussianEvolutionState { means, covariance })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub t: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    /// `½⟨xp + px⟩ - ⟨x⟩⟨p⟩`.
    pub sym_xp: f64,
}

/// Times per matrix product in [`evolve_reduced`].
const TIME_BATCH: usize = 32;

/// Oscillator means and covariance over time, starting from
/// [`GaussianEvolutionState::product_ground`]. Only the oscillator row of the
/// propagator is formed, so large baths stay affordable.
pub fn evolve_reduced(
    model: &FiniteBathModel,
    decomp: &NormalModeDecomposition,
    units: &UnitSystem,
    x0: f64,
    p0: f64,
    times: &[f64],
) -> Result<Vec<ReducedState>> {
    let n1 = decomp.len();
    if model.len() + 1 != n1 {
        return Err(DoscError::InvalidArgument(
            "decomposition does not belong to this model".into(),
        ));
    }
    let (h, m) = (units.hbar, units.mass);
    let freqs: Vec<f64> = std::iter::once(model.omega0)
        .chain(model.bath_freqs.iter().copied())
        .collect();
    let sxx: Vec<f64> = freqs.iter().map(|w| 0.5 * h / (m * w)).collect();
    let spp: Vec<f64> = freqs.iter().map(|w| 0.5 * h * m * w).collect();
    let u = decomp.eigenvectors();
    let batches: Vec<Vec<ReducedState>> = times
        .par_chunks(TIME_BATCH)
        .map(|ts| {
            let nt = ts.len();
            let mut wc = DMatrix::zeros(n1, nt);
            let mut ws = DMatrix::zeros(n1, nt);
            let mut wt = DMatrix::zeros(n1, nt);
            for (c, &t) in ts.iter().enumerate() {
                for (k, (&om, &o)) in decomp.omegas.iter().zip(&decomp.overlaps).enumerate() {
                    let (s, co) = (om * t).sin_cos();
                    wc[(k, c)] = o * co;
                    ws[(k, c)] = o * s / om;
                    wt[(k, c)] = o * s * om;
                }
            }
            // Columns: row 0 of cos(√K t), K^{-1/2} sin(√K t), K^{1/2} sin(√K t).
            let a = &u * wc;
            let b = &u * ws;
            let c = &u * wt;
            ts.iter()
                .enumerate()
                .map(|(col, &t)| {
                    let (mut vx, mut vp, mut sxp) = (0.0, 0.0, 0.0);
                    for j in 0..n1 {
                        let (aj, bj, cj) = (a[(j, col)], b[(j, col)] / m, -m * c[(j, col)]);
                        vx += aj * aj * sxx[j] + bj * bj * spp[j];
                        vp += cj * cj * sxx[j] + aj * aj * spp[j];
                        sxp += aj * cj * sxx[j] + bj * aj * spp[j];
                    }
                    ReducedState {
                        t,
                        mean_x: a[(0, col)] * x0 + b[(0, col)] / m * p0,
                        mean_p: -m * c[(0, col)] * x0 + a[(0, col)] * p0,
                        var_x: vx,
                        var_p: vp,
                        sym_xp: sxp,
                    }
                })
                .collect()
        })
        .collect();
    Ok(batches.into_iter().flatten().collect())
}

/// `2π / min(Ω_{k+1} - Ω_k)`, the time after which a finite bath rephases.
pub fn recurrence_estimate(decomp: &NormalModeDecomposition) -> f64 {
    let gap = decomp
        .omegas
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    2.0 * PI / gap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiHistogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
    /// `mass / bin width`.
    pub density: Vec<f64>,
    /// Mass falling outside `[edges[0], edges[last])`.
    pub outside: f64,
}

impl PiHistogram {
    /// `Σ|mass_b - other_b|`, plus the mass outside the bins.
    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            + self.outside
    }

    /// CSV `lo,hi,mass,density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lo", "hi", "mass", "density"])?;
        for i in 0..self.mass.len() {
            w.write_record([
                self.edges[i].to_string(),
                self.edges[i + 1].to_string(),
                self.mass[i].to_string(),
                self.density[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Edges of width `width` from `lo` to at least `hi`.
pub fn uniform_edges(lo: f64, hi: f64, width: f64) -> Vec<f64> {
    let n = ((hi - lo) / width).ceil().max(1.0) as usize;
    (0..=n).map(|k| lo + width * k as f64).collect()
}

/// How `compare` bins frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HistogramBins {
    /// Fixed-width bins from 0.
    Uniform { width: f64 },
    /// Edges sit halfway between neighbouring `Ω_k`; consecutive mode cells are
    /// merged until a bin is at least `min_width` wide.
    ModeCells { min_width: f64 },
}

impl Default for HistogramBins {
    fn default() -> Self {
        HistogramBins::ModeCells { min_width: 0.1 }
    }
}

impl HistogramBins {
    /// Edges covering `[0, max(Ω_last, hi)]`.
    pub fn edges(&self, decomp: &NormalModeDecomposition, hi: f64) -> Result<Vec<f64>> {
        let w = &decomp.omegas;
        let top = w.last().copied().unwrap_or(0.0).max(hi);
        match *self {
            HistogramBins::Uniform { width } => {
                if !(width > 0.0 && width.is_finite()) {
                    return Err(DoscError::InvalidArgument(format!(
                        "bin width must be positive, got {width}"
                    )));
                }
                Ok(uniform_edges(0.0, top * (1.0 + 1e-12), width))
            }
            HistogramBins::ModeCells { min_width } => {
                if !(min_width >= 0.0 && min_width.is_finite()) {
                    return Err(DoscError::InvalidArgument(format!(
                        "minimum bin width must be non-negative, got {min_width}"
                    )));
                }
                let mut edges = vec![0.0];
                for k in 1..w.len() {
                    let e = 0.5 * (w[k - 1] + w[k]);
                    if e - edges[edges.len() - 1] >= min_width && e > edges[edges.len() - 1] {
                        edges.push(e);
                    }
                }
                let last_gap = if w.len() > 1 {
                    w[w.len() - 1] - w[w.len() - 2]
                } else {
                    1.0
                };
                let end =
                    (top * (1.0 + 1e-12)).max(w.last().copied().unwrap_or(0.0) + 0.5 * last_gap);
                if end > *edges.last().unwrap() {
                    edges.push(end);
                }
                Ok(edges)
            }
        }
    }
}

/// Histogram of `π_k` over `Ω_k`.
pub fn discrete_pi_histogram(
    decomp: &NormalModeDecomposition,
    edges: &[f64],
) -> Result<PiHistogram> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DoscError::InvalidArgument(
            "bin edges must be strictly increasing".into(),
        ));
    }
    let nb = edges.len() - 1;
    let mut mass = vec![0.0; nb];
    let mut outside = 0.0;
    for (w, p) in decomp.omegas.iter().zip(&decomp.pi) {
        let k = edges.partition_point(|e| e <= w);
        if k >= 1 && k <= nb {
            mass[k - 1] += p;
        } else {
            outside += p;
        }
    }
    let density = mass
        .iter()
        .zip(edges.windows(2))
        .map(|(m, e)| m / (e[1] - e[0]))
        .collect();
    Ok(PiHistogram {
        edges: edges.to_vec(),
        mass,
        density,
        outside,
    })
}

/// Continuum against oracle, observable by observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub modes: usize,
    pub scheme: DiscretizationScheme,
    pub positivity_sum_continuum: f64,
    pub positivity_sum_discrete: f64,
    pub var_x_continuum: f64,
    pub var_x_oracle: f64,
    pub var_x_rel_error: f64,
    pub var_p_continuum: f64,
    pub var_p_oracle: f64,
    pub var_p_rel_error: f64,
    pub mean_rel_error: f64,
    pub mean_inverse_rel_error: f64,
    /// Discrete `|Σπ_kΩ_k²/ω₀² - 1|`.
    pub oracle_sum_rule_defect: f64,
    pub oracle_norm_defect: f64,
    pub bins: HistogramBins,
    pub bin_count: usize,
    pub pi_l1_distance: f64,
    pub recurrence_time: f64,
    pub var_tol: f64,
    pub l1_tol: f64,
    pub passed: bool,
}

/// The continuum side of a comparison.
#[derive(Debug, Clone, Copy)]
pub enum Continuum<'a> {
    Solution(&'a SpectralSolution, &'a FanoOptions),
    /// `V ≡ 0`: `π` is a unit point mass at `ω₀`.
    Uncoupled(&'a UnitSystem),
}

impl Continuum<'_> {
    fn units(&self) -> &UnitSystem {
        match self {
            Continuum::Solution(sol, _) => &sol.units,
            Continuum::Uncoupled(u) => u,
        }
    }

    fn moment<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self {
            Continuum::Solution(sol, _) => sol.moment(f),
            Continuum::Uncoupled(u) => f(u.omega0),
        }
    }

    fn upper(&self) -> f64 {
        match self {
            Continuum::Solution(sol, _) => sol.omega.last().copied().unwrap_or(0.0),
            Continuum::Uncoupled(u) => u.omega0,
        }
    }

    fn bin_masses(&self, edges: &[f64]) -> Result<Vec<f64>> {
        match self {
            Continuum::Solution(sol, opts) => sol.bin_masses(edges, opts),
            Continuum::Uncoupled(u) => {
                let mut mass = vec![0.0; edges.len().saturating_sub(1)];
                let k = edges.partition_point(|e| *e <= u.omega0);
                if k >= 1 && k <= mass.len() {
                    mass[k - 1] = 1.0;
                }
                Ok(mass)
            }
        }
    }

    fn positivity_integral(&self) -> Result<f64> {
        match self {
            Continuum::Solution(sol, _) => crate::spectra::positivity_integral(&sol.spectrum),
            Continuum::Uncoupled(_) => Ok(0.0),
        }
    }
}

/// Runs the oracle against the continuum.
pub fn compare(
    continuum: Continuum<'_>,
    model: &FiniteBathModel,
    decomp: &NormalModeDecomposition,
    scheme: DiscretizationScheme,
    bins: HistogramBins,
    tolerances: (f64, f64),
) -> Result<ComparisonReport> {
    let units = continuum.units();
    let (h, m) = (units.hbar, units.mass);
    let mean_c = continuum.moment(|w| w);
    let inv_c = continuum.moment(|w| 1.0 / w);
    let dm = decomp.measure()?;
    let (mean_o, inv_o) = (dm.mean(), dm.mean_inverse());
    let g = ground_covariance(decomp, units);
    let var_x_c = 0.5 * h / m * inv_c;
    let var_p_c = 0.5 * h * m * mean_c;
    let edges = bins.edges(decomp, continuum.upper())?;
    let cont = continuum.bin_masses(&edges)?;
    let hist = discrete_pi_histogram(decomp, &edges)?;
    let cont_outside = (continuum.moment(|_| 1.0) - cont.iter().sum::<f64>()).abs();
    let l1 = hist.l1_distance(&cont) + cont_outside;
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let (var_tol, l1_tol) = tolerances;
    let var_x_rel_error = rel(g.var_x, var_x_c);
    let var_p_rel_error = rel(g.var_p, var_p_c);
    Ok(ComparisonReport {
        modes: model.len(),
        scheme,
        positivity_sum_continuum: continuum.positivity_integral()?,
        positivity_sum_discrete: model.positivity_sum(),
        var_x_continuum: var_x_c,
        var_x_oracle: g.var_x,
        var_x_rel_error,
        var_p_continuum: var_p_c,
        var_p_oracle: g.var_p,
        var_p_rel_error,
        mean_rel_error: rel(mean_o, mean_c),
        mean_inverse_rel_error: rel(inv_o, inv_c),
        oracle_sum_rule_defect: (dm.power_moment(2) / (model.omega0 * model.omega0) - 1.0).abs(),
        oracle_norm_defect: dm.norm_defect(),
        bins,
        bin_count: edges.len() - 1,
        pi_l1_distance: l1,
        recurrence_time: recurrence_estimate(decomp),
        var_tol,
        l1_tol,
        passed: var_x_rel_error <= var_tol && var_p_rel_error <= var_tol && l1 <= l1_tol,
    })
}

/// Finite-bath relaxation of a displaced oscillator toward the global ground state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRun {
    pub window: (f64, f64),
    pub samples: usize,
    pub ground: GroundCovariance,
    pub max_rel_dev_var_x: f64,
    pub max_rel_dev_var_p: f64,
    /// `max |sym_xp| / √(var_x var_p)` of the ground state.
    pub max_rel_sym_xp: f64,
    pub max_abs_mean_x: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Evolves the oscillator from `(x0, 0)` with the bath in its own ground state
/// and checks the reduced covariance against the global ground state on
/// `[window.0, window.1]`. An empty window fails.
pub fn relaxation_run(
    model: &FiniteBathModel,
    decomp: &NormalModeDecomposition,
    units: &UnitSystem,
    x0: f64,
    window: (f64, f64),
    samples: usize,
    tolerance: f64,
) -> Result<RelaxationRun> {
    let ground = ground_covariance(decomp, units);
    let mut run = RelaxationRun {
        window,
        samples: 0,
        ground,
        max_rel_dev_var_x: f64::NAN,
        max_rel_dev_var_p: f64::NAN,
        max_rel_sym_xp: f64::NAN,
        max_abs_mean_x: f64::NAN,
        tolerance,
        passed: false,
    };
    if !(window.1 > window.0) || samples < 2 {
        return Ok(run);
    }
    let times: Vec<f64> = (0..samples)
        .map(|k| window.0 + (window.1 - window.0) * k as f64 / (samples - 1) as f64)
        .collect();
    let states = evolve_reduced(model, decomp, units, x0, 0.0, &times)?;
    let scale = (ground.var_x * ground.var_p).sqrt();
    run.samples = samples;
    run.max_rel_dev_var_x = states
        .iter()
        .map(|s| (s.var_x / ground.var_x - 1.0).abs())
        .fold(0.0, f64::max);
    run.max_rel_dev_var_p = states
        .iter()
        .map(|s| (s.var_p / ground.var_p - 1.0).abs())
        .fold(0.0, f64::max);
    run.max_rel_sym_xp = states
        .iter()
        .map(|s| s.sym_xp.abs() / scale)
        .fold(0.0, f64::max);
    run.max_abs_mean_x = states.iter().map(|s| s.mean_x.abs()).fold(0.0, f64::max);
    run.passed = run.max_rel_dev_var_x <= tolerance
        && run.max_rel_dev_var_p <= tolerance
        && run.max_rel_sym_xp <= tolerance;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fano::compute_pi;
    use crate::groundstate::{ground_state_moments, thermal_occupation};

    fn two_mode_variances() -> (f64, f64) {
        let (a, b) = (0.5f64.sqrt(), 1.5f64.sqrt());
        (0.25 * (1.0 / a + 1.0 / b), 0.25 * (a + b))
    }

    #[test]
    fn two_mode_normal_modes() {
        let d = normal_modes(&FiniteBathModel::two_mode()).unwrap();
        assert!((d.omegas[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((d.omegas[1] - 1.5f64.sqrt()).abs() < 1e-15);
        assert!(d.pi.iter().all(|p| (p - 0.5).abs() < 1e-15));
        let g = ground_covariance(&d, &UnitSystem::default());
        let (vx, vp) = two_mode_variances();
        assert!((g.var_x - vx).abs() < 1e-15 && (g.var_p - vp).abs() < 1e-15);
        assert!((vx - 0.5576776).abs() < 1e-7 && (vp - 0.4829629).abs() < 1e-7);
        let r = recurrence_estimate(&d);
        assert!((r - 2.0 * PI / (1.5f64.sqrt() - 0.5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn two_mode_histogram() {
        let d = normal_modes(&FiniteBathModel::two_mode()).unwrap();
        let h = discrete_pi_histogram(&d, &uniform_edges(0.0, 2.0, 0.1)).unwrap();
        assert_eq!(h.mass.iter().filter(|m| **m > 0.0).count(), 2);
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((h.mass[7] - 0.5).abs() < 1e-15 && (h.mass[12] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mode_cell_edges_bracket_each_group() {
        let m = FiniteBathModel::manual(1.0, vec![0.5, 1.5, 2.0, 3.0], vec![0.1, 0.2, 0.1, 0.1])
            .unwrap();
        let d = normal_modes(&m).unwrap();
        let all = HistogramBins::ModeCells { min_width: 0.0 }
            .edges(&d, 0.0)
            .unwrap();
        assert_eq!(all.len(), d.len() + 1);
        for k in 1..d.len() {
            assert_eq!(all[k], 0.5 * (d.omegas[k - 1] + d.omegas[k]));
        }
        let h = discrete_pi_histogram(&d, &all).unwrap();
        assert_eq!(h.outside, 0.0);
        assert!(h.mass.iter().zip(&d.pi).all(|(a, b)| a == b));
        let wide = HistogramBins::ModeCells { min_width: 1.0 }
            .edges(&d, 0.0)
            .unwrap();
        assert!(wide.windows(2).rev().skip(1).all(|e| e[1] - e[0] >= 1.0));
        assert!(wide
            .iter()
            .all(|e| all.contains(e) || e == wide.last().unwrap()));
        assert!(HistogramBins::ModeCells { min_width: -1.0 }
            .edges(&d, 0.0)
            .is_err());
        assert!(HistogramBins::Uniform { width: -1.0 }
            .edges(&d, 0.0)
            .is_err());
    }

    #[test]
    fn uncoupled_model_is_diagonal() {
        let m = FiniteBathModel::manual(1.0, vec![0.5, 2.0], vec![0.0, 0.0]).unwrap();
        let k = m.stiffness();
        assert_eq!(k[(0, 1)], 0.0);
        let d = normal_modes(&m).unwrap();
        assert_eq!(d.omegas, vec![0.5, 1.0, 2.0]);
        assert_eq!(d.pi, vec![0.0, 1.0, 0.0]);
        let g = ground_covariance(&d, &UnitSystem::default());
        assert_eq!((g.var_x, g.var_p), (0.5, 0.5));
    }

    #[test]
    fn discrete_positivity_is_enforced() {
        let m = FiniteBathModel::manual(1.0, vec![1.0], vec![1.01]).unwrap();
        assert!(matches!(
            normal_modes(&m),
            Err(DoscError::DiscretePositivity { .. })
        ));
        // Schur complement ω₀² - ΣK₀k²/ω_k² = ω₀·margin
        let ok = FiniteBathModel::manual(1.0, vec![0.5, 2.0], vec![0.3, 0.6]).unwrap();
        let k = ok.stiffness();
        let schur = 1.0 - k[(0, 1)].powi(2) / 0.25 - k[(0, 2)].powi(2) / 4.0;
        assert!((schur - ok.positivity_margin()).abs() < 1e-15);
    }

    #[test]
    fn arrowhead_matches_dense() {
        let s = CouplingSpectrum::ohmic_exp(0.3, 5.0).unwrap();
        let u = UnitSystem::default();
        for scheme in [
            DiscretizationScheme::Uniform,
            DiscretizationScheme::GaussLike,
        ] {
            let m = discretize(&s, &u, 150, scheme).unwrap();
            let a = normal_modes(&m).unwrap();
            let b = normal_modes_dense(&m).unwrap();
            // The dense solver's eigenvalues carry an absolute error of order ε‖K‖.
            let knorm = m.stiffness().amax();
            for k in 0..a.len() {
                assert!(
                    (a.omegas[k].powi(2) - b.omegas[k].powi(2)).abs() < 64.0 * f64::EPSILON * knorm,
                    "{k}"
                );
                assert!(
                    (a.pi[k] - b.pi[k]).abs() < 1e-11,
                    "{k}: {} vs {}",
                    a.pi[k],
                    b.pi[k]
                );
            }
            let ua = a.eigenvectors();
            let orth = ua.transpose() * &ua - DMatrix::identity(a.len(), a.len());
            assert!(orth.amax() < 1e-12, "{}", orth.amax());
            let resid = m.stiffness() * &ua
                - &ua
                    * DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                        a.len(),
                        a.omegas.iter().map(|w| w * w),
                    ));
            assert!(
                resid.amax() < 1e-10 * s.omega_max().powi(2),
                "{}",
                resid.amax()
            );
        }
    }

    #[test]
    fn exact_discrete_identities() {
        let s = CouplingSpectrum::ohmic_exp(0.3, 5.0).unwrap();
        let u = UnitSystem::default();
        let m = discretize(&s, &u, 4000, DiscretizationScheme::Uniform).unwrap();
        let d = normal_modes(&m).unwrap();
        let total: f64 = d.pi.iter().sum();
        let m2: f64 = d.pi.iter().zip(&d.omegas).map(|(p, w)| p * w * w).sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
        assert!((m2 - 1.0).abs() < 1e-12, "{m2}");
        let exact = crate::spectra::positivity_integral(&s).unwrap();
        assert!((m.positivity_sum() / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ground_symplectic_eigenvalue_matches_occupation() {
        let s = CouplingSpectrum::ohmic_exp(0.3, 5.0).unwrap();
        let u = UnitSystem::default();
        let m = discretize(&s, &u, 60, DiscretizationScheme::Uniform).unwrap();
        let d = normal_modes(&m).unwrap();
        let n_bar = thermal_occupation(&d.measure().unwrap()).unwrap();
        let g = ground_covariance(&d, &u);
        let nu = 2.0 * (g.var_x * g.var_p).sqrt();
        assert!((nu - (2.0 * n_bar + 1.0)).abs() < 1e-9);
        let full = full_ground_covariance(&d, &u);
        let nus = symplectic_eigenvalues(&full).unwrap();
        assert!(nus.iter().all(|v| (v - 0.5).abs() < 1e-9), "{nus:?}");
        let summary = ground_state_moments(&d.measure().unwrap(), &u).unwrap();
        assert!((summary.var_x - full[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn ground_state_is_stationary() {
        let m = discretize(
            &CouplingSpectrum::ohmic_exp(0.3, 5.0).unwrap(),
            &UnitSystem::default(),
            30,
            DiscretizationScheme::Uniform,
        )
        .unwrap();
        let u = UnitSystem::default();
        let d = normal_modes(&m).unwrap();
        let g = GaussianEvolutionState::global_ground(&d, &u);
        for s in evolve(&d, &u, &g, &[0.7, 13.0]).unwrap() {
            assert!((&s.covariance - &g.covariance).amax() < 1e-12);
        }
    }

    #[test]
    fn reduced_evolution_matches_dense_and_kernels() {
        let s = CouplingSpectrum::ohmic_exp(0.3, 5.0).unwrap();
        let u = UnitSystem::new(1.0, 2.0, 1.0).unwrap();
        let m = discretize(&s, &u, 40, DiscretizationScheme::Uniform).unwrap();
        let d = normal_modes(&m).unwrap();
        let times = [0.0, 0.5, 3.0, 11.0];
        let init = GaussianEvolutionState::product_ground(&m, &u, 0.8, 0.3);
        let dense = evolve(&d, &u, &init, &times).unwrap();
        let reduced = evolve_reduced(&m, &d, &u, 0.8, 0.3, &times).unwrap();
        let k = crate::dynamics::kernels(&d.measure().unwrap(), &times).unwrap();
        let tr = crate::dynamics::mean_trajectory(&k, 0.8, 0.3, &u);
        for (i, (a, b)) in dense.iter().zip(&reduced).enumerate() {
            let a = a.reduced(times[i]);
            for (x, y) in [
                (a.var_x, b.var_x),
                (a.var_p, b.var_p),
                (a.sym_xp, b.sym_xp),
                (a.mean_x, b.mean_x),
                (a.mean_p, b.mean_p),
            ] {
                assert!((x - y).abs() < 1e-12, "t={} {x} vs {y}", times[i]);
            }
            assert!((b.mean_x - tr.x[i]).abs() < 1e-12 && (b.mean_p - tr.p[i]).abs() < 1e-12);
            let nus = symplectic_eigenvalues(&dense[i].covariance).unwrap();
            assert!(nus[0] >= 0.5 - 1e-9);
        }
        assert!((reduced[0].var_x - 0.25).abs() < 1e-12);
    }

    #[test]
    fn comparison_runs_for_coarse_bath() {
        let s = CouplingSpectrum::ohmic_exp(0.3, 5.0).unwrap();
        let u = UnitSystem::default();
        let o = FanoOptions::default();
        let sol = compute_pi(&s, &u, &o).unwrap();
        let m = discretize(&s, &u, 50, DiscretizationScheme::Uniform).unwrap();
        let d = normal_modes(&m).unwrap();
        let r = compare(
            Continuum::Solution(&sol, &o),
            &m,
            &d,
            DiscretizationScheme::Uniform,
            HistogramBins::Uniform { width: 0.1 },
            (0.005, 0.02),
        )
        .unwrap();
        assert!(r.var_x_rel_error.is_finite() && r.pi_l1_distance > 0.02);
        assert!(!r.passed);
    }
}
