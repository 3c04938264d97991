//! Discrete representation of the frequency density `π(ω)`.
//!
//! Both the continuum solution (quadrature nodes times `π`, plus bound-state
//! atoms) and the finite-bath oracle (`π_k` at `Ω_k`) reduce to a weighted
//! point set, and every moment-based observable is computed from it.

use serde::{Deserialize, Serialize};

use crate::error::{DoscError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMeasure {
    /// Support points, strictly positive and ascending.
    pub nodes: Vec<f64>,
    /// Mass carried by each node.
    pub weights: Vec<f64>,
    /// Largest gap between adjacent quadrature nodes; `None` for genuinely
    /// discrete measures, which have no aliasing limit.
    pub resolution: Option<f64>,
    /// Whether `⟨⟨ω⁴⟩⟩` is known to be finite for the underlying density.
    pub fourth_moment_reliable: bool,
}

impl FrequencyMeasure {
    pub fn new(
        nodes: Vec<f64>,
        weights: Vec<f64>,
        resolution: Option<f64>,
        fourth_moment_reliable: bool,
    ) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(DoscError::InvalidArgument(format!(
                "measure needs matching non-empty nodes and weights ({} vs {})",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(DoscError::InvalidArgument(
                "measure nodes must be positive and finite".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(DoscError::InvalidArgument(
                "measure weights must be non-negative and finite".into(),
            ));
        }
        let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(FrequencyMeasure {
            nodes,
            weights,
            resolution,
            fourth_moment_reliable,
        })
    }

    /// Unit mass at `omega`: the uncoupled oscillator.
    pub fn point_mass(omega: f64) -> Result<Self> {
        FrequencyMeasure::new(vec![omega], vec![1.0], None, true)
    }

    /// `⟨⟨f(ω)⟩⟩`, summed in node order.
    pub fn moment<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(w, m)| m * f(*w))
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn norm_defect(&self) -> f64 {
        (self.total() - 1.0).abs()
    }

    pub fn mean(&self) -> f64 {
        self.moment(|w| w)
    }

    pub fn mean_inverse(&self) -> f64 {
        self.moment(|w| 1.0 / w)
    }

    pub fn power_moment(&self, k: i32) -> f64 {
        self.moment(|w| w.powi(k))
    }

    /// Largest time for which `Δω·t ≤ 0.1`.
    pub fn max_resolved_time(&self) -> f64 {
        match self.resolution {
            Some(dw) if dw > 0.0 => ANTI_ALIASING / dw,
            _ => f64::INFINITY,
        }
    }
}

/// Bound on `Δω·t_max` for kernels computed by direct quadrature.
pub const ANTI_ALIASING: f64 = 0.1;
