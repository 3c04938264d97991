//! Mean-value dynamics of the oscillator through the three `π`-averaged kernels
//! `⟨⟨cos ωt⟩⟩`, `⟨⟨ω⁻¹ sin ωt⟩⟩` and `⟨⟨ω sin ωt⟩⟩`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DoscError, Result};
use crate::measure::{FrequencyMeasure, ANTI_ALIASING};
use crate::spectra::UnitSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsKernels {
    pub times: Vec<f64>,
    pub k_cos: Vec<f64>,
    pub k_sin_over: Vec<f64>,
    pub k_sin_times: Vec<f64>,
}

/// Times are processed in blocks; inside a block the phases are advanced by
/// complex rotation and re-anchored with an exact `sin_cos` at each block start.
const BLOCK: usize = 128;

fn check_times(m: &FrequencyMeasure, times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(DoscError::InvalidArgument(
            "times must be finite, non-negative and sorted".into(),
        ));
    }
    if let (Some(t_max), Some(res)) = (times.last(), m.resolution) {
        if res * t_max > ANTI_ALIASING * (1.0 + 1e-9) {
            return Err(DoscError::AntiAliasing {
                t_max: *t_max,
                allowed: m.max_resolved_time(),
                resolution: res,
            });
        }
    }
    Ok(())
}

/// The three kernels at the given times.
pub fn kernels(m: &FrequencyMeasure, times: &[f64]) -> Result<DynamicsKernels> {
    check_times(m, times)?;
    let blocks: Vec<[Vec<f64>; 3]> = times
        .par_chunks(BLOCK)
        .map(|ts| kernel_block(m, ts))
        .collect();
    let mut out = DynamicsKernels {
        times: times.to_vec(),
        k_cos: Vec::with_capacity(times.len()),
        k_sin_over: Vec::with_capacity(times.len()),
        k_sin_times: Vec::with_capacity(times.len()),
    };
    for [c, so, st] in blocks {
        out.k_cos.extend(c);
        out.k_sin_over.extend(so);
        out.k_sin_times.extend(st);
    }
    Ok(out)
}

fn kernel_block(m: &FrequencyMeasure, ts: &[f64]) -> [Vec<f64>; 3] {
    let n = ts.len();
    let mut kc = vec![0.0; n];
    let mut kso = vec![0.0; n];
    let mut kst = vec![0.0; n];
    let dt = if n > 1 { ts[1] - ts[0] } else { 0.0 };
    let uniform = ts
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * w[1].max(1.0));
    for (&w, &mass) in m.nodes.iter().zip(&m.weights) {
        if mass == 0.0 {
            continue;
        }
        if uniform {
            let (mut s, mut c) = (w * ts[0]).sin_cos();
            let (sd, cd) = (w * dt).sin_cos();
            for j in 0..n {
                kc[j] += mass * c;
                kso[j] += mass / w * s;
                kst[j] += mass * w * s;
                let next = s * cd + c * sd;
                c = c * cd - s * sd;
                s = next;
            }
        } else {
            for j in 0..n {
                let (s, c) = (w * ts[j]).sin_cos();
                kc[j] += mass * c;
                kso[j] += mass / w * s;
                kst[j] += mass * w * s;
            }
        }
    }
    [kc, kso, kst]
}

/// Kernels at a single time, by direct summation.
pub fn kernels_at(m: &FrequencyMeasure, t: f64) -> (f64, f64, f64) {
    let mut out = (0.0, 0.0, 0.0);
    for (&w, &mass) in m.nodes.iter().zip(&m.weights) {
        let (s, c) = (w * t).sin_cos();
        out.0 += mass * c;
        out.1 += mass / w * s;
        out.2 += mass * w * s;
    }
    out
}

/// `n+1` uniformly spaced times on `[0, t_max]`.
pub fn uniform_times(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|j| t_max * j as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

/// `⟨x(t)⟩ = k_cos·x₀ + k_sin_over·p₀/m`, `⟨p(t)⟩ = k_cos·p₀ - m·k_sin_times·x₀`,
/// for an environment whose own mean amplitudes vanish.
pub fn mean_trajectory(k: &DynamicsKernels, x0: f64, p0: f64, units: &UnitSystem) -> Trajectory {
    let m = units.mass;
    let n = k.times.len();
    Trajectory {
        times: k.times.clone(),
        x: (0..n)
            .map(|j| k.k_cos[j] * x0 + k.k_sin_over[j] * p0 / m)
            .collect(),
        p: (0..n)
            .map(|j| k.k_cos[j] * p0 - m * k.k_sin_times[j] * x0)
            .collect(),
    }
}

impl DynamicsKernels {
    /// CSV `t,k_cos,k_sin_over,k_sin_times`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "k_cos", "k_sin_over", "k_sin_times"])?;
        for j in 0..self.times.len() {
            w.write_record([
                self.times[j].to_string(),
                self.k_cos[j].to_string(),
                self.k_sin_over[j].to_string(),
                self.k_sin_times[j].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CSV `t,k_cos,k_sin_over,k_sin_times,x,p`.
pub fn write_trajectory_csv<W: Write>(k: &DynamicsKernels, tr: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "k_cos", "k_sin_over", "k_sin_times", "x", "p"])?;
    for j in 0..k.times.len() {
        w.write_record([
            k.times[j].to_string(),
            k.k_cos[j].to_string(),
            k.k_sin_over[j].to_string(),
            k.k_sin_times[j].to_string(),
            tr.x[j].to_string(),
            tr.p[j].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fit of `k_sin_times(t) - ω₀ sin ω₀t ≈ -c·t^q` at small `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortTimeReport {
    /// Set when the check could not be run; explains why.
    pub notice: Option<String>,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Fitted exponent `q` (expected 3).
    pub exponent: f64,
    /// Fitted `c` with the exponent held at 3.
    pub coefficient: f64,
    /// `(⟨⟨ω⁴⟩⟩ - ω₀⁴)/6`.
    pub predicted_coefficient: f64,
    pub coefficient_rel_error: f64,
    /// Largest `|deviation|` over the sampled times.
    pub max_abs_deviation: f64,
}

impl ShortTimeReport {
    pub fn passed(&self, exponent_tol: f64, coefficient_tol: f64) -> bool {
        self.notice.is_none()
            && (self.exponent - 3.0).abs() <= exponent_tol
            && self.coefficient_rel_error <= coefficient_tol
    }
}

/// Verifies that the momentum kernel departs from the undamped `ω₀ sin ω₀t`
/// only at third order, with coefficient `(⟨⟨ω⁴⟩⟩ - ω₀⁴)/6`.
///
/// The fit decade `[t_hi/10, t_hi]` is placed where the next term,
/// `⟨⟨ω⁶⟩⟩t⁵/120`, is about 0.1% of the leading one.
pub fn short_time_check(m: &FrequencyMeasure, units: &UnitSystem) -> Result<ShortTimeReport> {
    let w0 = units.omega0;
    let mut report = ShortTimeReport {
        notice: None,
        t_lo: f64::NAN,
        t_hi: f64::NAN,
        exponent: f64::NAN,
        coefficient: f64::NAN,
        predicted_coefficient: f64::NAN,
        coefficient_rel_error: f64::NAN,
        max_abs_deviation: 0.0,
    };
    if !m.fourth_moment_reliable {
        report.notice = Some(
            "fourth moment of pi may diverge for this spectrum; short-time check skipped".into(),
        );
        return Ok(report);
    }
    let excess = m.power_moment(4) - w0.powi(4);
    report.predicted_coefficient = excess / 6.0;
    let deviation = |t: f64| kernels_at(m, t).2 - w0 * (w0 * t).sin();
    if excess <= 1e-12 * w0.powi(4) {
        let ts = uniform_times(1.0 / w0, 100);
        report.max_abs_deviation = ts.iter().map(|t| deviation(*t).abs()).fold(0.0, f64::max);
        report.notice = Some("no coupling: the momentum kernel is the undamped one".into());
        return Ok(report);
    }
    let m6 = m.power_moment(6);
    let t_hi = (0.02 * excess / m6).sqrt();
    let t_lo = 0.1 * t_hi;
    let n = 21;
    let ts: Vec<f64> = (0..n)
        .map(|i| t_lo * 10f64.powf(i as f64 / (n - 1) as f64))
        .collect();
    check_times(m, &ts)?;
    let devs: Vec<f64> = ts.iter().map(|t| deviation(*t)).collect();
    report.max_abs_deviation = devs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    if devs.iter().any(|d| !(*d < 0.0)) {
        report.notice = Some("deviation not resolved above round-off at small t".into());
        return Ok(report);
    }
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = devs.iter().map(|d| (-d).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    report.exponent = sxy / sxx;
    report.coefficient =
        (ly.iter().zip(&lx).map(|(y, x)| y - 3.0 * x).sum::<f64>() / n as f64).exp();
    report.coefficient_rel_error = (report.coefficient / report.predicted_coefficient - 1.0).abs();
    report.t_lo = t_lo;
    report.t_hi = t_hi;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingClass {
    Underdamped,
    NonOscillatory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingClassification {
    pub class: DampingClass,
    /// First `t > 0` with `d/dt k_cos = 0`.
    pub first_stationary_time: Option<f64>,
    pub scan_window: f64,
}

/// Scan step, in units of `1/ω₀`.
pub const SCAN_STEP: f64 = 0.01;

/// Underdamped when `k_cos` has a stationary point (a zero of `k_sin_times`)
/// at some `0 < t ≤ scan_window`.
pub fn classify_damping(
    m: &FrequencyMeasure,
    units: &UnitSystem,
    scan_window: f64,
) -> Result<DampingClassification> {
    if !(scan_window > 0.0 && scan_window.is_finite()) {
        return Err(DoscError::InvalidArgument(format!(
            "scan window must be positive, got {scan_window}"
        )));
    }
    let n = (scan_window * units.omega0 / SCAN_STEP).ceil().max(1.0) as usize;
    let ts = uniform_times(scan_window, n);
    let k = kernels(m, &ts)?;
    let f = |t: f64| kernels_at(m, t).2;
    let first = (2..ts.len()).find(|&j| {
        (k.k_sin_times[j] > 0.0) != (k.k_sin_times[j - 1] > 0.0) || k.k_sin_times[j] == 0.0
    });
    let first_stationary_time = match first {
        None => None,
        Some(j) => {
            let (mut a, mut b) = (ts[j - 1], ts[j]);
            let fa_pos = f(a) > 0.0;
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if (f(mid) > 0.0) == fa_pos {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            Some(0.5 * (a + b))
        }
    };
    Ok(DampingClassification {
        class: if first_stationary_time.is_some() {
            DampingClass::Underdamped
        } else {
            DampingClass::NonOscillatory
        },
        first_stationary_time,
        scan_window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    /// The last decade `[t_end/10, t_end]`.
    pub window: (f64, f64),
    pub max_abs_k_cos: f64,
    pub max_abs_k_sin_over: f64,
    pub max_abs_k_sin_times: f64,
    pub threshold: f64,
    pub relaxed: bool,
}

/// Default kernel-magnitude threshold for [`relaxation_check`].
pub const RELAXATION_THRESHOLD: f64 = 0.02;

/// Whether all three kernels stay below `threshold` over the last decade of `t`.
/// A finite or uncoupled system is expected to report `relaxed = false`.
pub fn relaxation_check(k: &DynamicsKernels, threshold: f64) -> RelaxationReport {
    let t_end = k.times.last().copied().unwrap_or(0.0);
    let lo = 0.1 * t_end;
    let mut r = RelaxationReport {
        window: (lo, t_end),
        max_abs_k_cos: 0.0,
        max_abs_k_sin_over: 0.0,
        max_abs_k_sin_times: 0.0,
        threshold,
        relaxed: false,
    };
    for j in 0..k.times.len() {
        if k.times[j] >= lo {
            r.max_abs_k_cos = r.max_abs_k_cos.max(k.k_cos[j].abs());
            r.max_abs_k_sin_over = r.max_abs_k_sin_over.max(k.k_sin_over[j].abs());
            r.max_abs_k_sin_times = r.max_abs_k_sin_times.max(k.k_sin_times[j].abs());
        }
    }
    r.relaxed = t_end > 0.0
        && r.max_abs_k_cos <= threshold
        && r.max_abs_k_sin_over <= threshold
        && r.max_abs_k_sin_times <= threshold;
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_mode() -> FrequencyMeasure {
        FrequencyMeasure::new(
            vec![0.5f64.sqrt(), 1.5f64.sqrt()],
            vec![0.5, 0.5],
            None,
            true,
        )
        .unwrap()
    }

    #[test]
    fn kernels_at_zero() {
        let k = kernels(&two_mode(), &[0.0]).unwrap();
        assert_eq!(
            (k.k_cos[0], k.k_sin_over[0], k.k_sin_times[0]),
            (1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn two_mode_kernels_match_closed_form() {
        let ts = uniform_times(40.0, 4000);
        let k = kernels(&two_mode(), &ts).unwrap();
        let (a, b) = (0.5f64.sqrt(), 1.5f64.sqrt());
        for (j, t) in ts.iter().enumerate() {
            let c = 0.5 * ((a * t).cos() + (b * t).cos());
            let so = 0.5 * ((a * t).sin() / a + (b * t).sin() / b);
            let st = 0.5 * (a * (a * t).sin() + b * (b * t).sin());
            assert!((k.k_cos[j] - c).abs() < 1e-12);
            assert!((k.k_sin_over[j] - so).abs() < 1e-12);
            assert!((k.k_sin_times[j] - st).abs() < 1e-12);
        }
    }

    #[test]
    fn nonuniform_times_agree_with_direct_sum() {
        let ts = [0.0, 0.3, 1.1, 1.2, 7.5];
        let k = kernels(&two_mode(), &ts).unwrap();
        for (j, t) in ts.iter().enumerate() {
            let d = kernels_at(&two_mode(), *t);
            assert!((k.k_cos[j] - d.0).abs() < 1e-15);
        }
    }

    #[test]
    fn finite_difference_consistency() {
        let ts = uniform_times(10.0, 10_000);
        let k = kernels(&two_mode(), &ts).unwrap();
        let dt = ts[1];
        for j in 1..ts.len() - 1 {
            let d_so = (k.k_sin_over[j + 1] - k.k_sin_over[j - 1]) / (2.0 * dt);
            let d_c = (k.k_cos[j + 1] - k.k_cos[j - 1]) / (2.0 * dt);
            assert!((d_so - k.k_cos[j]).abs() < 1e-6);
            assert!((d_c + k.k_sin_times[j]).abs() < 1e-6);
            assert!(k.k_cos[j].abs() <= 1.0);
        }
    }

    #[test]
    fn trajectory_reductions() {
        let u = UnitSystem::default();
        let k = kernels(&two_mode(), &uniform_times(5.0, 50)).unwrap();
        let zero = mean_trajectory(&k, 0.0, 0.0, &u);
        assert!(zero.x.iter().chain(&zero.p).all(|v| *v == 0.0));
        let tr = mean_trajectory(&k, 1.0, 0.0, &u);
        assert_eq!(tr.x, k.k_cos);
        let t = std::f64::consts::PI / 1.5f64.sqrt();
        let k1 = kernels(&two_mode(), &[t]).unwrap();
        let tr1 = mean_trajectory(&k1, 1.0, 0.0, &u);
        let expected = 0.5 * ((0.5f64.sqrt() * t).cos() - 1.0);
        assert!((tr1.x[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn first_order_trajectory() {
        let u = UnitSystem::default();
        let dt = 1e-6;
        let k = kernels(&two_mode(), &[0.0, dt]).unwrap();
        let tr = mean_trajectory(&k, 0.7, 0.3, &u);
        assert!(((tr.x[1] - 0.7) / dt - 0.3).abs() < 1e-5);
        assert!(((tr.p[1] - 0.3) / dt + 0.7).abs() < 1e-5);
    }

    #[test]
    fn aliasing_bound_is_enforced() {
        let m = FrequencyMeasure::new(vec![0.5, 1.0], vec![0.5, 0.5], Some(0.01), true).unwrap();
        assert!(kernels(&m, &[0.0, 10.0]).is_ok());
        assert!(matches!(
            kernels(&m, &[0.0, 10.5]),
            Err(DoscError::AntiAliasing { .. })
        ));
    }

    #[test]
    fn uncoupled_deviation_vanishes() {
        let m = FrequencyMeasure::point_mass(1.0).unwrap();
        let r = short_time_check(&m, &UnitSystem::default()).unwrap();
        assert!(r.notice.is_some());
        assert!(r.max_abs_deviation == 0.0);
    }

    #[test]
    fn two_mode_short_time() {
        let r = short_time_check(&two_mode(), &UnitSystem::default()).unwrap();
        assert!(r.passed(0.1, 0.05), "{r:?}");
        // ⟨⟨ω⁴⟩⟩ = (K²)₀₀ = 1.25 for the two-mode model
        assert!((r.predicted_coefficient - 0.25 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn tail_risk_skips_short_time() {
        let m = FrequencyMeasure::new(vec![1.0], vec![1.0], None, false).unwrap();
        let r = short_time_check(&m, &UnitSystem::default()).unwrap();
        assert!(r.notice.is_some() && !r.passed(0.1, 0.05));
    }

    #[test]
    fn two_mode_is_underdamped_and_recurrent() {
        let u = UnitSystem::default();
        let c = classify_damping(&two_mode(), &u, 10.0).unwrap();
        assert_eq!(c.class, DampingClass::Underdamped);
        let t = c.first_stationary_time.unwrap();
        assert!(kernels_at(&two_mode(), t).2.abs() < 1e-12);
        let k = kernels(&two_mode(), &uniform_times(200.0, 20_000)).unwrap();
        assert!(!relaxation_check(&k, RELAXATION_THRESHOLD).relaxed);
    }

    #[test]
    fn uncoupled_first_stationary_point_is_half_period() {
        let m = FrequencyMeasure::point_mass(1.0).unwrap();
        let c = classify_damping(&m, &UnitSystem::default(), 5.0).unwrap();
        assert!((c.first_stationary_time.unwrap() - std::f64::consts::PI).abs() < 1e-12);
        let k = kernels(&m, &uniform_times(100.0, 10_000)).unwrap();
        assert!(!relaxation_check(&k, RELAXATION_THRESHOLD).relaxed);
    }
}
