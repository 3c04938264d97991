//! Adaptive Gauss–Kronrod integration and Cauchy principal values.
//!
//! Everything here is a pure function of its arguments. Subdivision is
//! globally adaptive (the panel with the largest error estimate is bisected
//! first) with a fixed 21-point Kronrod rule, so results are bit-for-bit
//! reproducible for identical inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Default relative tolerance.
pub const DEFAULT_REL_TOL: f64 = 1e-8;
/// Default absolute floor on the error target.
pub const DEFAULT_ABS_FLOOR: f64 = 1e-12;
/// Default panel budget.
pub const DEFAULT_MAX_PANELS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid integration interval [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("relative tolerance {0} outside (0, 1)")]
    InvalidTolerance(f64),
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error(
        "quadrature did not converge within the panel budget: value {value:.15e}, \
         error estimate {error_estimate:.3e} after {evaluations} evaluations"
    )]
    NonConvergence {
        value: f64,
        error_estimate: f64,
        evaluations: usize,
    },
    #[error("pole {pole} is not strictly inside ({lower}, {upper})")]
    PoleOutsideDomain { pole: f64, lower: f64, upper: f64 },
    #[error(
        "principal-value window {pole} ± {half_width} is clipped by the domain [{lower}, {upper}]"
    )]
    WindowClipped {
        pole: f64,
        half_width: f64,
        lower: f64,
        upper: f64,
    },
    #[error("principal-value window half width must be positive and finite, got {0}")]
    InvalidWindow(f64),
}

/// Result of a numerical integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationResult {
    pub value: f64,
    /// Estimated absolute error, same units as `value`.
    pub error_estimate: f64,
    /// Number of integrand evaluations.
    pub evaluations: usize,
}

impl IntegrationResult {
    fn combine(self, other: IntegrationResult) -> IntegrationResult {
        IntegrationResult {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            rel_tol: DEFAULT_REL_TOL,
            abs_floor: DEFAULT_ABS_FLOOR,
            max_panels: DEFAULT_MAX_PANELS,
        }
    }
}

impl QuadratureOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadratureOptions {
            rel_tol,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(QuadratureError::InvalidTolerance(self.rel_tol));
        }
        Ok(())
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK21: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK21: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208289286640,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
// Gauss weights for XGK21[1], [3], [5], [7], [9].
const WG10: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
pub(crate) const XGK15: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
pub(crate) const WGK15: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for XGK15[1], [3], [5], [7].
pub(crate) const WG7: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Nodes, Kronrod weights and embedded Gauss weights of the 15-point rule on
/// `[a, b]`, in increasing node order. Gauss weights are zero on Kronrod-only nodes.
pub(crate) fn gk15_rule(a: f64, b: f64) -> ([f64; 15], [f64; 15], [f64; 15]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    let mut wk = [0.0; 15];
    let mut wg = [0.0; 15];
    for i in 0..7 {
        x[i] = c - h * XGK15[i];
        x[14 - i] = c + h * XGK15[i];
        wk[i] = h * WGK15[i];
        wk[14 - i] = h * WGK15[i];
        if i % 2 == 1 {
            wg[i] = h * WG7[i / 2];
            wg[14 - i] = h * WG7[i / 2];
        }
    }
    x[7] = c;
    wk[7] = h * WGK15[7];
    wg[7] = h * WG7[3];
    (x, wk, wg)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Kronrod value, `|K - G|` and the Kronrod estimate of `∫|f|`.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64, f64), QuadratureError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64, QuadratureError> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite { x })
        }
    };
    let fc = eval(c)?;
    let mut kronrod = WGK21[10] * fc;
    let mut absolute = WGK21[10] * fc.abs();
    let mut gauss = 0.0;
    for i in 0..10 {
        let dx = h * XGK21[i];
        let (l, r) = (eval(c - dx)?, eval(c + dx)?);
        kronrod += WGK21[i] * (l + r);
        absolute += WGK21[i] * (l.abs() + r.abs());
        if i % 2 == 1 {
            gauss += WG10[i / 2] * (l + r);
        }
    }
    Ok((
        kronrod * h,
        ((kronrod - gauss) * h).abs(),
        absolute * h.abs(),
    ))
}

fn adaptive_finite<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    opts: &QuadratureOptions,
) -> Result<IntegrationResult, QuadratureError> {
    if a == b {
        return Ok(IntegrationResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 1,
        });
    }
    let (value, error, abs_value) = gk21(f, a, b)?;
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value,
        error,
        abs_value,
    });
    let mut total_value = value;
    let mut total_error = error;
    let mut total_abs = abs_value;
    loop {
        // Errors below a few hundred ulps of ∫|f| are round-off, not truncation.
        let roundoff = 200.0 * f64::EPSILON * total_abs;
        let target = (opts.rel_tol * total_value.abs())
            .max(opts.abs_floor)
            .max(roundoff);
        if total_error <= target {
            break;
        }
        if heap.len() >= opts.max_panels {
            return Err(QuadratureError::NonConvergence {
                value: total_value,
                error_estimate: total_error,
                evaluations,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Cannot bisect further in floating point.
            total_value = exact_sum(&heap, Some(&worst));
            return Err(QuadratureError::NonConvergence {
                value: total_value,
                error_estimate: total_error,
                evaluations,
            });
        }
        let (v1, e1, a1) = gk21(f, worst.a, mid)?;
        let (v2, e2, a2) = gk21(f, mid, worst.b)?;
        evaluations += 42;
        total_value += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        total_abs += a1 + a2 - worst.abs_value;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            abs_value: a1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            abs_value: a2,
        });
    }
    // Re-sum in interval order so the result does not depend on update history.
    let value = exact_sum(&heap, None);
    let error_estimate = heap.iter().map(|p| p.error).sum();
    Ok(IntegrationResult {
        value,
        error_estimate,
        evaluations,
    })
}

fn exact_sum(heap: &BinaryHeap<Panel>, extra: Option<&Panel>) -> f64 {
    let mut parts: Vec<(f64, f64)> = heap.iter().map(|p| (p.a, p.value)).collect();
    if let Some(p) = extra {
        parts.push((p.a, p.value));
    }
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    parts.iter().map(|p| p.1).sum()
}

/// Integrates `f` over `[lower, upper]`; `upper` may be `f64::INFINITY`.
///
/// Semi-infinite ranges are mapped onto `[0, 1)` with `x = lower + t/(1-t)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    rel_tol: f64,
) -> Result<IntegrationResult, QuadratureError> {
    integrate_with(f, lower, upper, &QuadratureOptions::with_rel_tol(rel_tol))
}

pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    opts: &QuadratureOptions,
) -> Result<IntegrationResult, QuadratureError> {
    opts.validate()?;
    if !lower.is_finite() || upper.is_nan() || upper < lower || upper == f64::NEG_INFINITY {
        return Err(QuadratureError::InvalidInterval { lower, upper });
    }
    if upper.is_finite() {
        adaptive_finite(&f, lower, upper, opts)
    } else {
        let g = |t: f64| {
            let s = 1.0 - t;
            f(lower + t / s) / (s * s)
        };
        adaptive_finite(&g, 0.0, 1.0, opts)
    }
}

/// Location of the simple pole of a principal-value integral and the
/// half width of the symmetric window around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalValueSpec {
    pub pole: f64,
    pub window_half_width: f64,
}

impl PrincipalValueSpec {
    pub fn new(pole: f64, window_half_width: f64) -> Result<Self, QuadratureError> {
        if !(window_half_width > 0.0 && window_half_width.is_finite()) {
            return Err(QuadratureError::InvalidWindow(window_half_width));
        }
        Ok(PrincipalValueSpec {
            pole,
            window_half_width,
        })
    }

    /// Window of `min(0.1·|pole|, half the distance to the nearest boundary)`.
    pub fn with_default_window(pole: f64, lower: f64, upper: f64) -> Result<Self, QuadratureError> {
        if !(pole > lower && pole < upper) {
            return Err(QuadratureError::PoleOutsideDomain { pole, lower, upper });
        }
        let boundary = 0.5 * (pole - lower).min(upper - pole);
        let h = if pole != 0.0 {
            (0.1 * pole.abs()).min(boundary)
        } else {
            boundary
        };
        PrincipalValueSpec::new(pole, h)
    }
}

/// Principal value of `∫ f(x) / (x - pole) dx` over `[lower, upper]`.
///
/// Inside the window the two halves are folded onto each other, which
/// leaves the regular integrand `[f(pole+u) - f(pole-u)] / u`; the
/// logarithmic term of `f(pole)` over a symmetric window is identically zero.
/// Outside the window `f(pole)` is subtracted as well and its logarithms are
/// added in closed form, so no integrand grows when the pole sits next to a
/// boundary. A semi-infinite tail beyond one unit of distance is integrated
/// without subtraction.
pub fn cauchy_pv<F: Fn(f64) -> f64>(
    f: F,
    spec: PrincipalValueSpec,
    lower: f64,
    upper: f64,
    rel_tol: f64,
) -> Result<IntegrationResult, QuadratureError> {
    cauchy_pv_with(
        f,
        spec,
        lower,
        upper,
        &QuadratureOptions::with_rel_tol(rel_tol),
    )
}

pub fn cauchy_pv_with<F: Fn(f64) -> f64>(
    f: F,
    spec: PrincipalValueSpec,
    lower: f64,
    upper: f64,
    opts: &QuadratureOptions,
) -> Result<IntegrationResult, QuadratureError> {
    opts.validate()?;
    let PrincipalValueSpec {
        pole,
        window_half_width: h,
    } = spec;
    if !lower.is_finite() || upper.is_nan() || upper <= lower {
        return Err(QuadratureError::InvalidInterval { lower, upper });
    }
    if !(pole > lower && pole < upper) {
        return Err(QuadratureError::PoleOutsideDomain { pole, lower, upper });
    }
    if pole - h < lower || pole + h > upper {
        return Err(QuadratureError::WindowClipped {
            pole,
            half_width: h,
            lower,
            upper,
        });
    }
    let fc = f(pole);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { x: pole });
    }
    let folded = |u: f64| (f(pole + u) - f(pole - u)) / u;
    let subtracted = |x: f64| (f(x) - fc) / (x - pole);
    let mut result = adaptive_finite(&folded, 0.0, h, opts)?;
    if pole - h > lower {
        let left = adaptive_finite(&subtracted, lower, pole - h, opts)?;
        result = result.combine(left);
        result.value += fc * (h / (pole - lower)).ln();
    }
    if pole + h < upper {
        let reach = if upper.is_finite() {
            upper
        } else {
            (pole + 1.0).max(pole + 2.0 * h)
        };
        let right = adaptive_finite(&subtracted, pole + h, reach, opts)?;
        result = result.combine(right);
        result.value += fc * ((reach - pole) / h).ln();
        if reach < upper {
            let tail = integrate_with(|x: f64| f(x) / (x - pole), reach, upper, opts)?;
            result = result.combine(tail);
        }
    }
    Ok(result)
}

/// Principal value with the default window; convenience for callers that
/// do not need to tune the window.
pub fn cauchy_pv_default<F: Fn(f64) -> f64>(
    f: F,
    pole: f64,
    lower: f64,
    upper: f64,
    opts: &QuadratureOptions,
) -> Result<IntegrationResult, QuadratureError> {
    let spec = PrincipalValueSpec::with_default_window(pole, lower, upper)?;
    cauchy_pv_with(f, spec, lower, upper, opts)
}
