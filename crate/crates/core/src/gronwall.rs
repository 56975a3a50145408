//! Scalar comparison problems `x' = −ψ(t, x) + g(t)`, the closed-form decay
//! majorants, the comparison checks against energy traces, and decay fits.

use crate::error::{Error, Result};
use crate::lorentz::{lorentz_norm, LorentzExponents, SampledFunction};
use crate::psi::{dual_norm_bound, trapezoid};
use crate::solver::{time_mesh, EnergyTrace, ProblemSpec};
use std::sync::Arc;

pub type Rate = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Nonnegative forcing term `g`.
#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Zero,
    /// `g = values[i]` on `[starts[i], starts[i+1])`, the last value extending
    /// to `+∞` and `g = 0` before `starts[0]`.
    PiecewiseConstant { starts: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation of samples, constant extension outside.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl Forcing {
    pub fn constant(c: f64) -> Self {
        Forcing::PiecewiseConstant {
            starts: vec![f64::NEG_INFINITY],
            values: vec![c],
        }
    }

    pub fn piecewise_constant(starts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if starts.len() != values.len() || starts.is_empty() {
            return Err(Error::invalid("piecewise-constant forcing needs matching nonempty breaks and values"));
        }
        if starts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("forcing breakpoints must increase"));
        }
        Ok(Forcing::PiecewiseConstant { starts, values })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::invalid("sampled forcing needs matching nonempty times and values"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("forcing sample times must increase"));
        }
        Ok(Forcing::Sampled { times, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::PiecewiseConstant { starts, values } => {
                let i = starts.partition_point(|&s| s <= t);
                if i == 0 {
                    0.0
                } else {
                    values[i - 1]
                }
            }
            Forcing::Sampled { times, values } => interpolate(times, values, t),
        }
    }

    /// Left limit `g(t−)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        match self {
            Forcing::PiecewiseConstant { starts, values } => {
                let i = starts.partition_point(|&s| s < t);
                if i == 0 {
                    0.0
                } else {
                    values[i - 1]
                }
            }
            _ => self.eval(t),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::PiecewiseConstant { values, .. } | Forcing::Sampled { values, .. } => {
                values.iter().all(|&v| v >= 0.0)
            }
        }
    }

    /// Points in `(a, b)` where `g` is not smooth.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let pts = match self {
            Forcing::Zero => return Vec::new(),
            Forcing::PiecewiseConstant { starts, .. } => starts,
            Forcing::Sampled { times, .. } => times,
        };
        pts.iter().copied().filter(|&s| s > a && s < b).collect()
    }

    /// `∫_a^b g`, exact.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        match self {
            Forcing::Zero => 0.0,
            Forcing::PiecewiseConstant { starts, values } => {
                let mut s = 0.0;
                for i in 0..starts.len() {
                    let lo = starts[i].max(a);
                    let hi = starts.get(i + 1).copied().unwrap_or(f64::INFINITY).min(b);
                    if hi > lo && values[i] != 0.0 {
                        s += values[i] * (hi - lo);
                    }
                }
                s
            }
            Forcing::Sampled { .. } => {
                let mut nodes = vec![a];
                nodes.extend(self.breakpoints(a, b));
                nodes.push(b);
                nodes
                    .windows(2)
                    .map(|w| 0.5 * (w[1] - w[0]) * (self.eval(w[0]) + self.eval(w[1])))
                    .sum()
            }
        }
    }

    /// `∫_a^t e^{−m(t−s)} g(s) ds`, exact for both representations.
    pub fn exp_convolution(&self, m: f64, a: f64, t: f64) -> f64 {
        if t <= a {
            return 0.0;
        }
        if m == 0.0 {
            return self.integral(a, t);
        }
        let mut nodes = vec![a];
        nodes.extend(self.breakpoints(a, t));
        nodes.push(t);
        let kernel = |s: f64| (-m * (t - s)).exp();
        nodes
            .windows(2)
            .map(|w| {
                let (s0, s1) = (w[0], w[1]);
                let h = s1 - s0;
                let (e0, e1) = (kernel(s0), kernel(s1));
                // ∫ e^{m(s−t)} and ∫ e^{m(s−t)} (s − s0) over [s0, s1]
                let i0 = if m * h < 1e-6 { e1 * h * (1.0 - 0.5 * m * h) } else { (e1 - e0) / m };
                let (y0, y1) = match self {
                    Forcing::Sampled { .. } => (self.eval(s0), self.eval(s1)),
                    _ => {
                        let v = self.eval(0.5 * (s0 + s1));
                        (v, v)
                    }
                };
                if y1 == y0 {
                    y0 * i0
                } else {
                    let i1 = if m * h < 1e-6 { e1 * h * h * (0.5 - m * h / 3.0) } else { h * e1 / m - i0 / m };
                    y0 * i0 + (y1 - y0) / h * i1
                }
            })
            .sum()
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let i = times.partition_point(|&s| s <= t);
    if i == 0 {
        return values[0];
    }
    if i == times.len() {
        return values[times.len() - 1];
    }
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] * (1.0 - w) + values[i] * w
}

/// `x' = −ψ(t, x) + g(t)`, `x(t₀) = x₀`.
#[derive(Clone)]
pub struct ComparisonOde {
    pub psi: Rate,
    pub g: Forcing,
    pub x0: f64,
    pub t0: f64,
}

impl std::fmt::Debug for ComparisonOde {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComparisonOde")
            .field("g", &self.g)
            .field("x0", &self.x0)
            .field("t0", &self.t0)
            .finish_non_exhaustive()
    }
}

impl ComparisonOde {
    pub fn new(psi: Rate, g: Forcing, x0: f64, t0: f64) -> Self {
        ComparisonOde { psi, g, x0, t0 }
    }

    /// `ψ = m·x` on `x ≥ 0`, zero below.
    pub fn linear(m: f64, g: Forcing, x0: f64) -> Self {
        Self::new(Arc::new(move |_, x: f64| m * x.max(0.0)), g, x0, 0.0)
    }

    /// `ψ = m·x^{e}` on `x ≥ 0`, zero below.
    pub fn power(m: f64, e: f64, g: Forcing, x0: f64) -> Self {
        Self::new(Arc::new(move |_, x: f64| m * x.max(0.0).powf(e)), g, x0, 0.0)
    }

    fn with_start(&self, x0: f64, t0: f64) -> Self {
        ComparisonOde {
            x0,
            t0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Numeric,
    /// `x₀[1 + (p/2−1) M x₀^{(p−2)/2} t]^{−2/(p−2)} + C₀∫₀ᵗ g`.
    PowerMajorant,
    /// `x₀e^{−Mt} + C₀∫₀ᵗ e^{−M(t−s)} g`.
    ExponentialMajorant,
    /// `[(p/2−1) M₁]^{−2/(p−2)} t^{−2/(p−2)} + C₀∫_{t/2}^t g`.
    Universal,
    /// `(x₀ + C₀‖g‖₁) e^{−Mt/2} + C₀∫_{t/2}^t e^{−M(t−s)/2} g`.
    UniversalExponential,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct BoundCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: BoundKind,
}

/// Relative tolerance per integration step.
pub const ODE_RTOL: f64 = 1e-9;

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn vanishes_below_zero(psi: &Rate, t_samples: &[f64]) -> bool {
    t_samples
        .iter()
        .all(|&t| [-1e-12, -1e-6, -1e-3, -1.0, -1e3].iter().all(|&a| psi(t, a) == 0.0))
}

/// Integrates on `[a, b]` where `g` is smooth, starting from `x`.
fn integrate_piece(ode: &ComparisonOde, a: f64, b: f64, mut x: f64, clamp: bool, h0: &mut f64, atol: f64) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let rhs = |t: f64, x: f64| -> f64 {
        let g = if t > mid { ode.g.eval_left(t) } else { ode.g.eval(t) };
        -(ode.psi)(t, x) + g
    };
    let mut t = a;
    let mut h = h0.min(b - a);
    let mut k = [0.0; 7];
    while t < b {
        if b - t <= 1e-15 * b.abs().max(1.0) {
            break;
        }
        h = h.min(b - t);
        let min_step = 1e-14 * t.abs().max(1.0);
        if h < min_step {
            return Err(Error::StiffnessFailure { time: t, step: h });
        }
        for s in 0..7 {
            let xs = x + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            let ts = if s >= 5 { t + h } else { t + C[s] * h };
            k[s] = rhs(ts, xs);
        }
        let x5 = x + h * (0..7).map(|j| B5[j] * k[j]).sum::<f64>();
        let x4 = x + h * (0..7).map(|j| B4[j] * k[j]).sum::<f64>();
        if !x5.is_finite() {
            h *= 0.25;
            continue;
        }
        let scale = atol + ODE_RTOL * x.abs().max(x5.abs());
        let err = (x5 - x4).abs() / scale;
        if err <= 1.0 {
            t = if b - (t + h) <= 1e-15 * b.abs().max(1.0) { b } else { t + h };
            x = if clamp { x5.max(0.0) } else { x5 };
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    *h0 = h;
    Ok(x)
}

/// Adaptive Dormand–Prince integration, reported on `mesh` (increasing,
/// starting at or after `t₀`).
///
/// The solution is clamped at `0` from below only when `ψ(t, a) = 0` for
/// `a ≤ 0` (sampled).
pub fn solve_comparison(ode: &ComparisonOde, mesh: &[f64]) -> Result<BoundCurve> {
    if mesh.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("comparison mesh must be strictly increasing"));
    }
    if mesh.first().is_some_and(|&t| t < ode.t0) {
        return Err(Error::invalid("comparison mesh starts before t0"));
    }
    let t_last = mesh.last().copied().unwrap_or(ode.t0);
    let samples = [ode.t0, 0.5 * (ode.t0 + t_last), t_last];
    let clamp = vanishes_below_zero(&ode.psi, &samples);
    let scale = ode.x0.abs() + ode.g.integral(ode.t0, t_last).abs();
    let atol = 1e-15 * scale.max(1e-300);
    let mut h = (t_last - ode.t0).max(1e-3) * 1e-3;
    let mut x = ode.x0;
    let mut t = ode.t0;
    let mut values = Vec::with_capacity(mesh.len());
    for &target in mesh {
        if target > t {
            let mut nodes = vec![t];
            nodes.extend(ode.g.breakpoints(t, target));
            nodes.push(target);
            for w in nodes.windows(2) {
                x = integrate_piece(ode, w[0], w[1], x, clamp, &mut h, atol)?;
                if !x.is_finite() {
                    return Err(Error::StiffnessFailure { time: w[1], step: h });
                }
            }
            t = target;
        }
        values.push(x);
    }
    Ok(BoundCurve {
        times: mesh.to_vec(),
        values,
        kind: BoundKind::Numeric,
    })
}

fn check_p_range(p: f64, dim: usize) -> Result<()> {
    let lo = if dim >= 2 { 2.0 * dim as f64 / (dim as f64 + 2.0) } else { 1.0 };
    if !(p > lo) {
        return Err(Error::invalid(format!("p = {p} must exceed {lo}")));
    }
    Ok(())
}

/// Decay majorant evaluated at `t`: the power form for `p > 2`, the
/// exponential form for `2N/(N+2) < p ≤ 2`.
pub fn closed_form_bound(p: f64, dim: usize, m: f64, c0: f64, x0: f64, g: &Forcing, t: f64) -> Result<f64> {
    check_p_range(p, dim)?;
    if !(m > 0.0 && c0 >= 0.0 && x0 >= 0.0 && t >= 0.0) {
        return Err(Error::invalid("majorant needs M > 0, C0 ≥ 0, x0 ≥ 0, t ≥ 0"));
    }
    if p > 2.0 {
        let nu = 0.5 * p - 1.0;
        let base = x0 / (1.0 + nu * m * x0.powf(nu) * t).powf(1.0 / nu);
        Ok(base + c0 * g.integral(0.0, t))
    } else {
        Ok(x0 * (-m * t).exp() + c0 * g.exp_convolution(m, 0.0, t))
    }
}

pub fn closed_form_curve(p: f64, dim: usize, m: f64, c0: f64, x0: f64, g: &Forcing, mesh: &[f64]) -> Result<BoundCurve> {
    let values = mesh
        .iter()
        .map(|&t| closed_form_bound(p, dim, m, c0, x0, g, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundCurve {
        times: mesh.to_vec(),
        values,
        kind: if p > 2.0 { BoundKind::PowerMajorant } else { BoundKind::ExponentialMajorant },
    })
}

/// Bound for `p > 2` that does not depend on the initial datum.
pub fn universal_bound(p: f64, m1: f64, c0: f64, g: &Forcing, t: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::invalid(format!("universal bound needs p > 2, got {p}")));
    }
    if !(t > 0.0) {
        return Err(Error::invalid(format!("universal bound needs t > 0, got {t}")));
    }
    if !(m1 > 0.0) {
        return Err(Error::invalid("universal bound needs M1 > 0"));
    }
    let e = 2.0 / (p - 2.0);
    Ok(((0.5 * p - 1.0) * m1).powf(-e) * t.powf(-e) + c0 * g.integral(0.5 * t, t))
}

/// Long-time exponential bound for `2N/(N+2) < p ≤ 2`; `g` must be integrable on `[0, ∞)`.
pub fn exponential_universal_bound(p: f64, dim: usize, m2: f64, c0: f64, x0: f64, g: &Forcing, t: f64) -> Result<f64> {
    check_p_range(p, dim)?;
    if p > 2.0 || !(t >= 0.0) || !(m2 > 0.0) {
        return Err(Error::invalid("exponential universal bound needs p ≤ 2, t ≥ 0, M2 > 0"));
    }
    let total = g.integral(0.0, f64::INFINITY);
    if !total.is_finite() {
        return Err(Error::invalid("forcing is not integrable on [0, ∞)"));
    }
    let half = 0.5 * m2;
    Ok((x0 + c0 * total) * (-half * t).exp() + c0 * g.exp_convolution(half, 0.5 * t, t))
}

/// Outcome of [`comparison_check`].
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ComparisonReport {
    /// Largest `[γ(t₂) − γ(t₁) + ∫ψ(γ)] − ∫g` over mesh sub-intervals.
    pub premise_excess: f64,
    /// `max_t (γ(t) − x(t))`.
    pub max_violation: f64,
    pub passed: bool,
    pub solution: BoundCurve,
}

pub const PREMISE_SLACK: f64 = 1e-8;
pub const CONCLUSION_SLACK: f64 = 1e-6;

/// `γ(t₂) − γ(t₁) + ∫_{t₁}^{t₂} ψ(t, γ) − ∫_{t₁}^{t₂} g`, maximised over
/// `t₁ ≤ t₂` on the mesh, with the attaining pair. Trapezoid rule for `ψ`.
fn premise_excess(times: &[f64], gamma: &[f64], psi: &Rate, g: &Forcing) -> (f64, f64, f64) {
    let mut d_max = f64::NEG_INFINITY;
    let mut arg_max = times[0];
    let mut worst = (f64::NEG_INFINITY, times[0], times[0]);
    let mut psi_cum = 0.0;
    let mut g_cum = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            let h = times[i] - times[i - 1];
            psi_cum += 0.5 * h * (psi(times[i - 1], gamma[i - 1]) + psi(times[i], gamma[i]));
            g_cum += g.integral(times[i - 1], times[i]);
        }
        let d = gamma[i] + psi_cum - g_cum;
        if d_max > f64::NEG_INFINITY && d - d_max > worst.0 {
            worst = (d - d_max, arg_max, times[i]);
        }
        if d > d_max {
            d_max = d;
            arg_max = times[i];
        }
    }
    if worst.0 == f64::NEG_INFINITY {
        worst.0 = 0.0;
    }
    worst
}

/// Checks the comparison lemma on a sampled trace `γ`: verifies the integral
/// premise on every mesh sub-interval, then compares `γ` with the solution
/// of `ode` started from `x(t₀) = γ(t₀)` at the first trace time.
pub fn comparison_check(times: &[f64], gamma: &[f64], ode: &ComparisonOde) -> Result<ComparisonReport> {
    if times.len() != gamma.len() || times.len() < 2 {
        return Err(Error::invalid("comparison trace needs at least two matching samples"));
    }
    let scale = gamma.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let (excess, t1, t2) = premise_excess(times, gamma, &ode.psi, &ode.g);
    if excess > PREMISE_SLACK * scale {
        return Err(Error::PremiseFailed { t1, t2, excess });
    }
    let x = solve_comparison(&ode.with_start(gamma[0], times[0]), times)?;
    let max_violation = gamma
        .iter()
        .zip(&x.values)
        .map(|(g, x)| g - x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport {
        premise_excess: excess,
        max_violation,
        passed: max_violation <= CONCLUSION_SLACK * scale,
        solution: x,
    })
}

/// The sandwich `γ ≤ x ≤ z + ∫_{t₀}^t g` on the trace mesh.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Majorant {
    /// Solution of `z' = −ψ(t, z)`, `z(t₀) = γ(t₀)`.
    pub z: BoundCurve,
    pub x: BoundCurve,
    /// `∫_{t₀}^t g`.
    pub tail: Vec<f64>,
    /// `max_t max(γ − x, x − z − ∫g)`.
    pub max_violation: f64,
    pub passed: bool,
}

pub fn majorant_decomposition(times: &[f64], gamma: &[f64], psi: &Rate, g: &Forcing) -> Result<Majorant> {
    if times.len() != gamma.len() || times.is_empty() {
        return Err(Error::invalid("majorant needs a nonempty trace"));
    }
    let t_samples: Vec<f64> = [0, times.len() / 2, times.len() - 1].iter().map(|&i| times[i]).collect();
    if !vanishes_below_zero(psi, &t_samples) {
        return Err(Error::HypothesisFailed("ψ(t, a) must vanish for a ≤ 0".into()));
    }
    if !g.is_nonnegative() {
        return Err(Error::HypothesisFailed("g must be nonnegative".into()));
    }
    let top = 2.0 * gamma.iter().fold(1e-12f64, |a, &b| a.max(b.abs()));
    for &t in &t_samples {
        let mut prev = psi(t, 0.0);
        for i in 1..=200 {
            let v = psi(t, top * i as f64 / 200.0);
            if v < prev {
                return Err(Error::HypothesisFailed(format!("ψ(t, ·) decreases at t = {t}")));
            }
            prev = v;
        }
    }
    let t0 = times[0];
    let x = solve_comparison(&ComparisonOde::new(psi.clone(), g.clone(), gamma[0], t0), times)?;
    let z = solve_comparison(&ComparisonOde::new(psi.clone(), Forcing::Zero, gamma[0], t0), times)?;
    if z.values.iter().any(|&v| v < 0.0) {
        return Err(Error::HypothesisFailed("majorant z became negative".into()));
    }
    let tail: Vec<f64> = times.iter().map(|&t| g.integral(t0, t)).collect();
    let scale = gamma.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let mut worst = f64::NEG_INFINITY;
    for i in 0..times.len() {
        worst = worst.max(gamma[i] - x.values[i]).max(x.values[i] - z.values[i] - tail[i]);
    }
    Ok(Majorant {
        passed: worst <= CONCLUSION_SLACK * scale,
        z,
        x,
        tail,
        max_violation: worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Power,
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct DecayFit {
    pub kind: DecayKind,
    /// Log-log slope for power decay, rate `−d log x/dt` for exponential decay.
    pub value: f64,
    pub r_squared: f64,
    pub samples: usize,
    pub power: LineFit,
    pub exponential: LineFit,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

/// Least-squares decay fit of positive samples with `t ∈ [lo, hi]`, `t > 0`.
pub fn fit_decay_series(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t >= window.0 && t <= window.1 && t > 0.0 && v > 0.0)
        .map(|(&t, &v)| (t, v))
        .unzip();
    if t.len() < 8 {
        return Err(Error::DegenerateWindow { samples: t.len() });
    }
    let lv: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let lt: Vec<f64> = t.iter().map(|t| t.ln()).collect();
    let power = line_fit(&lt, &lv);
    let exponential = line_fit(&t, &lv);
    let (kind, value, r_squared) = if power.r_squared > exponential.r_squared {
        (DecayKind::Power, power.slope, power.r_squared)
    } else {
        (DecayKind::Exponential, -exponential.slope, exponential.r_squared)
    };
    Ok(DecayFit {
        kind,
        value,
        r_squared,
        samples: t.len(),
        power,
        exponential,
    })
}

/// Decay fit of `‖u(t)‖²` on a window.
pub fn fit_decay(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit> {
    fit_decay_series(&trace.times, &trace.l2_sq, window)
}

/// `g(t) = ‖f(t)‖^{p'}_{W^{−1,p'}} + ‖H(t)‖^p_{L^p} + ‖b(t)‖^p_{L^{N,∞}}` on the
/// time mesh of step `dt`, as sampled forcing. On intervals the last term
/// uses `‖b‖_∞`.
pub fn g_function(spec: &ProblemSpec, dt: f64) -> Result<Forcing> {
    let g = &spec.grid;
    let p = spec.exponent();
    let pd = p / (p - 1.0);
    let n = g.dimension();
    let times = time_mesh(spec.t_end, dt)?;
    let mut values = Vec::with_capacity(times.len());
    for &t in &times {
        let f_term = match &spec.source {
            Some(f) => {
                let vals: Vec<f64> = g.nodes().iter().map(|&x| f(x, t)).collect();
                dual_norm_bound(g, p, &vals)?.powf(pd)
            }
            None => 0.0,
        };
        let h_term: f64 = g
            .nodes()
            .iter()
            .zip(g.measures())
            .map(|(&x, m)| m * spec.flux.h_bound(x, t).powf(p))
            .sum();
        let b_vals: Vec<f64> = g.nodes().iter().map(|&x| spec.flux.coefficient(x, t)).collect();
        let b_norm = if b_vals.iter().all(|&b| b == 0.0) {
            0.0
        } else if n >= 2 {
            let s = SampledFunction::new(b_vals.iter().copied().zip(g.measures().iter().copied()))?;
            lorentz_norm(&s, LorentzExponents::weak(n as f64)?)
        } else {
            b_vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
        };
        values.push(f_term + h_term + b_norm.powf(p));
    }
    Forcing::sampled(times, values)
}

/// Trapezoid `∫_{t/2}^t` of a sampled series, for traces on a mesh.
pub fn trailing_half_integral(times: &[f64], values: &[f64], t: f64) -> f64 {
    let lo = 0.5 * t;
    let (ts, vs): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&s, _)| s >= lo && s <= t)
        .map(|(&s, &v)| (s, v))
        .unzip();
    trapezoid(&ts, &vs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
    }

    #[test]
    fn no_decay_integrates_forcing() {
        let g = Forcing::piecewise_constant(vec![0.0, 1.5, 4.0], vec![0.3, 1.0, 0.0]).unwrap();
        let ode = ComparisonOde::new(Arc::new(|_, _| 0.0), g.clone(), 2.0, 0.0);
        let m = mesh(6.0, 60);
        let x = solve_comparison(&ode, &m).unwrap();
        for (t, v) in m.iter().zip(&x.values) {
            assert!((v - (2.0 + g.integral(0.0, *t))).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_decay_is_exponential() {
        let ode = ComparisonOde::linear(1.3, Forcing::Zero, 2.0);
        let m = mesh(10.0, 100);
        let x = solve_comparison(&ode, &m).unwrap();
        for (t, v) in m.iter().zip(&x.values) {
            assert!((v - 2.0 * (-1.3 * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn quartic_case_is_harmonic() {
        let ode = ComparisonOde::power(1.0, 2.0, Forcing::Zero, 1.0);
        let m = mesh(10.0, 50);
        let x = solve_comparison(&ode, &m).unwrap();
        for (t, v) in m.iter().zip(&x.values) {
            assert!((v - 1.0 / (1.0 + t)).abs() < 1e-8 / (1.0 + t));
        }
        let b = closed_form_bound(4.0, 5, 1.0, 1.0, 1.0, &Forcing::Zero, 3.0).unwrap();
        assert!((b - 0.25).abs() < 1e-15);
    }

    #[test]
    fn closed_form_special_values() {
        let g = Forcing::constant(0.2);
        for p in [1.5, 2.0, 3.0, 4.0] {
            assert_eq!(closed_form_bound(p, 3.max(p as usize + 1), 2.0, 1.0, 0.7, &g, 0.0).unwrap(), 0.7);
        }
        let v = closed_form_bound(3.0, 5, 2.0, 1.0, 1.0, &Forcing::Zero, 2.0).unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
        let e = closed_form_bound(2.0, 3, 2.0, 1.0, 1.5, &Forcing::Zero, 0.5).unwrap();
        assert!((e - 1.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(closed_form_bound(1.2, 3, 1.0, 1.0, 1.0, &g, 1.0).is_err());
    }

    #[test]
    fn universal_bound_values() {
        assert!((universal_bound(4.0, 1.0, 1.0, &Forcing::Zero, 2.5).unwrap() - 0.4).abs() < 1e-15);
        assert!((universal_bound(3.0, 2.0, 1.0, &Forcing::Zero, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let g = Forcing::piecewise_constant(vec![0.0, 5.0], vec![1.0, 0.0]).unwrap();
        assert!(universal_bound(3.0, 1.0, 1.0, &g, 1e4).unwrap() < 1e-7);
        assert!(universal_bound(2.0, 1.0, 1.0, &g, 1.0).is_err());
        assert!(universal_bound(3.0, 1.0, 1.0, &g, 0.0).is_err());
    }

    #[test]
    fn exp_convolution_matches_quadrature() {
        let g = Forcing::sampled(vec![0.0, 1.0, 2.5, 4.0], vec![0.0, 2.0, 0.5, 1.0]).unwrap();
        let m = 0.7;
        let t = 3.3;
        let n = 200_000;
        let h = t / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) * h;
            acc += (-m * (t - s)).exp() * g.eval(s) * h;
        }
        assert!((g.exp_convolution(m, 0.0, t) - acc).abs() < 1e-8);
    }

    #[test]
    fn comparison_of_half_solution() {
        let ode = ComparisonOde::linear(1.0, Forcing::Zero, 1.0);
        let m = mesh(5.0, 5000);
        let x = solve_comparison(&ode, &m).unwrap();
        let rep = comparison_check(&m, &x.values, &ode).unwrap();
        assert!(rep.passed && rep.max_violation.abs() < 1e-9);
        let half: Vec<f64> = x.values.iter().map(|v| 0.5 * v).collect();
        let rep = comparison_check(&m, &half, &ode.with_start(1.0, 0.0)).unwrap();
        assert!(rep.passed);
        let grow: Vec<f64> = m.iter().map(|t| 1.0 + t).collect();
        assert!(matches!(comparison_check(&m, &grow, &ode), Err(Error::PremiseFailed { .. })));
    }

    #[test]
    fn majorant_of_linear_problem_with_constant_forcing() {
        let psi: Rate = Arc::new(|_, x: f64| x.max(0.0));
        let c = 0.3;
        let m = mesh(4.0, 400);
        let gamma: Vec<f64> = m.iter().map(|t| 2.0 * (-t).exp() + c * (1.0 - (-t).exp())).collect();
        let out = majorant_decomposition(&m, &gamma, &psi, &Forcing::constant(c)).unwrap();
        assert!(out.passed);
        let quad: Rate = Arc::new(|_, x: f64| x.max(0.0).powi(2));
        let ones: Vec<f64> = m.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let out = majorant_decomposition(&m, &ones, &quad, &Forcing::Zero).unwrap();
        assert!(out.z.values.windows(2).all(|w| w[1] <= w[0] && w[1] >= 0.0));
        let bad: Rate = Arc::new(|_, x: f64| -x);
        assert!(matches!(
            majorant_decomposition(&m, &ones, &bad, &Forcing::Zero),
            Err(Error::HypothesisFailed(_))
        ));
    }

    #[test]
    fn fits_synthetic_traces() {
        let t: Vec<f64> = (1..=50).map(|i| i as f64 * 0.2).collect();
        let pw: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(-2.0)).collect();
        let f = fit_decay_series(&t, &pw, (0.0, 100.0)).unwrap();
        assert_eq!(f.kind, DecayKind::Power);
        assert!((f.value + 2.0).abs() < 1e-6);
        let ex: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
        let f = fit_decay_series(&t, &ex, (0.0, 100.0)).unwrap();
        assert_eq!(f.kind, DecayKind::Exponential);
        assert!((f.value - 3.0).abs() < 1e-6);
        assert!(matches!(
            fit_decay_series(&t, &ex, (0.0, 1.0)),
            Err(Error::DegenerateWindow { samples: 5 })
        ));
    }
}
