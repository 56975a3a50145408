//! Vector fields `A(x, t, u, ξ)` of p-Laplacian type.
//!
//! A [`Flux`] declares its structural constants: with `b = coefficient`,
//!
//! * `A·ξ ≥ α|ξ|^p − (b|u|)^p − H`,
//! * `(A(ξ) − A(η))·(ξ − η) > 0` for `ξ ≠ η`,
//! * `|A| ≤ β|ξ|^{p−1} + (b|u|)^{p−1} + K`.
//!
//! [`check_structure`] samples these inequalities.

use crate::grid::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub type SpaceTimeField = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type TimeProfile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Regularisation of the modulus `|ξ|^{p−2}` as `(|ξ|² + ε²)^{(p−2)/2}`.
pub const REGULARIZATION: f64 = 1e-8;

pub trait Flux: Send + Sync {
    fn exponent(&self) -> f64;
    fn alpha(&self) -> f64;
    fn beta(&self) -> f64;

    /// Structural lower-order coefficient `b(x, t) ≥ 0`.
    fn coefficient(&self, x: Point, t: f64) -> f64;

    /// `H(x, t)` of the coercivity bound.
    fn h_bound(&self, _x: Point, _t: f64) -> f64 {
        0.0
    }

    /// `K(x, t)` of the growth bound.
    fn k_bound(&self, _x: Point, _t: f64) -> f64 {
        0.0
    }

    fn eval(&self, x: Point, t: f64, u: f64, xi: Point) -> Point;

    /// Transport velocity of the `u`-dependent part along `axis`, used to
    /// upwind the value of `u` on faces. Zero means centred.
    fn transport(&self, _x: Point, _t: f64, _axis: usize) -> f64 {
        0.0
    }

    /// `(∂A_axis/∂u, ∂A_axis/∂ξ_axis)`.
    fn normal_derivatives(&self, x: Point, t: f64, u: f64, xi: Point, axis: usize) -> (f64, f64) {
        let hu = 1e-7 * u.abs().max(1.0);
        let du = (self.eval(x, t, u + hu, xi)[axis] - self.eval(x, t, u - hu, xi)[axis]) / (2.0 * hu);
        let hx = 1e-7 * xi[axis].abs().max(1.0);
        let mut xp = xi;
        let mut xm = xi;
        xp[axis] += hx;
        xm[axis] -= hx;
        let dxi = (self.eval(x, t, u, xp)[axis] - self.eval(x, t, u, xm)[axis]) / (2.0 * hx);
        (du, dxi)
    }

    /// Whether `A` ignores its `u` argument.
    fn independent_of_u(&self) -> bool {
        false
    }
}

impl<F: Flux + ?Sized> Flux for Arc<F> {
    fn exponent(&self) -> f64 {
        (**self).exponent()
    }
    fn alpha(&self) -> f64 {
        (**self).alpha()
    }
    fn beta(&self) -> f64 {
        (**self).beta()
    }
    fn coefficient(&self, x: Point, t: f64) -> f64 {
        (**self).coefficient(x, t)
    }
    fn h_bound(&self, x: Point, t: f64) -> f64 {
        (**self).h_bound(x, t)
    }
    fn k_bound(&self, x: Point, t: f64) -> f64 {
        (**self).k_bound(x, t)
    }
    fn eval(&self, x: Point, t: f64, u: f64, xi: Point) -> Point {
        (**self).eval(x, t, u, xi)
    }
    fn transport(&self, x: Point, t: f64, axis: usize) -> f64 {
        (**self).transport(x, t, axis)
    }
    fn normal_derivatives(&self, x: Point, t: f64, u: f64, xi: Point, axis: usize) -> (f64, f64) {
        (**self).normal_derivatives(x, t, u, xi, axis)
    }
    fn independent_of_u(&self) -> bool {
        (**self).independent_of_u()
    }
}

#[inline]
fn signed_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(e)
    }
}

#[inline]
fn norm(x: Point) -> f64 {
    x[0].hypot(x[1])
}

/// Regularised p-Laplacian with a radial drift,
/// `A = (|ξ|² + ε²)^{(p−2)/2} ξ + |u|^{p−2}u (μ h(t)/|x| + b₀(x,t)) x/|x|`.
///
/// On one-dimensional grids `x/|x|` is taken as `+1`.
#[derive(Clone)]
pub struct ModelFlux {
    p: f64,
    mu: f64,
    eps: f64,
    h: TimeProfile,
    b0: SpaceTimeField,
}

impl std::fmt::Debug for ModelFlux {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelFlux")
            .field("p", &self.p)
            .field("mu", &self.mu)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl ModelFlux {
    /// Pure p-Laplacian (`μ = 0`, `b₀ = 0`).
    pub fn p_laplacian(p: f64) -> Self {
        Self::new(p, 0.0)
    }

    /// Drift `μ/|x|` with `h ≡ 1` and `b₀ ≡ 0`.
    pub fn new(p: f64, mu: f64) -> Self {
        ModelFlux {
            p,
            mu,
            eps: REGULARIZATION,
            h: Arc::new(|_| 1.0),
            b0: Arc::new(|_, _| 0.0),
        }
    }

    pub fn with_h(mut self, h: TimeProfile) -> Self {
        self.h = h;
        self
    }

    pub fn with_b0(mut self, b0: SpaceTimeField) -> Self {
        self.b0 = b0;
        self
    }

    pub fn with_regularization(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Signed drift coefficient `μ h(t)/|x| + b₀(x, t)`.
    pub fn drift(&self, x: Point, t: f64) -> f64 {
        let r = norm(x);
        let singular = if self.mu == 0.0 { 0.0 } else { self.mu * (self.h)(t) / r };
        singular + (self.b0)(x, t)
    }

    fn direction(x: Point) -> Point {
        let r = norm(x);
        if x[1] == 0.0 {
            [if x[0] < 0.0 { -1.0 } else { 1.0 }, 0.0]
        } else {
            [x[0] / r, x[1] / r]
        }
    }

    fn modulus(&self, xi: Point) -> f64 {
        (xi[0] * xi[0] + xi[1] * xi[1] + self.eps * self.eps).powf(0.5 * (self.p - 2.0))
    }

    // sup of (s² + ε²)^{(p−2)/2} s − β s^{p−1} is attained below s*, where the
    // relative excess of the regularised modulus falls under GROWTH_SLACK
    fn growth_split(&self) -> (f64, f64) {
        const GROWTH_SLACK: f64 = 1e-6;
        let p = self.p;
        if p <= 2.0 {
            return (1.0, 0.0);
        }
        let s = self.eps * ((p - 2.0) / (2.0 * GROWTH_SLACK)).sqrt();
        let k = (s * s + self.eps * self.eps).powf(0.5 * (p - 2.0)) * s;
        (GROWTH_SLACK.exp(), k)
    }
}

impl Flux for ModelFlux {
    fn exponent(&self) -> f64 {
        self.p
    }

    /// `1 − (p−1)^{p−1}/p^p`: what Young's inequality leaves of the principal
    /// part after absorbing the drift into `(b|u|)^p`.
    fn alpha(&self) -> f64 {
        let p = self.p;
        1.0 - (p - 1.0).powf(p - 1.0) / p.powf(p)
    }

    fn beta(&self) -> f64 {
        self.growth_split().0
    }

    /// `|μ h/|x| + b₀|^{1/(p−1)}`: the drift enters as `|u|^{p−1}` times the
    /// drift coefficient, which is `(b|u|)^{p−1}` for this `b`.
    fn coefficient(&self, x: Point, t: f64) -> f64 {
        let d = self.drift(x, t).abs();
        if self.p == 2.0 {
            d
        } else {
            d.powf(1.0 / (self.p - 1.0))
        }
    }

    fn h_bound(&self, _x: Point, _t: f64) -> f64 {
        if self.p < 2.0 {
            self.eps.powf(self.p)
        } else {
            0.0
        }
    }

    fn k_bound(&self, _x: Point, _t: f64) -> f64 {
        self.growth_split().1
    }

    fn eval(&self, x: Point, t: f64, u: f64, xi: Point) -> Point {
        let m = self.modulus(xi);
        let mut a = [m * xi[0], m * xi[1]];
        let beta = self.drift(x, t);
        if beta != 0.0 && u != 0.0 {
            let c = signed_pow(u, self.p - 1.0) * beta;
            let e = Self::direction(x);
            a[0] += c * e[0];
            a[1] += c * e[1];
        }
        a
    }

    fn transport(&self, x: Point, t: f64, axis: usize) -> f64 {
        -self.drift(x, t) * Self::direction(x)[axis]
    }

    fn normal_derivatives(&self, x: Point, t: f64, u: f64, xi: Point, axis: usize) -> (f64, f64) {
        let p = self.p;
        let s2 = xi[0] * xi[0] + xi[1] * xi[1] + self.eps * self.eps;
        let dxi = s2.powf(0.5 * (p - 2.0)) * (1.0 + (p - 2.0) * xi[axis] * xi[axis] / s2);
        let beta = self.drift(x, t);
        let du = if beta == 0.0 {
            0.0
        } else {
            (p - 1.0) * u.abs().max(1e-12).powf(p - 2.0) * beta * Self::direction(x)[axis]
        };
        (du, dxi)
    }

    fn independent_of_u(&self) -> bool {
        self.mu == 0.0 && {
            // b0 cannot be inspected; probe it on a few points
            let probes = [[0.3, 0.0], [0.7, 0.2], [-0.4, 0.1]];
            probes.iter().all(|&x| [0.0, 0.5, 1.0].iter().all(|&t| (self.b0)(x, t) == 0.0))
        }
    }
}

/// `A_n(x, t, u, ξ) = A(x, t, θ_n u, ξ)` with `θ_n = T_n b / b`; its structural
/// coefficient is `T_n b = min(b, n)`.
#[derive(Clone)]
pub struct Truncated<F> {
    inner: F,
    level: f64,
}

impl<F: Flux> Truncated<F> {
    pub fn new(inner: F, level: f64) -> Self {
        Truncated { inner, level }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    fn theta(&self, x: Point, t: f64) -> f64 {
        let b = self.inner.coefficient(x, t);
        if b <= self.level {
            1.0
        } else {
            self.level / b
        }
    }
}

impl<F: Flux> Flux for Truncated<F> {
    fn exponent(&self) -> f64 {
        self.inner.exponent()
    }
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }
    fn beta(&self) -> f64 {
        self.inner.beta()
    }
    fn coefficient(&self, x: Point, t: f64) -> f64 {
        self.inner.coefficient(x, t).min(self.level)
    }
    fn h_bound(&self, x: Point, t: f64) -> f64 {
        self.inner.h_bound(x, t)
    }
    fn k_bound(&self, x: Point, t: f64) -> f64 {
        self.inner.k_bound(x, t)
    }
    fn eval(&self, x: Point, t: f64, u: f64, xi: Point) -> Point {
        self.inner.eval(x, t, self.theta(x, t) * u, xi)
    }
    fn transport(&self, x: Point, t: f64, axis: usize) -> f64 {
        self.inner.transport(x, t, axis)
    }
    fn normal_derivatives(&self, x: Point, t: f64, u: f64, xi: Point, axis: usize) -> (f64, f64) {
        let th = self.theta(x, t);
        let (du, dxi) = self.inner.normal_derivatives(x, t, th * u, xi, axis);
        (th * du, dxi)
    }
    fn independent_of_u(&self) -> bool {
        self.inner.independent_of_u()
    }
}

/// Violations of the structural inequalities found by [`check_structure`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructureReport {
    pub samples: usize,
    pub coercivity_violations: usize,
    pub monotonicity_violations: usize,
    pub growth_violations: usize,
    /// Largest relative excess over any of the three inequalities.
    pub worst_excess: f64,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.coercivity_violations == 0 && self.monotonicity_violations == 0 && self.growth_violations == 0
    }
}

/// Draws `samples` random `(x, t, u, ξ, η)` with `x` from `points` and checks
/// the three structural inequalities with the declared constants.
pub fn check_structure<F: Flux + ?Sized>(
    flux: &F,
    points: &[Point],
    t_end: f64,
    samples: usize,
    seed: u64,
) -> StructureReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = flux.exponent();
    let (alpha, beta) = (flux.alpha(), flux.beta());
    let mut rep = StructureReport {
        samples,
        ..Default::default()
    };
    // magnitudes spread over many decades, including the regularisation scale
    let magnitude = |rng: &mut ChaCha8Rng| 10f64.powf(rng.gen_range(-9.0..3.0));
    let dims = if points.iter().any(|x| x[1] != 0.0) { 2 } else { 1 };
    for _ in 0..samples {
        let x = points[rng.gen_range(0..points.len())];
        let t = rng.gen_range(0.0..=t_end);
        let su: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let u = su * magnitude(&mut rng);
        let vector = |rng: &mut ChaCha8Rng| -> Point {
            let m = magnitude(rng);
            if dims == 1 {
                [if rng.gen_bool(0.5) { m } else { -m }, 0.0]
            } else {
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                [m * a.cos(), m * a.sin()]
            }
        };
        let xi = vector(&mut rng);
        let eta = vector(&mut rng);
        let b = flux.coefficient(x, t);
        let a_xi = flux.eval(x, t, u, xi);
        let a_eta = flux.eval(x, t, u, eta);
        let nxi = norm(xi);

        let lhs = a_xi[0] * xi[0] + a_xi[1] * xi[1];
        let rhs = alpha * nxi.powf(p) - (b * u.abs()).powf(p) - flux.h_bound(x, t);
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        if lhs < rhs - 1e-12 * scale {
            rep.coercivity_violations += 1;
            rep.worst_excess = rep.worst_excess.max((rhs - lhs) / scale);
        }

        let d = [xi[0] - eta[0], xi[1] - eta[1]];
        let mono = (a_xi[0] - a_eta[0]) * d[0] + (a_xi[1] - a_eta[1]) * d[1];
        // a large u-dependent part cancels in the difference; below round-off
        // level the sign of the product carries no information
        let noise = 1e-14 * (norm(a_xi) + norm(a_eta)) * norm(d);
        if norm(d) > 0.0 && !(mono > 0.0 || mono.abs() <= noise) {
            rep.monotonicity_violations += 1;
        }

        let g_lhs = norm(a_xi);
        let g_rhs = beta * nxi.powf(p - 1.0) + (b * u.abs()).powf(p - 1.0) + flux.k_bound(x, t);
        if g_lhs > g_rhs * (1.0 + 1e-12) {
            rep.growth_violations += 1;
            rep.worst_excess = rep.worst_excess.max((g_lhs - g_rhs) / g_rhs);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial_points() -> Vec<Point> {
        (1..200).map(|i| [i as f64 / 200.0, 0.0]).collect()
    }

    fn planar_points() -> Vec<Point> {
        (0..400)
            .map(|i| [((i % 20) as f64 - 9.5) / 20.0, ((i / 20) as f64 - 9.5) / 20.0])
            .collect()
    }

    #[test]
    fn model_flux_satisfies_structure() {
        for &p in &[1.5, 1.8, 2.0, 2.5, 3.0, 4.0] {
            for &mu in &[0.0, 0.1, 0.7] {
                let f = ModelFlux::new(p, mu).with_b0(Arc::new(|x, t| 0.3 * (x[0] + t).sin()));
                for pts in [radial_points(), planar_points()] {
                    let rep = check_structure(&f, &pts, 1.0, 10_000, 7);
                    assert!(rep.passed(), "p={p} mu={mu}: {rep:?}");
                }
            }
        }
    }

    #[test]
    fn truncated_flux_satisfies_structure() {
        for &p in &[1.6, 2.0, 3.0] {
            let f = Truncated::new(ModelFlux::new(p, 0.4), 4.0);
            let rep = check_structure(&f, &radial_points(), 1.0, 10_000, 11);
            assert!(rep.passed(), "p={p}: {rep:?}");
            assert!(f.coefficient([0.01, 0.0], 0.0) == 4.0);
            assert!((f.coefficient([0.5, 0.0], 0.0) - 0.8f64.powf(1.0 / (p - 1.0))).abs() < 1e-15);
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let f = ModelFlux::new(3.0, 0.2).with_b0(Arc::new(|_, _| 0.1));
        let x = [0.4, 0.0];
        let xi = [0.7, 0.0];
        let (du, dxi) = f.normal_derivatives(x, 0.0, 0.3, xi, 0);
        let h = 1e-6;
        let fd_u = (f.eval(x, 0.0, 0.3 + h, xi)[0] - f.eval(x, 0.0, 0.3 - h, xi)[0]) / (2.0 * h);
        let fd_xi = (f.eval(x, 0.0, 0.3, [0.7 + h, 0.0])[0] - f.eval(x, 0.0, 0.3, [0.7 - h, 0.0])[0]) / (2.0 * h);
        assert!((du - fd_u).abs() < 1e-6 && (dxi - fd_xi).abs() < 1e-6);
    }

    #[test]
    fn drift_points_inward_for_positive_coefficient() {
        let f = ModelFlux::new(2.0, 0.5);
        assert!(f.transport([0.3, 0.0], 0.0, 0) < 0.0);
        assert!(ModelFlux::p_laplacian(2.5).independent_of_u());
        assert!(!f.independent_of_u());
    }
}
