//! The profile functions of the level-set estimate and the constant `M₀`.
//!
//! `φ(w) = [1 − (1+|w|)^{1−p}] sign(w)/(p−1)`, `Φ(w) = ∫₀^{|w|} φ` and
//! `Ψ(k) = 1/Φ(k)` on `(0, ∞)`, so that for solutions with data bounded in
//! terms of `M₀`,
//!
//! `sup_t |{|u(t)| > k}| ≤ Ψ(k) M₀`.

use crate::error::{Error, Result};
use crate::flux::{Flux, SpaceTimeField};
use crate::grid::{Grid, GridFunction};
use crate::lorentz::sobolev_constant;
use crate::solver::time_mesh;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiProfile {
    p: f64,
}

pub fn psi_profile(p: f64) -> Result<PsiProfile> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("profile exponent p = {p} must exceed 1")));
    }
    Ok(PsiProfile { p })
}

impl PsiProfile {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn phi(&self, w: f64) -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        // 1 − (1+|w|)^{1−p} = −expm1((1−p) ln(1+|w|)), accurate for small |w|
        let v = -((1.0 - self.p) * w.abs().ln_1p()).exp_m1() / (self.p - 1.0);
        v.copysign(w)
    }

    pub fn big_phi(&self, w: f64) -> f64 {
        let w = w.abs();
        let p = self.p;
        if w < 1e-4 {
            // Φ(w) = w²/2 − p w³/6 + p(p+1) w⁴/24 − …
            return w * w * (0.5 - p * w / 6.0 + p * (p + 1.0) * w * w / 24.0);
        }
        let l = w.ln_1p();
        let integral = if (p - 2.0).abs() < 1e-12 {
            l
        } else {
            ((2.0 - p) * l).exp_m1() / (2.0 - p)
        };
        (w - integral) / (p - 1.0)
    }

    /// `Ψ(k) = 1/Φ(k)`, decreasing from `+∞` to `0` on `(0, ∞)`.
    pub fn psi(&self, k: f64) -> Result<f64> {
        if !(k > 0.0) {
            return Err(Error::invalid(format!("Ψ is defined for k > 0, got {k}")));
        }
        Ok(1.0 / self.big_phi(k))
    }

    /// Inverse of `Φ` on `[0, ∞)`, by bisection to relative width `1e-12`.
    pub fn inverse_big_phi(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0 && y.is_finite()) {
            return Err(Error::invalid(format!("Φ⁻¹ needs a finite y ≥ 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.big_phi(hi) < y {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if self.big_phi(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Ingredients of `M₀ = ½‖u₀‖² + ‖H‖_{L¹(Ω_T)} + ‖b‖^p_{L^p(Ω_T)} + α^{−1/(p−1)} ‖f‖^{p'}`,
/// where the last norm is that of `L^{p'}(0,T; W^{−1,p'})`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConstant {
    pub initial: f64,
    pub h_term: f64,
    pub b_term: f64,
    pub f_term: f64,
}

impl DataConstant {
    pub fn total(&self) -> f64 {
        self.initial + self.h_term + self.b_term + self.f_term
    }
}

/// Upper bound of `‖f‖_{W^{−1,p'}}` for a field sampled on `grid`.
///
/// On grids of dimension `N ≥ 2` with `p < N` the Sobolev inequality gives
/// `‖f‖_{W^{−1,p'}} ≤ S_{N,p} ‖f‖_{L^{(p*)'}}`; on an interval of length `L`,
/// `|v(x)| ≤ (L/2)^{1/p'} ‖v'‖_p` gives `‖f‖_{W^{−1,p'}} ≤ (L/2)^{1/p'} ‖f‖_{L¹}`.
pub fn dual_norm_bound(grid: &Grid, p: f64, f: &[f64]) -> Result<f64> {
    let m = grid.measures();
    let dim = grid.dimension();
    if dim == 1 {
        let len = grid.volume();
        let l1: f64 = f.iter().zip(m).map(|(v, w)| v.abs() * w).sum();
        return Ok((0.5 * len).powf(1.0 - 1.0 / p) * l1);
    }
    let s = sobolev_constant(dim, p)?;
    let q = s.critical_exponent();
    let qd = q / (q - 1.0);
    let norm: f64 = f.iter().zip(m).map(|(v, w)| v.abs().powf(qd) * w).sum::<f64>().powf(1.0 / qd);
    Ok(s.constant * norm)
}

/// `M₀` from discrete norms of the data, with time integrals by the
/// trapezoid rule on the mesh of step `dt` over `[0, t_end]`.
pub fn data_constant(
    grid: &Grid,
    flux: &dyn Flux,
    u0: &GridFunction,
    source: Option<&SpaceTimeField>,
    t_end: f64,
    dt: f64,
) -> Result<DataConstant> {
    let p = flux.exponent();
    let pd = p / (p - 1.0);
    let nodes = grid.nodes();
    let m = grid.measures();
    let times = time_mesh(t_end, dt)?;
    let mut h_rate = Vec::with_capacity(times.len());
    let mut b_rate = Vec::with_capacity(times.len());
    let mut f_rate = Vec::with_capacity(times.len());
    for &t in &times {
        h_rate.push(nodes.iter().zip(m).map(|(&x, w)| flux.h_bound(x, t).abs() * w).sum::<f64>());
        b_rate.push(
            nodes
                .iter()
                .zip(m)
                .map(|(&x, w)| flux.coefficient(x, t).powf(p) * w)
                .sum::<f64>(),
        );
        let fv = match source {
            Some(f) => {
                let vals: Vec<f64> = nodes.iter().map(|&x| f(x, t)).collect();
                dual_norm_bound(grid, p, &vals)?.powf(pd)
            }
            None => 0.0,
        };
        f_rate.push(fv);
    }
    let alpha = flux.alpha();
    Ok(DataConstant {
        initial: 0.5 * crate::grid::l2_norm_sq(u0),
        h_term: trapezoid(&times, &h_rate),
        b_term: trapezoid(&times, &b_rate),
        f_term: alpha.powf(-1.0 / (p - 1.0)) * trapezoid(&times, &f_rate),
    })
}

pub(crate) fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Outcome of comparing measured level sets with `Ψ(k) M₀`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct WeakTypeReport {
    pub m0: f64,
    pub rows: Vec<WeakTypeRow>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct WeakTypeRow {
    pub k: f64,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub passed: bool,
}

/// Slack allowed below zero on each margin.
pub const WEAK_TYPE_SLACK: f64 = 1e-6;

impl WeakTypeReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Checks `sup_t |{|u(t)| > k}| ≤ Ψ(k) M₀` for every `k` in `ks`; the trace
/// must have recorded level sets at those heights.
pub fn weak_type_check(
    trace: &crate::solver::EnergyTrace,
    psi: &PsiProfile,
    m0: f64,
    ks: &[f64],
) -> Result<WeakTypeReport> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let measured = trace
            .level_set(k)
            .ok_or_else(|| Error::invalid(format!("trace has no level set recorded at k = {k}")))?;
        let bound = psi.psi(k)? * m0;
        let margin = bound - measured;
        rows.push(WeakTypeRow {
            k,
            measured,
            bound,
            margin,
            passed: margin >= -WEAK_TYPE_SLACK,
        });
    }
    Ok(WeakTypeReport { m0, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_case_closed_form() {
        let s = psi_profile(2.0).unwrap();
        for &w in &[1e-6, 0.01, 0.5, 1.0, 3.0, 40.0] {
            assert!((s.phi(w) - w / (1.0 + w)).abs() < 1e-14);
            // the oracle itself cancels for small w
            let exact = w - w.ln_1p();
            assert!((s.big_phi(w) - exact).abs() <= 1e-12 * exact + 1e-16 * w, "w={w}");
        }
        assert_eq!(s.phi(0.0), 0.0);
        assert_eq!(s.big_phi(0.0), 0.0);
    }

    #[test]
    fn big_phi_is_integral_of_phi() {
        for &p in &[1.3, 1.6, 2.0, 3.0, 4.5] {
            let s = psi_profile(p).unwrap();
            for &w in &[0.002, 0.3, 2.0, 9.0] {
                // composite Simpson oracle
                let n = 2000;
                let h = w / n as f64;
                let mut acc = s.phi(0.0) + s.phi(w);
                for i in 1..n {
                    acc += if i % 2 == 1 { 4.0 } else { 2.0 } * s.phi(i as f64 * h);
                }
                let simpson = acc * h / 3.0;
                assert!((s.big_phi(w) - simpson).abs() < 1e-10 * simpson.max(1e-12), "p={p} w={w}");
                assert!(s.big_phi(w) <= 0.5 * w * w);
                assert!(s.phi(w).abs() <= 1.0 / (p - 1.0));
                assert_eq!(s.phi(-w), -s.phi(w));
            }
        }
    }

    #[test]
    fn psi_is_reciprocal_and_vanishes() {
        for &p in &[1.6, 2.0, 3.0] {
            let s = psi_profile(p).unwrap();
            let mut prev = f64::INFINITY;
            for &k in &[0.01, 0.1, 1.0, 10.0, 1e3, 1e6] {
                let v = s.psi(k).unwrap();
                assert!(v < prev);
                assert!((s.big_phi(k) * v - 1.0).abs() < 1e-12);
                prev = v;
            }
            assert!(prev < 1e-5);
            let w = s.inverse_big_phi(s.big_phi(3.7)).unwrap();
            assert!((w - 3.7).abs() < 1e-9, "p={p}: {w}");
        }
        assert!(psi_profile(1.0).is_err());
        assert!(psi_profile(2.0).unwrap().psi(0.0).is_err());
    }

    #[test]
    fn interval_dual_norm_bound_dominates_pairing() {
        // ⟨f, v⟩ ≤ bound · ‖v'‖_p for a tent-shaped v
        let g = Grid::interval(0.0, 2.0, 200).unwrap();
        let p = 3.0;
        let f: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x[0]).cos()).collect();
        let bound = dual_norm_bound(&g, p, &f).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| 1.0 - (x[0] - 1.0).abs()).collect();
        let pairing: f64 = f.iter().zip(&v).zip(g.measures()).map(|((a, b), m)| a * b * m).sum();
        let grad = 2f64.powf(1.0 / p);
        assert!(pairing.abs() <= bound * grad);
    }
}
