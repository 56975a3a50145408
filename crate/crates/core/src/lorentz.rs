//! Distribution functions, Lorentz norms and the distance to bounded functions.
//!
//! A measurable function is carried as a finite list of `(value, measure)`
//! cells, i.e. as the push-forward of the underlying measure. Its distribution
//! function `λ_f(k) = |{|f| > k}|` is then a right-continuous step function
//! and every Lorentz quasi-norm
//!
//! ```text
//! ‖f‖_{p,q}^q = p ∫_0^∞ λ_f(k)^{q/p} k^{q-1} dk,      ‖f‖_{p,∞}^p = sup_k k^p λ_f(k)
//! ```
//!
//! is evaluated in closed form, interval by interval, between consecutive
//! distinct values of `|f|`. The only approximation left is the spatial
//! sampling that produced the cells.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// One piece of a [`SampledFunction`]: a value held on a set of the given measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub measure: f64,
}

/// A step function described by its values and the measures of the sets carrying them.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    cells: Vec<Cell>,
    total_measure: f64,
}

impl SampledFunction {
    /// Builds a function from `(value, measure)` pairs.
    ///
    /// Measures must be finite and nonnegative, values finite.
    pub fn new<I>(cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let cells: Vec<Cell> = cells
            .into_iter()
            .map(|(value, measure)| Cell { value, measure })
            .collect();
        for (i, c) in cells.iter().enumerate() {
            if !c.value.is_finite() {
                return Err(Error::invalid(format!("cell {i}: value {} is not finite", c.value)));
            }
            if !(c.measure.is_finite() && c.measure >= 0.0) {
                return Err(Error::invalid(format!(
                    "cell {i}: measure {} must be finite and nonnegative",
                    c.measure
                )));
            }
        }
        let total_measure = cells.iter().map(|c| c.measure).sum();
        Ok(SampledFunction {
            cells,
            total_measure,
        })
    }

    /// The characteristic function of a set of measure `set_measure` inside
    /// a space of measure `total` (`set_measure ≤ total`).
    pub fn indicator(set_measure: f64, total: f64) -> Result<Self> {
        if set_measure > total {
            return Err(Error::invalid("indicator set larger than the ambient space"));
        }
        Self::new([(1.0, set_measure), (0.0, total - set_measure)])
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// Applies `g` to every value, keeping the measures.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        SampledFunction {
            cells: self
                .cells
                .iter()
                .map(|c| Cell {
                    value: g(c.value),
                    measure: c.measure,
                })
                .collect(),
            total_measure: self.total_measure,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `‖f‖_∞` over cells of positive measure.
    pub fn sup_abs(&self) -> f64 {
        self.cells
            .iter()
            .filter(|c| c.measure > 0.0)
            .fold(0.0, |m, c| m.max(c.value.abs()))
    }

    /// Median of `|f|` with respect to the cell measures.
    pub fn median_abs(&self) -> f64 {
        let mut items: Vec<(f64, f64)> = self
            .cells
            .iter()
            .filter(|c| c.measure > 0.0)
            .map(|c| (c.value.abs(), c.measure))
            .collect();
        if items.is_empty() {
            return 0.0;
        }
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let half = 0.5 * items.iter().map(|x| x.1).sum::<f64>();
        let mut acc = 0.0;
        for (v, m) in &items {
            acc += m;
            if acc >= half {
                return *v;
            }
        }
        items.last().map(|x| x.0).unwrap_or(0.0)
    }

    /// `∫ |f|^p` as a plain cell sum.
    pub fn integral_abs_pow(&self, p: f64) -> f64 {
        self.cells
            .iter()
            .map(|c| c.measure * c.value.abs().powf(p))
            .sum()
    }

    /// Distinct positive levels of `|f|` in decreasing order, each paired with
    /// `λ_f` on the interval just below it.
    ///
    /// For levels `a_1 > a_2 > … > a_m > 0` and `a_{m+1} = 0`, the pair
    /// `(a_j, M_j)` means `λ_f(k) = M_j` for `k ∈ [a_{j+1}, a_j)`.
    fn level_profile(&self) -> Vec<(f64, f64)> {
        let mut items: Vec<(f64, f64)> = self
            .cells
            .iter()
            .filter(|c| c.measure > 0.0 && c.value != 0.0)
            .map(|c| (c.value.abs(), c.measure))
            .collect();
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut acc = 0.0;
        for (v, m) in items {
            acc += m;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = acc,
                _ => out.push((v, acc)),
            }
        }
        out
    }
}

/// Second Lorentz index: a finite `q ≥ 1` or the weak (Marcinkiewicz) case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LorentzIndex {
    Finite(f64),
    Infinite,
}

impl LorentzIndex {
    /// Hölder conjugate index.
    pub fn conjugate(self) -> LorentzIndex {
        match self {
            LorentzIndex::Infinite => LorentzIndex::Finite(1.0),
            LorentzIndex::Finite(1.0) => LorentzIndex::Infinite,
            LorentzIndex::Finite(q) => LorentzIndex::Finite(q / (q - 1.0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzExponents {
    p: f64,
    q: LorentzIndex,
}

impl LorentzExponents {
    pub fn new(p: f64, q: LorentzIndex) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("Lorentz exponent p = {p} must satisfy 1 < p < ∞")));
        }
        if let LorentzIndex::Finite(q) = q {
            if !(q >= 1.0 && q.is_finite()) {
                return Err(Error::invalid(format!("Lorentz index q = {q} must be ≥ 1")));
            }
        }
        Ok(LorentzExponents { p, q })
    }

    pub fn finite(p: f64, q: f64) -> Result<Self> {
        Self::new(p, LorentzIndex::Finite(q))
    }

    /// `L^{p,∞}`, the Marcinkiewicz space.
    pub fn weak(p: f64) -> Result<Self> {
        Self::new(p, LorentzIndex::Infinite)
    }

    /// `L^{p,p} = L^p`.
    pub fn lebesgue(p: f64) -> Result<Self> {
        Self::finite(p, p)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> LorentzIndex {
        self.q
    }

    /// The pair `(p', q')` of the Hölder-type inequality.
    pub fn conjugate(&self) -> LorentzExponents {
        LorentzExponents {
            p: self.p / (self.p - 1.0),
            q: self.q.conjugate(),
        }
    }
}

/// `λ_f(k) = |{|f| > k}|`.
pub fn distribution_function(f: &SampledFunction, k: f64) -> f64 {
    f.cells
        .iter()
        .filter(|c| c.value.abs() > k)
        .map(|c| c.measure)
        .sum()
}

/// Lorentz quasi-norm `‖f‖_{p,q}` (weak norm when `q = ∞`).
pub fn lorentz_norm(f: &SampledFunction, e: LorentzExponents) -> f64 {
    let levels = f.level_profile();
    let p = e.p;
    match e.q {
        LorentzIndex::Infinite => {
            // sup over k of k^p λ(k) is approached from below each jump.
            let sup = levels
                .iter()
                .map(|&(a, lam)| a.powf(p) * lam)
                .fold(0.0, f64::max);
            sup.powf(1.0 / p)
        }
        LorentzIndex::Finite(q) => {
            let mut acc = 0.0;
            for (j, &(a, lam)) in levels.iter().enumerate() {
                let below = levels.get(j + 1).map(|x| x.0).unwrap_or(0.0);
                acc += lam.powf(q / p) * (a.powf(q) - below.powf(q));
            }
            (p / q * acc).powf(1.0 / q)
        }
    }
}

/// Truncation at height `m`: `v ↦ sign(v) min(|v|, m)`.
pub fn truncate(f: &SampledFunction, m: f64) -> Result<SampledFunction> {
    if !(m > 0.0) {
        return Err(Error::invalid(format!("truncation height {m} must be positive")));
    }
    Ok(f.map(|v| v.signum() * v.abs().min(m)))
}

/// `f − T_m f`, the part of `f` above height `m`.
pub fn truncation_tail(f: &SampledFunction, m: f64) -> SampledFunction {
    f.map(|v| v.signum() * (v.abs() - m).max(0.0))
}

/// Result of [`dist_to_linf`].
#[derive(Clone, Debug, PartialEq)]
pub struct DistEstimate {
    /// The stabilised value of `‖f − T_m f‖_{p,∞}`.
    pub value: f64,
    /// Largest truncation height evaluated.
    pub largest_height: f64,
    /// Whether the ladder stopped on the relative-change criterion
    /// (as opposed to running past `‖f‖_∞`).
    pub stabilized: bool,
    /// `(m, ‖f − T_m f‖_{p,∞})` along the ladder.
    pub ladder: Vec<(f64, f64)>,
}

/// Relative change between ladder rungs below which the limit is accepted.
pub const DIST_STABILIZATION_TOL: f64 = 1e-3;

/// Distance of `f` to `L^∞` in `L^{p,∞}`, computed as the limit of
/// `‖f − T_m f‖_{p,∞}` along `m = m₀ 2^j` with `m₀` the median of `|f|`.
pub fn dist_to_linf(f: &SampledFunction, p: f64) -> Result<DistEstimate> {
    let e = LorentzExponents::weak(p)?;
    let sup = f.sup_abs();
    if sup == 0.0 {
        return Ok(DistEstimate {
            value: 0.0,
            largest_height: 0.0,
            stabilized: true,
            ladder: Vec::new(),
        });
    }
    let mut m = f.median_abs();
    if m == 0.0 {
        // more than half the measure sits at zero; start from the nonzero part
        let nonzero = SampledFunction::new(
            f.cells
                .iter()
                .filter(|c| c.value != 0.0)
                .map(|c| (c.value, c.measure)),
        )?;
        m = nonzero.median_abs();
    }
    let mut prev = lorentz_norm(&truncation_tail(f, m), e);
    let mut ladder = vec![(m, prev)];
    loop {
        if prev == 0.0 {
            return Ok(DistEstimate {
                value: 0.0,
                largest_height: m,
                stabilized: false,
                ladder,
            });
        }
        m *= 2.0;
        let d = lorentz_norm(&truncation_tail(f, m), e);
        assert!(
            d <= prev * (1.0 + 1e-12),
            "truncation tail norm increased along the ladder: {prev} -> {d} at m = {m}"
        );
        ladder.push((m, d));
        if d > 0.0 && (prev - d) <= DIST_STABILIZATION_TOL * prev {
            return Ok(DistEstimate {
                value: d,
                largest_height: m,
                stabilized: true,
                ladder,
            });
        }
        prev = d;
    }
}

/// Lebesgue measure of the unit ball in `R^n`, `π^{n/2} / Γ(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // Γ(n/2 + 1) by the recursion Γ(x + 1) = x Γ(x) from Γ(1) = 1 or Γ(1/2) = √π.
    let (mut x, mut gamma) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    let target = n as f64 / 2.0 + 1.0;
    while x < target - 0.25 {
        gamma *= x;
        x += 1.0;
    }
    PI.powf(n as f64 / 2.0) / gamma
}

/// Constants of the Sobolev embedding `‖u‖_{p*,q} ≤ S_{N,p} ‖∇u‖_{p,q}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevConstants {
    pub dim: usize,
    pub p: f64,
    /// `|B_1|` in `R^N`.
    pub omega: f64,
    /// `S_{N,p} = ω_N^{-1/N} p / (N − p)`.
    pub constant: f64,
}

impl SobolevConstants {
    /// Sobolev exponent `p* = Np / (N − p)`.
    pub fn critical_exponent(&self) -> f64 {
        let n = self.dim as f64;
        n * self.p / (n - self.p)
    }

    /// Largest admissible distance of the lower-order coefficient to `L^∞`
    /// for a flux with coercivity constant `alpha`: `α^{1/p} / S_{N,p}`.
    pub fn threshold(&self, alpha: f64) -> f64 {
        alpha.powf(1.0 / self.p) / self.constant
    }
}

pub fn sobolev_constant(dim: usize, p: f64) -> Result<SobolevConstants> {
    if dim < 2 {
        return Err(Error::invalid(format!("dimension {dim} must be at least 2")));
    }
    let n = dim as f64;
    if !(p > 1.0 && p < n) {
        return Err(Error::invalid(format!("Sobolev exponent p = {p} must satisfy 1 < p < {dim}")));
    }
    let omega = unit_ball_volume(dim);
    Ok(SobolevConstants {
        dim,
        p,
        omega,
        constant: omega.powf(-1.0 / n) * p / (n - p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chi_half() -> SampledFunction {
        SampledFunction::indicator(0.5, 1.0).unwrap()
    }

    #[test]
    fn indicator_distribution() {
        let f = chi_half();
        assert_eq!(distribution_function(&f, 0.5), 0.5);
        assert_eq!(distribution_function(&f, 1.0), 0.0);
        assert_eq!(distribution_function(&f, 0.0), 0.5);
    }

    #[test]
    fn empty_function_has_zero_distribution() {
        let f = SampledFunction::new(Vec::new()).unwrap();
        assert_eq!(distribution_function(&f, 0.0), 0.0);
        assert_eq!(lorentz_norm(&f, LorentzExponents::weak(2.0).unwrap()), 0.0);
    }

    #[test]
    fn indicator_norms() {
        let f = chi_half();
        for p in [1.5, 2.0, 3.0, 7.0] {
            let expect = 0.5f64.powf(1.0 / p);
            let weak = lorentz_norm(&f, LorentzExponents::weak(p).unwrap());
            let leb = lorentz_norm(&f, LorentzExponents::lebesgue(p).unwrap());
            assert!((weak - expect).abs() < 1e-14, "{weak} vs {expect}");
            assert!((leb - expect).abs() < 1e-14, "{leb} vs {expect}");
        }
    }

    #[test]
    fn lebesgue_case_matches_cell_sum() {
        let f = SampledFunction::new([(3.0, 0.1), (-1.5, 0.2), (0.25, 0.4), (-3.0, 0.05)]).unwrap();
        for p in [1.2, 2.0, 4.5] {
            let direct = f.integral_abs_pow(p).powf(1.0 / p);
            let lor = lorentz_norm(&f, LorentzExponents::lebesgue(p).unwrap());
            assert!((direct - lor).abs() < 1e-13 * direct);
        }
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(LorentzExponents::weak(1.0).is_err());
        assert!(LorentzExponents::finite(2.0, 0.5).is_err());
        assert!(SampledFunction::new([(1.0, -0.1)]).is_err());
        assert!(truncate(&chi_half(), 0.0).is_err());
    }

    #[test]
    fn truncation_clamps_values() {
        let f = SampledFunction::new([(-3.0, 1.0), (0.2, 1.0), (5.0, 1.0)]).unwrap();
        let t = truncate(&f, 1.0).unwrap();
        let vals: Vec<f64> = t.cells().iter().map(|c| c.value).collect();
        assert_eq!(vals, vec![-1.0, 0.2, 1.0]);
        let same = truncate(&f, 5.0).unwrap();
        assert_eq!(same, f);
    }

    #[test]
    fn bounded_function_has_zero_distance() {
        let f = SampledFunction::new([(2.0, 0.3), (-1.0, 0.3), (0.5, 0.4)]).unwrap();
        let d = dist_to_linf(&f, 2.0).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.largest_height >= 2.0);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-14);
    }

    #[test]
    fn sobolev_constants_examples() {
        let s = sobolev_constant(3, 2.0).unwrap();
        assert!((s.constant - 1.2407).abs() < 1e-4, "{}", s.constant);
        let s = sobolev_constant(2, 1.5).unwrap();
        assert!((s.constant - 1.6926).abs() < 1e-4, "{}", s.constant);
        let s = sobolev_constant(3, 2.0).unwrap();
        let recip = 1.0 / ((4.0 * PI / 3.0).powf(-1.0 / 3.0) * 2.0);
        assert!((s.threshold(1.0) - recip).abs() < 1e-14);
        assert!((s.threshold(1.0) - 0.8060).abs() < 1e-4);
        assert!(sobolev_constant(3, 3.0).is_err());
        assert!(sobolev_constant(3, 1.0).is_err());
        assert!(sobolev_constant(1, 0.5).is_err());
    }
}
