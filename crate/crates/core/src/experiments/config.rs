//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "heat-baseline"
//! seed = 1
//!
//! [grid]
//! kind = "interval"          # interval | radial | radial_geometric | rect2d
//! cells = 400
//! lower = 0.0
//! upper = 3.141592653589793
//!
//! [problem]
//! p = 2.0
//! mu = 0.0                   # or mu_ratio = 0.5 (fraction of the critical μ)
//! u0 = { kind = "sinusoid", frequency = 1.0 }
//!
//! [time]
//! dt = 1e-3
//! t_end = 1.0
//!
//! [checks]
//! decay = { expect = "exponential", value = 2.0, rel_tol = 0.02, window = [0.1, 1.0] }
//! ```
//!
//! Field-valued inputs (`u0`, `b0`, `f`, `h`) come from a small catalog, see
//! [`FieldSpec`]. Spatial fields are constant in time; `h` depends on time only.

use crate::error::{Error, Result};
use crate::flux::{Flux, ModelFlux, SpaceTimeField, TimeProfile, Truncated};
use crate::grid::{Grid, GridFunction, Point};
use crate::lorentz::unit_ball_volume;
use crate::solver::ProblemSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub problem: ProblemParams,
    pub time: TimeParams,
    #[serde(default)]
    pub output: OutputParams,
    #[serde(default)]
    pub checks: CheckParams,
    #[serde(default)]
    pub bounds: BoundParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Interval {
        cells: usize,
        #[serde(default)]
        lower: f64,
        #[serde(default = "default_pi")]
        upper: f64,
    },
    Radial {
        dim: usize,
        cells: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    RadialGeometric {
        dim: usize,
        cells: usize,
        #[serde(default = "one")]
        radius: f64,
        r_min: f64,
    },
    Rect2d {
        nx: usize,
        ny: usize,
        #[serde(default = "square_lower")]
        lower: [f64; 2],
        #[serde(default = "square_upper")]
        upper: [f64; 2],
    },
}

fn default_pi() -> f64 {
    std::f64::consts::PI
}
fn one() -> f64 {
    1.0
}
fn square_lower() -> [f64; 2] {
    [-0.5, -0.5]
}
fn square_upper() -> [f64; 2] {
    [0.5, 0.5]
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match *self {
            GridSpec::Interval { cells, lower, upper } => Grid::interval(lower, upper, cells),
            GridSpec::Radial { dim, cells, radius } => Grid::radial(dim, radius, cells),
            GridSpec::RadialGeometric { dim, cells, radius, r_min } => Grid::radial_geometric(dim, radius, cells, r_min),
            GridSpec::Rect2d { nx, ny, lower, upper } => Grid::rect2d(lower, upper, nx, ny),
        }
    }

    pub fn dimension(&self) -> usize {
        match *self {
            GridSpec::Interval { .. } => 1,
            GridSpec::Radial { dim, .. } | GridSpec::RadialGeometric { dim, .. } => dim,
            GridSpec::Rect2d { .. } => 2,
        }
    }

    /// Sets the resolution (cells per side on rectangles).
    pub fn with_cells(&self, n: usize) -> GridSpec {
        let mut g = self.clone();
        match &mut g {
            GridSpec::Interval { cells, .. }
            | GridSpec::Radial { cells, .. }
            | GridSpec::RadialGeometric { cells, .. } => *cells = n,
            GridSpec::Rect2d { nx, ny, .. } => {
                *nx = n;
                *ny = n;
            }
        }
        g
    }
}

/// Catalog of field-valued inputs. In space, `s` is the coordinate on
/// intervals and `|x|` on radial grids; on rectangles sinusoids are products
/// over both coordinates. In time, `s = t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · sin(frequency · s + phase)`.
    Sinusoid {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude · (s + shift)^exponent`.
    Power {
        #[serde(default = "one")]
        amplitude: f64,
        exponent: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `inside` for `s < threshold`, `outside` otherwise.
    Step {
        threshold: f64,
        inside: f64,
        #[serde(default)]
        outside: f64,
    },
}

impl FieldSpec {
    pub fn zero() -> Self {
        FieldSpec::Constant { value: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            FieldSpec::Constant { value } => value == 0.0,
            FieldSpec::Sinusoid { amplitude, offset, .. } => amplitude == 0.0 && offset == 0.0,
            FieldSpec::Power { amplitude, .. } => amplitude == 0.0,
            FieldSpec::Step { inside, outside, .. } => inside == 0.0 && outside == 0.0,
        }
    }

    fn scalar(&self, s: f64) -> f64 {
        match *self {
            FieldSpec::Constant { value } => value,
            FieldSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => offset + amplitude * (frequency * s + phase).sin(),
            FieldSpec::Power { amplitude, exponent, shift } => amplitude * (s + shift).powf(exponent),
            FieldSpec::Step { threshold, inside, outside } => {
                if s < threshold {
                    inside
                } else {
                    outside
                }
            }
        }
    }

    pub fn eval_space(&self, x: Point, rect: bool) -> f64 {
        match *self {
            FieldSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } if rect => offset + amplitude * (frequency * x[0] + phase).sin() * (frequency * x[1] + phase).sin(),
            _ => self.scalar(if rect { x[0].hypot(x[1]) } else { x[0].abs() }),
        }
    }

    pub fn eval_time(&self, t: f64) -> f64 {
        self.scalar(t)
    }

    /// `sup |field|` over the sample points.
    fn sup_over(&self, pts: &[Point], rect: bool) -> f64 {
        pts.iter().map(|&x| self.eval_space(x, rect).abs()).fold(0.0, f64::max)
    }

    fn validate(&self, path: &str) -> Result<()> {
        let ok = match *self {
            FieldSpec::Constant { value } => value.is_finite(),
            FieldSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => [amplitude, frequency, phase, offset].iter().all(|v| v.is_finite()),
            FieldSpec::Power { amplitude, exponent, shift } => {
                [amplitude, exponent, shift].iter().all(|v| v.is_finite()) && shift >= 0.0
            }
            FieldSpec::Step { threshold, inside, outside } => [threshold, inside, outside].iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(path, "field parameters must be finite (power shift ≥ 0)"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// μ as a fraction of [`critical_mu`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_ratio: Option<f64>,
    #[serde(default = "unit_field")]
    pub h: FieldSpec,
    #[serde(default = "FieldSpec::zero")]
    pub b0: FieldSpec,
    #[serde(default = "FieldSpec::zero")]
    pub f: FieldSpec,
    pub u0: FieldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(default = "one")]
    pub lambda: f64,
}

fn unit_field() -> FieldSpec {
    FieldSpec::Constant { value: 1.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeParams {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputParams {
    #[serde(default)]
    pub level_sets: Vec<f64>,
    #[serde(default = "yes")]
    pub gnuplot: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedDecay {
    Power,
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayCheck {
    pub expect: ExpectedDecay,
    /// Expected log-log slope (power) or rate (exponential); omitted means
    /// only the R² threshold is checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_r_squared: Option<f64>,
    pub window: [f64; 2],
}

fn default_rel_tol() -> f64 {
    0.1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckParams {
    #[serde(default = "yes")]
    pub energy_identity: bool,
    #[serde(default = "yes")]
    pub bounded: bool,
    #[serde(default)]
    pub weak_type: bool,
    #[serde(default)]
    pub comparison: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayCheck>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// Constants fitted to the trace: `M` from the observed decay, `C₀ = 1`.
    #[default]
    Fitted,
    /// User-supplied `M` and `C₀`.
    Conservative,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    #[serde(default)]
    pub mode: BoundMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Mu,
    MuRatio,
    P,
    Truncation,
    Dt,
    Cells,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Mu => "mu",
            SweepAxis::MuRatio => "mu_ratio",
            SweepAxis::P => "p",
            SweepAxis::Truncation => "truncation",
            SweepAxis::Dt => "dt",
            SweepAxis::Cells => "cells",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

/// `α^{1/p}((N−p)/p)^{p−1}`; at `p = 2` this is the μ for which the
/// `L^{N,∞}` distance of `μ/|x|` to `L^∞` equals `α^{1/2}/S_{N,2}`.
pub fn critical_mu(dim: usize, p: f64) -> Result<f64> {
    let n = dim as f64;
    if dim < 2 || !(p > 1.0 && p < n) {
        return Err(Error::invalid(format!("critical μ needs dim ≥ 2 and 1 < p < dim (dim = {dim}, p = {p})")));
    }
    let alpha = ModelFlux::p_laplacian(p).alpha();
    Ok(alpha.powf(1.0 / p) * ((n - p) / p).powf(p - 1.0))
}

/// `dist_{L^{N,∞}}(μ/|x|, L^∞) = μ ω_N^{1/N}`.
pub fn drift_distance(dim: usize, mu: f64) -> f64 {
    mu * unit_ball_volume(dim).powf(1.0 / dim as f64)
}

impl Scenario {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|r| format!("{origin}:byte {}", r.start))
                .unwrap_or_else(|| origin.to_string());
            Error::config(path, e.message().to_string())
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// Range checks with field paths, before any run.
    pub fn validate(&self) -> Result<()> {
        let p = self.problem.p;
        let n = self.grid.dimension();
        if !p.is_finite() {
            return Err(Error::config("problem.p", "must be finite"));
        }
        if n >= 2 {
            let nf = n as f64;
            if !(p > 2.0 * nf / (nf + 2.0) && p < nf) {
                return Err(Error::config(
                    "problem.p",
                    format!("p = {p} outside ({}, {nf}) for a {n}-dimensional domain", 2.0 * nf / (nf + 2.0)),
                ));
            }
        } else if !(p > 1.0) {
            return Err(Error::config("problem.p", "must exceed 1"));
        }
        match (self.problem.mu, self.problem.mu_ratio) {
            (Some(_), Some(_)) => return Err(Error::config("problem.mu", "give either mu or mu_ratio, not both")),
            (Some(mu), None) if !(mu >= 0.0 && mu.is_finite()) => {
                return Err(Error::config("problem.mu", "must be finite and ≥ 0"))
            }
            (None, Some(r)) if !(r >= 0.0 && r.is_finite()) => {
                return Err(Error::config("problem.mu_ratio", "must be finite and ≥ 0"))
            }
            (None, Some(_)) if n < 2 => {
                return Err(Error::config("problem.mu_ratio", "needs a domain of dimension ≥ 2"))
            }
            _ => {}
        }
        for (path, f) in [
            ("problem.h", &self.problem.h),
            ("problem.b0", &self.problem.b0),
            ("problem.f", &self.problem.f),
            ("problem.u0", &self.problem.u0),
        ] {
            f.validate(path)?;
        }
        if let Some(n) = self.problem.truncation {
            if !(n > 0.0) {
                return Err(Error::config("problem.truncation", "must be positive"));
            }
        }
        if !(self.problem.lambda > 0.0 && self.problem.lambda <= 1.0) {
            return Err(Error::config("problem.lambda", "must lie in (0, 1]"));
        }
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return Err(Error::config("time.dt", "must be positive"));
        }
        if !(self.time.t_end > 0.0 && self.time.t_end.is_finite()) {
            return Err(Error::config("time.t_end", "must be positive"));
        }
        if self.output.level_sets.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::config("output.level_sets", "heights must be positive"));
        }
        if let Some(d) = &self.checks.decay {
            if !(d.window[0] < d.window[1]) {
                return Err(Error::config("checks.decay.window", "must be an increasing pair"));
            }
            if !(d.rel_tol > 0.0) {
                return Err(Error::config("checks.decay.rel_tol", "must be positive"));
            }
        }
        if self.bounds.mode == BoundMode::Conservative {
            match (self.bounds.m, self.bounds.c0) {
                (Some(m), Some(c)) if m > 0.0 && c >= 0.0 => {}
                _ => return Err(Error::config("bounds", "conservative mode needs m > 0 and c0 ≥ 0")),
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("sweep.values", "must be finite"));
            }
            if s.values.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::config("sweep.values", "must be sorted increasingly"));
            }
            if s.jobs == Some(0) {
                return Err(Error::config("sweep.jobs", "must be at least 1"));
            }
        }
        self.grid
            .build()
            .map_err(|e| Error::config("grid", e.to_string()))?;
        Ok(())
    }

    /// The effective μ (resolving `mu_ratio`).
    pub fn mu(&self) -> Result<f64> {
        match (self.problem.mu, self.problem.mu_ratio) {
            (Some(mu), _) => Ok(mu),
            (None, Some(r)) => Ok(r * critical_mu(self.grid.dimension(), self.problem.p)?),
            (None, None) => Ok(0.0),
        }
    }

    /// Builds grid, flux and initial datum.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let grid = Arc::new(self.grid.build()?);
        let rect = matches!(self.grid, GridSpec::Rect2d { .. });
        let pr = &self.problem;
        let u0spec = pr.u0.clone();
        let u0 = GridFunction::from_fn(grid.clone(), move |x| u0spec.eval_space(x, rect));
        let h = pr.h.clone();
        let h: TimeProfile = Arc::new(move |t| h.eval_time(t));
        let mut flux = ModelFlux::new(pr.p, self.mu()?).with_h(h);
        if !pr.b0.is_zero() {
            let b0 = pr.b0.clone();
            let b0: SpaceTimeField = Arc::new(move |x, _| b0.eval_space(x, rect));
            flux = flux.with_b0(b0);
        }
        let flux: Arc<dyn Flux> = match pr.truncation {
            Some(n) => Arc::new(Truncated::new(flux, n)),
            None => Arc::new(flux),
        };
        let mut spec = ProblemSpec::new(flux, u0, self.time.t_end)?.with_lambda(pr.lambda)?;
        if !pr.f.is_zero() {
            let f = pr.f.clone();
            spec = spec.with_source(Arc::new(move |x, _| f.eval_space(x, rect)));
        }
        Ok(spec)
    }

    /// `sup_x |b₀|` over the grid nodes, `μ` excluded.
    pub fn b0_sup(&self) -> Result<f64> {
        let grid = self.grid.build()?;
        Ok(self.problem.b0.sup_over(grid.nodes(), matches!(self.grid, GridSpec::Rect2d { .. })))
    }

    /// Copy with one sweep parameter set.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        s.sweep = None;
        match axis {
            SweepAxis::Mu => {
                s.problem.mu = Some(value);
                s.problem.mu_ratio = None;
            }
            SweepAxis::MuRatio => {
                s.problem.mu = None;
                s.problem.mu_ratio = Some(value);
            }
            SweepAxis::P => s.problem.p = value,
            SweepAxis::Truncation => s.problem.truncation = Some(value),
            SweepAxis::Dt => s.time.dt = value,
            SweepAxis::Cells => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::config("sweep.values", "cell counts must be positive integers"));
                }
                s.grid = s.grid.with_cells(value as usize);
            }
        }
        s.name = format!("{}-{}={}", self.name, axis.name(), value);
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = r#"
name = "heat"
[grid]
kind = "interval"
cells = 100
[problem]
p = 2.0
u0 = { kind = "sinusoid" }
[time]
dt = 0.01
t_end = 0.5
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::from_toml(HEAT, "heat.toml").unwrap();
        assert_eq!(s.grid, GridSpec::Interval { cells: 100, lower: 0.0, upper: std::f64::consts::PI });
        let again = Scenario::from_toml(&s.to_toml(), "again").unwrap();
        assert_eq!(s, again);
        let spec = s.problem_spec().unwrap();
        assert!((spec.u0.values()[50] - (spec.grid.nodes()[50][0]).sin()).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = HEAT.replace("p = 2.0", "p = 0.5");
        match Scenario::from_toml(&bad, "x") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "problem.p"),
            other => panic!("{other:?}"),
        }
        let typo = HEAT.replace("dt = 0.01", "dtt = 0.01");
        assert!(matches!(Scenario::from_toml(&typo, "x"), Err(Error::Config { .. })));
        let radial = HEAT.replace("kind = \"interval\"\ncells = 100", "kind = \"radial\"\ndim = 3\ncells = 10");
        let s = Scenario::from_toml(&radial.replace("p = 2.0", "p = 3.5"), "x");
        assert!(matches!(s, Err(Error::Config { path, .. }) if path == "problem.p"));
    }

    #[test]
    fn critical_mu_at_quadratic_growth_matches_lorentz_threshold() {
        for dim in [3, 4, 5] {
            let mu = critical_mu(dim, 2.0).unwrap();
            let s = crate::lorentz::sobolev_constant(dim, 2.0).unwrap();
            let alpha = ModelFlux::p_laplacian(2.0).alpha();
            assert!((drift_distance(dim, mu) - s.threshold(alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn axis_overrides() {
        let s = Scenario::from_toml(HEAT, "heat.toml").unwrap();
        let t = s.with_axis(SweepAxis::Cells, 40.0).unwrap();
        assert_eq!(t.grid.build().unwrap().len(), 40);
        assert!(s.with_axis(SweepAxis::Cells, 2.5).is_err());
        assert!(s.with_axis(SweepAxis::MuRatio, 0.5).is_err());
    }
}
