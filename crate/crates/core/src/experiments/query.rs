//! One-off queries behind the `lorentz` and `bound` subcommands.

use super::config::{FieldSpec, GridSpec};
use super::run::{fitted_rate_constant, FIT_SAFETY};
use crate::error::{Error, Result};
use crate::grid::Point;
use crate::gronwall::{
    closed_form_curve, comparison_check, majorant_decomposition, universal_bound, BoundCurve, BoundKind,
    ComparisonOde, Forcing, Rate,
};
use crate::lorentz::{dist_to_linf, lorentz_norm, LorentzExponents, LorentzIndex, SampledFunction};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A field from the catalog sampled on a grid, and the norm to evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzQuery {
    pub grid: GridSpec,
    pub field: FieldSpec,
    pub p: f64,
    /// Second index; omitted means the weak space `q = ∞`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LorentzAnswer {
    pub norm: f64,
    /// Distance to `L^∞` in `L^{p,∞}`.
    pub dist: f64,
    pub stabilized: bool,
    pub largest_height: f64,
    pub cells: usize,
}

impl LorentzQuery {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(origin, e.message().to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?, &path.display().to_string())
    }
}

pub fn lorentz_query(q: &LorentzQuery) -> Result<LorentzAnswer> {
    let grid = q.grid.build()?;
    let rect = matches!(q.grid, GridSpec::Rect2d { .. });
    let sample = |x: Point| q.field.eval_space(x, rect);
    let f = SampledFunction::new(grid.nodes().iter().map(|&x| sample(x)).zip(grid.measures().iter().copied()))?;
    let idx = match q.q {
        Some(v) => LorentzIndex::Finite(v),
        None => LorentzIndex::Infinite,
    };
    let norm = lorentz_norm(&f, LorentzExponents::new(q.p, idx)?);
    let d = dist_to_linf(&f, q.p)?;
    Ok(LorentzAnswer {
        norm,
        dist: d.value,
        stabilized: d.stabilized,
        largest_height: d.largest_height,
        cells: grid.len(),
    })
}

/// Comparison of a recorded trace `γ = ‖u‖²` with the decay bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundQuery {
    pub p: f64,
    pub dim: usize,
    /// Rate constant; `None` fits it to the trace.
    pub m: Option<f64>,
    pub c0: f64,
    /// Constant forcing level `g`.
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundAnswer {
    pub m: f64,
    pub fitted: bool,
    pub premise_verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sandwich_violation: Option<f64>,
    pub passed: bool,
    #[serde(skip)]
    pub curves: Vec<BoundCurve>,
}

pub fn bound_query(times: &[f64], gamma: &[f64], q: &BoundQuery) -> Result<BoundAnswer> {
    if times.len() != gamma.len() || times.len() < 2 {
        return Err(Error::invalid("trace needs at least two samples"));
    }
    let fitted = q.m.is_none();
    let m = match q.m {
        Some(m) => m,
        None => {
            FIT_SAFETY
                * fitted_rate_constant(times, gamma, q.p)
                    .ok_or_else(|| Error::invalid("trace does not decay; pass the rate constant explicitly"))?
        }
    };
    let e = if q.p > 2.0 { 0.5 * q.p } else { 1.0 };
    let psi: Rate = Arc::new(move |_, x: f64| if x > 0.0 { m * x.powf(e) } else { 0.0 });
    let g = if q.g == 0.0 { Forcing::Zero } else { Forcing::constant(q.c0 * q.g) };
    let ode = ComparisonOde::new(psi.clone(), g.clone(), gamma[0], times[0]);
    let shifted: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
    let mut curves = vec![closed_form_curve(q.p, q.dim, m, q.c0, gamma[0], &g, &shifted)?];
    if q.p > 2.0 {
        let values = shifted
            .iter()
            .map(|&t| if t > 0.0 { universal_bound(q.p, m, q.c0, &g, t) } else { Ok(f64::INFINITY) })
            .collect::<Result<Vec<_>>>()?;
        curves.push(BoundCurve {
            times: times.to_vec(),
            values,
            kind: BoundKind::Universal,
        });
    }
    for c in &mut curves {
        c.times = times.to_vec();
    }
    match comparison_check(times, gamma, &ode) {
        Ok(rep) => {
            let maj = majorant_decomposition(times, gamma, &psi, &g)?;
            curves.insert(0, rep.solution);
            Ok(BoundAnswer {
                m,
                fitted,
                premise_verified: true,
                max_violation: Some(rep.max_violation),
                sandwich_violation: Some(maj.max_violation),
                passed: rep.passed && maj.passed,
                curves,
            })
        }
        Err(Error::PremiseFailed { .. }) => Ok(BoundAnswer {
            m,
            fitted,
            premise_verified: false,
            max_violation: None,
            sandwich_violation: None,
            passed: true,
            curves,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_radius_on_the_plane() {
        let q = LorentzQuery::from_toml(
            r#"
p = 2.0
[grid]
kind = "radial_geometric"
dim = 2
cells = 10000
r_min = 1e-6
[field]
kind = "power"
exponent = -1.0
"#,
            "query",
        )
        .unwrap();
        let a = lorentz_query(&q).unwrap();
        let target = std::f64::consts::PI.sqrt();
        assert!((a.dist - target).abs() < 0.01 * target);
        assert!(a.norm >= a.dist);
    }

    #[test]
    fn exponential_trace_is_bounded() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.02).collect();
        let y: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let a = bound_query(&t, &y, &BoundQuery { p: 2.0, dim: 3, m: None, c0: 1.0, g: 0.0 }).unwrap();
        assert!(a.premise_verified && a.passed);
        assert!((a.m - 0.9 * 2.0).abs() < 0.01);
        assert_eq!(a.curves.len(), 2);
    }
}
