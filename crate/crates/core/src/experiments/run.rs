//! Single-scenario runs and their artifacts.

use super::config::{critical_mu, BoundMode, ExpectedDecay, Scenario};
use super::output::{self, fmt_num, Columns};
use crate::error::{Error, Result};
use crate::gronwall::{
    closed_form_curve, comparison_check, fit_decay, g_function, majorant_decomposition, solve_comparison,
    universal_bound, BoundCurve, ComparisonOde, DecayFit, DecayKind, Forcing, Rate,
};
use crate::psi::{data_constant, psi_profile, weak_type_check, WeakTypeReport};
use crate::solver::{solve_detailed, EnergyTrace, Record, Trajectory, ENERGY_TOL};
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// Heights used by the level-set check when the scenario lists none.
pub const DEFAULT_LEVELS: [f64; 4] = [0.1, 0.5, 1.0, 5.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, value: Option<f64>, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            value,
            detail,
        }
    }

    fn skipped(name: &str, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            status: Status::Skipped,
            value: None,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Parameters {
    pub p: f64,
    pub dim: usize,
    pub cells: usize,
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_over_critical: Option<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub sup_l2_sq: f64,
    pub final_l2_sq: f64,
    pub grad_p_integral: f64,
    pub energy: f64,
    pub max_energy_defect: f64,
    pub newton_iterations: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSummary {
    pub mode: BoundMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    pub c0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub seed: u64,
    pub parameters: Parameters,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<DecayFit>,
    pub bounds: BoundSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_type: Option<WeakTypeReport>,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub trace: EnergyTrace,
    pub bounds: Vec<BoundCurve>,
    pub trajectory: Option<Trajectory>,
}

/// `ψ₁(x) = x^{p/2}` for `p > 2`, `x` otherwise (zero for `x ≤ 0`).
fn unit_rate(p: f64) -> Rate {
    if p > 2.0 {
        Arc::new(move |_, x: f64| if x > 0.0 { x.powf(0.5 * p) } else { 0.0 })
    } else {
        Arc::new(|_, x: f64| x.max(0.0))
    }
}

/// Largest `M` with `γ(tᵢ) − γ(tᵢ₊₁) ≥ M ∫ψ₁(γ)` on every mesh interval
/// (trapezoid rule), or `None` if the trace never decays.
pub fn fitted_rate_constant(times: &[f64], gamma: &[f64], p: f64) -> Option<f64> {
    let psi1 = unit_rate(p);
    let mut m = f64::INFINITY;
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        let q = 0.5 * h * (psi1(times[i - 1], gamma[i - 1]) + psi1(times[i], gamma[i]));
        if q > 0.0 {
            m = m.min((gamma[i - 1] - gamma[i]) / q);
        }
    }
    (m.is_finite() && m > 0.0).then_some(m)
}

/// Fraction of the fitted constant used for comparison bounds, so that the
/// premise holds with a margin.
pub const FIT_SAFETY: f64 = 0.9;

pub fn run(scenario: &Scenario, keep_states: bool) -> Result<RunOutcome> {
    scenario.validate()?;
    let spec = scenario.problem_spec()?;
    let p = scenario.problem.p;
    let dim = scenario.grid.dimension();
    let dt = scenario.time.dt;
    let mut levels = scenario.output.level_sets.clone();
    if scenario.checks.weak_type {
        for k in DEFAULT_LEVELS {
            if !levels.contains(&k) {
                levels.push(k);
            }
        }
    }
    let record = Record {
        level_sets: levels.clone(),
        keep_states,
        check_energy: false,
    };
    let (trace, trajectory) = solve_detailed(&spec, dt, &record, None)?;
    let mu = scenario.mu()?;

    let mut checks = Vec::new();
    if scenario.checks.energy_identity {
        checks.push(CheckResult::new(
            "energy_identity",
            trace.max_energy_defect <= ENERGY_TOL,
            Some(trace.max_energy_defect),
            format!("max relative defect {:e} (tolerance {ENERGY_TOL:e})", trace.max_energy_defect),
        ));
    }
    if scenario.checks.bounded {
        let finite = trace
            .l2_sq
            .iter()
            .chain(&trace.grad_p)
            .chain(&trace.flux_work)
            .all(|v| v.is_finite());
        let e = trace.energy();
        checks.push(CheckResult::new(
            "bounded_energy",
            finite && e.is_finite(),
            Some(e),
            format!("sup l2_sq + ∫grad_p = {e:e}"),
        ));
    }

    let mut weak = None;
    if scenario.checks.weak_type {
        let m0 = data_constant(
            &spec.grid,
            spec.flux.as_ref(),
            &spec.u0,
            spec.source.as_ref(),
            spec.t_end,
            dt,
        )?;
        let rep = weak_type_check(&trace, &psi_profile(p)?, m0.total(), &levels)?;
        checks.push(CheckResult::new(
            "weak_type",
            rep.passed(),
            Some(rep.worst_margin()),
            format!("M0 = {:e}, worst margin {:e}", m0.total(), rep.worst_margin()),
        ));
        weak = Some(rep);
    }

    let mut fit = None;
    if let Some(d) = &scenario.checks.decay {
        match fit_decay(&trace, (d.window[0], d.window[1])) {
            Ok(f) => {
                let (kind_ok, measured, line) = match d.expect {
                    ExpectedDecay::Power => (f.kind == DecayKind::Power, f.power.slope, f.power),
                    ExpectedDecay::Exponential => (f.kind == DecayKind::Exponential, -f.exponential.slope, f.exponential),
                };
                let value_ok = d.value.is_none_or(|v| (measured - v).abs() <= d.rel_tol * v.abs());
                let r2_ok = d.min_r_squared.is_none_or(|r| line.r_squared > r);
                checks.push(CheckResult::new(
                    "decay",
                    kind_ok && value_ok && r2_ok,
                    Some(measured),
                    format!(
                        "fitted {:?} (power slope {:.6}, R² {:.6}; exp rate {:.6}, R² {:.6})",
                        f.kind,
                        f.power.slope,
                        f.power.r_squared,
                        -f.exponential.slope,
                        f.exponential.r_squared
                    ),
                ));
                fit = Some(f);
            }
            Err(e) => checks.push(CheckResult::new("decay", false, None, e.to_string())),
        }
    }

    // comparison bounds
    let gamma = &trace.l2_sq;
    let times = &trace.times;
    let (m, c0) = match scenario.bounds.mode {
        BoundMode::Fitted => (fitted_rate_constant(times, gamma, p).map(|m| FIT_SAFETY * m), 1.0),
        BoundMode::Conservative => (scenario.bounds.m, scenario.bounds.c0.unwrap_or(1.0)),
    };
    let g = match g_function(&spec, dt)? {
        Forcing::Sampled { times, values } => {
            Forcing::sampled(times, values.into_iter().map(|v| c0 * v).collect())?
        }
        other => other,
    };
    let mut bounds = Vec::new();
    if let Some(m) = m {
        let psi: Rate = {
            let psi1 = unit_rate(p);
            Arc::new(move |t, x| m * psi1(t, x))
        };
        let ode = ComparisonOde::new(psi.clone(), g.clone(), gamma[0], 0.0);
        bounds.push(solve_comparison(&ode, times)?);
        bounds.push(closed_form_curve(p, dim, m, c0, gamma[0], &g, times)?);
        if p > 2.0 {
            let values = times
                .iter()
                .map(|&t| if t > 0.0 { universal_bound(p, m, c0, &g, t) } else { Ok(f64::INFINITY) })
                .collect::<Result<Vec<_>>>()?;
            bounds.push(BoundCurve {
                times: times.clone(),
                values,
                kind: crate::gronwall::BoundKind::Universal,
            });
        }
        if scenario.checks.comparison {
            match comparison_check(times, gamma, &ode) {
                Ok(rep) => checks.push(CheckResult::new(
                    "comparison",
                    rep.passed,
                    Some(rep.max_violation),
                    format!("max γ − x = {:e}, premise excess {:e}", rep.max_violation, rep.premise_excess),
                )),
                Err(Error::PremiseFailed { t1, t2, excess }) => checks.push(CheckResult::skipped(
                    "comparison",
                    format!("premise fails on [{t1}, {t2}] by {excess:e}; conclusion not asserted"),
                )),
                Err(e) => return Err(e),
            }
            let maj = majorant_decomposition(times, gamma, &psi, &g)?;
            checks.push(CheckResult::new(
                "majorant",
                maj.passed,
                Some(maj.max_violation),
                format!("max violation of γ ≤ x ≤ z + ∫g: {:e}", maj.max_violation),
            ));
        }
    } else if scenario.checks.comparison && gamma.iter().all(|&v| v == 0.0) {
        checks.push(CheckResult::new(
            "comparison",
            true,
            Some(0.0),
            "trace is identically zero; γ ≤ x for every nonnegative x".into(),
        ));
    } else if scenario.checks.comparison {
        checks.push(CheckResult::skipped("comparison", "trace does not decay; no rate constant".into()));
    }

    let mu_over_critical = if dim >= 2 { critical_mu(dim, p).ok().map(|c| mu / c) } else { None };
    let report = Report {
        name: scenario.name.clone(),
        seed: scenario.seed,
        parameters: Parameters {
            p,
            dim,
            cells: spec.grid.len(),
            mu,
            mu_over_critical,
            dt,
            t_end: scenario.time.t_end,
            lambda: scenario.problem.lambda,
            truncation: scenario.problem.truncation,
        },
        summary: Summary {
            sup_l2_sq: trace.sup_l2_sq(),
            final_l2_sq: *trace.l2_sq.last().unwrap_or(&0.0),
            grad_p_integral: trace.grad_p_integral(),
            energy: trace.energy(),
            max_energy_defect: trace.max_energy_defect,
            newton_iterations: trace.newton_iterations,
            steps: trace.len().saturating_sub(1),
        },
        fit,
        bounds: BoundSummary {
            mode: scenario.bounds.mode,
            m,
            c0,
        },
        weak_type: weak,
        all_passed: checks.iter().all(|c| c.status != Status::Fail),
        checks,
    };
    Ok(RunOutcome {
        report,
        trace,
        bounds,
        trajectory,
    })
}

pub fn bounds_csv(trace: &EnergyTrace, bounds: &[BoundCurve]) -> String {
    curves_csv(&trace.times, &trace.l2_sq, bounds)
}

/// Table with columns `t, l2_sq` and one column per curve, named by its kind.
pub fn curves_csv(times: &[f64], gamma: &[f64], curves: &[BoundCurve]) -> String {
    let mut header = vec!["t".to_string(), "l2_sq".to_string()];
    for b in curves {
        header.push(serde_json::to_value(b.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default());
    }
    let rows: Vec<Vec<String>> = (0..times.len())
        .map(|i| {
            let mut r = vec![fmt_num(times[i]), fmt_num(gamma[i])];
            r.extend(curves.iter().map(|b| fmt_num(b.values[i])));
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    output::csv_table(&h, &rows)
}

/// Writes `trace.csv`, `bounds.csv`, `report.json` (and `trace.dat` when
/// requested) into `dir`.
pub fn write_artifacts(dir: &Path, scenario: &Scenario, out: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    output::write(&dir.join("trace.csv"), &output::trace_csv(&out.trace))?;
    output::write(&dir.join("bounds.csv"), &bounds_csv(&out.trace, &out.bounds))?;
    output::write(&dir.join("report.json"), &output::to_json_pretty(&out.report)?)?;
    if scenario.output.gnuplot {
        output::write(&dir.join("trace.dat"), &output::emit_gnuplot_data(&Columns::from_trace(&out.trace)))?;
    }
    Ok(())
}

/// [`run`] followed by [`write_artifacts`].
pub fn run_to_dir(scenario: &Scenario, dir: &Path) -> Result<RunOutcome> {
    let out = run(scenario, false)?;
    write_artifacts(dir, scenario, &out)?;
    Ok(out)
}
