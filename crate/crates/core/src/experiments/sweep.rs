//! Parameter sweeps over one axis.

use super::config::{Scenario, SweepAxis};
use super::output::{self, fmt_num};
use super::run::{run, write_artifacts, RunOutcome};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub mu: f64,
    /// μ over the critical value (grids of dimension ≥ 2 with `p < N`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_over_critical: Option<f64>,
    pub sup_l2_sq: f64,
    pub final_l2_sq: f64,
    pub energy: f64,
    pub max_energy_defect: f64,
    pub newton_iterations: usize,
    pub all_passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_constant: Option<f64>,
    /// `‖u − u_prev‖_{L^p(Q_T)}` to the previous row (truncation sweeps).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_to_previous: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub outcomes: Vec<Option<RunOutcome>>,
}

fn row_from(axis: SweepAxis, value: f64, r: &Result<RunOutcome>) -> SweepRow {
    match r {
        Ok(o) => {
            let rep = &o.report;
            SweepRow {
                axis,
                value,
                ok: true,
                error: None,
                mu: rep.parameters.mu,
                mu_over_critical: rep.parameters.mu_over_critical,
                sup_l2_sq: rep.summary.sup_l2_sq,
                final_l2_sq: rep.summary.final_l2_sq,
                energy: rep.summary.energy,
                max_energy_defect: rep.summary.max_energy_defect,
                newton_iterations: rep.summary.newton_iterations,
                all_passed: rep.all_passed,
                fit_kind: rep.fit.as_ref().map(|f| format!("{:?}", f.kind).to_lowercase()),
                fit_value: rep.fit.as_ref().map(|f| f.value),
                rate_constant: rep.bounds.m,
                distance_to_previous: None,
            }
        }
        Err(e) => SweepRow {
            axis,
            value,
            ok: false,
            error: Some(e.to_string()),
            mu: f64::NAN,
            mu_over_critical: None,
            sup_l2_sq: f64::NAN,
            final_l2_sq: f64::NAN,
            energy: f64::NAN,
            max_energy_defect: f64::NAN,
            newton_iterations: 0,
            all_passed: false,
            fit_kind: None,
            fit_value: None,
            rate_constant: None,
            distance_to_previous: None,
        },
    }
}

/// Runs every sweep point of `scenario` on `jobs` threads (`None`: the
/// scenario's own setting, else all cores). Failed points become error rows;
/// rows follow the (validated, increasing) axis values.
pub fn sweep(scenario: &Scenario, jobs: Option<usize>) -> Result<SweepResult> {
    let sw = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "scenario has no [sweep] table"))?;
    scenario.validate()?;
    let axis = sw.axis;
    let values = &sw.values;
    let keep = axis == SweepAxis::Truncation;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.or(sw.jobs).unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| {
        values
            .par_iter()
            .map(|&v| scenario.with_axis(axis, v).and_then(|s| run(&s, keep)))
            .collect()
    });
    let mut rows: Vec<SweepRow> = values.iter().zip(&results).map(|(&v, r)| row_from(axis, v, r)).collect();
    if keep {
        let p = scenario.problem.p;
        for i in 1..results.len() {
            if let (Ok(a), Ok(b)) = (&results[i - 1], &results[i]) {
                if let (Some(ta), Some(tb)) = (&a.trajectory, &b.trajectory) {
                    rows[i].distance_to_previous = Some(tb.lp_distance(ta, p)?);
                }
            }
        }
    }
    Ok(SweepResult {
        rows,
        outcomes: results.into_iter().map(Result::ok).collect(),
    })
}

pub fn results_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.value),
                r.ok.to_string(),
                fmt_num(r.mu),
                opt(r.mu_over_critical),
                fmt_num(r.sup_l2_sq),
                fmt_num(r.final_l2_sq),
                fmt_num(r.energy),
                fmt_num(r.max_energy_defect),
                r.newton_iterations.to_string(),
                r.all_passed.to_string(),
                r.fit_kind.clone().unwrap_or_default(),
                opt(r.fit_value),
                opt(r.rate_constant),
                opt(r.distance_to_previous),
                r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            ]
        })
        .collect();
    let axis = rows.first().map_or("value", |r| r.axis.name());
    output::csv_table(
        &[
            axis,
            "ok",
            "mu",
            "mu_over_critical",
            "sup_l2_sq",
            "final_l2_sq",
            "energy",
            "max_energy_defect",
            "newton_iterations",
            "all_passed",
            "fit_kind",
            "fit_value",
            "rate_constant",
            "distance_to_previous",
            "error",
        ],
        &table,
    )
}

pub fn results_jsonl(rows: &[SweepRow]) -> Result<String> {
    rows.iter().map(output::to_json_line).collect()
}

/// Writes `results.csv`, `results.jsonl` and one artifact directory per
/// successful point (`point-000`, …) under `dir`.
pub fn write_sweep(dir: &Path, scenario: &Scenario, res: &SweepResult) -> Result<()> {
    output::write(&dir.join("results.csv"), &results_csv(&res.rows))?;
    output::write(&dir.join("results.jsonl"), &results_jsonl(&res.rows)?)?;
    for (i, (row, out)) in res.rows.iter().zip(&res.outcomes).enumerate() {
        if let Some(out) = out {
            let s = scenario.with_axis(row.axis, row.value)?;
            write_artifacts(&dir.join(format!("point-{i:03}")), &s, out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "sweep"
[grid]
kind = "interval"
cells = 40
[problem]
p = 2.0
u0 = { kind = "sinusoid" }
[time]
dt = 0.02
t_end = 0.2
[sweep]
axis = "p"
values = [0.5, 1.5, 2.0, 2.5]
"#;

    #[test]
    fn failed_points_become_error_rows() {
        let s = Scenario::from_toml(BASE, "t").unwrap();
        let r = sweep(&s, Some(2)).unwrap();
        let v: Vec<f64> = r.rows.iter().map(|r| r.value).collect();
        assert_eq!(v, vec![0.5, 1.5, 2.0, 2.5]);
        assert!(!r.rows[0].ok && r.rows[0].error.is_some());
        assert!(r.rows[1..].iter().all(|r| r.ok));
        let csv = results_csv(&r.rows);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("p,ok,"));
    }
}
