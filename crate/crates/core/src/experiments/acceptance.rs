//! The acceptance suite: eleven numbered criteria, each a self-contained
//! computation with a pass/fail verdict and a one-line detail.

use super::config::{critical_mu, Scenario};
use super::run::{fitted_rate_constant, run, Status, FIT_SAFETY};
use crate::error::{Error, Result};
use crate::flux::{Flux, ModelFlux, SpaceTimeField, Truncated};
use crate::grid::{grad_p_integral, l2_norm_sq, to_sampled, Grid, GridFunction};
use crate::gronwall::{
    closed_form_bound, comparison_check, fit_decay, majorant_decomposition, solve_comparison, ComparisonOde,
    DecayKind, Forcing, Rate,
};
use crate::lorentz::{
    dist_to_linf, lorentz_norm, sobolev_constant, LorentzExponents, LorentzIndex, SampledFunction,
};
use crate::solver::{picard_fixed_point, solve, truncated_scheme, EnergyTrace, ProblemSpec, Record};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

pub const CRITERIA: usize = 11;

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} {:>8.3}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

const NAMES: [&str; CRITERIA] = [
    "distance formula",
    "sobolev constant",
    "lorentz holder",
    "heat oracle",
    "power decay exponent",
    "exponential decay regime",
    "gronwall closed forms",
    "comparison sandwich",
    "weak-type estimate",
    "fixed-point scheme",
    "truncation scheme",
];

pub fn name(id: usize) -> Option<&'static str> {
    NAMES.get(id.wrapping_sub(1)).copied()
}

type Verdict = Result<(bool, String)>;

/// Runs criterion `id` (1-based) with the given seed for its random parts.
pub fn run_criterion(id: usize, seed: u64) -> Result<Outcome> {
    let name = name(id).ok_or_else(|| Error::invalid(format!("no acceptance criterion {id}")))?;
    let start = Instant::now();
    let verdict: Verdict = match id {
        1 => distance_formula(),
        2 => sobolev(seed),
        3 => holder(seed),
        4 => heat_oracle(),
        5 => power_decay(),
        6 => exponential_decay(),
        7 => gronwall_closed_forms(),
        8 => comparison_sandwich(),
        9 => weak_type(),
        10 => fixed_point(),
        11 => truncation(),
        _ => unreachable!(),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (passed, detail) = verdict.unwrap_or_else(|e| (false, format!("error: {e}")));
    Ok(Outcome {
        id,
        name,
        passed,
        detail,
        seconds,
    })
}

pub fn run_all(seed: u64) -> Vec<Outcome> {
    (1..=CRITERIA).map(|id| run_criterion(id, seed).expect("valid id")).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn distance_formula() -> Verdict {
    let start = Instant::now();
    let g = Grid::radial_geometric(2, 1.0, 10_000, 1e-6)?;
    let f = SampledFunction::new(g.nodes().iter().zip(g.measures()).map(|(x, &m)| (1.0 / x[0], m)))?;
    let d = dist_to_linf(&f, 2.0)?;
    let elapsed = start.elapsed().as_secs_f64();
    let target = PI.sqrt();
    let err = rel(d.value, target);
    Ok((
        err <= 0.01 && elapsed < 1.0,
        format!("dist = {:.6} vs √π = {target:.6} (rel {err:.2e}), {elapsed:.3}s", d.value),
    ))
}

/// Smooth radial field vanishing at `r = 1`.
fn random_radial(rng: &mut ChaCha8Rng, g: &Arc<Grid>) -> GridFunction {
    let a: Vec<f64> = (0..4).map(|k| rng.gen_range(-1.0..1.0) / (1.0 + k as f64)).collect();
    GridFunction::from_fn(g.clone(), move |x| {
        let r = x[0];
        (1.0 - r * r) * a.iter().enumerate().map(|(k, c)| c * r.powi(2 * k as i32)).sum::<f64>()
    })
}

fn random_sines(rng: &mut ChaCha8Rng, g: &Arc<Grid>) -> GridFunction {
    let a: Vec<(f64, f64, f64)> = (1..=3)
        .flat_map(|j| (1..=3).map(move |k| (j as f64, k as f64)))
        .map(|(j, k)| (j, k, rng.gen_range(-1.0..1.0) / (j * k)))
        .collect();
    GridFunction::from_fn(g.clone(), move |x| {
        a.iter().map(|(j, k, c)| c * (j * PI * x[0]).sin() * (k * PI * x[1]).sin()).sum()
    })
}

fn sobolev(seed: u64) -> Verdict {
    let s32 = sobolev_constant(3, 2.0)?.constant;
    let closed = (4.0 * PI / 3.0).powf(-1.0 / 3.0) * 2.0;
    let const_err = (s32 - closed).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radial = Arc::new(Grid::radial(3, 1.0, 200)?);
    let square = Arc::new(Grid::unit_square(48)?);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (u, p, dim) = match i % 3 {
            0 => (random_radial(&mut rng, &radial), 2.0, 3),
            1 => (random_radial(&mut rng, &radial), 1.5, 3),
            _ => (random_sines(&mut rng, &square), 1.5, 2),
        };
        let s = sobolev_constant(dim, p)?;
        let lhs = lorentz_norm(&to_sampled(&u), LorentzExponents::finite(s.critical_exponent(), p)?);
        let rhs = s.constant * grad_p_integral(&u, p).powf(1.0 / p);
        worst = worst.max(lhs / rhs);
    }
    Ok((
        const_err <= 1e-12 && worst <= 1.1,
        format!("|S_3,2 − closed form| = {const_err:.1e}; worst ‖u‖_(p*,p)/(S‖∇u‖_p) = {worst:.4}"),
    ))
}

fn random_index(rng: &mut ChaCha8Rng) -> LorentzIndex {
    match rng.gen_range(0..5) {
        0 => LorentzIndex::Infinite,
        1 => LorentzIndex::Finite(1.0),
        _ => LorentzIndex::Finite(rng.gen_range(1.0..8.0)),
    }
}

fn holder(seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x09_11de);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let cells: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| {
                let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
                (
                    rng.gen_range(-1.0..1.0) * scale,
                    rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-3.0..3.0)),
                    rng.gen_range(1e-3..2.0),
                )
            })
            .collect();
        let e = LorentzExponents::new(rng.gen_range(1.05..10.0), random_index(&mut rng))?;
        let f = SampledFunction::new(cells.iter().map(|c| (c.0, c.2)))?;
        let g = SampledFunction::new(cells.iter().map(|c| (c.1, c.2)))?;
        let lhs: f64 = cells.iter().map(|c| (c.0 * c.1).abs() * c.2).sum();
        let rhs = lorentz_norm(&f, e) * lorentz_norm(&g, e.conjugate());
        let excess = (lhs - rhs) / rhs;
        worst = worst.max(excess);
        if excess > 1e-12 {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!("{violations} violations in 1000 pairs; max (lhs − rhs)/rhs = {worst:.3e}"),
    ))
}

fn heat_oracle() -> Verdict {
    let start = Instant::now();
    let g = Arc::new(Grid::interval(0.0, PI, 400)?);
    let u0 = GridFunction::from_fn(g, |x| x[0].sin());
    let spec = ProblemSpec::new(Arc::new(ModelFlux::p_laplacian(2.0)), u0, 2.0)?;
    let trace = solve(&spec, 1e-3, &Record::checked())?;
    let fit = fit_decay(&trace, (0.2, 2.0))?;
    let rate = -fit.exponential.slope;
    let elapsed = start.elapsed().as_secs_f64();
    let err = rel(rate, 2.0);
    Ok((
        err <= 0.02 && fit.kind == DecayKind::Exponential && elapsed < 30.0,
        format!("rate {rate:.5} vs 2λ₁ = 2 (rel {err:.2e}, R² {:.6}), {elapsed:.2}s", fit.exponential.r_squared),
    ))
}

/// Radial ball in `R^N` with `u₀ = cos(πr/2)` and drift `μ/|x|`.
fn radial_spec(dim: usize, cells: usize, p: f64, mu: f64, t_end: f64) -> Result<ProblemSpec> {
    let g = Arc::new(Grid::radial(dim, 1.0, cells)?);
    let u0 = GridFunction::from_fn(g, |x| (0.5 * PI * x[0]).cos());
    ProblemSpec::new(Arc::new(ModelFlux::new(p, mu)), u0, t_end)
}

pub(crate) struct PowerCase {
    pub p: f64,
    pub t_end: f64,
    pub dt: f64,
    pub window: (f64, f64),
}

pub(crate) const POWER_CASES: [PowerCase; 2] = [
    PowerCase {
        p: 3.0,
        t_end: 200.0,
        dt: 0.01,
        window: (50.0, 200.0),
    },
    PowerCase {
        p: 4.0,
        t_end: 200.0,
        dt: 0.01,
        window: (50.0, 200.0),
    },
];

fn power_decay() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &POWER_CASES {
        let start = Instant::now();
        let mu = 0.5 * critical_mu(5, c.p)?;
        let spec = radial_spec(5, 100, c.p, mu, c.t_end)?;
        let trace = solve(&spec, c.dt, &Record::checked())?;
        let fit = fit_decay(&trace, c.window)?;
        let expected = -2.0 / (c.p - 2.0);
        let err = rel(fit.power.slope, expected);
        let elapsed = start.elapsed().as_secs_f64();
        ok &= err <= 0.1 && elapsed < 300.0;
        parts.push(format!(
            "p={}: slope {:.4} vs {expected} (rel {err:.2e}, {elapsed:.1}s)",
            c.p, fit.power.slope
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// End of the early window: first time `‖u‖²` falls to 1e-2 of its start.
fn extinction_window(trace: &EnergyTrace) -> (f64, f64) {
    let cut = 1e-2 * trace.l2_sq[0];
    let end = trace
        .times
        .iter()
        .zip(&trace.l2_sq)
        .find(|(_, &y)| y <= cut)
        .map_or(*trace.times.last().unwrap(), |(&t, _)| t);
    (0.0, end)
}

fn exponential_decay() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1.8, 2.0] {
        let spec = radial_spec(3, 100, p, 0.0, 1.0)?;
        let trace = solve(&spec, 1e-3, &Record::checked())?;
        let w = extinction_window(&trace);
        let fit = fit_decay(&trace, w)?;
        let r2 = fit.exponential.r_squared;
        ok &= r2 > 0.99;
        parts.push(format!("p={p}: R² {r2:.5} on [0, {:.3}]", w.1));
    }
    Ok((ok, parts.join("; ")))
}

fn gronwall_closed_forms() -> Verdict {
    let mesh: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
    let g = Forcing::piecewise_constant(vec![0.0, 1.3, 4.0, 7.5], vec![0.4, 0.0, 1.1, 0.2])?;
    let mut worst_eq: f64 = 0.0;
    let mut worst_ineq = f64::NEG_INFINITY;
    for &(m, x0) in &[(0.7, 2.0), (2.5, 0.3), (0.1, 5.0)] {
        // exponential form: equality for any g
        let num = solve_comparison(&ComparisonOde::linear(m, g.clone(), x0), &mesh)?;
        for (&t, &x) in mesh.iter().zip(&num.values) {
            let cf = closed_form_bound(2.0, 3, m, 1.0, x0, &g, t)?;
            worst_eq = worst_eq.max(rel(x, cf));
        }
        for p in [3.0, 4.0] {
            // power form: equality for g ≡ 0, majorant otherwise
            let e = 0.5 * p;
            let z = solve_comparison(&ComparisonOde::power(m, e, Forcing::Zero, x0), &mesh)?;
            let x = solve_comparison(&ComparisonOde::power(m, e, g.clone(), x0), &mesh)?;
            for i in 0..mesh.len() {
                let zero = closed_form_bound(p, 5, m, 1.0, x0, &Forcing::Zero, mesh[i])?;
                worst_eq = worst_eq.max(rel(z.values[i], zero));
                let bound = closed_form_bound(p, 5, m, 1.0, x0, &g, mesh[i])?;
                worst_ineq = worst_ineq.max((x.values[i] - bound) / bound);
            }
        }
    }
    Ok((
        worst_eq <= 1e-6 && worst_ineq <= 1e-6,
        format!("max rel deviation from closed form {worst_eq:.2e}; max rel excess over power majorant {worst_ineq:.2e}"),
    ))
}

fn unit_rate(p: f64, m: f64) -> Rate {
    let e = if p > 2.0 { 0.5 * p } else { 1.0 };
    Arc::new(move |_, x: f64| if x > 0.0 { m * x.powf(e) } else { 0.0 })
}

/// Traces shared by the comparison and weak-type criteria.
fn simulated_traces() -> Result<Vec<(String, f64, EnergyTrace)>> {
    let mut out = Vec::new();
    let g = Arc::new(Grid::interval(0.0, PI, 200)?);
    let u0 = GridFunction::from_fn(g, |x| x[0].sin());
    let heat = ProblemSpec::new(Arc::new(ModelFlux::p_laplacian(2.0)), u0, 2.0)?;
    out.push(("heat".to_string(), 2.0, solve(&heat, 1e-2, &Record::checked())?));
    for &(dim, p, t_end) in &[(3, 2.0, 1.0), (3, 1.9, 1.0), (5, 3.0, 20.0), (5, 4.0, 20.0)] {
        let mu = 0.5 * critical_mu(dim, p)?;
        let spec = radial_spec(dim, 80, p, mu, t_end)?;
        let dt = t_end / 400.0;
        out.push((format!("N={dim} p={p}"), p, solve(&spec, dt, &Record::checked())?));
    }
    Ok(out)
}

fn comparison_sandwich() -> Verdict {
    let mut checked = 0;
    let mut skipped = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for (label, p, tr) in simulated_traces()? {
        let Some(m_fit) = fitted_rate_constant(&tr.times, &tr.l2_sq, p) else {
            failures.push(format!("{label}: no decay"));
            continue;
        };
        let psi = unit_rate(p, FIT_SAFETY * m_fit);
        for g in [Forcing::Zero, Forcing::constant(1e-3 * tr.l2_sq[0])] {
            let ode = ComparisonOde::new(psi.clone(), g.clone(), tr.l2_sq[0], 0.0);
            match comparison_check(&tr.times, &tr.l2_sq, &ode) {
                Ok(rep) => {
                    checked += 1;
                    let maj = majorant_decomposition(&tr.times, &tr.l2_sq, &psi, &g)?;
                    let scale = tr.l2_sq.iter().fold(1.0f64, |a, &b| a.max(b));
                    worst = worst.max(rep.max_violation / scale).max(maj.max_violation / scale);
                    if !rep.passed || !maj.passed {
                        failures.push(label.clone());
                    }
                }
                Err(Error::PremiseFailed { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((
        failures.is_empty() && checked > 0,
        format!(
            "{checked} traces with verified premise, {skipped} skipped; worst violation {worst:.2e}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    ))
}

const WEAK_TYPE_SCENARIOS: [&str; 4] = [
    r#"
name = "radial-p2"
[grid]
kind = "radial"
dim = 3
cells = 100
[problem]
p = 2.0
mu_ratio = 0.5
u0 = { kind = "sinusoid", amplitude = 3.0, frequency = 1.5707963267948966, phase = 1.5707963267948966 }
[time]
dt = 0.005
t_end = 0.5
[checks]
weak_type = true
"#,
    r#"
name = "radial-p1.9-source"
[grid]
kind = "radial"
dim = 3
cells = 100
[problem]
p = 1.9
mu_ratio = 0.5
u0 = { kind = "sinusoid", amplitude = 2.0, frequency = 1.5707963267948966, phase = 1.5707963267948966 }
f = { kind = "constant", value = 0.5 }
[time]
dt = 0.005
t_end = 0.5
[checks]
weak_type = true
"#,
    r#"
name = "radial-p3"
[grid]
kind = "radial"
dim = 5
cells = 80
[problem]
p = 3.0
mu_ratio = 0.5
u0 = { kind = "sinusoid", amplitude = 6.0, frequency = 1.5707963267948966, phase = 1.5707963267948966 }
[time]
dt = 0.01
t_end = 1.0
[checks]
weak_type = true
"#,
    r#"
name = "square-p1.5"
[grid]
kind = "rect2d"
nx = 32
ny = 32
[problem]
p = 1.5
u0 = { kind = "sinusoid", amplitude = 8.0, frequency = 3.141592653589793 }
[time]
dt = 0.01
t_end = 0.3
[checks]
weak_type = true
"#,
];

fn weak_type() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for text in WEAK_TYPE_SCENARIOS {
        let s = Scenario::from_toml(text, "weak-type scenario")?;
        let out = run(&s, false)?;
        let check = out
            .report
            .checks
            .iter()
            .find(|c| c.name == "weak_type")
            .ok_or_else(|| Error::invalid("weak-type check missing from report"))?;
        ok &= check.status == Status::Pass;
        parts.push(format!("{}: margin {:.3e}", s.name, check.value.unwrap_or(f64::NAN)));
    }
    Ok((ok, parts.join("; ")))
}

/// `‖u₀‖²[1 + κ/(p′(1−κ)) + 1/(2(1−κ))]` with `κ = μ_eff (p/(N−p))^{p−1}`.
fn picard_ball(u0_sq: f64, kappa: f64, p: f64) -> f64 {
    let pd = p / (p - 1.0);
    u0_sq * (1.0 + kappa / (pd * (1.0 - kappa)) + 0.5 / (1.0 - kappa))
}

fn hardy_factor(dim: usize, p: f64) -> f64 {
    (p / (dim as f64 - p)).powf(p - 1.0)
}

fn fixed_point() -> Verdict {
    let (dim, p, t_end, dt) = (3, 2.0, 0.5, 0.01);
    let g = Arc::new(Grid::radial(dim, 1.0, 100)?);
    let u0 = GridFunction::from_fn(g.clone(), |x| (0.5 * PI * x[0]).cos());
    let u0_sq = l2_norm_sq(&u0);
    let b0: SpaceTimeField = Arc::new(|_, _| 0.3);
    let bounded: Arc<dyn Flux> = Arc::new(ModelFlux::new(p, 0.0).with_b0(b0));
    let truncated: Arc<dyn Flux> = Arc::new(Truncated::new(ModelFlux::new(p, 0.2), 8.0));
    let cases = [("b0=0.3", bounded, 0.3), ("μ=0.2 truncated at 8", truncated, 0.2)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, flux, mu_eff) in cases {
        let spec = ProblemSpec::new(flux, u0.clone(), t_end)?;
        let kappa = mu_eff * hardy_factor(dim, p);
        let ball = picard_ball(u0_sq, kappa, p);
        let coarse = picard_fixed_point(&spec, dt, 1e-8, 25)?;
        let fine = picard_fixed_point(&spec, 0.5 * dt, 1e-8, 25)?;
        let worst = coarse
            .iterate_energies
            .iter()
            .chain(&fine.iterate_energies)
            .fold(0.0f64, |a, &b| a.max(b));
        let drift = rel(fine.trace.energy(), coarse.trace.energy());
        let pass = coarse.iterations <= 25 && fine.iterations <= 25 && worst <= ball && drift <= 0.05;
        ok &= pass;
        parts.push(format!(
            "{label}: {} / {} iterations, max iterate energy {worst:.4} ≤ {ball:.4}, dt-halving change {drift:.2e}",
            coarse.iterations, fine.iterations
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn truncation() -> Verdict {
    let (dim, p) = (3, 2.0);
    let mu = 0.5 * critical_mu(dim, p)?;
    let spec = radial_spec(dim, 200, p, mu, 0.5)?;
    let u0_sq = l2_norm_sq(&spec.u0);
    let levels = [2.0, 4.0, 8.0, 16.0, 32.0];
    let out = truncated_scheme(&spec, 5e-3, &levels, &Record::checked())?;
    let kappa = mu * hardy_factor(dim, p);
    let bound = u0_sq * (1.0 + 0.5 / (1.0 - kappa));
    let energies: Vec<f64> = out.traces.iter().map(EnergyTrace::energy).collect();
    let worst = energies.iter().fold(0.0f64, |a, &b| a.max(b));
    let monotone = out.distances.windows(2).all(|w| w[1] <= w[0]);
    Ok((
        monotone && worst <= bound,
        format!(
            "distances {:?}; max energy {worst:.4} ≤ shared bound {bound:.4}",
            out.distances.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
        ),
    ))
}
