//! Backward-Euler integration of `u_t = div A(x, t, u, ∇u) + f` with zero
//! Dirichlet data, the frozen-coefficient map and its Picard iteration, and
//! the truncated-coefficient ladder.
//!
//! The spatial operator is the face-flux divergence on a [`Grid`]: every face
//! carries the normal component of `A` evaluated at the face gradient, with
//! the value of `u` on the face upwinded along the transport velocity of the
//! flux. Multiplying a step by `u` and summing gives, up to the Newton
//! residual,
//!
//! `(½Δ‖u‖² + ½‖Δu‖²)/λ + dt·Σ_f |f| d_f A_f G_f = dt·Σ_i m_i f_i u_i`,
//!
//! which every step of [`solve`] checks.

use crate::error::{Error, Result};
use crate::flux::{Flux, SpaceTimeField, Truncated};
use crate::grid::{grad_p_integral, Grid, GridFunction};
use crate::linalg::BandedMatrix;
use std::sync::Arc;

/// Newton stopping rule: `‖r‖ ≤ RESIDUAL_TOL · ‖u − u_prev‖` in the mass norm.
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_NEWTON: usize = 50;
/// Residuals below this multiple of the unit round-off of their terms are
/// treated as converged.
const ROUNDOFF_FACTOR: f64 = 64.0;
/// Relative tolerance of the per-step energy identity.
pub const ENERGY_TOL: f64 = 1e-6;

/// One Cauchy–Dirichlet problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub grid: Arc<Grid>,
    pub flux: Arc<dyn Flux>,
    pub source: Option<SpaceTimeField>,
    pub u0: GridFunction,
    pub t_end: f64,
    /// Scaling parameter of the problem `u_t/λ − div A(x,t,u,∇u/λ) = f`,
    /// `u(0) = λu₀`; `1` gives the original problem.
    pub lambda: f64,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", self.grid.kind())
            .field("cells", &self.grid.len())
            .field("p", &self.flux.exponent())
            .field("t_end", &self.t_end)
            .field("lambda", &self.lambda)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(flux: Arc<dyn Flux>, u0: GridFunction, t_end: f64) -> Result<Self> {
        let spec = ProblemSpec {
            grid: u0.grid().clone(),
            flux,
            source: None,
            u0,
            t_end,
            lambda: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_source(mut self, f: SpaceTimeField) -> Self {
        self.source = Some(f);
        self
    }

    pub fn with_flux(&self, flux: Arc<dyn Flux>) -> Self {
        ProblemSpec {
            flux,
            ..self.clone()
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn exponent(&self) -> f64 {
        self.flux.exponent()
    }

    /// Range checks: `2N/(N+2) < p < N` on grids of dimension `N ≥ 2`
    /// (`p > 1` on intervals), positive structural constants, a positive horizon.
    pub fn validate(&self) -> Result<()> {
        let p = self.flux.exponent();
        let n = self.grid.dimension();
        if n >= 2 {
            let nf = n as f64;
            let lo = 2.0 * nf / (nf + 2.0);
            if !(p > lo && p < nf) {
                return Err(Error::invalid(format!(
                    "p = {p} outside ({lo}, {nf}) for a {n}-dimensional domain"
                )));
            }
        } else if !(p > 1.0) {
            return Err(Error::invalid(format!("p = {p} must exceed 1")));
        }
        if !(self.flux.alpha() > 0.0 && self.flux.beta() > 0.0) {
            return Err(Error::invalid("structural constants alpha and beta must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!("horizon T = {} must be positive", self.t_end)));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::invalid(format!("lambda = {} outside (0, 1]", self.lambda)));
        }
        if self.u0.values().len() != self.grid.len() {
            return Err(Error::invalid("initial datum does not conform to the grid"));
        }
        if self.u0.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial datum has non-finite values"));
        }
        Ok(())
    }

    fn source_values(&self, t: f64) -> Option<Vec<f64>> {
        self.source
            .as_ref()
            .map(|f| self.grid.nodes().iter().map(|&x| f(x, t)).collect())
    }
}

/// `0 = t_0 < t_1 < … = t_end` with step `dt`; the last step is shortened.
pub fn time_mesh(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end > 0.0) {
        return Err(Error::invalid(format!("time mesh needs dt > 0 and T > 0 (dt = {dt}, T = {t_end})")));
    }
    let steps = ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut t: Vec<f64> = (0..=steps).map(|n| (n as f64 * dt).min(t_end)).collect();
    t[steps] = t_end;
    Ok(t)
}

/// States on a time mesh, `states[n]` at `times[n]`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Arc<Grid>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn zeros(grid: Arc<Grid>, times: Vec<f64>) -> Self {
        let states = vec![vec![0.0; grid.len()]; times.len()];
        Trajectory { grid, times, states }
    }

    pub fn last(&self) -> GridFunction {
        GridFunction::new(self.grid.clone(), self.states.last().cloned().unwrap_or_default())
            .expect("trajectory states conform to their grid")
    }

    /// `(∫₀^T Σ_i m_i |u_i|^p dt)^{1/p}`, trapezoid rule in time.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let m = self.grid.measures();
        let rates: Vec<f64> = self
            .states
            .iter()
            .map(|s| s.iter().zip(m).map(|(v, w)| w * v.abs().powf(p)).sum())
            .collect();
        crate::psi::trapezoid(&self.times, &rates).powf(1.0 / p)
    }

    /// `L^p(Ω_T)` distance to a trajectory on the same mesh.
    pub fn lp_distance(&self, other: &Trajectory, p: f64) -> Result<f64> {
        if self.times.len() != other.times.len() || self.grid.len() != other.grid.len() {
            return Err(Error::invalid("trajectories live on different meshes"));
        }
        let diff = Trajectory {
            grid: self.grid.clone(),
            times: self.times.clone(),
            states: self
                .states
                .iter()
                .zip(&other.states)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        };
        Ok(diff.lp_norm(p))
    }
}

/// Time series of the energy functionals.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    /// `‖u(t)‖²`.
    pub l2_sq: Vec<f64>,
    /// `∫|∇u(t)|^p`.
    pub grad_p: Vec<f64>,
    /// `∫A·∇u` of the step that produced `u(t)` (of `u₀` itself at `t = 0`).
    pub flux_work: Vec<f64>,
    /// `⟨f(t), u(t)⟩`.
    pub source_work: Vec<f64>,
    /// `½‖u(t) − u(t − dt)‖²/λ`, the numerical dissipation of the step.
    pub dissipation: Vec<f64>,
    /// `(k, sup_t |{|u(t)| > k}|)`.
    pub level_sets: Vec<(f64, f64)>,
    /// Largest relative defect of the per-step energy identity.
    pub max_energy_defect: f64,
    /// Newton iterations summed over all steps.
    pub newton_iterations: usize,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn level_set(&self, k: f64) -> Option<f64> {
        self.level_sets.iter().find(|(kk, _)| *kk == k).map(|x| x.1)
    }

    pub fn sup_l2_sq(&self) -> f64 {
        self.l2_sq.iter().copied().fold(0.0, f64::max)
    }

    /// `∫₀^T ∫|∇u|^p`, trapezoid rule.
    pub fn grad_p_integral(&self) -> f64 {
        crate::psi::trapezoid(&self.times, &self.grad_p)
    }

    /// `sup_t ‖u‖² + ∫₀^T ∫|∇u|^p`.
    pub fn energy(&self) -> f64 {
        self.sup_l2_sq() + self.grad_p_integral()
    }
}

/// What [`solve`] records besides the energy columns.
#[derive(Clone, Debug, Default)]
pub struct Record {
    pub level_sets: Vec<f64>,
    pub keep_states: bool,
    pub check_energy: bool,
}

impl Record {
    pub fn checked() -> Self {
        Record {
            check_energy: true,
            ..Default::default()
        }
    }
}

/// Diagnostics of one converged step.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub flux_work: f64,
    pub source_work: f64,
    pub dissipation: f64,
    /// Relative defect of the discrete energy identity.
    pub energy_defect: f64,
}

struct StepContext<'a> {
    spec: &'a ProblemSpec,
    t: f64,
    dt: f64,
    u_prev: &'a [f64],
    frozen: Option<&'a [f64]>,
    source: Option<Vec<f64>>,
    // per face: which side supplies the u argument (−1 minus, +1 plus, 0 average)
    upwind: Vec<i8>,
}

impl<'a> StepContext<'a> {
    fn new(spec: &'a ProblemSpec, u_prev: &'a [f64], t: f64, dt: f64, frozen: Option<&'a [f64]>) -> Self {
        let upwind = spec
            .grid
            .faces()
            .iter()
            .map(|f| {
                let v = spec.flux.transport(f.position, t, f.axis);
                if v > 0.0 {
                    -1
                } else if v < 0.0 {
                    1
                } else {
                    0
                }
            })
            .collect();
        StepContext {
            spec,
            t,
            dt,
            u_prev,
            frozen,
            source: spec.source_values(t),
            upwind,
        }
    }

    #[inline]
    fn face_u(&self, k: usize, f: &crate::grid::Face, u: &[f64]) -> f64 {
        let v = self.frozen.unwrap_or(u);
        let vm = f.minus.map_or(0.0, |i| v[i]);
        let vp = f.plus.map_or(0.0, |i| v[i]);
        match self.upwind[k] {
            -1 => vm,
            1 => vp,
            _ => 0.5 * (vm + vp),
        }
    }

    /// Returns `R/m` (cellwise), the flux work and the mass norm of the
    /// round-off in `R/m`, and optionally fills the Jacobian of `R`.
    fn residual(&self, u: &[f64], mut jac: Option<&mut BandedMatrix>) -> (Vec<f64>, f64, f64) {
        let g = &self.spec.grid;
        let flux = &self.spec.flux;
        let lam = self.spec.lambda;
        let m = g.measures();
        let mut d = vec![0.0; g.len()];
        let mut d_abs = vec![0.0; g.len()];
        let mut work = 0.0;
        if let Some(j) = jac.as_deref_mut() {
            j.clear();
            for (i, mi) in m.iter().enumerate() {
                j.add(i, i, mi / lam);
            }
        }
        for (k, f) in g.faces().iter().enumerate() {
            let grad = g.face_gradient(f, u);
            let xi = [grad[0] / lam, grad[1] / lam];
            let uf = self.face_u(k, f, u);
            let a = flux.eval(f.position, self.t, uf, xi)[f.axis];
            let gn = grad[f.axis];
            work += f.area * f.distance * a * gn;
            if let Some(i) = f.minus {
                d[i] += f.area * a;
                d_abs[i] += (f.area * a).abs();
            }
            if let Some(i) = f.plus {
                d[i] -= f.area * a;
                d_abs[i] += (f.area * a).abs();
            }
            if let Some(j) = jac.as_deref_mut() {
                let (a_u, a_xi) = flux.normal_derivatives(f.position, self.t, uf, xi, f.axis);
                let a_g = a_xi / (lam * f.distance);
                let a_u = if self.frozen.is_some() { 0.0 } else { a_u };
                let wu = |side: i8| -> f64 {
                    match self.upwind[k] {
                        0 => 0.5,
                        s if s == side => 1.0,
                        _ => 0.0,
                    }
                };
                // dA/du of the two adjacent unknowns
                let mut cols = [(usize::MAX, 0.0); 2];
                if let Some(i) = f.minus {
                    cols[0] = (i, -a_g + a_u * wu(-1));
                }
                if let Some(i) = f.plus {
                    cols[1] = (i, a_g + a_u * wu(1));
                }
                for &(c, dadc) in cols.iter().filter(|c| c.0 != usize::MAX) {
                    if let Some(i) = f.minus {
                        j.add(i, c, -self.dt * f.area * dadc);
                    }
                    if let Some(i) = f.plus {
                        j.add(i, c, self.dt * f.area * dadc);
                    }
                }
            }
        }
        let mut noise = 0.0;
        let r = (0..g.len())
            .map(|i| {
                let src = self.source.as_ref().map_or(0.0, |s| s[i]);
                let e = (u[i].abs() + self.u_prev[i].abs()) / lam + self.dt * (d_abs[i] / m[i] + src.abs());
                noise += m[i] * e * e;
                (u[i] - self.u_prev[i]) / lam - self.dt * (d[i] / m[i] + src)
            })
            .collect();
        (r, work, ROUNDOFF_FACTOR * f64::EPSILON * noise.sqrt())
    }

    fn mass_norm(&self, v: &[f64]) -> f64 {
        v.iter()
            .zip(self.spec.grid.measures())
            .map(|(x, m)| m * x * x)
            .sum::<f64>()
            .sqrt()
    }

    fn run(&self) -> Result<StepReport> {
        let g = &self.spec.grid;
        let n = g.len();
        let m = g.measures();
        let mut u = self.u_prev.to_vec();
        let mut jac = BandedMatrix::zeros(n, g.half_band());
        let (mut r, mut work, mut noise) = self.residual(&u, None);
        let mut rn = self.mass_norm(&r);
        let mut iterations = 0;
        loop {
            let du: Vec<f64> = u.iter().zip(self.u_prev).map(|(a, b)| a - b).collect();
            let scale = self.mass_norm(&du);
            if rn <= RESIDUAL_TOL * scale || rn <= noise {
                break;
            }
            if iterations == MAX_NEWTON {
                return Err(Error::NonConvergence {
                    time: self.t,
                    iterations,
                    residual: rn,
                });
            }
            iterations += 1;
            self.residual(&u, Some(&mut jac));
            let mut delta: Vec<f64> = r.iter().zip(m).map(|(ri, mi)| -ri * mi).collect();
            jac.factor()?;
            jac.solve_factored(&mut delta);
            let mut step = 1.0;
            let mut accepted = false;
            while step >= 1.0 / 1024.0 {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
                let (rt, wt, nt) = self.residual(&trial, None);
                let rtn = self.mass_norm(&rt);
                if rtn < (1.0 - 1e-4 * step) * rn || (step == 1.0 && rtn <= rn) {
                    u = trial;
                    r = rt;
                    work = wt;
                    noise = nt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                return Err(Error::NonConvergence {
                    time: self.t,
                    iterations,
                    residual: rn,
                });
            }
        }
        let lam = self.spec.lambda;
        let l2 = |v: &[f64]| v.iter().zip(m).map(|(x, w)| w * x * x).sum::<f64>();
        let src = self
            .source
            .as_ref()
            .map_or(0.0, |s| s.iter().zip(&u).zip(m).map(|((a, b), w)| a * b * w).sum());
        let du: Vec<f64> = u.iter().zip(self.u_prev).map(|(a, b)| a - b).collect();
        let half_delta = 0.5 * (l2(&u) - l2(self.u_prev)) / lam;
        let dissipation = 0.5 * l2(&du) / lam;
        let defect = half_delta + dissipation + self.dt * work - self.dt * src;
        let scale = half_delta
            .abs()
            .max(dissipation)
            .max((self.dt * work).abs())
            .max((self.dt * src).abs());
        // below this size the terms are subnormal round-off
        let scale = scale.max(f64::MIN_POSITIVE / f64::EPSILON);
        let energy_defect = defect.abs() / scale;
        Ok(StepReport {
            u,
            iterations,
            residual: rn,
            flux_work: work,
            source_work: src,
            dissipation,
            energy_defect,
        })
    }
}

/// One backward-Euler step from `u_prev` at time `t` to `t + dt`.
pub fn step(spec: &ProblemSpec, u_prev: &GridFunction, t: f64, dt: f64) -> Result<GridFunction> {
    let rep = step_report(spec, u_prev.values(), t, dt, None)?;
    GridFunction::new(spec.grid.clone(), rep.u)
}

/// [`step`] with diagnostics; `frozen` replaces the `u` argument of `A`.
pub fn step_report(
    spec: &ProblemSpec,
    u_prev: &[f64],
    t: f64,
    dt: f64,
    frozen: Option<&[f64]>,
) -> Result<StepReport> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if u_prev.len() != spec.grid.len() {
        return Err(Error::invalid("state does not conform to the grid"));
    }
    // the step is implicit: coefficients are evaluated at the new time level
    StepContext::new(spec, u_prev, t + dt, dt, frozen).run()
}

fn instantaneous_work(spec: &ProblemSpec, u: &[f64], t: f64) -> (f64, f64) {
    let ctx = StepContext::new(spec, u, t, 1.0, None);
    let (_, work, _) = ctx.residual(u, None);
    let src = ctx
        .source
        .as_ref()
        .map_or(0.0, |s| s.iter().zip(u).zip(spec.grid.measures()).map(|((a, b), w)| a * b * w).sum());
    (work, src)
}

struct Recorder {
    trace: EnergyTrace,
    states: Option<Vec<Vec<f64>>>,
}

impl Recorder {
    fn new(record: &Record) -> Self {
        Recorder {
            trace: EnergyTrace {
                level_sets: record.level_sets.iter().map(|&k| (k, 0.0)).collect(),
                ..Default::default()
            },
            states: record.keep_states.then(Vec::new),
        }
    }

    fn push(&mut self, spec: &ProblemSpec, t: f64, u: &[f64], work: f64, src: f64, diss: f64) {
        let g = &spec.grid;
        let m = g.measures();
        let gf = GridFunction::new(g.clone(), u.to_vec()).expect("state conforms");
        let tr = &mut self.trace;
        tr.times.push(t);
        tr.l2_sq.push(u.iter().zip(m).map(|(v, w)| w * v * v).sum());
        tr.grad_p.push(grad_p_integral(&gf, spec.exponent()));
        tr.flux_work.push(work);
        tr.source_work.push(src);
        tr.dissipation.push(diss);
        for (k, sup) in tr.level_sets.iter_mut() {
            let level: f64 = u.iter().zip(m).filter(|(v, _)| v.abs() > *k).map(|(_, w)| w).sum();
            *sup = sup.max(level);
        }
        if let Some(s) = self.states.as_mut() {
            s.push(u.to_vec());
        }
    }
}

/// Marches `spec` over `[0, T]` with step `dt`, optionally with the `u`
/// argument of `A` frozen to the states of `frozen`.
pub fn solve_detailed(
    spec: &ProblemSpec,
    dt: f64,
    record: &Record,
    frozen: Option<&Trajectory>,
) -> Result<(EnergyTrace, Option<Trajectory>)> {
    spec.validate()?;
    let times = time_mesh(spec.t_end, dt)?;
    if let Some(v) = frozen {
        if v.times.len() != times.len() || v.grid.len() != spec.grid.len() {
            return Err(Error::invalid("frozen argument is not on the solver's time mesh"));
        }
    }
    let mut rec = Recorder::new(record);
    let mut u: Vec<f64> = spec.u0.values().iter().map(|v| spec.lambda * v).collect();
    let (w0, s0) = instantaneous_work(spec, &u, 0.0);
    rec.push(spec, 0.0, &u, w0, s0, 0.0);
    for n in 1..times.len() {
        let (t0, t1) = (times[n - 1], times[n]);
        let fz = frozen.map(|v| v.states[n].as_slice());
        let rep = step_report(spec, &u, t0, t1 - t0, fz)?;
        if record.check_energy && rep.energy_defect > ENERGY_TOL {
            return Err(Error::EnergyDefect {
                time: t1,
                defect: rep.energy_defect,
            });
        }
        rec.trace.max_energy_defect = rec.trace.max_energy_defect.max(rep.energy_defect);
        rec.trace.newton_iterations += rep.iterations;
        u = rep.u;
        rec.push(spec, t1, &u, rep.flux_work, rep.source_work, rep.dissipation);
    }
    let traj = rec.states.map(|states| Trajectory {
        grid: spec.grid.clone(),
        times,
        states,
    });
    Ok((rec.trace, traj))
}

/// Energy trace of the discrete solution.
pub fn solve(spec: &ProblemSpec, dt: f64, record: &Record) -> Result<EnergyTrace> {
    Ok(solve_detailed(spec, dt, record, None)?.0)
}

/// Trace and states of the discrete solution.
pub fn solve_trajectory(spec: &ProblemSpec, dt: f64, record: &Record) -> Result<(EnergyTrace, Trajectory)> {
    let rec = Record {
        keep_states: true,
        ..record.clone()
    };
    let (trace, traj) = solve_detailed(spec, dt, &rec, None)?;
    Ok((trace, traj.expect("states were kept")))
}

/// The map `v ↦ u` solving the problem with `A(x, t, v, ∇u)`.
pub fn frozen_solve(spec: &ProblemSpec, v: &Trajectory, dt: f64) -> Result<(EnergyTrace, Trajectory)> {
    let rec = Record {
        keep_states: true,
        check_energy: true,
        ..Default::default()
    };
    let (trace, traj) = solve_detailed(spec, dt, &rec, Some(v))?;
    Ok((trace, traj.expect("states were kept")))
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub trace: EnergyTrace,
    /// Updates after the first frozen solve; a flux that ignores `u` needs one.
    pub iterations: usize,
    /// `‖v^{k} − v^{k−1}‖_{L^p(Ω_T)}` for `k = 1, 2, …`.
    pub history: Vec<f64>,
    /// [`EnergyTrace::energy`] of every iterate `v^1, v^2, …`.
    pub iterate_energies: Vec<f64>,
}

/// Iterates the frozen-coefficient map from `v⁰ = 0` until successive
/// iterates are within `tol` in `L^p(Ω_T)`.
pub fn picard_fixed_point(spec: &ProblemSpec, dt: f64, tol: f64, max_iter: usize) -> Result<PicardOutcome> {
    if !(tol > 0.0) {
        return Err(Error::invalid("Picard tolerance must be positive"));
    }
    let p = spec.exponent();
    let times = time_mesh(spec.t_end, dt)?;
    let mut v = Trajectory::zeros(spec.grid.clone(), times);
    let mut history = Vec::new();
    let mut energies = Vec::new();
    loop {
        let (trace, next) = frozen_solve(spec, &v, dt)?;
        let d = next.lp_distance(&v, p)?;
        history.push(d);
        energies.push(trace.energy());
        v = next;
        let iterations = history.len() - 1;
        if d <= tol && iterations >= 1 {
            return Ok(PicardOutcome {
                trajectory: v,
                trace,
                iterations,
                history,
                iterate_energies: energies,
            });
        }
        if iterations >= max_iter {
            return Err(Error::MaxIterExceeded { history });
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncationOutcome {
    pub levels: Vec<f64>,
    pub traces: Vec<EnergyTrace>,
    /// `L^p(Ω_T)` distance between the solutions at consecutive levels.
    pub distances: Vec<f64>,
}

/// Solves with the coefficient truncated at every level (in parallel).
pub fn truncated_scheme(spec: &ProblemSpec, dt: f64, levels: &[f64], record: &Record) -> Result<TruncationOutcome> {
    use rayon::prelude::*;
    if levels.windows(2).any(|w| !(w[0] < w[1])) || levels.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::invalid("truncation levels must be positive and increasing"));
    }
    let runs: Vec<Result<(EnergyTrace, Trajectory)>> = levels
        .par_iter()
        .map(|&n| {
            let flux: Arc<dyn Flux> = Arc::new(Truncated::new(spec.flux.clone(), n));
            solve_trajectory(&spec.with_flux(flux), dt, record)
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let p = spec.exponent();
    let distances = runs
        .windows(2)
        .map(|w| w[1].1.lp_distance(&w[0].1, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(TruncationOutcome {
        levels: levels.to_vec(),
        traces: runs.into_iter().map(|r| r.0).collect(),
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::ModelFlux;
    use crate::grid::l2_norm_sq;
    use std::f64::consts::PI;

    fn heat(n: usize, t_end: f64) -> ProblemSpec {
        let g = Arc::new(Grid::interval(0.0, PI, n).unwrap());
        let u0 = GridFunction::from_fn(g, |x| x[0].sin());
        ProblemSpec::new(Arc::new(ModelFlux::p_laplacian(2.0)), u0, t_end).unwrap()
    }

    #[test]
    fn mesh_shortens_last_step() {
        let t = time_mesh(1.0, 0.3).unwrap();
        assert_eq!(t.len(), 5);
        assert!((t[4] - 1.0).abs() < 1e-15 && (t[3] - 0.9).abs() < 1e-12);
        assert_eq!(time_mesh(1.0, 0.25).unwrap().len(), 5);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let spec = heat(50, 0.1);
        let z = GridFunction::zeros(spec.grid.clone());
        assert!(step(&spec, &z, 0.0, 0.01).unwrap().is_zero());
    }

    #[test]
    fn one_heat_step_decays_the_eigenmode() {
        let spec = heat(400, 1.0);
        let dt = 1e-3;
        let u1 = step(&spec, &spec.u0, 0.0, dt).unwrap();
        let expect = (-dt).exp();
        for (a, b) in u1.values().iter().zip(spec.u0.values()) {
            assert!((a - expect * b).abs() < 1e-5);
        }
    }

    #[test]
    fn step_is_first_order_consistent() {
        let spec = heat(200, 1.0);
        let u = &spec.u0;
        let one = step(&spec, u, 0.0, 0.02).unwrap();
        let half = step(&spec, &step(&spec, u, 0.0, 0.01).unwrap(), 0.01, 0.01).unwrap();
        let d_step = l2_norm_sq(&one.sub(u)).sqrt();
        let d_split = l2_norm_sq(&one.sub(&half)).sqrt();
        assert!(d_step < 0.05 && d_split < 0.1 * d_step, "{d_step} {d_split}");
    }

    #[test]
    fn heat_trace_follows_exponential_and_balances_energy() {
        let spec = heat(400, 0.5);
        let trace = solve(&spec, 1e-3, &Record::checked()).unwrap();
        let last = *trace.l2_sq.last().unwrap();
        let exact = PI / 2.0 * (-1.0f64).exp();
        assert!((last - exact).abs() < 0.02 * exact);
    }

    #[test]
    fn zero_datum_gives_zero_trace() {
        let g = Arc::new(Grid::radial(3, 1.0, 40).unwrap());
        let spec = ProblemSpec::new(Arc::new(ModelFlux::new(2.0, 0.2)), GridFunction::zeros(g), 0.1).unwrap();
        let trace = solve(&spec, 0.01, &Record::checked()).unwrap();
        assert!(trace.l2_sq.iter().chain(&trace.grad_p).all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_exponent_outside_range() {
        let g = Arc::new(Grid::radial(3, 1.0, 10).unwrap());
        let u0 = GridFunction::zeros(g);
        assert!(ProblemSpec::new(Arc::new(ModelFlux::p_laplacian(3.0)), u0.clone(), 1.0).is_err());
        assert!(ProblemSpec::new(Arc::new(ModelFlux::p_laplacian(1.1)), u0, 1.0).is_err());
    }

    #[test]
    fn nonlinear_steps_balance_energy() {
        for &(p, mu) in &[(1.6, 0.0), (2.5, 0.1), (2.0, 0.2)] {
            let g = Arc::new(Grid::radial(3, 1.0, 80).unwrap());
            let u0 = GridFunction::from_fn(g, |x| (0.5 * PI * x[0]).cos());
            let spec = ProblemSpec::new(Arc::new(ModelFlux::new(p, mu)), u0, 0.05).unwrap();
            let trace = solve(&spec, 1e-3, &Record::checked()).unwrap();
            assert!(trace.l2_sq.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "p={p}");
        }
    }

    #[test]
    fn picard_without_coupling_needs_one_update() {
        let spec = heat(100, 0.1);
        let out = picard_fixed_point(&spec, 1e-2, 1e-8, 25).unwrap();
        assert_eq!(out.iterations, 1);
        let direct = solve_trajectory(&spec, 1e-2, &Record::default()).unwrap().1;
        assert!(out.trajectory.lp_distance(&direct, 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn truncation_above_coefficient_bound_is_exact() {
        let g = Arc::new(Grid::radial(3, 1.0, 40).unwrap());
        let u0 = GridFunction::from_fn(g, |x| 1.0 - x[0] * x[0]);
        let flux = ModelFlux::new(2.0, 0.0).with_b0(Arc::new(|_, _| 0.5));
        let spec = ProblemSpec::new(Arc::new(flux), u0, 0.05).unwrap();
        let out = truncated_scheme(&spec, 5e-3, &[1.0, 2.0, 4.0], &Record::default()).unwrap();
        assert!(out.distances.iter().all(|&d| d == 0.0));
        assert_eq!(out.traces[0], out.traces[2]);
    }
}
