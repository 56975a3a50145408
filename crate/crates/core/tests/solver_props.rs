use plap_core::flux::{ModelFlux, SpaceTimeField, Truncated};
use plap_core::grid::{l2_norm_sq, Grid, GridFunction};
use plap_core::solver::{
    picard_fixed_point, solve, solve_trajectory, step, truncated_scheme, ProblemSpec, Record, ENERGY_TOL,
};
use plap_core::{Error, Flux};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn radial(dim: usize, cells: usize, p: f64, mu: f64, t_end: f64, amp: f64) -> ProblemSpec {
    let g = Arc::new(Grid::radial(dim, 1.0, cells).unwrap());
    let u0 = GridFunction::from_fn(g, move |x| amp * (0.5 * PI * x[0]).cos());
    ProblemSpec::new(Arc::new(ModelFlux::new(p, mu)), u0, t_end).unwrap()
}

#[test]
fn discrete_heat_decay_matches_the_matrix_eigenvalue() {
    // u0 = sin is an eigenvector of the three-point Laplacian on the cell grid
    let n = 200;
    let h = PI / n as f64;
    let g = Arc::new(Grid::interval(0.0, PI, n).unwrap());
    let u0 = GridFunction::from_fn(g, |x| x[0].sin());
    let spec = ProblemSpec::new(Arc::new(ModelFlux::p_laplacian(2.0)), u0, 0.5).unwrap();
    let dt = 0.01;
    let tr = solve(&spec, dt, &Record::checked()).unwrap();
    let lam = 4.0 / (h * h) * (0.5 * h).sin().powi(2);
    let q = 1.0 / (1.0 + lam * dt);
    for (i, &y) in tr.l2_sq.iter().enumerate() {
        let exact = tr.l2_sq[0] * q.powi(2 * i as i32);
        assert!((y - exact).abs() <= 1e-9 * exact, "step {i}: {y} vs {exact}");
    }
}

#[test]
fn zero_data_stays_zero() {
    let spec = radial(3, 40, 2.0, 0.2, 0.2, 0.0);
    let tr = solve(&spec, 0.01, &Record::checked()).unwrap();
    assert!(tr.l2_sq.iter().chain(&tr.grad_p).all(|&v| v == 0.0));
}

#[test]
fn rejects_exponents_outside_the_range() {
    let g = Arc::new(Grid::radial(3, 1.0, 20).unwrap());
    let u0 = GridFunction::zeros(g);
    let spec = ProblemSpec::new(Arc::new(ModelFlux::p_laplacian(1.1)), u0, 1.0);
    assert!(matches!(spec.and_then(|s| s.validate()), Err(Error::InvalidArgument(_))));
}

#[test]
fn source_drives_the_solution_to_a_steady_state() {
    let g = Arc::new(Grid::interval(0.0, 1.0, 100).unwrap());
    let u0 = GridFunction::zeros(g.clone());
    let f: SpaceTimeField = Arc::new(|_, _| 1.0);
    let spec = ProblemSpec::new(Arc::new(ModelFlux::p_laplacian(2.0)), u0, 5.0).unwrap().with_source(f);
    let (_, traj) = solve_trajectory(&spec, 0.05, &Record::checked()).unwrap();
    let last = traj.last();
    for (x, v) in g.nodes().iter().zip(last.values()) {
        let exact = 0.5 * x[0] * (1.0 - x[0]);
        assert!((v - exact).abs() < 1e-4, "{v} vs {exact}");
    }
}

#[test]
fn picard_converges_for_bounded_drift() {
    let g = Arc::new(Grid::radial(3, 1.0, 60).unwrap());
    let u0 = GridFunction::from_fn(g, |x| (0.5 * PI * x[0]).cos());
    let b0: SpaceTimeField = Arc::new(|_, _| 0.3);
    let spec = ProblemSpec::new(Arc::new(ModelFlux::new(2.0, 0.0).with_b0(b0)), u0, 0.3).unwrap();
    let out = picard_fixed_point(&spec, 0.01, 1e-8, 25).unwrap();
    assert!(out.iterations <= 25);
    assert!(out.history.last().unwrap() <= &1e-8);
    // the fixed point solves the coupled problem
    let direct = solve(&spec, 0.01, &Record::checked()).unwrap();
    let a = out.trace.l2_sq.last().unwrap();
    let b = direct.l2_sq.last().unwrap();
    assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
}

#[test]
fn picard_reports_divergence_budget() {
    let spec = radial(3, 30, 2.0, 0.3, 0.5, 1.0);
    match picard_fixed_point(&spec, 0.05, 1e-300, 3) {
        Err(Error::MaxIterExceeded { history }) => assert_eq!(history.len(), 4),
        other => panic!("expected MaxIterExceeded, got {other:?}"),
    }
}

#[test]
fn truncation_distances_shrink() {
    let spec = radial(3, 120, 2.0, 0.2, 0.3, 1.0);
    let out = truncated_scheme(&spec, 0.01, &[1.0, 2.0, 4.0, 8.0, 16.0], &Record::checked()).unwrap();
    assert_eq!(out.distances.len(), 4);
    assert!(out.distances.windows(2).all(|w| w[1] <= w[0]), "{:?}", out.distances);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_identity_and_decay(p in 1.7..3.5f64, ratio in 0.0..0.8f64, amp in 0.1..3.0f64) {
        let dim = 5;
        let mu = ratio * plap_core::experiments::config::critical_mu(dim, p).unwrap();
        let spec = radial(dim, 40, p, mu, 0.2, amp);
        let tr = solve(&spec, 0.01, &Record::checked()).unwrap();
        prop_assert!(tr.max_energy_defect <= ENERGY_TOL);
        // no source: ‖u‖² is nonincreasing
        for w in tr.l2_sq.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!(tr.sup_l2_sq() <= l2_norm_sq(&spec.u0) * (1.0 + 1e-12));
    }

    #[test]
    fn one_step_is_odd_for_odd_flux(p in 1.5..3.0f64, amp in 0.1..2.0f64) {
        let spec = radial(3, 30, p, 0.1, 0.1, amp);
        let neg = GridFunction::new(spec.grid.clone(), spec.u0.values().iter().map(|v| -v).collect()).unwrap();
        let a = step(&spec, &spec.u0, 0.0, 0.01).unwrap();
        let b = step(&spec, &neg, 0.0, 0.01).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x + y).abs() <= 1e-10 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn truncation_above_the_coefficient_is_exact(n in 50.0..100.0f64) {
        // b = μ/r ≤ 2μ/h on the grid, so levels above that leave A unchanged
        let spec = radial(3, 20, 2.0, 0.2, 0.1, 1.0);
        let t: Arc<dyn Flux> = Arc::new(Truncated::new(spec.flux.clone(), n));
        let a = solve(&spec, 0.01, &Record::checked()).unwrap();
        let b = solve(&spec.with_flux(t), 0.01, &Record::checked()).unwrap();
        prop_assert_eq!(a.l2_sq, b.l2_sq);
    }
}
