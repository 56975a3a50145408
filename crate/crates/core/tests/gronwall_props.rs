use plap_core::gronwall::{
    closed_form_bound, comparison_check, fit_decay_series, solve_comparison, universal_bound, ComparisonOde,
    DecayKind, Forcing,
};
use plap_core::Error;
use proptest::prelude::*;

fn mesh(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Larger data give a larger solution: `x₀ ≤ x₀'` and `g ≤ g'`.
    #[test]
    fn monotone_in_data(m in 0.1..3.0f64, e in 1.0..2.5f64, x0 in 0.0..5.0f64, dx in 0.0..2.0f64,
                        g in 0.0..1.0f64, dg in 0.0..1.0f64) {
        let t = mesh(5.0, 50);
        let lo = solve_comparison(&ComparisonOde::power(m, e, Forcing::constant(g), x0), &t).unwrap();
        let hi = solve_comparison(&ComparisonOde::power(m, e, Forcing::constant(g + dg), x0 + dx), &t).unwrap();
        for (a, b) in lo.values.iter().zip(&hi.values) {
            prop_assert!(*a <= b + 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn exponential_form_is_exact(m in 0.1..3.0f64, x0 in 0.0..5.0f64,
                                 vals in prop::collection::vec(0.0..2.0f64, 1..5)) {
        let starts: Vec<f64> = (0..vals.len()).map(|i| 2.0 * i as f64).collect();
        let g = Forcing::piecewise_constant(starts, vals).unwrap();
        let t = mesh(10.0, 40);
        let x = solve_comparison(&ComparisonOde::linear(m, g.clone(), x0), &t).unwrap();
        for (&s, &v) in t.iter().zip(&x.values) {
            let cf = closed_form_bound(2.0, 3, m, 1.0, x0, &g, s).unwrap();
            prop_assert!((v - cf).abs() <= 1e-6 * cf.max(1e-12), "t = {s}: {v} vs {cf}");
        }
    }

    #[test]
    fn power_form_majorises(m in 0.1..3.0f64, p in 2.2..5.0f64, x0 in 0.0..5.0f64, g in 0.0..0.5f64) {
        let t = mesh(10.0, 40);
        let x = solve_comparison(&ComparisonOde::power(m, 0.5 * p, Forcing::constant(g), x0), &t).unwrap();
        for (&s, &v) in t.iter().zip(&x.values) {
            let cf = closed_form_bound(p, 5, m, 1.0, x0, &Forcing::constant(g), s).unwrap();
            prop_assert!(v <= cf * (1.0 + 1e-6) + 1e-12);
            if s > 0.0 {
                let u = universal_bound(p, m, 1.0, &Forcing::constant(g), s).unwrap();
                prop_assert!(v <= u * (1.0 + 1e-6) + 1e-12 || v <= cf * (1.0 + 1e-6));
            }
        }
    }
}

#[test]
fn comparison_holds_for_a_subsolution() {
    // γ' = −2γ is a subsolution of x' = −x
    let t = mesh(4.0, 200);
    let gamma: Vec<f64> = t.iter().map(|s| 3.0 * (-2.0 * s).exp()).collect();
    let rep = comparison_check(&t, &gamma, &ComparisonOde::linear(1.0, Forcing::Zero, 0.0)).unwrap();
    assert!(rep.passed);
    assert!(rep.max_violation <= 0.0);
}

#[test]
fn comparison_refuses_a_failed_premise() {
    let t = mesh(4.0, 200);
    let gamma: Vec<f64> = t.iter().map(|s| 3.0 * (-0.5 * s).exp()).collect();
    let r = comparison_check(&t, &gamma, &ComparisonOde::linear(1.0, Forcing::Zero, 0.0));
    assert!(matches!(r, Err(Error::PremiseFailed { .. })));
}

#[test]
fn fits_tell_power_from_exponential() {
    let t = mesh(100.0, 2000);
    let pow: Vec<f64> = t.iter().map(|s| (1.0 + s).powf(-2.0)).collect();
    let exp: Vec<f64> = t.iter().map(|s| (-0.3 * s).exp()).collect();
    let a = fit_decay_series(&t, &pow, (20.0, 100.0)).unwrap();
    let b = fit_decay_series(&t, &exp, (20.0, 100.0)).unwrap();
    assert_eq!(a.kind, DecayKind::Power);
    assert_eq!(b.kind, DecayKind::Exponential);
    assert!((b.exponential.slope + 0.3).abs() < 1e-9);
    assert!(matches!(fit_decay_series(&t, &pow, (20.0, 20.1)), Err(Error::DegenerateWindow { .. })));
}
