use plap_core::grid::{grad_p_integral, to_sampled, Grid, GridFunction};
use plap_core::lorentz::{
    distribution_function, dist_to_linf, lorentz_norm, sobolev_constant, truncate, truncation_tail,
    LorentzExponents, LorentzIndex, SampledFunction,
};
use proptest::prelude::*;
use std::sync::Arc;

fn cells() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1e3..1e3f64, 1e-3..5.0f64), 1..40)
}

fn index() -> impl Strategy<Value = LorentzIndex> {
    prop_oneof![
        Just(LorentzIndex::Infinite),
        Just(LorentzIndex::Finite(1.0)),
        (1.0..12.0f64).prop_map(LorentzIndex::Finite),
    ]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn distribution_is_nonincreasing(c in cells(), k1 in 0.0..1e3f64, dk in 0.0..1e3f64) {
        let f = SampledFunction::new(c).unwrap();
        prop_assert!(distribution_function(&f, k1 + dk) <= distribution_function(&f, k1));
        prop_assert!(distribution_function(&f, 0.0) <= f.total_measure() * (1.0 + 1e-15));
    }

    #[test]
    fn norms_are_homogeneous(c in cells(), p in 1.05..10.0f64, q in index(), s in -50.0..50.0f64) {
        let f = SampledFunction::new(c).unwrap();
        let e = LorentzExponents::new(p, q).unwrap();
        prop_assert!(close(lorentz_norm(&f.scale(s), e), s.abs() * lorentz_norm(&f, e), 1e-12));
    }

    #[test]
    fn diagonal_index_is_lebesgue(c in cells(), p in 1.05..10.0f64) {
        let f = SampledFunction::new(c).unwrap();
        let lp = f.integral_abs_pow(p).powf(1.0 / p);
        prop_assert!(close(lorentz_norm(&f, LorentzExponents::lebesgue(p).unwrap()), lp, 1e-12));
    }

    /// `‖f‖_{p,r} ≤ (q/p)^{1/q − 1/r} ‖f‖_{p,q}` for `q < r`.
    #[test]
    fn second_index_nesting(c in cells(), p in 1.05..10.0f64, q in 1.0..10.0f64, dr in 0.0..10.0f64, weak in any::<bool>()) {
        let f = SampledFunction::new(c).unwrap();
        let r = if weak { f64::INFINITY } else { q + dr };
        let big = lorentz_norm(&f, LorentzExponents::finite(p, q).unwrap());
        let small = if weak {
            lorentz_norm(&f, LorentzExponents::weak(p).unwrap())
        } else {
            lorentz_norm(&f, LorentzExponents::finite(p, r).unwrap())
        };
        let c = (q / p).powf(1.0 / q - 1.0 / r);
        prop_assert!(small <= c * big * (1.0 + 1e-12), "{small} > {c} * {big}");
    }

    #[test]
    fn holder_inequality(c in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64, 1e-3..5.0f64), 1..40),
                         p in 1.05..10.0f64, q in index()) {
        let e = LorentzExponents::new(p, q).unwrap();
        let f = SampledFunction::new(c.iter().map(|x| (x.0, x.2))).unwrap();
        let g = SampledFunction::new(c.iter().map(|x| (x.1, x.2))).unwrap();
        let lhs: f64 = c.iter().map(|x| (x.0 * x.1).abs() * x.2).sum();
        let rhs = lorentz_norm(&f, e) * lorentz_norm(&g, e.conjugate());
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn truncation_splits_the_function(c in cells(), m in 1e-2..1e3f64) {
        let f = SampledFunction::new(c).unwrap();
        let t = truncate(&f, m).unwrap();
        let tail = truncation_tail(&f, m);
        prop_assert!(t.sup_abs() <= m);
        for ((a, b), orig) in t.cells().iter().zip(tail.cells()).zip(f.cells()) {
            prop_assert!((a.value + b.value - orig.value).abs() <= 1e-12 * orig.value.abs().max(1.0));
        }
    }

    #[test]
    fn bounded_functions_are_at_distance_zero(c in cells(), p in 1.05..10.0f64) {
        let f = SampledFunction::new(c).unwrap();
        let d = dist_to_linf(&f, p).unwrap();
        let weak = lorentz_norm(&f, LorentzExponents::weak(p).unwrap());
        prop_assert!(d.value <= weak * (1.0 + 1e-12));
        for w in d.ladder.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12));
        }
    }

    /// `‖u‖_{p*,p} ≤ S_{N,p} ‖∇u‖_p` for smooth radial fields; the slack
    /// covers the discretisation.
    #[test]
    fn sobolev_lorentz_radial(a in prop::collection::vec(-1.0..1.0f64, 1..5), p in 1.3..2.8f64) {
        let g = Arc::new(Grid::radial(3, 1.0, 150).unwrap());
        let u = GridFunction::from_fn(g, |x| {
            let r = x[0];
            (1.0 - r * r) * a.iter().enumerate().map(|(k, c)| c * r.powi(2 * k as i32)).sum::<f64>()
        });
        prop_assume!(!u.is_zero());
        let s = sobolev_constant(3, p).unwrap();
        let lhs = lorentz_norm(&to_sampled(&u), LorentzExponents::finite(s.critical_exponent(), p).unwrap());
        let rhs = s.constant * grad_p_integral(&u, p).powf(1.0 / p);
        prop_assert!(lhs <= 1.1 * rhs, "{lhs} > 1.1 * {rhs}");
    }
}

#[test]
fn inverse_radius_distance_in_three_dimensions() {
    // dist(B/|x|, L^∞) = B ω_N^{1/N}
    let g = Grid::radial_geometric(3, 1.0, 10_000, 1e-6).unwrap();
    let b = 0.7;
    let f = SampledFunction::new(g.nodes().iter().zip(g.measures()).map(|(x, &m)| (b / x[0], m))).unwrap();
    let d = dist_to_linf(&f, 3.0).unwrap();
    let target = b * sobolev_constant(3, 2.0).unwrap().omega.cbrt();
    assert!((d.value - target).abs() < 0.01 * target, "{} vs {target}", d.value);
}
