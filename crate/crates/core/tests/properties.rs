use jumpdens::series::{poisson_weights, truncation_for_terms};
use jumpdens::{
    kde, linear_density, poisson_truncation, tail_bound, Bandwidth, EnvelopeConstants, EnvelopeKind, EnvelopeSet,
    JumpLaw, KdeConfig, PathEnsemble, PsiFunction, Side, ThetaSolver,
};
use proptest::prelude::*;

fn law_strategy() -> impl Strategy<Value = JumpLaw> {
    prop_oneof![
        (0.1f64..4.0).prop_map(|v| JumpLaw::gaussian(v).unwrap()),
        (0.3f64..4.0).prop_map(|m| JumpLaw::laplace(m).unwrap()),
    ]
}

fn solver_strategy() -> impl Strategy<Value = ThetaSolver> {
    (law_strategy(), 0.2f64..3.0, 0.0f64..3.0).prop_map(|(law, c2, lambda)| ThetaSolver::new(PsiFunction::new(c2, lambda, law).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_is_convex_and_anchored(solver in solver_strategy(), frac in 0.0f64..0.95) {
        let pf = solver.psi();
        prop_assert_eq!(pf.psi(0.0).unwrap(), 0.0);
        prop_assert!(pf.psi_prime(0.0).unwrap().abs() < 1e-15);
        let u = frac * pf.domain_sup().min(3.0);
        let c2sq = pf.c2() * pf.c2();
        prop_assert!(pf.psi_second(u).unwrap() >= c2sq * (1.0 - 1e-12));
        // Convexity by second differences.
        let h = 1e-3 * pf.domain_sup().min(3.0);
        if u > h {
            let d2 = pf.psi(u + h).unwrap() - 2.0 * pf.psi(u).unwrap() + pf.psi(u - h).unwrap();
            prop_assert!(d2 >= -1e-12);
        }
    }

    #[test]
    fn theta_inverts_psi_prime(solver in solver_strategy(), frac in 0.01f64..0.95) {
        let pf = solver.psi();
        let u = frac * pf.domain_sup().min(3.0);
        let xi = pf.psi_prime(u).unwrap();
        let th = solver.theta(xi).unwrap();
        prop_assert!((pf.psi_prime(th).unwrap() - xi).abs() <= 1e-12 * xi.max(1.0));
        // Recovering u itself is limited by the slope of Psi' there.
        prop_assert!((th - u).abs() <= 1e-12 * xi.max(1.0) / pf.psi_second(u.min(th)).unwrap() + 1e-12);
    }

    #[test]
    fn theta_is_increasing(solver in solver_strategy(), a in -6.0f64..6.0, gap in 0.01f64..2.0) {
        let (x1, x2) = (10f64.powf(a), 10f64.powf(a + gap));
        prop_assert!(solver.theta(x1).unwrap() < solver.theta(x2).unwrap());
    }

    #[test]
    fn tail_bound_is_a_monotone_probability(
        solver in solver_strategy(),
        c1 in 0.0f64..1.0,
        t in 0.05f64..2.0,
        r in 0.0f64..15.0,
        dr in 0.0f64..3.0,
    ) {
        let b = tail_bound(&solver, c1, t, r).unwrap();
        prop_assert!(b > 0.0 && b <= 1.0);
        prop_assert!(tail_bound(&solver, c1, t, r + dr).unwrap() <= b * (1.0 + 1e-9));
    }

    #[test]
    fn tail_bound_time_monotonicity(
        solver in solver_strategy(),
        c1 in 0.0f64..1.0,
        r in 0.0f64..10.0,
        t in 0.05f64..1.0,
        factor in 1.0f64..3.0,
    ) {
        // Fixed distance: a longer time can only widen the law.
        let b1 = tail_bound(&solver, c1, t, r).unwrap();
        let b2 = tail_bound(&solver, c1, t * factor, r).unwrap();
        prop_assert!(b1 <= b2 * (1.0 + 1e-9));
        // Fixed speed r / t: the exponent t int theta scales with t.
        let s1 = tail_bound(&solver, c1, t, r * t).unwrap();
        let s2 = tail_bound(&solver, c1, t * factor, r * t * factor).unwrap();
        prop_assert!(s2 <= s1 * (1.0 + 1e-9));
    }

    #[test]
    fn series_density_is_symmetric(law in law_strategy(), lambda in 0.0f64..3.0, t in 0.1f64..1.5) {
        let points: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let c = linear_density(&law, lambda, t, &points, 1e-10).unwrap();
        for i in 0..points.len() {
            let j = points.len() - 1 - i;
            prop_assert!((c.values[i] - c.values[j]).abs() <= 1e-10 * c.values[i].max(1e-3));
            prop_assert!(c.values[i] >= 0.0);
        }
    }

    #[test]
    fn truncation_is_monotone(mean in 0.0f64..20.0, e1 in 1.0f64..14.0, de in 0.0f64..4.0) {
        let loose = poisson_truncation(mean, 10f64.powf(-e1)).unwrap();
        let tight = poisson_truncation(mean, 10f64.powf(-e1 - de)).unwrap();
        prop_assert!(tight.max_terms >= loose.max_terms);
        prop_assert!(loose.tail_mass_bound < 10f64.powf(-e1));
        let w = poisson_weights(mean, loose.max_terms);
        let kept: f64 = w.iter().sum();
        prop_assert!((kept + loose.tail_mass_bound - 1.0).abs() < 1e-12);
        prop_assert_eq!(truncation_for_terms(mean, loose.max_terms).unwrap().tail_mass_bound, loose.tail_mass_bound);
    }

    #[test]
    fn envelope_lower_below_upper(
        gaussian in any::<bool>(),
        big_c in 1.0001f64..50.0,
        small_c in 1.0001f64..10.0,
        t in 0.01f64..1.0,
        r in 0.0f64..20.0,
    ) {
        let kind = if gaussian { EnvelopeKind::GaussianJump } else { EnvelopeKind::LaplaceJump };
        let k = EnvelopeConstants { big_a: 1.5, small_a: 1.5, big_c, small_c, q: 2.0, c_q_t: 1.0 };
        let set = EnvelopeSet::new(kind, 1.0, k).unwrap();
        let lo = set.evaluate(t, r, Side::Lower).unwrap();
        let hi = set.evaluate(t, r, Side::Upper).unwrap();
        prop_assert!(lo <= hi, "lower {} > upper {}", lo, hi);
        prop_assert!(lo >= 0.0);
    }

    #[test]
    fn kde_ignores_sample_order(
        values in prop::collection::vec(-5.0f64..5.0, 100..400),
        shift in 1usize..99,
    ) {
        let n = values.len();
        let mut rotated = values.clone();
        rotated.rotate_left(shift);
        let a = PathEnsemble::from_parts(1, 1.0, vec![0.0], values, vec![0; n], 1).unwrap();
        let b = PathEnsemble::from_parts(1, 1.0, vec![0.0], rotated, vec![0; n], 1).unwrap();
        let cfg = KdeConfig { bandwidth: Bandwidth::Fixed(0.3), points: (0..21).map(|i| -5.0 + 0.5 * i as f64).collect() };
        let (ka, kb) = (kde(&a, &cfg).unwrap(), kde(&b, &cfg).unwrap());
        for (x, y) in ka.values.iter().zip(&kb.values) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300));
        }
    }
}
