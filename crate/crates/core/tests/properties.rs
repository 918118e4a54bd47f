//! Property-based invariants over randomized inputs.

use proptest::prelude::*;

use levylab::entropy::{bound_constant, decay_rate, psi, Horizon, PhiSpec};
use levylab::levy::{MomentKind, RadialLevyMeasure, Route};
use levylab::poisson::{sample_configuration, CorpusFunctional, FiniteIntensity};
use levylab::rng::Streams;

fn positive_value() -> impl Strategy<Value = f64> {
    // log-uniform over several decades
    (-4.0f64..4.0).prop_map(|e| 10f64.powf(e))
}

fn phi_strategy() -> impl Strategy<Value = PhiSpec> {
    prop_oneof![
        Just(PhiSpec::XLogX),
        (1.0f64..=2.0).prop_map(PhiSpec::Power),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn psi_is_nonnegative_and_zero_on_diagonal(
        phi in phi_strategy(),
        u in positive_value(),
        v in positive_value(),
    ) {
        let p = psi(phi, u, v).unwrap();
        prop_assert!(p >= -1e-12 * (1.0 + u.abs() + v.abs()));
        let diag = psi(phi, v, v).unwrap();
        prop_assert!(diag.abs() < 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn psi_midpoint_convexity(
        phi in phi_strategy(),
        u1 in positive_value(),
        v1 in positive_value(),
        u2 in positive_value(),
        v2 in positive_value(),
    ) {
        let p11 = psi(phi, u1, v1).unwrap();
        let p22 = psi(phi, u2, v2).unwrap();
        let mid = psi(phi, 0.5 * (u1 + u2), 0.5 * (v1 + v2)).unwrap();
        prop_assert!(mid <= 0.5 * (p11 + p22) + 1e-9 * (1.0 + p11.abs() + p22.abs()));
    }

    #[test]
    fn rate_is_inverse_of_limit_constant(
        l1 in -3.0f64..0.0,
        gap in 0.0f64..1.0,
        alpha in 0.1f64..1.9,
        kappa1 in 0.1f64..2.0,
        spread in 1.0f64..3.0,
        d in 1usize..4,
    ) {
        // lambda1 <= lambda2 < 0 with lambda2 (d+alpha) < lambda1 d
        let l2 = l1 + gap * l1.abs() * 0.2;
        let (l1, l2) = (l1.min(l2), l1.max(l2));
        let a = l2 * (d as f64 + alpha) - l1 * d as f64;
        prop_assume!(a < -1e-6);
        let kappa2 = kappa1 * spread;
        let rate = decay_rate(l1, l2, d, alpha, kappa1, kappa2).unwrap();
        let c = bound_constant(l1, l2, d, alpha, kappa1, kappa2, Horizon::Infinite).unwrap();
        prop_assert!((rate * c - 1.0).abs() < 1e-10);
        // finite-horizon constant increases to the limit
        let c1 = bound_constant(l1, l2, d, alpha, kappa1, kappa2, Horizon::Finite(1.0)).unwrap();
        let c2 = bound_constant(l1, l2, d, alpha, kappa1, kappa2, Horizon::Finite(5.0)).unwrap();
        prop_assert!(c1 <= c2 + 1e-12 && c2 <= c * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moment_routes_agree_for_stable_measures(
        alpha in 0.4f64..1.8,
        eps in 0.05f64..3.0,
        d in 1usize..3,
    ) {
        let m = RadialLevyMeasure::stable(d, alpha, 1.0).unwrap();
        for kind in [
            MomentKind::SmallSq { eps },
            MomentKind::MidAbs { eps },
            MomentKind::TailMass { eps },
        ] {
            let cf = m.moment_integral_via(kind, Route::ClosedForm).unwrap();
            let q = m.moment_integral_via(kind, Route::Quadrature).unwrap();
            prop_assert!(
                (cf - q).abs() <= 1e-8 * cf.abs().max(1e-10),
                "{kind:?}: {cf} vs {q}"
            );
        }
    }

    #[test]
    fn moments_are_monotone_in_region(
        alpha in 0.4f64..1.8,
        e1 in 0.05f64..2.0,
        factor in 1.0f64..4.0,
    ) {
        let m = RadialLevyMeasure::stable(1, alpha, 1.0).unwrap();
        let e2 = e1 * factor;
        let s1 = m.moment_integral(MomentKind::SmallSq { eps: e1 }).unwrap();
        let s2 = m.moment_integral(MomentKind::SmallSq { eps: e2 }).unwrap();
        prop_assert!(s1 <= s2 * (1.0 + 1e-12));
        let t1 = m.moment_integral(MomentKind::TailMass { eps: e1 }).unwrap();
        let t2 = m.moment_integral(MomentKind::TailMass { eps: e2 }).unwrap();
        prop_assert!(t1 >= t2 * (1.0 - 1e-12));
    }

    #[test]
    fn poisson_functionals_are_permutation_invariant(seed in 0u64..5000) {
        let measure = RadialLevyMeasure::stable(1, 1.0, 1.0).unwrap();
        let intensity = FiniteIntensity::new(measure, 0.2, 1.0).unwrap();
        let streams = Streams::new(seed);
        let mut rng = streams.stream(0);
        let config = sample_configuration(&intensity, &mut rng).unwrap();
        let shuffled = config.shuffled(seed ^ 0xabcd);
        for f in CorpusFunctional::ALL {
            let a = f.eval(&config);
            let b = f.eval(&shuffled);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{}", f.name());
        }
    }
}
