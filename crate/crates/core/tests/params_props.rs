//! Randomized identities for derived constants and the exponent
//! thresholds.

use proptest::prelude::*;
use ril_core::params::{
    discriminant_positive, gamma_plus, is_relevant, kappa_isentropic, lambda_thresholds, q_n,
    GasParams,
};

fn dims() -> impl Strategy<Value = u32> {
    prop_oneof![Just(2u32), Just(3u32)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// The three coefficients of the radial cubic collapse to lambda when
    /// alternately summed; exact consequence of their definitions.
    #[test]
    fn cubic_coefficients_alternate_to_lambda(
        n in dims(),
        gamma in 1.0001f64..60.0,
        lambda in 1.0001f64..3.0,
    ) {
        let p = GasParams::isentropic(n, gamma, lambda).unwrap();
        let d = p.derived();
        let scale = d.k1.abs() + d.k2.abs() + d.k3.abs();
        prop_assert!((d.k1 - d.k2 + d.k3 - lambda).abs() <= 1e-14 * scale.max(1.0));
    }
}

proptest! {
    /// The isentropic density exponent kills the entropy forcing term
    /// exactly, and the far-field decay exponent collapses to 2. Both are
    /// handled as exact branches, not as computed near-zeros.
    #[test]
    fn isentropic_branch_is_exact(
        n in dims(),
        gamma in 1.0001f64..60.0,
        lambda in 1.0001f64..3.0,
    ) {
        let p = GasParams::isentropic(n, gamma, lambda).unwrap();
        prop_assert!(p.is_isentropic());
        let d = p.derived();
        prop_assert_eq!(d.alpha, 0.0);
        prop_assert_eq!(d.a, 2.0);
        prop_assert!(p.kappa < 0.0);
        // round-trip through the scalar helper
        prop_assert_eq!(p.kappa, kappa_isentropic(gamma, lambda).unwrap());
    }

    /// Threshold ordering: the working bound never exceeds the double-root
    /// bound, and stays below sqrt(n) for every gamma.
    #[test]
    fn working_bound_ordering(n in dims(), gamma in 1.0001f64..60.0) {
        let t = lambda_thresholds(n, gamma).unwrap();
        prop_assert!(t.lambda_circ <= t.lambda_hat * (1.0 + 1e-12));
        prop_assert!(t.lambda_circ < f64::from(n).sqrt());
        prop_assert!(t.lambda_hat > 1.0);
        prop_assert!(t.lambda_tilde > 1.0);
        // the conjugate root is never the smaller one
        prop_assert!(t.lambda_check >= t.lambda_hat);
        prop_assert_eq!(t.lambda_star, t.lambda_hat.min(t.lambda_tilde));
    }

    /// For n = 3 the min switches branch exactly once, at gamma_plus.
    #[test]
    fn star_branch_switch(offset in 0.6f64..30.0) {
        let gp = gamma_plus();
        let lo = lambda_thresholds(3, (gp - offset).max(1.0001)).unwrap();
        prop_assert!(lo.lambda_hat <= lo.lambda_tilde);
        if gp + offset <= 100.0 {
            let hi = lambda_thresholds(3, gp + offset).unwrap();
            prop_assert!(hi.lambda_hat >= hi.lambda_tilde);
        }
    }

    /// Above the working bound the pair is never relevant.
    #[test]
    fn outside_band_never_relevant(
        n in dims(),
        gamma in 1.0001f64..60.0,
        excess in 0.0f64..2.0,
    ) {
        let t = lambda_thresholds(n, gamma).unwrap();
        prop_assert!(!is_relevant(n, gamma, t.lambda_circ + excess).unwrap());
    }

    /// Negative radicand means the triple-point pair is missing and the
    /// nodality test must refuse rather than fabricate an answer.
    #[test]
    fn negative_radicand_refuses(
        n in dims(),
        gamma in 1.0001f64..60.0,
        lambda in 1.0001f64..3.0,
    ) {
        if q_n(n, gamma, lambda) < 0.0 {
            prop_assert!(discriminant_positive(n, gamma, lambda).is_err());
            prop_assert!(!is_relevant(n, gamma, lambda).unwrap());
        }
    }
}
