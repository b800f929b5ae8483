//! Property-based checks of algebraic invariants.

use nalgebra::DVector;
use proptest::prelude::*;
use normform_core::examples::{feedforward_bundle, FeedForwardParams};
use normform_core::{
    rectify_group_action, transform_signal, verify_group_axioms, InputSignal, SolverOptions,
    TransformationGroup,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_group_axioms(u in 0.01f64..100.0, p in -3.0f64..3.0, q in -3.0f64..3.0) {
        let g = TransformationGroup::scaling();
        let report = verify_group_axioms(&g, &[u], &[p, q], 1e-9).unwrap();
        prop_assert!(report.pass());
    }

    #[test]
    fn translation_group_axioms(u in -100.0f64..100.0, p in -10.0f64..10.0, q in -10.0f64..10.0) {
        let g = TransformationGroup::translation();
        let report = verify_group_axioms(&g, &[u], &[p, q], 1e-9).unwrap();
        prop_assert!(report.pass());
    }

    #[test]
    fn signal_transforms_compose(
        offset in 0.2f64..2.0,
        amplitude in 0.0f64..0.1,
        p in -2.0f64..2.0,
        q in -2.0f64..2.0,
        t in 0.0f64..50.0,
    ) {
        let g = TransformationGroup::scaling();
        let u = InputSignal::sinusoid(offset, amplitude, 0.8, 0.3);
        let once = transform_signal(&g, p + q, &u);
        let twice = transform_signal(&g, p, &transform_signal(&g, q, &u));
        let (a, b) = (once.eval(t).unwrap(), twice.eval(t).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn identity_transform_is_noop(t in 0.0f64..20.0) {
        let g = TransformationGroup::scaling();
        let u = InputSignal::ramp(0.5, 0.1);
        let v = transform_signal(&g, 0.0, &u);
        prop_assert_eq!(u.eval(t).unwrap(), v.eval(t).unwrap());
    }

    #[test]
    fn rectification_shifts_with_the_group(
        x0 in 0.3f64..3.0,
        y0 in -1.0f64..1.0,
        p in -1.5f64..1.5,
    ) {
        // moving the query point along the group shifts p_hat by exactly p
        // and leaves the section coordinates unchanged
        let bundle = feedforward_bundle(FeedForwardParams::default());
        let x = DVector::from_vec(vec![x0, y0]);
        let xp = bundle.family.apply(p, &x);
        let (z_a, p_a) = rectify_group_action(&bundle.family, &bundle.section, &x).unwrap();
        let (z_b, p_b) = rectify_group_action(&bundle.family, &bundle.section, &xp).unwrap();
        prop_assert!((p_b - p_a - p).abs() <= 1e-8);
        prop_assert!((z_b - z_a).amax() <= 1e-8);
    }
}

proptest! {
    // simulations are slower, keep the case count small
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn feedforward_shift_identity(p in -1.0f64..1.0, z0 in 0.2f64..1.5) {
        let bundle = feedforward_bundle(FeedForwardParams::default());
        let nf = &bundle.normal_form;
        let u = InputSignal::sinusoid(0.6, 0.2, 0.9, 0.0);
        let opts = SolverOptions::with_tolerances(1e-10, 1e-12);
        let z0 = DVector::from_vec(vec![z0]);
        let a = normform_core::simulate_normal_form(nf, &z0, 0.0, &u, (0.0, 10.0), &opts).unwrap();
        let up = transform_signal(&nf.group, p, &u);
        let b = normform_core::simulate_normal_form(nf, &z0, p, &up, (0.0, 10.0), &opts).unwrap();
        for k in 0..=20 {
            let t = 10.0 * k as f64 / 20.0;
            let (wa, wb) = (a.state_at(t), b.state_at(t));
            prop_assert!((wa[0] - wb[0]).abs() <= 1e-7);
            prop_assert!((wb[1] - wa[1] - p).abs() <= 1e-7);
        }
    }
}
