//! Property tests for the kernel invariants.

use magvisc::kernel::{make_kernel, KernelSpec};
use proptest::prelude::*;

fn admissible_spec() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.05f64..0.95, 0.1f64..5.0)
            .prop_map(|(alpha, scale)| KernelSpec::Fractional { alpha, scale }),
        proptest::collection::vec((0.01f64..3.0, 0.0f64..5.0), 1..4)
            .prop_map(|terms| KernelSpec::PronySeries { terms }),
        (0.1f64..10.0).prop_map(|value| KernelSpec::Constant { value }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// eval(shift eps, t) equals eval(shift 0, t + eps) bit for bit.
    #[test]
    fn translation_consistency(spec in admissible_spec(), eps in 1e-6f64..1.0, t in 0.0f64..3.0) {
        let base = make_kernel(spec.clone(), 0.0).unwrap();
        let shifted = make_kernel(spec, eps).unwrap();
        prop_assert_eq!(shifted.eval(t).unwrap(), base.eval(t + eps).unwrap());
    }

    /// Smaller shifts dominate pointwise, since G is non-increasing.
    #[test]
    fn monotone_domination(
        spec in admissible_spec(),
        eps1 in 1e-6f64..0.5,
        gap in 1e-6f64..0.5,
        t in 0.0f64..3.0,
    ) {
        let k1 = make_kernel(spec.clone(), eps1).unwrap();
        let k2 = make_kernel(spec, eps1 + gap).unwrap();
        prop_assert!(k1.eval(t).unwrap() >= k2.eval(t).unwrap());
    }

    /// moment0(a, c) = moment0(a, b) + moment0(b, c).
    #[test]
    fn moment_additivity(
        spec in admissible_spec(),
        a in 0.0f64..1.0,
        d1 in 1e-4f64..1.0,
        d2 in 1e-4f64..1.0,
    ) {
        let k = make_kernel(spec, 0.0).unwrap();
        let (b, c) = (a + d1, a + d1 + d2);
        let whole = k.moment0(a, c).unwrap();
        let split = k.moment0(a, b).unwrap() + k.moment0(b, c).unwrap();
        prop_assert!((whole - split).abs() <= 1e-12 * whole.abs().max(1e-12));
    }

    /// The uniform floor from the a priori analysis:
    /// G(t + eps) >= G(T + 1) on [0, T] for eps in (0, 1].
    #[test]
    fn uniform_lower_bound(
        spec in admissible_spec(),
        eps in 1e-9f64..1.0,
        frac in 0.0f64..1.0,
        horizon in 0.1f64..3.0,
    ) {
        let base = make_kernel(spec.clone(), 0.0).unwrap();
        let k = make_kernel(spec, eps).unwrap();
        let t = frac * horizon;
        let floor = base.eval(horizon + 1.0).unwrap();
        prop_assert!(k.eval(t).unwrap() >= floor);
    }

    /// Sign conditions hold on the admissible families.
    #[test]
    fn sign_conditions(spec in admissible_spec(), t in 1e-6f64..5.0) {
        let k = make_kernel(spec, 0.0).unwrap();
        prop_assert!(k.eval(t).unwrap() > 0.0);
        prop_assert!(k.eval_dot(t).unwrap() <= 0.0);
        prop_assert!(k.eval_ddot(t).unwrap() >= 0.0);
    }
}
