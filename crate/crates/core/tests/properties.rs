use proptest::prelude::*;
use tuned_source::exec::Execution;
use tuned_source::model::{cross_integral, self_integral, Mode};
use tuned_source::quadrature::Quadrature;
use tuned_source::specfun::lommel_first;
use tuned_source::theorems::{boundedness_margin, ratio_at};
use tuned_source::tuning::{find_constraint_roots, select_chi0, RootSearch};

fn quad() -> Quadrature {
    Quadrature::new(1e-12).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn boundedness_slack_is_nonnegative(
        j in 1u8..=2,
        l in 1u32..=5,
        k in 0.2f64..3.0,
        chi in -1.0f64..1.0,
        a in 0.3f64..4.0,
    ) {
        let mode = Mode::new(j, l, 0).unwrap();
        let mu_omega = 1.0;
        prop_assume!(chi * mu_omega < k * k - 1e-3);
        let r = boundedness_margin(&mode, k, chi, mu_omega, a, &quad()).unwrap();
        prop_assert!(r.relative() >= -1e-9, "relative margin {}", r.relative());
    }

    #[test]
    fn ratio_is_even_in_k(
        j in 1u8..=2,
        l in 1u32..=4,
        k in 0.3f64..2.5,
        chi in -0.5f64..0.5,
        a in 0.5f64..3.0,
    ) {
        let mode = Mode::new(j, l, 0).unwrap();
        prop_assume!(chi < k * k - 1e-3);
        let q = quad();
        let plus = ratio_at(&mode, k, chi, 1.0, a, &q).unwrap();
        let minus = ratio_at(&mode, -k, chi, 1.0, a, &q).unwrap();
        prop_assert!((plus - minus).abs() <= 1e-10 * plus.abs().max(1e-300));
    }

    #[test]
    fn lommel_matches_quadrature(l in 1u32..=8, alpha in 0.05f64..6.0, a in 0.2f64..5.0) {
        let closed = lommel_first(l, alpha, a).unwrap();
        let numeric = cross_integral(2, l, alpha, alpha, a, &quad()).unwrap();
        prop_assert!((closed - numeric).abs() <= 1e-10 * closed.abs().max(1e-300));
    }

    #[test]
    fn cross_integral_is_symmetric(l in 1u32..=5, k in 0.2f64..3.0, kt in 0.2f64..3.0, a in 0.3f64..3.0) {
        let q = quad();
        for j in 1..=2u8 {
            let kk = cross_integral(j, l, k, kt, a, &q).unwrap();
            let tk = cross_integral(j, l, kt, k, a, &q).unwrap();
            let n = (self_integral(j, l, k, a, &q).unwrap() * self_integral(j, l, kt, a, &q).unwrap()).sqrt();
            prop_assert!((kk - tk).abs() <= 1e-12 * n);
        }
    }

    #[test]
    fn roots_of_a_cubic_are_recovered(r1 in -0.9f64..-0.1, r2 in 0.1f64..0.9) {
        let g = move |x: f64| (x - r1) * (x - r2) * (x + 2.0);
        let search = RootSearch { lo: -1.0, hi: 1.0, grid_n: 401, tol: 1e-12 };
        let set = find_constraint_roots(g, &search, None, Execution::Sequential).unwrap();
        prop_assert_eq!(set.roots().len(), 2);
        let chi0 = select_chi0(&set).unwrap();
        let expected = if r1.abs() < r2.abs() { r1 } else { r2 };
        prop_assert!((chi0 - expected).abs() <= 1e-11);
    }
}
