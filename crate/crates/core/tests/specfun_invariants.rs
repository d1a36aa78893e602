use ham_core::specfun::{
    ln_simplex_integral, log_gamma, power_series_sum, series_lower_bound, simplex_integral, simplex_integral_bruteforce,
    stirling_gamma_check, SimplexExponents,
};
use proptest::prelude::*;

fn exponents(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.9f64..3.0, 1..=max_n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_law(beta in exponents(8), t in 0.05f64..20.0, c in 0.1f64..10.0) {
        let e = SimplexExponents::new(beta.clone()).unwrap();
        let deg = beta.iter().sum::<f64>() + beta.len() as f64;
        let lhs = simplex_integral(c * t, &e).unwrap();
        let rhs = c.powf(deg) * simplex_integral(t, &e).unwrap();
        prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn monotone_in_t(beta in exponents(6), t in 0.01f64..10.0, dt in 1e-3f64..1.0) {
        let e = SimplexExponents::new(beta).unwrap();
        prop_assert!(simplex_integral(t + dt, &e).unwrap() > simplex_integral(t, &e).unwrap());
    }

    #[test]
    fn closed_form_matches_nested_quadrature(beta in prop::collection::vec(-0.5f64..2.0, 1..=3), t in 0.5f64..3.0) {
        let e = SimplexExponents::new(beta).unwrap();
        let closed = simplex_integral(t, &e).unwrap();
        let brute = simplex_integral_bruteforce(t, &e, 1e-9).unwrap();
        prop_assert!((closed - brute.value).abs() <= (1e-6 * closed).max(brute.error), "{closed} vs {brute:?}");
    }

    #[test]
    fn series_dominates_lemma_bound(x in 0.0f64..60.0, p in 0.3f64..4.0) {
        let s = power_series_sum(x, p, 400).unwrap();
        let b = series_lower_bound(x, p).unwrap();
        prop_assert!(s.value + s.tail_bound >= b.value * (1.0 - 1e-12));
    }

    #[test]
    fn gamma_recurrence(x in 0.01f64..100.0) {
        // ln Γ(x+1) = ln Γ(x) + ln x.
        let d = log_gamma(x + 1.0).unwrap() - log_gamma(x).unwrap() - x.ln();
        prop_assert!(d.abs() < 1e-12 * (1.0 + log_gamma(x + 1.0).unwrap().abs()));
    }
}

#[test]
fn documented_examples() {
    let e = |b: &[f64]| SimplexExponents::new(b.to_vec()).unwrap();
    assert!((simplex_integral(2.0, &e(&[0.0])).unwrap() - 2.0).abs() < 1e-14);
    assert!((simplex_integral(1.0, &e(&[0.0, 0.0])).unwrap() - 0.5).abs() < 1e-14);
    assert!((simplex_integral(1.0, &e(&[1.0, 1.0])).unwrap() - 1.0 / 24.0).abs() < 1e-15 * 24.0);
    let b = simplex_integral_bruteforce(1.0, &e(&[0.8, 0.8]), 1e-9).unwrap();
    assert!((b.value / simplex_integral(1.0, &e(&[0.8, 0.8])).unwrap() - 1.0).abs() < 1e-6);
    assert!(SimplexExponents::new(vec![-1.0]).is_err());
    assert!(simplex_integral_bruteforce(1.0, &e(&[0.0; 6]), 1e-9).is_err());

    assert_eq!(power_series_sum(0.0, 0.7, 5).unwrap().value, 1.0);
    assert!((power_series_sum(1.0, 1.0, 30).unwrap().value - std::f64::consts::E).abs() < 1e-14);
    assert!(power_series_sum(2.0, 0.5, 40).unwrap().value >= (0.5f64 * 4.0).exp());

    let l = series_lower_bound(4.0, 2.0).unwrap();
    assert_eq!(l.c1, 0.5);
    assert!((l.c2 - 2f64.sqrt()).abs() < 1e-15);
    assert!((l.value - 0.5 * (2.0 * 2f64.sqrt()).exp()).abs() < 1e-12);
    assert!((series_lower_bound(1.0, 0.5).unwrap().value - 0.5f64.exp()).abs() < 1e-15);

    assert!((stirling_gamma_check(1.0, 40).unwrap() - 1.0).abs() < 1e-12);
    assert!((ham_core::specfun::stirling_ratio(2.0, 1) - 0.5).abs() < 1e-14);
}

#[test]
fn large_orders_stay_finite_in_log_space() {
    // The value underflows at n = 200 but its logarithm does not.
    let e = SimplexExponents::uniform(200, 0.8).unwrap();
    let ln = ln_simplex_integral(3.0, &e).unwrap();
    assert!(ln.is_finite() && ln < -700.0);
    let want = 360.0 * 3f64.ln() + 200.0 * log_gamma(1.8).unwrap() - log_gamma(361.0).unwrap();
    assert!((ln - want).abs() < 1e-9 * want.abs());
}
