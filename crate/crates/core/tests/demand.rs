mod common;

use penflow::demand::{
    conditional_mean, conditional_variance, law, sample_transition, simulate_path, MeanFunction, OUParams, PathSeed,
    Sinusoid,
};
use proptest::prelude::*;

fn params(kappa: f64, sigma: f64, y0: f64) -> OUParams {
    OUParams::new(kappa, sigma, y0, MeanFunction::case_study()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chapman_kolmogorov(kappa in 0.2..10.0f64, sigma in 0.1..3.0f64, y in -5.0..5.0f64,
                          t0 in 0.0..1.0f64, d1 in 0.0..1.0f64, d2 in 0.0..1.0f64) {
        let p = params(kappa, sigma, 1.0);
        let (t1, s) = (t0 + d1, t0 + d1 + d2);
        let direct = law(&p, t0, y, s).unwrap();
        let first = law(&p, t0, y, t1).unwrap();
        // the mean is affine in the conditioning value
        let via_mean = conditional_mean(&p, t1, first.mean, s).unwrap();
        let decay = (-2.0 * kappa * (s - t1)).exp();
        let via_var = decay * first.variance + conditional_variance(&p, t1, s).unwrap();
        prop_assert!((direct.mean - via_mean).abs() <= 1e-11 * (1.0 + direct.mean.abs()));
        prop_assert!((direct.variance - via_var).abs() <= 1e-12 * (1.0 + direct.variance));
    }

    #[test]
    fn mean_reverts_to_constant(kappa in 0.2..10.0f64, c in -3.0..3.0f64, y in -5.0..5.0f64,
                                s1 in 0.0..2.0f64, ds in 0.0..2.0f64) {
        let p = OUParams::new(kappa, 1.0, y, MeanFunction::constant(c)).unwrap();
        let m1 = conditional_mean(&p, 0.0, y, s1).unwrap();
        let m2 = conditional_mean(&p, 0.0, y, s1 + ds).unwrap();
        prop_assert!((m2 - c).abs() <= (m1 - c).abs() + 1e-14);
        prop_assert!((m1 - c - (y - c) * (-kappa * s1).exp()).abs() < 1e-12);
        let v1 = conditional_variance(&p, 0.0, s1).unwrap();
        let v2 = conditional_variance(&p, 0.0, s1 + ds).unwrap();
        prop_assert!(v1 <= v2 && v2 <= 1.0 / (2.0 * kappa) + 1e-15);
    }

    #[test]
    fn law_is_linear_in_observation(y in -5.0..5.0f64, dy in -2.0..2.0f64, s in 0.0..1.0f64) {
        let p = params(3.0, 2.0, 1.0);
        let a = conditional_mean(&p, 0.0, y, s).unwrap();
        let b = conditional_mean(&p, 0.0, y + dy, s).unwrap();
        prop_assert!((b - a - dy * (-3.0 * s).exp()).abs() < 1e-12);
    }

    #[test]
    fn paths_are_reproducible(seed in any::<u64>(), stream in 0u64..1000) {
        let p = params(3.0, 2.0, 1.0);
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.025).collect();
        let a = simulate_path(&p, &times, 1.0, PathSeed::new(seed, stream)).unwrap();
        let b = simulate_path(&p, &times, 1.0, PathSeed::new(seed, stream)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.values[0], 1.0);
    }
}

#[test]
fn linear_table_matches_closed_form() {
    // μ(r) = a + b r: κ∫e^{−κ(s−r)}μ(r)dr = (a + b s − b/κ) − (a + b t0 − b/κ)e^{−κ(s−t0)}
    let (a, b, kappa) = (1.5, -2.0, 3.0);
    let mu = MeanFunction::tabulated(vec![(0.0, a), (0.4, a + 0.4 * b), (2.0, a + 2.0 * b)]).unwrap();
    let p = OUParams::new(kappa, 1.0, 0.7, mu).unwrap();
    for &(t0, s) in &[(0.0, 0.3), (0.1, 1.0), (0.5, 1.9)] {
        let e = (-kappa * (s - t0)).exp();
        let want = 0.7 * e + (a + b * s - b / kappa) - (a + b * t0 - b / kappa) * e;
        let got = conditional_mean(&p, t0, 0.7, s).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    assert!(conditional_mean(&p, 0.0, 0.7, 2.5).is_err());
}

#[test]
fn harmonic_closed_form_matches_quadrature() {
    let mu = MeanFunction::Harmonic {
        offset: 0.5,
        sinusoids: vec![
            Sinusoid { amplitude: 3.0, frequency: 1.0, phase: 0.3 },
            Sinusoid { amplitude: -1.0, frequency: 2.5, phase: 0.0 },
        ],
    };
    let p = OUParams::new(2.0, 1.0, 0.0, mu.clone()).unwrap();
    for s in [0.1, 0.6, 1.7] {
        let f = |r: f64| 2.0 * (-2.0 * (s - r)).exp() * mu.eval(r).unwrap();
        let want = common::simpson(&f, 0.0, s, 1e-14);
        let got = conditional_mean(&p, 0.0, 0.0, s).unwrap();
        assert!((got - want).abs() < 1e-11, "{got} vs {want}");
    }
}

#[test]
fn sampled_moments_match_the_law() {
    let p = params(3.0, 2.0, 1.0);
    let n = 100_000;
    for &(t0, y, s) in &[(0.0, 1.0, 0.25), (0.3, -1.0, 0.35), (0.0, 1.0, 3.0)] {
        let l = law(&p, t0, y, s).unwrap();
        let mut rng = PathSeed::new(99, 7).rng();
        let xs: Vec<f64> = (0..n).map(|_| sample_transition(&p, t0, y, s - t0, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (l.variance / n as f64).sqrt();
        let se_var = l.variance * (2.0 / (n - 1) as f64).sqrt();
        assert!((mean - l.mean).abs() < 5.0 * se_mean, "mean {mean} vs {}", l.mean);
        assert!((var - l.variance).abs() < 5.0 * se_var, "var {var} vs {}", l.variance);
    }
}

#[test]
fn substreams_differ() {
    let p = params(3.0, 2.0, 1.0);
    let times = [0.0, 0.5, 1.0];
    let a = simulate_path(&p, &times, 1.0, PathSeed::new(1, 0)).unwrap();
    let b = simulate_path(&p, &times, 1.0, PathSeed::new(1, 1)).unwrap();
    assert_ne!(a.values[1], b.values[1]);
}
