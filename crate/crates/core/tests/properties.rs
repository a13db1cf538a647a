use proptest::prelude::*;
use qroulette::estimators::{intensity_estimator, richter_kernel};
use qroulette::montecarlo::{simulate, ExperimentConfig};
use qroulette::naimark::{build_extension, random_spec, verify_extension};
use qroulette::noise::{
    added_noise, delta_rh, heterodyne_variance, roulette_variance, squeezed_delta_rh, threshold_n, NoiseReport,
    Verdict,
};
use qroulette::pom::{direct_detection_pmf, RouletteLaw};
use qroulette::states::{moments, photon_distribution, DEFAULT_TAIL_BOUND};
use qroulette::{DetectorConfig, Efficiency, Scheme, StateSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn efficiency() -> impl Strategy<Value = Efficiency> {
    (1e-3f64..=1.0).prop_map(|e| Efficiency::new(e).unwrap())
}

fn moment_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.0f64..100.0, 0.0f64..100.0).prop_map(|(mean, var)| (mean, mean * mean + var))
}

fn state() -> impl Strategy<Value = StateSpec> {
    prop_oneof![
        (0.0f64..20.0).prop_map(StateSpec::coherent),
        (0.0f64..5.0).prop_map(StateSpec::thermal),
        (0usize..40).prop_map(StateSpec::fock),
        (0.0f64..6.0, 0.0f64..=1.0).prop_map(|(n, b)| StateSpec::squeezed(n, b)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn added_noise_is_positive((mean, mean_sq) in moment_pair(), eta in efficiency()) {
        prop_assert!(added_noise(Scheme::Roulette, mean, mean_sq, eta).unwrap() > 0.0);
        prop_assert!(added_noise(Scheme::Heterodyne, mean, mean_sq, eta).unwrap() > 0.0);
    }

    #[test]
    fn delta_rh_is_the_variance_difference((mean, mean_sq) in moment_pair(), eta in efficiency()) {
        let diff = roulette_variance(mean, mean_sq, eta).unwrap() - heterodyne_variance(mean, mean_sq, eta).unwrap();
        let d = delta_rh(mean, mean_sq, eta).unwrap();
        let scale = mean_sq.max(1.0) + 1.0 / (eta.value() * eta.value());
        prop_assert!((diff - d).abs() <= 1e-12 * scale, "{diff} vs {d}");
    }

    #[test]
    fn threshold_decreases_with_efficiency(a in 1e-3f64..1.0, b in 1e-3f64..1.0) {
        prop_assume!(a < b);
        prop_assert!(threshold_n(Efficiency::new(a).unwrap()) > threshold_n(Efficiency::new(b).unwrap()));
    }

    #[test]
    fn fock_sign_rule(n in 0usize..200, eta in efficiency()) {
        let nf = n as f64;
        let d = delta_rh(nf, nf * nf, eta).unwrap();
        let t = threshold_n(eta);
        prop_assume!((nf - t).abs() > 1e-9);
        prop_assert_eq!(d > 0.0, nf > t);
        let verdict = NoiseReport::new(nf, nf * nf, eta).unwrap().verdict();
        prop_assert_eq!(verdict == Verdict::Heterodyne, nf > t);
    }

    #[test]
    fn squeezed_formula_is_twice_the_general_difference(total in 0.0f64..6.0, beta in 0.0f64..=1.0, eta in efficiency()) {
        let m = moments(&photon_distribution(&StateSpec::squeezed(total, beta), DEFAULT_TAIL_BOUND).unwrap());
        let general = delta_rh(m.mean, m.mean_sq, eta).unwrap();
        let closed = squeezed_delta_rh(total, beta, eta);
        let scale = 1.0 + closed.abs();
        prop_assert!((closed - 2.0 * general).abs() <= 1e-6 * scale, "{closed} vs 2 x {general}");
    }

    #[test]
    fn photon_statistics_invariants(spec in state()) {
        let s = photon_distribution(&spec, DEFAULT_TAIL_BOUND).unwrap();
        prop_assert!(s.rho().iter().all(|&p| p >= 0.0));
        let total = s.total_mass();
        prop_assert!(total >= 1.0 - DEFAULT_TAIL_BOUND && total <= 1.0 + 1e-12, "{total}");
    }

    #[test]
    fn state_grammar_round_trips(spec in state()) {
        let text = spec.to_string();
        prop_assert_eq!(text.parse::<StateSpec>().unwrap(), spec);
    }

    #[test]
    fn densities_are_nonnegative(spec in state(), eta in efficiency(), x in -8.0f64..8.0) {
        let s = photon_distribution(&spec, DEFAULT_TAIL_BOUND).unwrap();
        let law = RouletteLaw::new(&s, eta);
        prop_assert!(law.density_x(x) >= 0.0);
        prop_assert!(law.density_y(x) >= 0.0);
    }

    #[test]
    fn thinning_preserves_mass_and_scales_the_mean(spec in state(), eta in efficiency()) {
        let s = photon_distribution(&spec, DEFAULT_TAIL_BOUND).unwrap();
        let q = direct_detection_pmf(&s, eta);
        let mass: f64 = q.iter().sum();
        prop_assert!((mass - s.total_mass()).abs() <= 1e-12);
        let mean_q: f64 = q.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        let mean = moments(&s).mean;
        prop_assert!((mean_q - eta.value() * mean).abs() <= 1e-10 * (1.0 + mean));
    }

    #[test]
    fn diagonal_kernel_is_the_estimator(x in -5.0f64..5.0, phi in 0.0f64..6.3) {
        let k = richter_kernel(1, 1, x, phi).unwrap();
        prop_assert_eq!(k.im, 0.0);
        prop_assert!((k.re - intensity_estimator(x, Efficiency::ONE)).abs() <= 1e-12 * (1.0 + x * x));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_extensions_satisfy_the_partial_trace_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 8, 4).unwrap();
        let report = verify_extension(&spec, &build_extension(&spec)).unwrap();
        prop_assert!(report.max_orthogonality_residual >= 0.0);
        prop_assert!(report.max_residual() <= 1e-12, "{report:?}");
    }

    #[test]
    fn simulation_ignores_worker_count(seed in any::<u64>(), workers in 2usize..9, scheme_index in 0usize..3) {
        let scheme = Scheme::ALL[scheme_index];
        let config = ExperimentConfig::new(
            StateSpec::coherent(2.0),
            DetectorConfig::new(scheme, 0.6).unwrap(),
            10_000,
            seed,
        );
        let one = simulate(&config).unwrap();
        let many = simulate(&config.with_workers(workers)).unwrap();
        prop_assert_eq!(one, many);
    }
}
