use nlpa::beamformers::{build_beamformer, Scheme, SchemeOptions};
use nlpa::channel::ArrayGeometry;
use nlpa::config::ExperimentConfig;
use nlpa::distortion::distortion_covariance;
use nlpa::ee_optimizer::channel_for;
use nlpa::linalg::{hermitian_defect, min_eigenvalue, outer, CMatrix, CVector};
use nlpa::link_metrics::{
    beampattern, consumed_power_single_rf, rank_one_functional, se_functional, se_lower_bound, se_single_rf,
    spectral_efficiency, uniform_angle_grid,
};
use nlpa::oracle::{random_constant_modulus_cov, random_full_rank_cov};
use nlpa::pa_model::PaCoefficients;
use nlpa::rng::rng_from_seed;
use num_complex::Complex64;
use proptest::prelude::*;

const SLACK: f64 = 1e-12;

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn psd(n: usize) -> impl Strategy<Value = CMatrix> {
    (1..=n).prop_flat_map(move |rank| {
        prop::collection::vec(cplx(), n * rank).prop_map(move |v| {
            let a = CMatrix::from_vec(n, rank, v);
            &a * a.adjoint()
        })
    })
}

fn unit(n: usize) -> impl Strategy<Value = CVector> {
    prop::collection::vec(cplx(), n)
        .prop_filter("nonzero", |v| v.iter().any(|z| z.norm() > 1e-3))
        .prop_map(|v| {
            let v = CVector::from_vec(v);
            let norm = v.norm();
            v.unscale(norm)
        })
}

fn sized_psd_and_unit() -> impl Strategy<Value = (CMatrix, CVector)> {
    (1usize..=6).prop_flat_map(|n| (psd(n), unit(n)))
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![
        Just(Scheme::Digital),
        Just(Scheme::Analog),
        Just(Scheme::Hybrid),
        Just(Scheme::QuantizedAnalog)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distortion_covariance_is_hermitian_psd(
        seed in any::<u64>(), n in 1usize..=8, p_db in -20.0..15.0f64, full in any::<bool>(), order in 1usize..=2
    ) {
        let mut rng = rng_from_seed(seed);
        let p = 10f64.powf(p_db / 10.0);
        let cu = if full { random_full_rank_cov(&mut rng, n, p) } else { random_constant_modulus_cov(&mut rng, n, p) };
        let cd = distortion_covariance(&cu, &PaCoefficients::reference().truncated(order)).unwrap();
        let scale = cd.trace().max(f64::MIN_POSITIVE);
        prop_assert!(hermitian_defect(cd.matrix()) <= SLACK * scale.max(1.0));
        prop_assert!(min_eigenvalue(cd.matrix()) >= -SLACK * scale);
    }

    #[test]
    fn linear_pa_has_no_distortion(seed in any::<u64>(), n in 1usize..=6, p in 0.01..50.0f64) {
        let mut rng = rng_from_seed(seed);
        let cu = random_full_rank_cov(&mut rng, n, p);
        let cd = distortion_covariance(&cu, &PaCoefficients::reference().linearized()).unwrap();
        prop_assert!(cd.matrix().norm() == 0.0);
    }

    #[test]
    fn se_functional_monotone_in_psd_order(
        (z, v) in sized_psd_and_unit(), scale in 0.0..2.0f64, a1 in 0.1..10.0f64, a2 in 0.01..2.0f64
    ) {
        let z2 = &z + outer(&v, &v).scale(scale);
        prop_assert!(se_functional(&z2, a1, a2).unwrap() >= se_functional(&z, a1, a2).unwrap() - SLACK);
    }

    #[test]
    fn rank_one_functional_is_a_lower_bound(
        (z, r) in sized_psd_and_unit(), a1 in 0.1..10.0f64, a2 in 0.01..2.0f64
    ) {
        prop_assert!(rank_one_functional(&z, &r, a1, a2) <= se_functional(&z, a1, a2).unwrap() + SLACK);
    }

    #[test]
    fn rank_one_functional_tight_on_principal_direction(
        w in (1usize..=6).prop_flat_map(unit), s in 0.1..5.0f64, a1 in 0.1..10.0f64, a2 in 0.01..2.0f64
    ) {
        let z = outer(&w, &w).scale(s);
        let gap = (rank_one_functional(&z, &w, a1, a2) - se_functional(&z, a1, a2).unwrap()).abs();
        prop_assert!(gap <= 1e-9);
    }

    #[test]
    fn beamformers_meet_power_and_modulus(
        seed in 0u64..10_000, nt in prop::sample::select(vec![4usize, 8, 16]), s in scheme(),
        n_rf in 1usize..=4, n_s_frac in 0.0..1.0f64, p_db in -20.0..15.0f64
    ) {
        let cfg = ExperimentConfig::default();
        let ch = channel_for(&cfg.channel_spec(nt).unwrap(), nt, seed).unwrap();
        let n_s = 1 + ((n_rf - 1) as f64 * n_s_frac) as usize;
        let p = 10f64.powf(p_db / 10.0);
        let bf = build_beamformer(s, &ch, n_rf, n_s, p, &SchemeOptions::default()).unwrap();
        prop_assert!((bf.covariance().trace() - p).abs() <= 1e-9 * p);
        if bf.constant_modulus {
            prop_assert!(bf.modulus_defect() <= 1e-12);
        }
        prop_assert_eq!(bf.constant_modulus, s != Scheme::Digital);
    }

    #[test]
    fn se_nonnegative_and_below_linear_reference(
        seed in 0u64..10_000, nt in prop::sample::select(vec![4usize, 8, 16, 32]), p_db in -20.0..10.0f64
    ) {
        let cfg = ExperimentConfig::default();
        let pa = cfg.pa().unwrap();
        let noise = cfg.budget().unwrap().noise_power;
        let ch = channel_for(&cfg.channel_spec(nt).unwrap(), nt, seed).unwrap();
        let p = 10f64.powf(p_db / 10.0);
        let se = se_single_rf(p, &ch, &pa, noise).unwrap();
        let lin = se_single_rf(p, &ch, &pa.linearized(), noise).unwrap();
        prop_assert!(se >= 0.0);
        prop_assert!(se <= lin + SLACK);
        let bound = se_lower_bound(p, &ch, &pa, noise).unwrap();
        prop_assert!(bound <= se + SLACK);
    }

    #[test]
    fn general_se_nonnegative(
        seed in 0u64..10_000, s in scheme(), n_rf in 1usize..=3, p_db in -20.0..15.0f64
    ) {
        let cfg = ExperimentConfig::default();
        let ch = channel_for(&cfg.channel_spec(8).unwrap(), 8, seed).unwrap();
        let p = 10f64.powf(p_db / 10.0);
        let bf = build_beamformer(s, &ch, n_rf, 1, p, &SchemeOptions::default()).unwrap();
        let se = spectral_efficiency(&ch.h, &bf.covariance(), &cfg.pa().unwrap(), cfg.budget().unwrap().noise_power).unwrap();
        prop_assert!(se >= 0.0 && se.is_finite());
    }

    #[test]
    fn consumed_power_increases_with_input(
        nt in 1usize..=64, lo in -40.0..19.0f64, step in 0.01..1.0f64
    ) {
        let cfg = ExperimentConfig::default();
        let pa = cfg.pa().unwrap();
        let budget = cfg.budget().unwrap();
        let a = consumed_power_single_rf(10f64.powf(lo / 10.0), nt, &pa, &budget).unwrap();
        let b = consumed_power_single_rf(10f64.powf((lo + step) / 10.0), nt, &pa, &budget).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn beampattern_peaks_at_one(seed in any::<u64>(), n in 2usize..=16, full in any::<bool>()) {
        let mut rng = rng_from_seed(seed);
        let cu = if full { random_full_rank_cov(&mut rng, n, 1.0) } else { random_constant_modulus_cov(&mut rng, n, 1.0) };
        let bp = beampattern(&cu, &ArrayGeometry::half_wavelength(n), &uniform_angle_grid(256)).unwrap();
        let top = bp.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((top - 1.0).abs() <= 1e-12);
        prop_assert!(bp.values.iter().all(|v| *v >= -1e-12));
    }
}
