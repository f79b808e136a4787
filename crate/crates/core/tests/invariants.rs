use proptest::prelude::*;
use qmem_core::afc::{afc_efficiency, CombConfig};
use qmem_core::certify::{self, BoundParams};
use qmem_core::counts::sample_counts;
use qmem_core::linalg::{c, eigh, random_unitary};
use qmem_core::process::apply_channel;
use qmem_core::rng::substream;
use qmem_core::schedule::{build_schedule, demo_qubits, raqm_comb, validate_schedule, PlanConfig};
use qmem_core::tomography::{rho_from_t, t_from_psd};
use qmem_core::{ComplexMatrix, DensityMatrix, DetectorConfig, ProcessMatrix};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_parameter_vector_gives_a_state(d in 2usize..6, t in prop::collection::vec(-3.0f64..3.0, 36)) {
        prop_assume!(t[..d].iter().any(|x| x.abs() > 1e-3));
        let rho = rho_from_t(&t[..d * d], d).unwrap();
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.eigenvalues().iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn parameterization_round_trips(seed in 0u64..5000, d in 2usize..5) {
        let u = random_unitary(d, &mut substream(seed, "u"));
        let diag: Vec<f64> = (0..d).map(|k| 1.0 + k as f64).collect();
        let m = &u * ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, diag.iter().map(|&x| c(x, 0.0)))) * u.adjoint();
        let rho = rho_from_t(&t_from_psd(&m).unwrap(), d).unwrap();
        let expect = m.unscale(diag.iter().sum());
        prop_assert!((rho.matrix() - expect).norm() < 1e-10);
    }

    #[test]
    fn random_unitary_channels_preserve_trace_and_spectrum(seed in 0u64..5000, d in 2usize..5) {
        let u = random_unitary(d, &mut substream(seed, "u"));
        let chi = ProcessMatrix::unitary(&u).unwrap();
        prop_assert!((chi.identity_fidelity() - (u.trace().norm_sqr() / (d * d) as f64)).abs() < 1e-10);
        let v = random_unitary(d, &mut substream(seed, "v"));
        let rho = DensityMatrix::from_unnormalized(&v * ComplexMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |k, _| c(k as f64 + 0.5, 0.0))) * v.adjoint()).unwrap();
        let out = apply_channel(&chi, &rho).unwrap();
        let mut a = rho.eigenvalues();
        let mut b = out.eigenvalues();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn classical_bound_falls_with_efficiency(d in 2usize..7, mu in 0.01f64..2.0, e1 in 0.001f64..1.0, e2 in 0.001f64..1.0) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let f = |eta_m| certify::classical_bound(&BoundParams { d, mu, eta_m }).unwrap().fidelity;
        prop_assert!(f(lo) + 1e-12 >= f(hi));
        prop_assert!(f(lo) <= 1.0 + 1e-12 && f(hi) >= 1.0 / d as f64 - 1e-12);
    }

    #[test]
    fn efficiency_never_increases_with_storage_time(depth in 0.5f64..30.0, g in 0.0f64..2e6, t1 in 0.0f64..5e-6, t2 in 0.0f64..5e-6) {
        let comb = CombConfig::new(1e6, 8.7, depth, g).unwrap();
        let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(afc_efficiency(&comb, b) <= afc_efficiency(&comb, a) + 1e-15);
    }

    #[test]
    fn counts_depend_only_on_the_seed(seed in 0u64..10_000, p in 0.0f64..1.0) {
        let draw = || sample_counts(&[p, 1.0 - p], 10_000, 0.5, &DetectorConfig::default(), &mut substream(seed, "bins")).unwrap();
        prop_assert_eq!(draw(), draw());
    }

    #[test]
    fn every_read_order_plans_cleanly(rise in 0.2e-6f64..2.5e-6, order in Just(vec![1usize, 2, 3]).prop_shuffle()) {
        let comb = raqm_comb();
        let array = qmem_core::array::default_array(comb);
        let cfg = PlanConfig { aod_rise_time: rise, ..Default::default() };
        let s = build_schedule(&demo_qubits(), &order, &array, &cfg).unwrap();
        prop_assert_eq!(s.read_order(), order);
        prop_assert!(validate_schedule(&s, &comb).is_empty());
    }
}

#[test]
fn choi_state_of_unitary_is_pure() {
    let u = random_unitary(3, &mut substream(9, "u"));
    let chi = ProcessMatrix::unitary(&u).unwrap();
    let basis = qmem_core::su_generators(3).unwrap();
    let j = qmem_core::process::choi_state(&chi, &basis).unwrap();
    let e = eigh(j.matrix()).unwrap();
    let top = e.values.iter().cloned().fold(f64::MIN, f64::max);
    assert!((top - 1.0).abs() < 1e-10);
}
