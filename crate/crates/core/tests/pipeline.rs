use std::collections::BTreeMap;

use qmem_core::afc::{fit_gamma_tilde, CombConfig};
use qmem_core::array::{common_controls, default_array, ideal_array, store_and_retrieve, CrosstalkModel, PathState};
use qmem_core::certify;
use qmem_core::linalg::c;
use qmem_core::quantum::fidelity_pure;
use qmem_core::schedule::{build_schedule, demo_qubits, raqm_comb, run_schedule, PlanConfig, RunConfig};
use qmem_core::tomography::{self, CountModel, MeasurementSet, MleOptions, QptOptions, StateNoise};
use qmem_core::{AnalyzerConfig, DensityMatrix, MatrixJson, ProcessMatrix, Schedule};

fn device_comb() -> CombConfig {
    CombConfig::device(fit_gamma_tilde(0.5e-6, 0.392, 1.0e-6, 0.313).unwrap())
}

#[test]
fn stored_path_qudit_survives_tomography() {
    let array = default_array(device_comb());
    let channels = vec![5, 6, 7, 8];
    let psi =
        PathState::normalized(channels.clone(), vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(1.0, 0.0)]).unwrap();
    let controls = common_controls(&array, &channels, 2).unwrap();
    let out = store_and_retrieve(&psi, &array, &CrosstalkModel::default(), &controls).unwrap();
    let target = psi.to_pure_state();
    let stored = fidelity_pure(&out.density, &target).unwrap();
    assert!(stored > 0.99, "{stored}");

    let meas = MeasurementSet::standard(4).unwrap();
    let counts =
        tomography::synthetic_state_counts(&out.density, &meas, &CountModel::expected(1e6), &StateNoise::default(), 0)
            .unwrap();
    let res = tomography::qst_mle(&counts, &meas, &MleOptions::default()).unwrap();
    assert!((fidelity_pure(&res.rho, &target).unwrap() - stored).abs() < 1e-4);
}

#[test]
fn crosstalk_free_storage_is_lossless_in_fidelity() {
    let array = ideal_array(device_comb());
    let psi = PathState::normalized(vec![3, 4], vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
    let out = store_and_retrieve(&psi, &array, &CrosstalkModel::none(), &BTreeMap::new()).unwrap();
    assert!((fidelity_pure(&out.density, &psi.to_pure_state()).unwrap() - 1.0).abs() < 1e-12);

    // Unequal collection efficiencies tilt the detected superposition.
    let tilted =
        store_and_retrieve(&psi, &default_array(device_comb()), &CrosstalkModel::none(), &BTreeMap::new()).unwrap();
    let (a, b): (f64, f64) = (0.16 + 0.036 * 2.0, 0.16 + 0.036 * 3.0);
    let oracle = (a.sqrt() + b.sqrt()).powi(2) / (2.0 * (a + b));
    assert!((fidelity_pure(&tilted.density, &psi.to_pure_state()).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn reconstructed_process_feeds_certification() {
    let truth = ProcessMatrix::dephasing(2, 0.1).unwrap();
    let sets = MeasurementSet::standard(2).unwrap();
    let counts = tomography::synthetic_process_counts(&truth, &sets, &sets, &CountModel::expected(1e5), 0).unwrap();
    let fit = tomography::qpt_mle(&counts, &sets, &sets, &QptOptions::default()).unwrap();
    assert!((fit.chi.identity_fidelity() - 0.95).abs() < 1e-4);
    assert!(fit.tp_residual < 1e-6);

    let json = serde_json::to_string(&fit.chi.to_json()).unwrap();
    let back = ProcessMatrix::from_json(&serde_json::from_str::<MatrixJson>(&json).unwrap()).unwrap();
    assert_eq!(back, fit.chi);

    let cert = certify::schmidt_certificate(&back).unwrap();
    assert_eq!(cert.schmidt_number, 2);
    let c1 = certify::c1_lower_bound(&back, 2, 2, 0).unwrap();
    assert!((c1.c1 - 1.0).abs() < 1e-3);
    let q1 = certify::q1_lower_bound(&back, 2, 0).unwrap();
    let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
    assert!((q1.q1 - (1.0 - h(0.05))).abs() < 1e-3);
}

#[test]
fn density_json_is_bit_stable() {
    let v = qmem_core::ComplexVector::from_vec(vec![c(0.1, 0.3), c(-0.7, 1.0 / 3.0), c(0.2, -0.9)]);
    let m = &v * v.adjoint() + qmem_core::ComplexMatrix::identity(3, 3) * c(0.1, 0.0);
    let mixed = DensityMatrix::from_unnormalized(m).unwrap();
    let json = serde_json::to_string(&mixed.to_json()).unwrap();
    let back = DensityMatrix::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(back, mixed);
}

#[test]
fn schedule_round_trips_and_replays() {
    let comb = raqm_comb();
    let array = default_array(comb);
    let s = build_schedule(&demo_qubits(), &[3, 1, 2], &array, &PlanConfig::default()).unwrap();
    let back: Schedule = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
    let analyzer = AnalyzerConfig::balanced(s.bin_separation, 0.0);
    let a = run_schedule(&s, &array, &analyzer, &RunConfig::default(), 4).unwrap();
    let b = run_schedule(&back, &array, &analyzer, &RunConfig::default(), 4).unwrap();
    assert_eq!(a, b);
    assert!(a.qubits.iter().all(|q| q.f_total > 0.99));
}
