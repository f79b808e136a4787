//! Benchmark fixtures shared by the criterion targets.

use qmem_core::linalg::c;
use qmem_core::tomography::{self, CountModel, MeasurementSet, StateNoise};
use qmem_core::{ComplexVector, DensityMatrix, ProcessMatrix, PureState};

/// Equal superposition over `d` paths.
pub fn uniform_state(d: usize) -> PureState {
    PureState::normalized(ComplexVector::from_vec(vec![c(1.0, 0.0); d])).expect("non-zero vector")
}

/// Expected counts for the standard measurement set.
pub fn state_counts(d: usize) -> (Vec<f64>, MeasurementSet) {
    let meas = MeasurementSet::standard(d).expect("standard set");
    let rho = DensityMatrix::from_pure(&uniform_state(d));
    let counts = tomography::synthetic_state_counts(&rho, &meas, &CountModel::expected(1e5), &StateNoise::default(), 0)
        .expect("counts");
    (counts, meas)
}

/// Expected process counts for a depolarizing channel.
pub fn process_counts(d: usize, p: f64) -> (Vec<Vec<f64>>, MeasurementSet) {
    let sets = MeasurementSet::standard(d).expect("standard set");
    let chi = ProcessMatrix::depolarizing(d, p).expect("valid channel");
    let counts =
        tomography::synthetic_process_counts(&chi, &sets, &sets, &CountModel::expected(1e5), 0).expect("counts");
    (counts, sets)
}
