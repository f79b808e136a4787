//! Simulation and certification toolkit for a multichannel random-access
//! quantum memory built from atomic frequency combs.
//!
//! - [`quantum`], [`generators`], [`process`]: density matrices, the SU(d)
//!   generator basis and χ-matrix channels.
//! - [`afc`]: single-channel comb efficiency, Stark-pulse control and the
//!   time-bin analyzer.
//! - [`array`]: the channel array, path-qudit storage and crosstalk.
//! - [`schedule`]: random-access read-out planning and simulation.
//! - [`tomography`]: maximum-likelihood state and process reconstruction.
//! - [`certify`]: classical bounds, capacity lower bounds and Schmidt
//!   certificates.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod afc;
pub mod array;
pub mod certify;
pub mod counts;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod optim;
pub mod process;
pub mod quantum;
pub mod rng;
pub mod schedule;
pub mod tomography;

pub use afc::{AnalyzerConfig, CombConfig, Emission, StarkControl, StarkPulse, TimeBinState};
pub use array::{ChannelConfig, CrosstalkModel, PathState, StorageOutput};
pub use certify::{BoundParams, C1Result, ClassicalBound, Q1Result, SchmidtCertificate};
pub use counts::{CountRecord, DetectorConfig, DetectorModel, TimeBin};
pub use error::{Error, ErrorKind, Result};
pub use generators::{su_generators, GeneratorBasis};
pub use linalg::{ComplexMatrix, ComplexVector, MatrixJson, C64};
pub use process::ProcessMatrix;
pub use quantum::{DensityMatrix, PureState};
pub use schedule::{PlanConfig, QubitSlot, RunConfig, RunReport, Schedule};
pub use tomography::{MeasurementSet, MleOptions, QptOptions, QptResult, QstResult};
