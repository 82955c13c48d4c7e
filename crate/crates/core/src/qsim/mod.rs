//! Dense statevector simulation: gates, circuits, observables, finite-shot
//! sampling, trajectory noise and a small density-matrix reference.

mod circuit;
mod density;
mod gate;
pub(crate) mod kernels;
mod observable;
mod sampling;
mod state;
mod trajectory;

pub use circuit::Circuit;
pub use density::{density_matrix_expectation, DensityMatrix, DENSITY_MAX_QUBITS};
pub use gate::{Gate, GateQubits, Mat2};
pub use observable::{Observable, Pauli, PauliTerm};
pub use sampling::{
    estimate_from_counts, readout_expectation, sample_expectation, MeasurementDistribution,
    PooledCounts,
};
pub use state::{apply_gate, expectation, init_state, StateVector, MAX_QUBITS};
pub use trajectory::{
    run_trajectory, trajectory_counts, trajectory_estimates, trajectory_expectation, TrajectoryEstimate,
    TrajectoryReadout,
};
