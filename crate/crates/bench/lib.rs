//! Shared fixtures for the benchmarks.

use qrl_core::ansatz::{build, AnsatzInput, AnsatzKind, AnsatzSpec};
use qrl_core::qsim::Observable;
use qrl_core::{Result, RngStream};

/// Ansatz, feature input, `Z^{⊗n}` and parameters for a CartPole-sized policy circuit.
pub struct Fixture {
    pub spec: AnsatzSpec,
    pub input: AnsatzInput,
    pub observable: Observable,
    pub theta: Vec<f64>,
}

pub fn policy_fixture(n_qubits: usize, layers: usize) -> Result<Fixture> {
    let spec = build(AnsatzKind::HwePg, n_qubits, layers)?;
    let theta = spec.init_params(&mut RngStream::new(7, 0)).theta;
    let qubits: Vec<usize> = (0..n_qubits).collect();
    Ok(Fixture {
        input: AnsatzInput::Features(vec![0.3; n_qubits]),
        observable: Observable::z_string(&qubits),
        spec,
        theta,
    })
}
