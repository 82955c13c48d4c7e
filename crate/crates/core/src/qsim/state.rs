use num_complex::Complex64 as C64;

use super::gate::{Gate, Mat2};
use super::kernels;
use super::observable::{Observable, Pauli};
use crate::error::{QrlError, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

/// Dense pure state of `n_qubits` qubits; qubit 0 is the least-significant index bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

/// `|0…0⟩` on `n_qubits` qubits.
pub fn init_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::new(n_qubits)
}

impl StateVector {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QrlError::Resource(format!(
                "{n_qubits} qubits requested, supported range is 1..={MAX_QUBITS}"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two within the qubit cap.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QrlError::InvalidArgument(format!(
                "amplitude length {len} is not a power of two"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QrlError::Resource(format!("{n_qubits} qubits exceeds cap")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amps {
                *a *= inv;
            }
        }
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        kernels::apply_gate(&mut self.amps, gate, false, 0);
        Ok(())
    }

    /// Consuming form of [`StateVector::apply`].
    pub fn apply_gate(mut self, gate: &Gate) -> Result<Self> {
        self.apply(gate)?;
        Ok(self)
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        kernels::apply_gate(&mut self.amps, gate, false, 0);
    }

    pub(crate) fn apply_pauli(&mut self, q: usize, p: Pauli) {
        match p {
            Pauli::X => kernels::apply_x(&mut self.amps, q),
            Pauli::Y => kernels::apply_y(&mut self.amps, q, false),
            Pauli::Z => kernels::apply_z(&mut self.amps, q),
        }
    }

    /// Apply an arbitrary 2×2 operator without renormalising.
    pub(crate) fn apply_operator(&mut self, q: usize, m: &Mat2) {
        kernels::apply_op_1q(&mut self.amps, q, m, false);
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Exact `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, obs: &Observable) -> f64 {
        obs.terms()
            .iter()
            .map(|t| t.coeff * pauli_expectation(&self.amps, t.x_mask(), t.z_mask(), t.n_y()))
            .sum()
    }
}

/// `⟨ψ|P|ψ⟩` for `P = i^{n_y} X^{x} Z^{z}` (z includes the Y positions).
pub(crate) fn pauli_expectation(amps: &[C64], x_mask: usize, z_mask: usize, n_y: u32) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for (b, a) in amps.iter().enumerate() {
        let sign = if (b & z_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        acc += amps[b ^ x_mask].conj() * *a * sign;
    }
    let phase = match n_y % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    (acc * phase).re
}

/// `⟨O⟩` of a normalised state; the free-function form of [`StateVector::expectation`].
pub fn expectation(state: &StateVector, obs: &Observable) -> f64 {
    state.expectation(obs)
}

/// Consuming gate application.
pub fn apply_gate(state: StateVector, gate: &Gate) -> Result<StateVector> {
    state.apply_gate(gate)
}
