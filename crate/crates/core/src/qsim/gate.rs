use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QrlError, Result};

/// A primitive gate. Rotations are `exp(-i·angle·P/2)` for their Pauli generator
/// `P`; the generator of `Zz` is `Z⊗Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    Rx { qubit: usize, angle: f64 },
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Cz { a: usize, b: usize },
    Cnot { control: usize, target: usize },
    Zz { a: usize, b: usize, angle: f64 },
    X { qubit: usize },
    Y { qubit: usize },
    Z { qubit: usize },
}

/// Qubits touched by a gate, at most two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateQubits {
    q: [usize; 2],
    len: usize,
}

impl GateQubits {
    pub fn as_slice(&self) -> &[usize] {
        &self.q[..self.len]
    }
}

pub type Mat2 = [[C64; 2]; 2];

impl Gate {
    pub fn qubits(&self) -> GateQubits {
        match *self {
            Gate::Rx { qubit, .. }
            | Gate::Ry { qubit, .. }
            | Gate::Rz { qubit, .. }
            | Gate::X { qubit }
            | Gate::Y { qubit }
            | Gate::Z { qubit } => GateQubits {
                q: [qubit, 0],
                len: 1,
            },
            Gate::Cz { a, b } | Gate::Zz { a, b, .. } => GateQubits { q: [a, b], len: 2 },
            Gate::Cnot { control, target } => GateQubits {
                q: [control, target],
                len: 2,
            },
        }
    }

    pub fn arity(&self) -> usize {
        self.qubits().len
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { angle, .. }
            | Gate::Ry { angle, .. }
            | Gate::Rz { angle, .. }
            | Gate::Zz { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Same gate with the rotation angle replaced; non-rotations are returned unchanged.
    pub fn with_angle(self, new_angle: f64) -> Gate {
        match self {
            Gate::Rx { qubit, .. } => Gate::Rx { qubit, angle: new_angle },
            Gate::Ry { qubit, .. } => Gate::Ry { qubit, angle: new_angle },
            Gate::Rz { qubit, .. } => Gate::Rz { qubit, angle: new_angle },
            Gate::Zz { a, b, .. } => Gate::Zz { a, b, angle: new_angle },
            g => g,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        for &q in qs.as_slice() {
            if q >= n_qubits {
                return Err(QrlError::InvalidQubit { index: q, n_qubits });
            }
        }
        if qs.len == 2 && qs.q[0] == qs.q[1] {
            return Err(QrlError::InvalidArgument(format!(
                "two-qubit gate on repeated qubit {}",
                qs.q[0]
            )));
        }
        if let Some(a) = self.angle() {
            if !a.is_finite() {
                return Err(QrlError::InvalidArgument("non-finite gate angle".into()));
            }
        }
        Ok(())
    }

    /// 2×2 unitary of a single-qubit gate.
    pub fn matrix_1q(&self) -> Option<Mat2> {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        Some(match *self {
            Gate::Rx { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
            }
            Gate::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
            }
            Gate::Rz { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                [[C64::new(c, -s), z], [z, C64::new(c, s)]]
            }
            Gate::X { .. } => [[z, one], [one, z]],
            Gate::Y { .. } => [[z, -i], [i, z]],
            Gate::Z { .. } => [[one, z], [z, -one]],
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_out_of_range() {
        assert!(Gate::Rx { qubit: 3, angle: 0.1 }.validate(3).is_err());
        assert!(Gate::Cz { a: 1, b: 1 }.validate(3).is_err());
        assert!(Gate::Cnot { control: 0, target: 2 }.validate(3).is_ok());
    }

    #[test]
    fn single_qubit_matrices_are_unitary() {
        for g in [
            Gate::Rx { qubit: 0, angle: 0.3 },
            Gate::Ry { qubit: 0, angle: -1.1 },
            Gate::Rz { qubit: 0, angle: 2.5 },
            Gate::Y { qubit: 0 },
        ] {
            let m = g.matrix_1q().unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    let dot: C64 = (0..2).map(|k| m[k][r].conj() * m[k][c]).sum();
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((dot - C64::new(expect, 0.0)).norm() < 1e-14);
                }
            }
        }
    }
}
