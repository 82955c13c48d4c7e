use serde::{Deserialize, Serialize};

use super::gate::Gate;
use super::state::{StateVector, MAX_QUBITS};
use crate::error::{QrlError, Result};

/// Gates grouped into moments; gates inside a moment act on disjoint qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    moments: Vec<Vec<Gate>>,
    #[serde(skip)]
    frontier: Vec<usize>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QrlError::Resource(format!(
                "{n_qubits} qubits requested, supported range is 1..={MAX_QUBITS}"
            )));
        }
        Ok(Self {
            n_qubits,
            moments: Vec::new(),
            frontier: vec![0; n_qubits],
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn moments(&self) -> &[Vec<Gate>] {
        &self.moments
    }

    /// Appends `gate` to the earliest moment after the last one touching its qubits.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if self.frontier.len() != self.n_qubits {
            self.rebuild_frontier();
        }
        let qs = gate.qubits();
        let slot = qs.as_slice().iter().map(|&q| self.frontier[q]).max().unwrap_or(0);
        if slot == self.moments.len() {
            self.moments.push(Vec::new());
        }
        self.moments[slot].push(gate);
        for &q in qs.as_slice() {
            self.frontier[q] = slot + 1;
        }
        Ok(())
    }

    /// Appends a whole moment after all existing ones.
    pub fn push_moment(&mut self, gates: Vec<Gate>) -> Result<()> {
        let mut used = 0usize;
        for g in &gates {
            g.validate(self.n_qubits)?;
            for &q in g.qubits().as_slice() {
                if used & (1 << q) != 0 {
                    return Err(QrlError::InvalidArgument(format!(
                        "qubit {q} used twice in one moment"
                    )));
                }
                used |= 1 << q;
            }
        }
        self.moments.push(gates);
        let t = self.moments.len();
        self.frontier = vec![t; self.n_qubits];
        Ok(())
    }

    fn rebuild_frontier(&mut self) {
        self.frontier = vec![0; self.n_qubits];
        for (t, m) in self.moments.iter().enumerate() {
            for g in m {
                for &q in g.qubits().as_slice() {
                    self.frontier[q] = t + 1;
                }
            }
        }
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.moments.iter().flatten()
    }

    pub fn n_gates(&self) -> usize {
        self.moments.iter().map(Vec::len).sum()
    }

    /// Gate count with every ZZ gate counted as two CNOTs plus one Z rotation.
    pub fn decomposed_gate_count(&self) -> usize {
        self.gates()
            .map(|g| if matches!(g, Gate::Zz { .. }) { 3 } else { 1 })
            .sum()
    }

    /// Noise-free output state.
    pub fn simulate(&self) -> Result<StateVector> {
        let mut s = StateVector::new(self.n_qubits)?;
        for g in self.gates() {
            s.apply_unchecked(g);
        }
        Ok(s)
    }
}
