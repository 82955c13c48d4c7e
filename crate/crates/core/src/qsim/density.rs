//! Exact density-matrix evolution for small registers, used as a reference
//! for the trajectory sampler.
//!
//! `ρ` is stored as a vector of length `4^n` with `ρ[r][c]` at `r | c << n`,
//! so a gate `U` acts as `U` on the low `n` bits and `conj(U)` on the high ones.

use num_complex::Complex64 as C64;

use super::circuit::Circuit;
use super::gate::Mat2;
use super::kernels;
use super::observable::{Observable, Pauli};
use super::trajectory::{noise_schedule, NoiseOp};
use crate::error::{QrlError, Result};
use crate::noise::{NoiseConfig, ShotSetting};

/// Largest register the oracle accepts.
pub const DENSITY_MAX_QUBITS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    /// `|0…0⟩⟨0…0|`.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > DENSITY_MAX_QUBITS {
            return Err(QrlError::Resource(format!(
                "density matrix supports 1..={DENSITY_MAX_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let mut data = vec![C64::new(0.0, 0.0); 1 << (2 * n_qubits)];
        data[0] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Entry `ρ[row][col]`.
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row | (col << self.n_qubits)]
    }

    pub fn trace(&self) -> C64 {
        (0..1usize << self.n_qubits).map(|b| self.get(b, b)).sum()
    }

    fn conjugate_by(&mut self, f: impl Fn(&mut [C64], usize, bool)) {
        f(&mut self.data, 0, false);
        f(&mut self.data, self.n_qubits, true);
    }

    fn apply_pauli(data: &mut [C64], q: usize, p: Pauli, conj: bool) {
        match p {
            Pauli::X => kernels::apply_x(data, q),
            Pauli::Y => kernels::apply_y(data, q, conj),
            Pauli::Z => kernels::apply_z(data, q),
        }
    }

    /// `Σ_k w_k P_k ρ P_k†` over the supplied Pauli strings plus `w_id·ρ`.
    fn pauli_mix(&mut self, w_id: f64, strings: &[(f64, Vec<(usize, Pauli)>)]) {
        let mut out: Vec<C64> = self.data.iter().map(|v| v * w_id).collect();
        let n = self.n_qubits;
        for (w, factors) in strings {
            let mut d = self.data.clone();
            for &(q, p) in factors {
                Self::apply_pauli(&mut d, q, p, false);
                Self::apply_pauli(&mut d, q + n, p, true);
            }
            for (o, v) in out.iter_mut().zip(&d) {
                *o += v * *w;
            }
        }
        self.data = out;
    }

    fn kraus_1q(&mut self, q: usize, ops: &[Mat2]) {
        let n = self.n_qubits;
        let mut out = vec![C64::new(0.0, 0.0); self.data.len()];
        for k in ops {
            let mut d = self.data.clone();
            kernels::apply_op_1q(&mut d, q, k, false);
            kernels::apply_op_1q(&mut d, q + n, k, true);
            for (o, v) in out.iter_mut().zip(&d) {
                *o += v;
            }
        }
        self.data = out;
    }

    pub(crate) fn apply_op(&mut self, op: &NoiseOp) {
        const PS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
        match *op {
            NoiseOp::Gate(g) => self.conjugate_by(|d, off, conj| kernels::apply_gate(d, &g, conj, off)),
            NoiseOp::Depol1 { q, p } => {
                let strings: Vec<_> = PS.iter().map(|&s| (p / 3.0, vec![(q, s)])).collect();
                self.pauli_mix(1.0 - p, &strings);
            }
            NoiseOp::Depol2 { a, b, p } => {
                let mut strings = Vec::with_capacity(15);
                for k in 1..16usize {
                    let mut f = Vec::new();
                    if k % 4 != 0 {
                        f.push((a, PS[k % 4 - 1]));
                    }
                    if k / 4 != 0 {
                        f.push((b, PS[k / 4 - 1]));
                    }
                    strings.push((p / 15.0, f));
                }
                self.pauli_mix(1.0 - p, &strings);
            }
            NoiseOp::AmpDamp { q, gamma } => {
                let z = C64::new(0.0, 0.0);
                let k0 = [[C64::new(1.0, 0.0), z], [z, C64::new((1.0 - gamma).sqrt(), 0.0)]];
                let k1 = [[z, C64::new(gamma.sqrt(), 0.0)], [z, z]];
                self.kraus_1q(q, &[k0, k1]);
            }
        }
    }

    /// `Tr(Oρ)`.
    pub fn expectation(&self, obs: &Observable) -> f64 {
        self.expectation_with_readout(obs, 0.0)
    }

    /// `Tr(Oρ)` with every measured factor passed through a bit-flip of probability `p_flip`.
    pub fn expectation_with_readout(&self, obs: &Observable, p_flip: f64) -> f64 {
        let dim = 1usize << self.n_qubits;
        let damp = 1.0 - 2.0 * p_flip;
        obs.terms()
            .iter()
            .map(|t| {
                let (x, z) = (t.x_mask(), t.z_mask());
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..dim {
                    let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    acc += self.get(b, b ^ x) * sign;
                }
                let phase = C64::new(0.0, 1.0).powu(t.n_y());
                t.coeff * damp.powi(t.weight() as i32) * (acc * phase).re
            })
            .sum()
    }
}

/// Exact channel expectation of `obs` after `circuit` under incoherent `noise`.
pub fn density_matrix_expectation(circuit: &Circuit, obs: &Observable, noise: &NoiseConfig) -> Result<f64> {
    noise.validate()?;
    let parts = noise.parts();
    if parts.sigma != 0.0 || parts.shots != ShotSetting::Exact {
        return Err(QrlError::InvalidArgument(
            "density oracle takes exact, depolarizing or hardware noise".into(),
        ));
    }
    if obs.min_qubits() > circuit.n_qubits() {
        return Err(QrlError::InvalidQubit {
            index: obs.min_qubits() - 1,
            n_qubits: circuit.n_qubits(),
        });
    }
    let mut rho = DensityMatrix::new(circuit.n_qubits())?;
    for op in noise_schedule(circuit, parts.channel.as_ref()) {
        rho.apply_op(&op);
    }
    let flip = parts.channel.map(|c| c.meas_bitflip()).unwrap_or(0.0);
    Ok(rho.expectation_with_readout(obs, flip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::HardwareNoise;
    use crate::qsim::Gate;

    fn hw(p1: f64, p2: f64, g: f64, pm: f64) -> NoiseConfig {
        NoiseConfig::CustomHardware(HardwareNoise {
            depol_1q: p1,
            depol_2q: p2,
            amp_damp: g,
            meas_bitflip: pm,
        })
    }

    #[test]
    fn noiseless_matches_statevector() {
        let mut c = Circuit::new(3).unwrap();
        c.push(Gate::Rx { qubit: 0, angle: 0.4 }).unwrap();
        c.push(Gate::Ry { qubit: 1, angle: 1.1 }).unwrap();
        c.push(Gate::Cnot { control: 0, target: 2 }).unwrap();
        c.push(Gate::Zz { a: 1, b: 2, angle: 0.9 }).unwrap();
        c.push(Gate::Rx { qubit: 2, angle: -0.3 }).unwrap();
        let s = c.simulate().unwrap();
        for o in [
            Observable::z_string(&[0, 2]),
            Observable::pauli(1.0, &[(0, Pauli::X), (1, Pauli::Y)]).unwrap(),
            Observable::pauli(0.5, &[(2, Pauli::Y)]).unwrap(),
        ] {
            let d = density_matrix_expectation(&c, &o, &NoiseConfig::Exact).unwrap();
            assert!((d - s.expectation(&o)).abs() < 1e-12);
            let d = density_matrix_expectation(&c, &o, &NoiseConfig::depolarizing(0.0)).unwrap();
            assert!((d - s.expectation(&o)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_qubit_depolarizing() {
        let mut c = Circuit::new(1).unwrap();
        c.push(Gate::Rz { qubit: 0, angle: 0.0 }).unwrap();
        for p in [0.0, 0.01, 0.3, 0.75] {
            let v = density_matrix_expectation(&c, &Observable::z(0), &NoiseConfig::depolarizing(p)).unwrap();
            assert!((v - (1.0 - 4.0 * p / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitude_damping_half() {
        let mut c = Circuit::new(1).unwrap();
        c.push(Gate::X { qubit: 0 }).unwrap();
        let v = density_matrix_expectation(&c, &Observable::z(0), &hw(0.0, 0.0, 0.5, 0.0)).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn channels_preserve_trace() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::Ry { qubit: 0, angle: 0.8 }).unwrap();
        c.push(Gate::Zz { a: 0, b: 1, angle: 0.6 }).unwrap();
        let parts = hw(0.1, 0.2, 0.1, 0.1).parts();
        let mut rho = DensityMatrix::new(2).unwrap();
        for op in noise_schedule(&c, parts.channel.as_ref()) {
            rho.apply_op(&op);
        }
        assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        for r in 0..4 {
            for col in 0..4 {
                assert!((rho.get(r, col) - rho.get(col, r).conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_qubit_depolarizing_fully_mixes_at_15_16() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::Cz { a: 0, b: 1 }).unwrap();
        let v = density_matrix_expectation(&c, &Observable::z(0), &hw(0.0, 15.0 / 16.0, 0.0, 0.0)).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn bitflip_scales_weight() {
        let c = Circuit::new(2).unwrap();
        let v = density_matrix_expectation(&c, &Observable::z_string(&[0, 1]), &hw(0.0, 0.0, 0.0, 0.1)).unwrap();
        assert!((v - 0.64).abs() < 1e-12);
    }

    #[test]
    fn cap_enforced() {
        let c = Circuit::new(4).unwrap();
        assert!(density_matrix_expectation(&c, &Observable::z(0), &NoiseConfig::Exact).is_err());
    }
}
