//! Finite-shot estimation of observables.
//!
//! All terms of the observables being estimated together must share a
//! qubit-wise measurement basis; the state is rotated into that basis once and
//! every observable is read from the same bitstring counts.

use num_complex::Complex64 as C64;
use rand_distr::{Binomial, Distribution};
use std::f64::consts::FRAC_1_SQRT_2;

use super::gate::Mat2;
use super::observable::{common_basis, rotated_eigen_sign, Observable, Pauli};
use super::state::{pauli_expectation, StateVector};
use crate::error::{QrlError, Result};
use crate::rng::RngStream;

/// Outcome distribution in a common measurement basis, including readout flips.
#[derive(Debug, Clone)]
pub struct MeasurementDistribution {
    probs: Vec<f64>,
}

fn basis_change(p: Pauli) -> Option<Vec<Mat2>> {
    let h = FRAC_1_SQRT_2;
    let hm = [[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]];
    let sdg = [
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
    ];
    match p {
        Pauli::Z => None,
        Pauli::X => Some(vec![hm]),
        // S† then H maps Y to Z
        Pauli::Y => Some(vec![sdg, hm]),
    }
}

impl MeasurementDistribution {
    pub fn new(state: &StateVector, observables: &[&Observable], readout_flip: f64) -> Result<Self> {
        let basis = common_basis(observables.iter().flat_map(|o| o.terms().iter())).ok_or_else(
            || QrlError::InvalidArgument("observables do not share a measurement basis".into()),
        )?;
        for o in observables {
            if o.min_qubits() > state.n_qubits() {
                return Err(QrlError::InvalidQubit {
                    index: o.min_qubits() - 1,
                    n_qubits: state.n_qubits(),
                });
            }
        }
        let rotated;
        let st = if basis.iter().any(|(_, p)| *p != Pauli::Z) {
            let mut s = state.clone();
            for (q, p) in &basis {
                if let Some(ms) = basis_change(*p) {
                    for m in &ms {
                        s.apply_operator(*q, m);
                    }
                }
            }
            rotated = s;
            &rotated
        } else {
            state
        };
        let mut probs = st.probabilities();
        if readout_flip > 0.0 {
            for &(q, _) in &basis {
                flip_bit(&mut probs, q, readout_flip);
            }
        }
        Ok(Self { probs })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Multinomial bitstring counts for `m` shots, drawn as a chain of binomials.
    pub fn sample_counts(&self, m: u64, rng: &mut RngStream) -> Vec<u64> {
        let mut counts = vec![0u64; self.probs.len()];
        let mut remaining = m;
        let mut mass = 1.0f64;
        let last = self.probs.len() - 1;
        for (i, &p) in self.probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if i == last {
                counts[i] = remaining;
                break;
            }
            let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
            let k = if q <= 0.0 {
                0
            } else if q >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, q).expect("valid binomial").sample(rng)
            };
            counts[i] = k;
            remaining -= k;
            mass -= p;
        }
        counts
    }
}

fn flip_bit(probs: &mut [f64], q: usize, p: f64) {
    let mask = 1usize << q;
    for i in 0..probs.len() {
        if i & mask == 0 {
            let j = i | mask;
            let (a, b) = (probs[i], probs[j]);
            probs[i] = (1.0 - p) * a + p * b;
            probs[j] = (1.0 - p) * b + p * a;
        }
    }
}

/// Bitstring counts pooled over successive batches.
#[derive(Debug, Clone)]
pub struct PooledCounts {
    counts: Vec<u64>,
    total: u64,
}

impl PooledCounts {
    pub fn new(dim: usize) -> Self {
        Self {
            counts: vec![0; dim],
            total: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Tops the pool up to `target` total shots.
    pub fn top_up(&mut self, dist: &MeasurementDistribution, target: u64, rng: &mut RngStream) {
        if target <= self.total {
            return;
        }
        let extra = dist.sample_counts(target - self.total, rng);
        for (c, e) in self.counts.iter_mut().zip(extra) {
            *c += e;
        }
        self.total = target;
    }

    pub fn estimate(&self, obs: &Observable) -> f64 {
        estimate_from_counts(obs, &self.counts, self.total)
    }
}

/// Sample mean of `obs` from bitstring counts in its measurement basis.
pub fn estimate_from_counts(obs: &Observable, counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let inv = 1.0 / total as f64;
    obs.terms()
        .iter()
        .map(|t| {
            let s: f64 = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(b, &c)| c as f64 * rotated_eigen_sign(t, b))
                .sum();
            t.coeff * s * inv
        })
        .sum()
}

/// Unbiased `m`-shot estimate of `⟨O⟩`.
pub fn sample_expectation(
    state: &StateVector,
    obs: &Observable,
    m: u64,
    rng: &mut RngStream,
) -> Result<f64> {
    if m == 0 {
        return Err(QrlError::InvalidArgument("shot count must be >= 1".into()));
    }
    let dist = MeasurementDistribution::new(state, &[obs], 0.0)?;
    let counts = dist.sample_counts(m, rng);
    Ok(estimate_from_counts(obs, &counts, m))
}

/// Exact `⟨O⟩` when each measured bit flips with probability `p_flip`.
pub fn readout_expectation(state: &StateVector, obs: &Observable, p_flip: f64) -> f64 {
    if p_flip == 0.0 {
        return state.expectation(obs);
    }
    let damp = 1.0 - 2.0 * p_flip;
    obs.terms()
        .iter()
        .map(|t| {
            let v = pauli_expectation(state.amplitudes(), t.x_mask(), t.z_mask(), t.n_y());
            t.coeff * damp.powi(t.weight() as i32) * v
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{Gate, PauliTerm};
    use std::f64::consts::PI;

    #[test]
    fn eigenstate_gives_exact_value() {
        let s = StateVector::new(2).unwrap();
        let mut rng = RngStream::new(0, 0);
        for m in [1, 7, 1000] {
            let v = sample_expectation(&s, &Observable::z_string(&[0, 1]), m, &mut rng).unwrap();
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn zero_shots_rejected() {
        let s = StateVector::new(1).unwrap();
        let mut rng = RngStream::new(0, 0);
        assert!(sample_expectation(&s, &Observable::z(0), 0, &mut rng).is_err());
    }

    #[test]
    fn balanced_state_within_three_sigma() {
        // ⟨Z⟩ = 0, m = 10000: |estimate| <= 3/√m = 0.03 in >= 99% of runs
        let s = StateVector::new(1)
            .unwrap()
            .apply_gate(&Gate::Ry { qubit: 0, angle: PI / 2.0 })
            .unwrap();
        let mut rng = RngStream::new(5, 0);
        let runs = 2000;
        let inside = (0..runs)
            .filter(|_| {
                sample_expectation(&s, &Observable::z(0), 10_000, &mut rng)
                    .unwrap()
                    .abs()
                    <= 0.03
            })
            .count();
        assert!(inside as f64 / runs as f64 >= 0.99, "{inside}/{runs}");
    }

    #[test]
    fn x_and_y_bases() {
        // RY(π/2)|0> = |+>, ⟨X⟩ = 1; RX(-π/2)|0> has ⟨Y⟩ = 1
        let mut rng = RngStream::new(1, 1);
        let plus = StateVector::new(1)
            .unwrap()
            .apply_gate(&Gate::Ry { qubit: 0, angle: PI / 2.0 })
            .unwrap();
        let x = Observable::pauli(1.0, &[(0, Pauli::X)]).unwrap();
        assert!((sample_expectation(&plus, &x, 50, &mut rng).unwrap() - 1.0).abs() < 1e-12);
        let yplus = StateVector::new(1)
            .unwrap()
            .apply_gate(&Gate::Rx { qubit: 0, angle: -PI / 2.0 })
            .unwrap();
        let y = Observable::pauli(1.0, &[(0, Pauli::Y)]).unwrap();
        assert!((yplus.expectation(&y) - 1.0).abs() < 1e-12);
        assert!((sample_expectation(&yplus, &y, 50, &mut rng).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conflicting_bases_rejected() {
        let s = StateVector::new(1).unwrap();
        let o = Observable::new(vec![
            PauliTerm::new(1.0, &[(0, Pauli::X)]).unwrap(),
            PauliTerm::new(1.0, &[(0, Pauli::Z)]).unwrap(),
        ])
        .unwrap();
        let mut rng = RngStream::new(0, 0);
        assert!(sample_expectation(&s, &o, 10, &mut rng).is_err());
    }

    #[test]
    fn readout_flip_scales_z_factors() {
        let s = StateVector::new(2).unwrap();
        let v = readout_expectation(&s, &Observable::z_string(&[0, 1]), 0.1);
        assert!((v - 0.64).abs() < 1e-12);
        let d = MeasurementDistribution::new(&s, &[&Observable::z_string(&[0, 1])], 0.1).unwrap();
        let exact: f64 = d
            .probabilities()
            .iter()
            .enumerate()
            .map(|(b, p)| p * if (b & 3).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
            .sum();
        assert!((exact - 0.64).abs() < 1e-12);
    }

    #[test]
    fn pooled_counts_accumulate() {
        let s = StateVector::new(1)
            .unwrap()
            .apply_gate(&Gate::Ry { qubit: 0, angle: 1.0 })
            .unwrap();
        let d = MeasurementDistribution::new(&s, &[&Observable::z(0)], 0.0).unwrap();
        let mut pool = PooledCounts::new(2);
        let mut rng = RngStream::new(3, 3);
        pool.top_up(&d, 100, &mut rng);
        pool.top_up(&d, 250, &mut rng);
        pool.top_up(&d, 200, &mut rng);
        assert_eq!(pool.total(), 250);
        assert_eq!(pool.counts.iter().sum::<u64>(), 250);
    }
}
