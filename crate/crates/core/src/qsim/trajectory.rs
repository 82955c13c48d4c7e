//! Monte-Carlo trajectory simulation of incoherent noise.
//!
//! A circuit plus a [`ChannelNoise`] model is first flattened into a schedule
//! of gates and channel events. A trajectory walks the schedule on a pure
//! state, sampling one Kraus branch per event; the density-matrix oracle
//! walks the same schedule applying each channel exactly.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::circuit::Circuit;
use super::gate::Gate;
use super::observable::{Observable, Pauli};
use super::sampling::{estimate_from_counts, readout_expectation, MeasurementDistribution};
use super::state::StateVector;
use crate::error::{QrlError, Result};
use crate::noise::{ChannelNoise, NoiseConfig, ShotSetting};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NoiseOp {
    Gate(Gate),
    Depol1 { q: usize, p: f64 },
    Depol2 { a: usize, b: usize, p: f64 },
    AmpDamp { q: usize, gamma: f64 },
}

/// Flattens `circuit` and the channel placement rules into one event list.
pub(crate) fn noise_schedule(circuit: &Circuit, channel: Option<&ChannelNoise>) -> Vec<NoiseOp> {
    let mut ops = Vec::new();
    match channel {
        None => ops.extend(circuit.gates().map(|g| NoiseOp::Gate(*g))),
        Some(ChannelNoise::Depolarizing { p }) => {
            for moment in circuit.moments() {
                ops.extend(moment.iter().map(|g| NoiseOp::Gate(*g)));
                if *p > 0.0 {
                    ops.extend((0..circuit.n_qubits()).map(|q| NoiseOp::Depol1 { q, p: *p }));
                }
            }
        }
        Some(ChannelNoise::Hardware(h)) => {
            let one = |ops: &mut Vec<NoiseOp>, g: Gate, q: usize| {
                ops.push(NoiseOp::Gate(g));
                if h.depol_1q > 0.0 {
                    ops.push(NoiseOp::Depol1 { q, p: h.depol_1q });
                }
                if h.amp_damp > 0.0 {
                    ops.push(NoiseOp::AmpDamp { q, gamma: h.amp_damp });
                }
            };
            let two = |ops: &mut Vec<NoiseOp>, g: Gate, a: usize, b: usize| {
                ops.push(NoiseOp::Gate(g));
                if h.depol_2q > 0.0 {
                    ops.push(NoiseOp::Depol2 { a, b, p: h.depol_2q });
                }
                if h.amp_damp > 0.0 {
                    ops.push(NoiseOp::AmpDamp { q: a, gamma: h.amp_damp });
                    ops.push(NoiseOp::AmpDamp { q: b, gamma: h.amp_damp });
                }
            };
            for g in circuit.gates() {
                match *g {
                    // ZZ(θ) = CNOT · RZ_b(θ) · CNOT, each constituent noisy
                    Gate::Zz { a, b, angle } => {
                        let cx = Gate::Cnot { control: a, target: b };
                        two(&mut ops, cx, a, b);
                        one(&mut ops, Gate::Rz { qubit: b, angle }, b);
                        two(&mut ops, cx, a, b);
                    }
                    Gate::Cz { a, b } => two(&mut ops, *g, a, b),
                    Gate::Cnot { control, target } => two(&mut ops, *g, control, target),
                    _ => {
                        let q = g.qubits().as_slice()[0];
                        one(&mut ops, *g, q);
                    }
                }
            }
        }
    }
    ops
}

const PAULIS: [Option<Pauli>; 4] = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];

fn amp_damp_jump(state: &mut StateVector, q: usize, gamma: f64, rng: &mut RngStream) {
    let mask = 1usize << q;
    let excited: f64 = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| i & mask != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    let z = C64::new(0.0, 0.0);
    let kraus = if rng.uniform() < gamma * excited {
        // K1 = √γ |0><1|
        [[z, C64::new(gamma.sqrt(), 0.0)], [z, z]]
    } else {
        // K0 = diag(1, √(1-γ))
        [[C64::new(1.0, 0.0), z], [z, C64::new((1.0 - gamma).sqrt(), 0.0)]]
    };
    state.apply_operator(q, &kraus);
    state.normalize();
}

fn run_schedule(n_qubits: usize, ops: &[NoiseOp], rng: &mut RngStream) -> Result<StateVector> {
    let mut s = StateVector::new(n_qubits)?;
    for op in ops {
        match *op {
            NoiseOp::Gate(g) => s.apply_unchecked(&g),
            NoiseOp::Depol1 { q, p } => {
                if rng.uniform() < p {
                    let k = 1 + rng.below(3);
                    s.apply_pauli(q, PAULIS[k].expect("non-identity"));
                }
            }
            NoiseOp::Depol2 { a, b, p } => {
                if rng.uniform() < p {
                    // one of the 15 non-identity two-qubit Paulis
                    let k = 1 + rng.below(15);
                    if let Some(pa) = PAULIS[k % 4] {
                        s.apply_pauli(a, pa);
                    }
                    if let Some(pb) = PAULIS[k / 4] {
                        s.apply_pauli(b, pb);
                    }
                }
            }
            NoiseOp::AmpDamp { q, gamma } => amp_damp_jump(&mut s, q, gamma, rng),
        }
    }
    Ok(s)
}

fn channel_of(noise: &NoiseConfig) -> Result<Option<ChannelNoise>> {
    noise.validate()?;
    let parts = noise.parts();
    if parts.sigma != 0.0 || parts.shots != ShotSetting::Exact {
        return Err(QrlError::InvalidArgument(
            "trajectory simulation takes exact, depolarizing or hardware noise".into(),
        ));
    }
    Ok(parts.channel)
}

/// One stochastic pure-state trajectory of `circuit` under `noise`.
/// Measurement bit-flips are not part of the state; they act at read-out.
pub fn run_trajectory(circuit: &Circuit, noise: &NoiseConfig, rng: &mut RngStream) -> Result<StateVector> {
    let channel = channel_of(noise)?;
    let ops = noise_schedule(circuit, channel.as_ref());
    run_schedule(circuit.n_qubits(), &ops, rng)
}

/// How each trajectory is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryReadout {
    Exact,
    Shots(u64),
}

/// Mean over trajectories and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Trajectory-averaged estimates for several observables read from the same trajectories.
pub fn trajectory_estimates(
    circuit: &Circuit,
    observables: &[&Observable],
    channel: Option<&ChannelNoise>,
    n_traj: usize,
    readout: TrajectoryReadout,
    rng: &mut RngStream,
) -> Result<Vec<TrajectoryEstimate>> {
    if n_traj == 0 {
        return Err(QrlError::InvalidArgument("n_traj must be >= 1".into()));
    }
    if let TrajectoryReadout::Shots(0) = readout {
        return Err(QrlError::InvalidArgument("shot count must be >= 1".into()));
    }
    let flip = channel.map(ChannelNoise::meas_bitflip).unwrap_or(0.0);
    let ops = noise_schedule(circuit, channel);
    let base = rng.fork();
    let n = circuit.n_qubits();
    // without a channel every trajectory is the same pure state
    let shared = if channel.is_none() {
        Some(run_schedule(n, &ops, &mut base.derive(u64::MAX))?)
    } else {
        None
    };
    let samples: Vec<Vec<f64>> = (0..n_traj)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let mut r = base.derive(t as u64);
            match &shared {
                Some(s) => read_out(s, observables, flip, readout, &mut r),
                None => {
                    let s = run_schedule(n, &ops, &mut r)?;
                    read_out(&s, observables, flip, readout, &mut r)
                }
            }
        })
        .collect::<Result<_>>()?;
    let k = observables.len();
    let nt = n_traj as f64;
    Ok((0..k)
        .map(|j| {
            let mean = samples.iter().map(|v| v[j]).sum::<f64>() / nt;
            let var = if n_traj > 1 {
                samples.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (nt - 1.0)
            } else {
                0.0
            };
            TrajectoryEstimate {
                mean,
                stderr: (var / nt).sqrt(),
            }
        })
        .collect())
}

fn read_out(
    s: &StateVector,
    observables: &[&Observable],
    flip: f64,
    readout: TrajectoryReadout,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    match readout {
        TrajectoryReadout::Exact => Ok(observables
            .iter()
            .map(|o| readout_expectation(s, o, flip))
            .collect()),
        TrajectoryReadout::Shots(m) => {
            let dist = MeasurementDistribution::new(s, observables, flip)?;
            let counts = dist.sample_counts(m, rng);
            Ok(observables
                .iter()
                .map(|o| estimate_from_counts(o, &counts, m))
                .collect())
        }
    }
}

/// Bitstring counts for `m` shots spread over `min(m, n_traj)` fresh
/// trajectories, in the shared measurement basis of `observables`.
pub fn trajectory_counts(
    circuit: &Circuit,
    observables: &[&Observable],
    channel: &ChannelNoise,
    n_traj: usize,
    m: u64,
    rng: &mut RngStream,
) -> Result<Vec<u64>> {
    if n_traj == 0 {
        return Err(QrlError::InvalidArgument("n_traj must be >= 1".into()));
    }
    let ops = noise_schedule(circuit, Some(channel));
    let base = rng.fork();
    let k = (n_traj as u64).min(m);
    let n = circuit.n_qubits();
    let flip = channel.meas_bitflip();
    let parts: Vec<Vec<u64>> = (0..k)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>> {
            let mut r = base.derive(t);
            let share = m / k + u64::from(t < m % k);
            let s = run_schedule(n, &ops, &mut r)?;
            Ok(MeasurementDistribution::new(&s, observables, flip)?.sample_counts(share, &mut r))
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; 1 << n];
    for p in parts {
        for (c, v) in counts.iter_mut().zip(p) {
            *c += v;
        }
    }
    Ok(counts)
}

/// Mean of `n_traj` trajectory expectations of `obs`.
pub fn trajectory_expectation(
    circuit: &Circuit,
    obs: &Observable,
    noise: &NoiseConfig,
    n_traj: usize,
    readout: TrajectoryReadout,
    rng: &mut RngStream,
) -> Result<f64> {
    let channel = channel_of(noise)?;
    Ok(trajectory_estimates(circuit, &[obs], channel.as_ref(), n_traj, readout, rng)?[0].mean)
}
