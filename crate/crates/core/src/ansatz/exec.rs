//! Estimation of template observables under a noise configuration.
//!
//! With a coherent spread every observable is estimated from its own
//! perturbed circuit; otherwise one circuit serves all observables and, when
//! sampling, they are read from the same bitstrings.

use serde::{Deserialize, Serialize};

use super::{AnsatzInput, AnsatzSpec};
use crate::error::Result;
use crate::noise::{sample_perturbation, ChannelNoise, NoiseConfig, ShotSetting};
use crate::qsim::{
    estimate_from_counts, trajectory_counts, trajectory_estimates, Circuit,
    MeasurementDistribution, Observable, TrajectoryReadout,
};
use crate::rng::RngStream;

/// Trajectories per estimate when incoherent noise is active.
pub const DEFAULT_TRAJECTORIES: usize = 100;

fn default_trajectories() -> usize {
    DEFAULT_TRAJECTORIES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_trajectories")]
    pub n_traj: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self::exact()
    }
}

impl ExecConfig {
    pub fn exact() -> Self {
        Self::new(NoiseConfig::Exact)
    }

    pub fn new(noise: NoiseConfig) -> Self {
        Self {
            noise,
            n_traj: DEFAULT_TRAJECTORIES,
        }
    }

    pub fn with_trajectories(mut self, n_traj: usize) -> Self {
        self.n_traj = n_traj;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.n_traj == 0 {
            return Err(crate::QrlError::InvalidArgument("n_traj must be >= 1".into()));
        }
        Ok(())
    }
}

/// `shots` physical executions from which the listed observables were read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotBatch {
    pub observables: Vec<usize>,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub values: Vec<f64>,
    pub batches: Vec<ShotBatch>,
}

enum Source {
    Pure(MeasurementDistribution),
    Traj { circuit: Circuit, channel: ChannelNoise },
}

struct Group {
    obs: Vec<usize>,
    circuit: Circuit,
    counts: Vec<u64>,
    total: u64,
    source: Option<Source>,
}

/// Circuits and pooled counts for one estimation; shots may be added in increments.
pub(crate) struct Sampler<'a> {
    observables: &'a [Observable],
    groups: Vec<Group>,
    channel: Option<ChannelNoise>,
    n_traj: usize,
}

impl<'a> Sampler<'a> {
    pub(crate) fn new(
        spec: &AnsatzSpec,
        theta: &[f64],
        input: &AnsatzInput,
        shifts: &[(usize, f64)],
        observables: &'a [Observable],
        exec: &ExecConfig,
        rng: &mut RngStream,
    ) -> Result<Self> {
        exec.validate()?;
        let parts = exec.noise.parts();
        let mut groups = Vec::new();
        let group = |obs: Vec<usize>, circuit: Circuit| Group {
            obs,
            counts: vec![0; 1 << circuit.n_qubits()],
            circuit,
            total: 0,
            source: None,
        };
        if parts.sigma > 0.0 {
            for k in 0..observables.len() {
                let delta = sample_perturbation(theta.len(), parts.sigma, rng);
                let c = spec.bind_shifted(&delta.apply_to(theta), input, shifts)?;
                groups.push(group(vec![k], c));
            }
        } else {
            let c = spec.bind_shifted(theta, input, shifts)?;
            groups.push(group((0..observables.len()).collect(), c));
        }
        Ok(Self {
            observables,
            groups,
            channel: parts.channel,
            n_traj: exec.n_traj,
        })
    }

    fn obs_refs(&self, g: &Group) -> Vec<&'a Observable> {
        g.obs.iter().map(|&k| &self.observables[k]).collect()
    }

    /// Exact (or trajectory-averaged) values without shot noise.
    pub(crate) fn exact_values(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        let mut values = vec![0.0; self.observables.len()];
        for g in &self.groups {
            let refs = self.obs_refs(g);
            match &self.channel {
                None => {
                    let s = g.circuit.simulate()?;
                    for (&k, o) in g.obs.iter().zip(&refs) {
                        values[k] = s.expectation(o);
                    }
                }
                Some(ch) => {
                    let est = trajectory_estimates(
                        &g.circuit,
                        &refs,
                        Some(ch),
                        self.n_traj,
                        TrajectoryReadout::Exact,
                        rng,
                    )?;
                    for (&k, e) in g.obs.iter().zip(est) {
                        values[k] = e.mean;
                    }
                }
            }
        }
        Ok(values)
    }

    /// Brings every group to `m` cumulative shots and returns the new batches.
    pub(crate) fn top_up(&mut self, m: u64, rng: &mut RngStream) -> Result<Vec<ShotBatch>> {
        let mut batches = Vec::new();
        let channel = self.channel;
        let n_traj = self.n_traj;
        for gi in 0..self.groups.len() {
            let refs = self.obs_refs(&self.groups[gi]);
            let g = &mut self.groups[gi];
            if g.total >= m {
                continue;
            }
            let extra = m - g.total;
            if g.source.is_none() {
                g.source = Some(match channel {
                    None => Source::Pure(MeasurementDistribution::new(&g.circuit.simulate()?, &refs, 0.0)?),
                    Some(ch) => Source::Traj {
                        circuit: g.circuit.clone(),
                        channel: ch,
                    },
                });
            }
            let new = match g.source.as_ref().expect("initialised above") {
                Source::Pure(d) => d.sample_counts(extra, rng),
                Source::Traj { circuit, channel } => {
                    trajectory_counts(circuit, &refs, channel, n_traj, extra, rng)?
                }
            };
            for (c, v) in g.counts.iter_mut().zip(new) {
                *c += v;
            }
            g.total = m;
            batches.push(ShotBatch {
                observables: g.obs.clone(),
                shots: extra,
            });
        }
        Ok(batches)
    }

    /// Estimates from the pooled counts.
    pub(crate) fn sampled_values(&self) -> Vec<f64> {
        let mut values = vec![0.0; self.observables.len()];
        for g in &self.groups {
            for &k in &g.obs {
                values[k] = estimate_from_counts(&self.observables[k], &g.counts, g.total);
            }
        }
        values
    }
}

/// Estimates `observables` on the template bound to `theta` and `input`.
/// Flexible shot settings fall back to `m_max` shots here; the allocator is
/// driven by the action-value heads.
pub fn estimate(
    spec: &AnsatzSpec,
    theta: &[f64],
    input: &AnsatzInput,
    observables: &[Observable],
    exec: &ExecConfig,
    rng: &mut RngStream,
) -> Result<Estimates> {
    estimate_shifted(spec, theta, input, &[], observables, exec, rng)
}

/// [`estimate`] with per-operation angle offsets.
pub fn estimate_shifted(
    spec: &AnsatzSpec,
    theta: &[f64],
    input: &AnsatzInput,
    shifts: &[(usize, f64)],
    observables: &[Observable],
    exec: &ExecConfig,
    rng: &mut RngStream,
) -> Result<Estimates> {
    let mut rng = rng.fork();
    let mut sampler = Sampler::new(spec, theta, input, shifts, observables, exec, &mut rng)?;
    match exec.noise.parts().shots {
        ShotSetting::Exact => Ok(Estimates {
            values: sampler.exact_values(&mut rng)?,
            batches: Vec::new(),
        }),
        ShotSetting::Fixed(m) | ShotSetting::Flexible(crate::shots::ShotAllocConfig { m_max: m, .. }) => {
            let batches = sampler.top_up(m, &mut rng)?;
            Ok(Estimates {
                values: sampler.sampled_values(),
                batches,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build, AnsatzKind};
    use crate::shots::ShotAllocConfig;

    fn setup() -> (AnsatzSpec, Vec<f64>, AnsatzInput, Vec<Observable>) {
        let spec = build(AnsatzKind::HweQ, 4, 2).unwrap();
        let theta = spec.init_params(&mut RngStream::new(3, 0)).theta;
        let input = AnsatzInput::Features(vec![0.1, -0.2, 0.03, 0.4]);
        let obs = spec.observables(&input, &[0, 1]);
        (spec, theta, input, obs)
    }

    #[test]
    fn exact_matches_statevector() {
        let (spec, theta, input, obs) = setup();
        let s = spec.bind(&theta, &input).unwrap().simulate().unwrap();
        let mut rng = RngStream::new(0, 0);
        let e = estimate(&spec, &theta, &input, &obs, &ExecConfig::exact(), &mut rng).unwrap();
        for (v, o) in e.values.iter().zip(&obs) {
            assert!((v - s.expectation(o)).abs() < 1e-12);
        }
        assert!(e.batches.is_empty());
    }

    #[test]
    fn shared_batch_without_coherent_noise() {
        let (spec, theta, input, obs) = setup();
        let mut rng = RngStream::new(0, 0);
        let e = estimate(&spec, &theta, &input, &obs, &ExecConfig::new(NoiseConfig::shots(500)), &mut rng)
            .unwrap();
        assert_eq!(
            e.batches,
            vec![ShotBatch {
                observables: vec![0, 1],
                shots: 500
            }]
        );
        let cfg = NoiseConfig::Composite {
            sigma: 0.1,
            inner: Box::new(NoiseConfig::shots(500)),
        };
        let e = estimate(&spec, &theta, &input, &obs, &ExecConfig::new(cfg), &mut rng).unwrap();
        assert_eq!(e.batches.len(), 2);
        let flex = NoiseConfig::flexible(ShotAllocConfig::new(100, 100, 700).unwrap());
        let e = estimate(&spec, &theta, &input, &obs, &ExecConfig::new(flex), &mut rng).unwrap();
        assert_eq!(e.batches[0].shots, 700);
    }

    #[test]
    fn pooled_top_up_counts_increments() {
        let (spec, theta, input, obs) = setup();
        let mut rng = RngStream::new(1, 0);
        let exec = ExecConfig::new(NoiseConfig::hardware("a").unwrap()).with_trajectories(10);
        let mut s = Sampler::new(&spec, &theta, &input, &[], &obs, &exec, &mut rng).unwrap();
        assert_eq!(s.top_up(100, &mut rng).unwrap()[0].shots, 100);
        assert_eq!(s.top_up(250, &mut rng).unwrap()[0].shots, 150);
        assert!(s.top_up(250, &mut rng).unwrap().is_empty());
        assert!(s.sampled_values().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn deterministic() {
        let (spec, theta, input, obs) = setup();
        let exec = ExecConfig::new(NoiseConfig::Composite {
            sigma: 0.2,
            inner: Box::new(NoiseConfig::depolarizing(0.05)),
        })
        .with_trajectories(20);
        let run = || estimate(&spec, &theta, &input, &obs, &exec, &mut RngStream::new(5, 1)).unwrap();
        assert_eq!(run(), run());
    }
}
