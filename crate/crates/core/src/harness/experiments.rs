//! Experiment runners. Each writes its data files under an output directory
//! and returns the paths it produced.
//!
//! Random streams per seed: `(seed, 0)` initializes parameters, `(seed, 1)`
//! drives training, `(seed, 2)` evaluation and `(seed, 3)` analysis draws.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AgentKind, DatasetSource, ExperimentConfig, ExperimentKind};
use crate::agents::{evaluate, train, Agent, PgAgent, QAgent, TrainConfig, TrainingLog};
use crate::ansatz::{
    load_checkpoint, policy_probs, q_values, save_checkpoint, AnsatzInput, AnsatzKind, AnsatzSpec, ExecConfig,
    ParamVector,
};
use crate::envs::{
    frozen_dataset, generate_dataset, CartPole, CartPoleConfig, EnvKind, Environment, TspDataset, TspEnv,
    TspSampling,
};
use crate::error::{QrlError, Result};
use crate::gradients::{
    gaussian_error_bound, gaussian_shift_prediction, hessian_trace, hessian_trace_distribution, perturbation_sweep,
    trh_variance_approx, write_distribution_csv, ScalarCircuitFunction,
};
use crate::noise::NoiseConfig;
use crate::qsim::Observable;
use crate::rng::RngStream;
use crate::shots::{allocate_shots, ShotAllocConfig, ShotLedger};

pub const STREAM_INIT: u64 = 0;
pub const STREAM_TRAIN: u64 = 1;
pub const STREAM_EVAL: u64 = 2;
pub const STREAM_ANALYSIS: u64 = 3;

/// Record of one invocation, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    /// Output files per seed; analysis runs list theirs under their seed too.
    pub outputs: BTreeMap<u64, Vec<String>>,
    /// Files shared by all seeds.
    pub shared_outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn rel(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Fixed-precision float formatting so data files are byte-stable.
fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Runs the experiment selected by `cfg.experiment` into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let started = unix_now();
    fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    let (outputs, shared) = match cfg.experiment {
        ExperimentKind::Train => (run_train(cfg, out)?, Vec::new()),
        ExperimentKind::Evaluate => run_evaluate(cfg, out)?,
        ExperimentKind::Sweep => run_sweep(cfg, out)?,
        ExperimentKind::Perturbation => (run_perturbation(cfg, out)?, Vec::new()),
        ExperimentKind::Hessian => (run_hessian(cfg, out)?, Vec::new()),
        ExperimentKind::ShotsBench => (run_shots_bench(cfg, out)?, Vec::new()),
        ExperimentKind::ExportSurface => (run_export_surface(cfg, out)?, Vec::new()),
    };
    let manifest = RunManifest {
        experiment: cfg.experiment,
        config_hash: cfg.hash()?,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: cfg.seeds.clone(),
        outputs: outputs
            .into_iter()
            .map(|(s, ps)| (s, ps.iter().map(|p| rel(out, p)).collect()))
            .collect(),
        shared_outputs: shared.iter().map(|p| rel(out, p)).collect(),
        started_unix: started,
        finished_unix: unix_now(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

type SeedOutputs = BTreeMap<u64, Vec<PathBuf>>;

/// Fresh agent for `seed` with parameters from stream `(seed, 0)`.
pub fn make_agent(cfg: &ExperimentConfig, seed: u64) -> Result<Agent> {
    let spec = cfg.spec()?;
    let params = spec.init_params(&mut RngStream::new(seed, STREAM_INIT));
    agent_from(cfg, spec, params)
}

fn agent_from(cfg: &ExperimentConfig, spec: AnsatzSpec, params: ParamVector) -> Result<Agent> {
    Ok(match cfg.agent {
        AgentKind::Q => Agent::Q(QAgent::new(spec, params, cfg.q.clone())?),
        AgentKind::Pg => Agent::Pg(PgAgent::new(spec, params, cfg.pg.clone())?),
    })
}

/// Training or evaluation instance set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

fn tsp_dataset(cfg: &ExperimentConfig, split: Split) -> Result<TspDataset> {
    let ds = match cfg.env.dataset {
        DatasetSource::Frozen => frozen_dataset(match split {
            Split::Train => "train",
            Split::Eval => "eval",
        })?,
        DatasetSource::Generated => {
            let seed = cfg.env.dataset_seed + if split == Split::Eval { 1 } else { 0 };
            generate_dataset(cfg.env.cities, cfg.env.dataset_size, seed)?
        }
    };
    if ds.instances.iter().any(|i| i.n_cities() != cfg.env.cities) {
        return Err(QrlError::Config(format!("dataset instances do not have {} cities", cfg.env.cities)));
    }
    Ok(ds)
}

/// Environment for `split`. Evaluation cycles through the held-out instances.
pub fn make_env(cfg: &ExperimentConfig, split: Split) -> Result<Box<dyn Environment>> {
    Ok(match cfg.env.kind {
        EnvKind::CartPole => Box::new(CartPole::new(CartPoleConfig {
            clip_velocities: cfg.env.clip_velocities,
        })),
        EnvKind::Tsp => {
            let sampling = match split {
                Split::Train => cfg.env.sampling,
                Split::Eval => TspSampling::Cycle,
            };
            Box::new(TspEnv::new(tsp_dataset(cfg, split)?, sampling)?)
        }
    })
}

/// Trains one seed and writes its log, checkpoint and shot accounting under `dir`.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<(Agent, TrainingLog, Vec<PathBuf>)> {
    let mut agent = make_agent(cfg, seed)?;
    let mut env = make_env(cfg, Split::Train)?;
    let mut ledger = ShotLedger::new();
    let tc = TrainConfig {
        episodes: cfg.episodes,
        stop_when_solved: cfg.stop_when_solved,
        exec: cfg.exec.clone(),
    };
    let log = train(&mut agent, env.as_mut(), &tc, &mut RngStream::new(seed, STREAM_TRAIN), &mut ledger)?;
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let p = dir.join("episodes.csv");
    log.write_episodes_csv(create(&p)?)?;
    paths.push(p);
    let p = dir.join("updates.jsonl");
    let mut w = create(&p)?;
    log.write_updates_jsonl(&mut w)?;
    w.flush()?;
    paths.push(p);
    let p = dir.join("checkpoint.qrl");
    save_checkpoint(&p, &agent.checkpoint()?)?;
    paths.push(p);
    let p = dir.join("shots_summary.json");
    write_json(&p, ledger.summary())?;
    paths.push(p);
    if !ledger.rows().is_empty() {
        let p = dir.join("shots.csv");
        ledger.write_csv(create(&p)?)?;
        paths.push(p);
    }
    // wall time differs between identical runs, so it lives apart from the data files
    let p = dir.join("wall_time.json");
    write_json(
        &p,
        &serde_json::json!({ "wall_time_secs": log.wall_time_secs, "solved_at": log.solved_at }),
    )?;
    paths.push(p);
    Ok((agent, log, paths))
}

fn run_train(cfg: &ExperimentConfig, out: &Path) -> Result<SeedOutputs> {
    cfg.seeds
        .par_iter()
        .map(|&s| {
            let (_, _, paths) = train_seed(cfg, s, &out.join(format!("seed_{s}")))?;
            Ok((s, paths))
        })
        .collect()
}

/// One cell of a cross-noise evaluation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossNoiseRow {
    pub train_sigma: f64,
    pub eval_sigma: f64,
    pub seed: u64,
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
}

/// Evaluates `agent` once per σ in `eval_sigmas`, replacing only the coherent part of `exec`.
pub fn cross_noise_eval(
    cfg: &ExperimentConfig,
    agent: &Agent,
    seed: u64,
    train_sigma: f64,
    eval_sigmas: &[f64],
) -> Result<Vec<CrossNoiseRow>> {
    eval_sigmas
        .iter()
        .enumerate()
        .map(|(k, &sigma)| {
            let exec = ExecConfig {
                noise: cfg.exec.noise.with_sigma(sigma),
                n_traj: cfg.exec.n_traj,
            };
            let mut env = make_env(cfg, Split::Eval)?;
            let mut rng = RngStream::new(seed, STREAM_EVAL).derive(k as u64);
            let stats = evaluate(agent, env.as_mut(), &exec, cfg.evaluate.episodes, &mut rng, &mut ShotLedger::new())?;
            Ok(CrossNoiseRow {
                train_sigma,
                eval_sigma: sigma,
                seed,
                episodes: cfg.evaluate.episodes,
                mean: stats.mean,
                std: stats.std,
            })
        })
        .collect()
}

fn write_cross_noise(path: &Path, rows: &[CrossNoiseRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["train_sigma", "eval_sigma", "seed", "episodes", "mean", "std"])?;
    for r in rows {
        w.write_record([
            fmt(r.train_sigma),
            fmt(r.eval_sigma),
            r.seed.to_string(),
            r.episodes.to_string(),
            fmt(r.mean),
            fmt(r.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn evaluate_config(cfg: &ExperimentConfig, out: &Path) -> Result<(SeedOutputs, Vec<CrossNoiseRow>)> {
    let train_sigma = cfg.exec.noise.parts().sigma;
    let per_seed: Vec<(u64, Vec<PathBuf>, Vec<CrossNoiseRow>)> = cfg
        .seeds
        .par_iter()
        .map(|&s| {
            let (agent, paths) = match &cfg.evaluate.checkpoint {
                Some(p) => {
                    let ck = load_checkpoint(Path::new(p))?;
                    (agent_from(cfg, ck.spec()?, ck.params)?, Vec::new())
                }
                None => {
                    let (agent, _, paths) = train_seed(cfg, s, &out.join(format!("seed_{s}")))?;
                    (agent, paths)
                }
            };
            let rows = cross_noise_eval(cfg, &agent, s, train_sigma, &cfg.evaluate.eval_sigmas)?;
            Ok((s, paths, rows))
        })
        .collect::<Result<_>>()?;
    let mut outputs = SeedOutputs::new();
    let mut rows = Vec::new();
    for (s, p, r) in per_seed {
        outputs.insert(s, p);
        rows.extend(r);
    }
    Ok((outputs, rows))
}

fn run_evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<(SeedOutputs, Vec<PathBuf>)> {
    let (outputs, rows) = evaluate_config(cfg, out)?;
    let p = out.join("cross_noise.csv");
    write_cross_noise(&p, &rows)?;
    Ok((outputs, vec![p]))
}

fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(SeedOutputs, Vec<PathBuf>)> {
    let mut outputs = SeedOutputs::new();
    let mut rows = Vec::new();
    for &sigma in &cfg.sweep.train_sigmas {
        let mut sub = cfg.clone();
        sub.exec.noise = cfg.exec.noise.with_sigma(sigma);
        sub.evaluate.checkpoint = None;
        let dir = out.join(format!("sigma_{sigma}"));
        let (o, r) = evaluate_config(&sub, &dir)?;
        for (s, ps) in o {
            outputs.entry(s).or_default().extend(ps);
        }
        rows.extend(r);
    }
    let p = out.join("cross_noise.csv");
    write_cross_noise(&p, &rows)?;
    Ok((outputs, vec![p]))
}

/// Input and observable of the coherent-noise analyses: all features 1 and `Z^{⊗n}`.
pub fn analysis_target(spec: &AnsatzSpec) -> Result<(AnsatzInput, Observable)> {
    if spec.kind() == AnsatzKind::Eqc {
        return Err(QrlError::Config("coherent-noise analyses use a hardware-efficient ansatz".into()));
    }
    let n = spec.n_qubits();
    Ok((
        AnsatzInput::Features(vec![1.0; n]),
        Observable::z_string(&(0..n).collect::<Vec<_>>()),
    ))
}

/// Base point of a perturbation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBase {
    /// Index `k` of the accepted draw from stream `(seed, 3).derive(k)`.
    pub draw: u64,
    pub theta0: Vec<f64>,
    pub f_theta0: f64,
    pub trace_h: f64,
}

/// First uniform draw `θ0 ∈ [0, 2π)^M` with `|f(θ0)| ≥ f_min`.
pub fn select_sweep_base(f: &ScalarCircuitFunction, seed: u64, f_min: f64) -> Result<SweepBase> {
    let base = RngStream::new(seed, STREAM_ANALYSIS);
    let m = f.n_params();
    for k in 0..100_000u64 {
        let mut r = base.derive(k);
        let theta: Vec<f64> = (0..m).map(|_| r.uniform() * std::f64::consts::TAU).collect();
        let v = f.eval(&theta, &mut r)?;
        if v.abs() >= f_min {
            let trace_h = hessian_trace(f, &theta, &mut r)?;
            return Ok(SweepBase {
                draw: k,
                theta0: theta,
                f_theta0: v,
                trace_h,
            });
        }
    }
    Err(QrlError::Config(format!("no parameter draw reached |f| >= {f_min}")))
}

fn run_perturbation(cfg: &ExperimentConfig, out: &Path) -> Result<SeedOutputs> {
    let spec = cfg.spec()?;
    let (input, obs) = analysis_target(&spec)?;
    let f = ScalarCircuitFunction::new(&spec, input, obs, ExecConfig::exact())?;
    let sigmas = cfg.analysis_sigmas();
    let mut outputs = SeedOutputs::new();
    for &seed in &cfg.seeds {
        let b = select_sweep_base(&f, seed, cfg.analysis.f_min)?;
        let rows = perturbation_sweep(
            &f,
            &b.theta0,
            &sigmas,
            cfg.analysis.samples,
            &mut RngStream::new(seed, STREAM_ANALYSIS).derive(u64::MAX),
        )?;
        let dir = out.join(format!("seed_{seed}"));
        let p = dir.join("perturbation.csv");
        let mut w = csv::Writer::from_writer(create(&p)?);
        w.write_record(["sigma", "value", "stderr", "taylor", "bound"])?;
        for r in &rows {
            let taylor = (gaussian_shift_prediction(b.f_theta0, b.trace_h, r.sigma) - b.f_theta0).abs();
            let bound = gaussian_error_bound(r.sigma, spec.n_params(), 1.0)?.value;
            w.write_record([fmt(r.sigma), fmt(r.value), fmt(r.stderr), fmt(taylor), fmt(bound)])?;
        }
        w.flush()?;
        let q = dir.join("perturbation_base.json");
        write_json(&q, &b)?;
        outputs.insert(seed, vec![p, q]);
    }
    Ok(outputs)
}

/// Summary written next to a trace distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianSummary {
    pub n_params: usize,
    pub n_qubits: usize,
    pub samples: usize,
    pub mean: f64,
    pub std: f64,
    /// `√(M(M+1) / (4(2^n + 1)))`.
    pub predicted_std: f64,
}

fn run_hessian(cfg: &ExperimentConfig, out: &Path) -> Result<SeedOutputs> {
    let spec = cfg.spec()?;
    let (input, obs) = analysis_target(&spec)?;
    let mut outputs = SeedOutputs::new();
    for &seed in &cfg.seeds {
        let mut rng = RngStream::new(seed, STREAM_ANALYSIS);
        let dist = hessian_trace_distribution(&spec, &input, &obs, cfg.analysis.hessian_samples, &mut rng)?;
        let dir = out.join(format!("seed_{seed}"));
        let p = dir.join("hessian_trace.csv");
        write_distribution_csv(&dist, create(&p)?)?;
        let q = dir.join("hessian_summary.json");
        write_json(
            &q,
            &HessianSummary {
                n_params: spec.n_params(),
                n_qubits: spec.n_qubits(),
                samples: dist.samples.len(),
                mean: dist.mean,
                std: dist.std,
                predicted_std: trh_variance_approx(spec.n_params(), spec.n_qubits()).sqrt(),
            },
        )?;
        outputs.insert(seed, vec![p, q]);
    }
    Ok(outputs)
}

/// Shot-noise standard deviation of one estimate at `m` shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotScalingRow {
    pub shots: u64,
    pub repetitions: usize,
    pub mean: f64,
    pub std: f64,
}

/// Repeated `m`-shot estimates of `obs` at a fixed point.
pub fn shot_scaling(
    spec: &AnsatzSpec,
    theta: &[f64],
    input: &AnsatzInput,
    obs: &Observable,
    shots: &[u64],
    repetitions: usize,
    rng: &RngStream,
) -> Result<Vec<ShotScalingRow>> {
    if repetitions < 2 {
        return Err(QrlError::InvalidArgument("need at least two repetitions".into()));
    }
    shots
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let exec = ExecConfig::new(NoiseConfig::shots(m));
            let base = rng.derive(i as u64);
            let vals: Vec<f64> = (0..repetitions)
                .into_par_iter()
                .map(|k| {
                    let e = crate::ansatz::estimate(spec, theta, input, std::slice::from_ref(obs), &exec, &mut base.derive(k as u64))?;
                    Ok(e.values[0])
                })
                .collect::<Result<_>>()?;
            let (mean, std) = crate::gradients::mean_std(&vals);
            Ok(ShotScalingRow {
                shots: m,
                repetitions,
                mean,
                std,
            })
        })
        .collect()
}

/// Least-squares slope of `ln std` against `ln m`.
pub fn log_log_slope(rows: &[ShotScalingRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.shots as f64).ln(), r.std.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Pooled two-action Gaussian estimator: every shot adds `N(0, s²)` noise to
/// each action value independently.
#[derive(Debug, Clone)]
pub struct SyntheticEstimator {
    means: [f64; 2],
    noise: f64,
    sums: [f64; 2],
    taken: u64,
}

impl SyntheticEstimator {
    pub fn new(means: [f64; 2], noise: f64) -> Self {
        Self {
            means,
            noise,
            sums: [0.0; 2],
            taken: 0,
        }
    }

    /// Estimates from `m` cumulative shots.
    pub fn values(&mut self, m: u64, rng: &mut RngStream) -> Vec<f64> {
        let add = m.saturating_sub(self.taken);
        if add > 0 {
            let scale = self.noise * (add as f64).sqrt();
            for s in &mut self.sums {
                *s += scale * rng.normal();
            }
            self.taken = m;
        }
        (0..2).map(|a| self.means[a] + self.sums[a] / m as f64).collect()
    }
}

/// Returned shot count and argmax of one synthetic allocation.
pub fn synthetic_allocation(
    means: [f64; 2],
    noise: f64,
    cfg: &ShotAllocConfig,
    rng: &mut RngStream,
) -> Result<(u64, usize)> {
    let mut est = SyntheticEstimator::new(means, noise);
    let a = allocate_shots(|m| Ok(est.values(m, rng)), cfg)?;
    Ok((a.shots, a.argmax()))
}

fn run_shots_bench(cfg: &ExperimentConfig, out: &Path) -> Result<SeedOutputs> {
    let spec = cfg.spec()?;
    let (input, obs) = analysis_target(&spec)?;
    let mut outputs = SeedOutputs::new();
    for &seed in &cfg.seeds {
        let theta = spec.init_params(&mut RngStream::new(seed, STREAM_INIT)).theta;
        let rng = RngStream::new(seed, STREAM_ANALYSIS);
        let rows = shot_scaling(&spec, &theta, &input, &obs, &cfg.analysis.shots, cfg.analysis.repetitions, &rng)?;
        let dir = out.join(format!("seed_{seed}"));
        let p = dir.join("shot_scaling.csv");
        let mut w = csv::Writer::from_writer(create(&p)?);
        w.write_record(["shots", "repetitions", "mean", "std"])?;
        for r in &rows {
            w.write_record([r.shots.to_string(), r.repetitions.to_string(), fmt(r.mean), fmt(r.std)])?;
        }
        w.flush()?;
        let q = dir.join("shot_scaling_fit.json");
        write_json(&q, &serde_json::json!({ "slope": log_log_slope(&rows) }))?;

        let alloc = ShotAllocConfig::new(100, 100, 10_000)?;
        let a = dir.join("allocation.csv");
        let mut w = csv::Writer::from_writer(create(&a)?);
        w.write_record(["true_gap", "run", "shots", "argmax"])?;
        let arng = RngStream::new(seed, STREAM_ANALYSIS).derive(u64::MAX);
        for (g, gap) in [0.6, 0.05, 0.0].into_iter().enumerate() {
            let results: Vec<(u64, usize)> = (0..cfg.analysis.repetitions)
                .into_par_iter()
                .map(|k| {
                    let mut r = arng.derive((g * 1_000_000 + k) as u64);
                    synthetic_allocation([gap, 0.0], 1.0, &alloc, &mut r)
                })
                .collect::<Result<_>>()?;
            for (k, (m, arg)) in results.into_iter().enumerate() {
                w.write_record([fmt(gap), k.to_string(), m.to_string(), arg.to_string()])?;
            }
        }
        w.flush()?;
        outputs.insert(seed, vec![p, q, a]);
    }
    Ok(outputs)
}

/// Names of the CartPole features, in input order.
pub const CARTPOLE_FEATURES: [&str; 4] = ["cart_position", "cart_velocity", "pole_angle", "pole_velocity"];

/// Rows `(fx, fy, x, y, left, right)` over every feature pair on a `grid × grid`
/// lattice; other features are zero and no noise is applied.
pub fn policy_surface(
    spec: &AnsatzSpec,
    params: &ParamVector,
    grid: usize,
    ranges: &[f64; 4],
) -> Result<Vec<(usize, usize, f64, f64, f64, f64)>> {
    if spec.kind() == AnsatzKind::Eqc {
        return Err(QrlError::InvalidArgument("policy surfaces need CartPole parameters".into()));
    }
    if grid < 2 {
        return Err(QrlError::InvalidArgument("grid must be >= 2".into()));
    }
    let exec = ExecConfig::exact();
    let mut rows = Vec::new();
    let mut rng = RngStream::new(0, 0);
    for fx in 0..4 {
        for fy in fx + 1..4 {
            for i in 0..grid {
                for j in 0..grid {
                    let x = -ranges[fx] + 2.0 * ranges[fx] * i as f64 / (grid - 1) as f64;
                    let y = -ranges[fy] + 2.0 * ranges[fy] * j as f64 / (grid - 1) as f64;
                    let mut feat = vec![0.0; 4];
                    feat[fx] = x;
                    feat[fy] = y;
                    let input = AnsatzInput::Features(feat);
                    let est = match spec.kind() {
                        AnsatzKind::HwePg => policy_probs(spec, params, &input, &exec, &mut rng)?,
                        _ => q_values(spec, params, &input, &exec, &mut rng)?,
                    };
                    rows.push((fx, fy, x, y, est.values[0], est.values[1]));
                }
            }
        }
    }
    Ok(rows)
}

fn run_export_surface(cfg: &ExperimentConfig, out: &Path) -> Result<SeedOutputs> {
    if cfg.env.kind != EnvKind::CartPole {
        return Err(QrlError::Config("policy surfaces are defined for CartPole only".into()));
    }
    let ranges: [f64; 4] = cfg.surface.ranges.as_slice().try_into().map_err(|_| QrlError::Config("four ranges".into()))?;
    let mut outputs = SeedOutputs::new();
    for &seed in &cfg.seeds {
        let (spec, params) = match &cfg.surface.checkpoint {
            Some(p) => {
                let ck = load_checkpoint(Path::new(p))?;
                (ck.spec()?, ck.params)
            }
            None => {
                let spec = cfg.spec()?;
                let params = spec.init_params(&mut RngStream::new(seed, STREAM_INIT));
                (spec, params)
            }
        };
        let rows = policy_surface(&spec, &params, cfg.surface.grid, &ranges)?;
        let p = out.join(format!("seed_{seed}")).join("surface.csv");
        let mut w = csv::Writer::from_writer(create(&p)?);
        w.write_record(["feature_x", "feature_y", "x", "y", "left", "right"])?;
        for (fx, fy, x, y, l, r) in rows {
            w.write_record([CARTPOLE_FEATURES[fx], CARTPOLE_FEATURES[fy], &fmt(x), &fmt(y), &fmt(l), &fmt(r)])?;
        }
        w.flush()?;
        outputs.insert(seed, vec![p]);
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::build;

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<ShotScalingRow> = [100u64, 1000, 10000]
            .iter()
            .map(|&m| ShotScalingRow {
                shots: m,
                repetitions: 10,
                mean: 0.0,
                std: 3.0 / (m as f64).sqrt(),
            })
            .collect();
        assert!((log_log_slope(&rows) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn synthetic_estimator_pools_shots() {
        let mut e = SyntheticEstimator::new([0.5, 0.0], 0.0);
        let mut rng = RngStream::new(0, 0);
        assert_eq!(e.values(100, &mut rng), vec![0.5, 0.0]);
        let mut e = SyntheticEstimator::new([0.0, 0.0], 1.0);
        let a = e.values(100, &mut rng);
        let b = e.values(100, &mut rng);
        assert_eq!(a, b);
    }

    #[test]
    fn surface_grid_size_and_complement() {
        let spec = build(AnsatzKind::HwePg, 4, 1).unwrap();
        let params = spec.init_params(&mut RngStream::new(1, 0));
        let rows = policy_surface(&spec, &params, 5, &[2.4, 3.0, 0.21, 3.5]).unwrap();
        assert_eq!(rows.len(), 6 * 25);
        assert!(rows.iter().all(|r| (r.4 + r.5 - 1.0).abs() < 1e-12));
        let eqc = build(AnsatzKind::Eqc, 5, 1).unwrap();
        let p = eqc.init_params(&mut RngStream::new(1, 0));
        assert!(policy_surface(&eqc, &p, 5, &[1.0; 4]).is_err());
    }
}
