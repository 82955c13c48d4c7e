//! Built-in acceptance checks, run by the `verify` command.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::experiments::{
    analysis_target, cross_noise_eval, make_agent, make_env, run, select_sweep_base, shot_scaling, synthetic_allocation,
    log_log_slope, Split, STREAM_TRAIN,
};
use crate::agents::{train, TrainConfig};
use crate::ansatz::{build, AnsatzInput, AnsatzKind, AnsatzSpec, ExecConfig, GraphInput};
use crate::error::{QrlError, Result};
use crate::gradients::{
    gaussian_error_bound, gradient, hessian, hessian_trace_distribution, perturbation_sweep, sufficient_sigma,
    ScalarCircuitFunction,
};
use crate::noise::{HardwareNoise, NoiseConfig};
use crate::qsim::{
    density_matrix_expectation, trajectory_estimates, Circuit, Gate, Observable, Pauli, TrajectoryReadout,
};
use crate::rng::RngStream;
use crate::shots::{ShotAllocConfig, ShotLedger};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(id: u8, name: &str, body: impl FnOnce() -> Result<(bool, String)>) -> CriterionReport {
    let t = Instant::now();
    let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionReport {
        id,
        name: name.to_string(),
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

/// Criteria run by default; the long RL smoke test is opt-in.
pub const FAST_CRITERIA: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 9, 10];

/// Runs the listed criteria in order.
pub fn verify(ids: &[u8], seed: u64) -> Vec<CriterionReport> {
    ids.iter()
        .map(|&id| match id {
            1 => timed(1, "gradient oracle", || gradient_oracle(seed)),
            2 => timed(2, "hessian trace statistics", || trace_statistics(seed)),
            3 => timed(3, "perturbation sweep", || perturbation_check(seed)),
            4 => timed(4, "channel oracle", || channel_oracle(seed)),
            5 => timed(5, "shot-noise scaling", || shot_noise_scaling(seed)),
            6 => timed(6, "flexible shot allocation", || allocation_behavior(seed)),
            7 => timed(7, "bound self-consistency", bound_consistency),
            8 => timed(8, "RL smoke", || rl_smoke(seed)),
            9 => timed(9, "noise robustness", || noise_robustness(seed)),
            10 => timed(10, "determinism", || determinism(seed)),
            _ => timed(id, "unknown", || Err(QrlError::InvalidArgument(format!("no criterion {id}")))),
        })
        .collect()
}

fn random_input(spec: &AnsatzSpec, rng: &mut RngStream) -> AnsatzInput {
    match spec.kind() {
        AnsatzKind::Eqc => {
            let n = spec.n_qubits();
            let mut w = vec![0.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let v = rng.uniform_range(0.1, 1.5);
                    w[i * n + j] = v;
                    w[j * n + i] = v;
                }
            }
            let alpha = (0..n).map(|i| if i == 0 || rng.bernoulli(0.3) { 0.0 } else { std::f64::consts::PI }).collect();
            AnsatzInput::Graph(GraphInput {
                n,
                weights: w,
                alpha,
                current: 0,
            })
        }
        _ => AnsatzInput::Features((0..spec.n_qubits()).map(|_| rng.uniform_range(-1.5, 1.5)).collect()),
    }
}

fn first_observable(spec: &AnsatzSpec, input: &AnsatzInput) -> Result<Observable> {
    let actions = spec.actions(input);
    let a = *actions.last().ok_or_else(|| QrlError::InvalidArgument("no action".into()))?;
    Ok(spec.observables(input, &[a]).remove(0))
}

fn gradient_oracle(seed: u64) -> Result<(bool, String)> {
    let h = 1e-4;
    let mut worst_g: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    let specs = [
        build(AnsatzKind::HweQ, 4, 5)?,
        build(AnsatzKind::HwePg, 4, 5)?,
        build(AnsatzKind::Eqc, 5, 2)?,
    ];
    let mut rng = RngStream::new(seed, 11);
    for spec in &specs {
        for _ in 0..20 {
            let input = random_input(spec, &mut rng);
            let obs = first_observable(spec, &input)?;
            let f = ScalarCircuitFunction::new(spec, input, obs, ExecConfig::exact())?;
            let theta: Vec<f64> = (0..spec.n_params()).map(|_| rng.uniform() * TAU).collect();
            let mut r = RngStream::new(0, 0);
            let ev = |t: &[f64]| f.eval(t, &mut RngStream::new(0, 0));
            let g = gradient(&f, &theta, &mut r)?;
            let hm = hessian(&f, &theta, &mut r)?.matrix;
            let m = theta.len();
            let f0 = ev(&theta)?;
            let rows: Vec<(f64, f64)> = (0..m)
                .into_par_iter()
                .map(|i| -> Result<(f64, f64)> {
                    let shifted = |di: f64, j: usize, dj: f64| {
                        let mut t = theta.clone();
                        t[i] += di;
                        t[j] += dj;
                        ev(&t)
                    };
                    let fd = (shifted(h, i, 0.0)? - shifted(-h, i, 0.0)?) / (2.0 * h);
                    let mut wh: f64 = 0.0;
                    for j in i..m {
                        let fdh = if i == j {
                            (shifted(h, i, 0.0)? - 2.0 * f0 + shifted(-h, i, 0.0)?) / (h * h)
                        } else {
                            (shifted(h, j, h)? - shifted(h, j, -h)? - shifted(-h, j, h)? + shifted(-h, j, -h)?)
                                / (4.0 * h * h)
                        };
                        wh = wh.max((fdh - hm[(i, j)]).abs());
                    }
                    Ok(((fd - g[i]).abs(), wh))
                })
                .collect::<Result<_>>()?;
            for (a, b) in rows {
                worst_g = worst_g.max(a);
                worst_h = worst_h.max(b);
            }
        }
    }
    Ok((
        worst_g < 1e-6 && worst_h < 1e-5,
        format!("max |Δgrad| = {worst_g:.2e} (< 1e-6), max |ΔHessian| = {worst_h:.2e} (< 1e-5)"),
    ))
}

fn trace_statistics(seed: u64) -> Result<(bool, String)> {
    let spec = build(AnsatzKind::HwePg, 4, 5)?;
    let (input, obs) = analysis_target(&spec)?;
    let d = hessian_trace_distribution(&spec, &input, &obs, 2000, &mut RngStream::new(seed, 12))?;
    let target = (92.0f64 * 93.0 / (4.0 * 17.0)).sqrt();
    let rel = (d.std - target).abs() / target;
    Ok((
        d.mean.abs() < 1.0 && rel < 0.2,
        format!("M = {}, mean = {:.3}, std = {:.3} vs {target:.3} ({:.1}% off)", spec.n_params(), d.mean, d.std, 100.0 * rel),
    ))
}

fn perturbation_check(seed: u64) -> Result<(bool, String)> {
    let spec = build(AnsatzKind::HwePg, 4, 5)?;
    let (input, obs) = analysis_target(&spec)?;
    let f = ScalarCircuitFunction::new(&spec, input, obs, ExecConfig::exact())?;
    let b = select_sweep_base(&f, seed, 0.3)?;
    let sigmas = [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.5, 0.7];
    let rows = perturbation_sweep(&f, &b.theta0, &sigmas, 10_000, &mut RngStream::new(seed, 13))?;
    let m = spec.n_params() as f64;
    let mut ok = true;
    let mut notes = Vec::new();
    for r in &rows {
        let pass = if [0.02, 0.05, 0.1].contains(&r.sigma) {
            let pred = 0.5 * r.sigma * r.sigma * b.trace_h.abs();
            (r.value - pred).abs() <= 3.0 * r.stderr
        } else if r.sigma >= 0.5 {
            (r.value - b.f_theta0.abs()).abs() <= 0.1 * b.f_theta0.abs()
        } else if r.sigma <= 0.01 {
            r.value <= (0.5 * r.sigma * r.sigma * m).exp_m1() + 3.0 * r.stderr
        } else {
            true
        };
        ok &= pass;
        if !pass {
            let mut note = format!("σ={} value {:.3e} ± {:.1e}", r.sigma, r.value, r.stderr);
            if r.sigma < 0.5 {
                let pred = 0.5 * r.sigma * r.sigma * b.trace_h.abs();
                let (flip, flip_se) = flip_average(&f, &b.theta0, r.sigma, 10_000, &RngStream::new(seed, 17))?;
                note.push_str(&format!(
                    " vs second-order {pred:.3e}; all-orders π-flip estimate {:.3e} ± {flip_se:.1e}",
                    (flip - b.f_theta0).abs()
                ));
            }
            notes.push(note);
        }
    }
    Ok((
        ok,
        format!(
            "f(θ0) = {:.3}, Tr H = {:.3}{}",
            b.f_theta0,
            b.trace_h,
            if notes.is_empty() { String::new() } else { format!("; failing: {}", notes.join(", ")) }
        ),
    ))
}

/// Gaussian average of `f` around `theta0` to all orders in σ. Every parameter
/// enters with unit frequency, so averaging over `δ ~ N(0, σ²)` equals
/// shifting it by π with probability `(1 - e^{-σ²/2}) / 2`.
fn flip_average(f: &ScalarCircuitFunction, theta0: &[f64], sigma: f64, n: usize, base: &RngStream) -> Result<(f64, f64)> {
    let q = 0.5 * (1.0 - (-0.5 * sigma * sigma).exp());
    let vals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut r = base.derive(k as u64);
            let t: Vec<f64> = theta0
                .iter()
                .map(|&t| if r.bernoulli(q) { t + std::f64::consts::PI } else { t })
                .collect();
            f.eval(&t, &mut r)
        })
        .collect::<Result<_>>()?;
    let (mean, sd) = crate::gradients::mean_std(&vals);
    Ok((mean, sd / (n as f64).sqrt()))
}

fn random_two_qubit_circuit(rng: &mut RngStream) -> Result<Circuit> {
    let mut c = Circuit::new(2)?;
    for _ in 0..8 {
        let q = rng.below(2);
        let a = rng.uniform() * TAU;
        let g = match rng.below(6) {
            0 => Gate::Rx { qubit: q, angle: a },
            1 => Gate::Ry { qubit: q, angle: a },
            2 => Gate::Rz { qubit: q, angle: a },
            3 => Gate::Cnot { control: q, target: 1 - q },
            4 => Gate::Cz { a: 0, b: 1 },
            _ => Gate::Zz { a: 0, b: 1, angle: a },
        };
        c.push(g)?;
    }
    Ok(c)
}

fn random_pauli(rng: &mut RngStream) -> Result<Observable> {
    let ps = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut factors = Vec::new();
    while factors.is_empty() {
        for q in 0..2 {
            if rng.bernoulli(0.6) {
                factors.push((q, ps[rng.below(3)]));
            }
        }
    }
    Observable::pauli(1.0, &factors)
}

fn hardware(depol_1q: f64, depol_2q: f64, amp_damp: f64, meas_bitflip: f64) -> NoiseConfig {
    NoiseConfig::CustomHardware(HardwareNoise {
        depol_1q,
        depol_2q,
        amp_damp,
        meas_bitflip,
    })
}

/// Deviation in standard errors after discounting floating-point round-off.
/// A channel that almost never fires yields near-identical trajectories whose
/// sample spread is itself at round-off level.
fn z_score(mean: f64, exact: f64, stderr: f64) -> f64 {
    let excess = ((mean - exact).abs() - 1e-12).max(0.0);
    if excess == 0.0 {
        0.0
    } else {
        excess / stderr
    }
}

const N_TRAJ: usize = 100_000;

/// Standard error of a trajectory mean with two pseudo-trajectories added at
/// `±range`. When a channel fires only a handful of times in `n` draws the
/// plain sample spread misses the jump branch almost entirely; the pseudo
/// draws bound the variance from below by roughly `2·range²/n`.
fn rare_event_stderr(mean: f64, stderr: f64, n: usize, range: f64) -> f64 {
    let nf = n as f64;
    // sum of squared deviations about `mean`
    let ss = stderr * stderr * nf * (nf - 1.0);
    let n2 = nf + 2.0;
    let m2 = nf * mean / n2;
    let ss2 = ss + nf * (mean - m2).powi(2) + (range - m2).powi(2) + (range + m2).powi(2);
    (ss2 / (n2 - 1.0) / n2).sqrt()
}

fn channel_oracle(seed: u64) -> Result<(bool, String)> {
    let noises: [(&str, NoiseConfig, TrajectoryReadout); 5] = [
        ("depolarizing 0.01", NoiseConfig::Depolarizing { p: 0.01 }, TrajectoryReadout::Exact),
        ("depolarizing 0.1", NoiseConfig::Depolarizing { p: 0.1 }, TrajectoryReadout::Exact),
        ("damping 0.0003", hardware(0.0, 0.0, 0.0003, 0.0), TrajectoryReadout::Exact),
        ("damping 0.03", hardware(0.0, 0.0, 0.03, 0.0), TrajectoryReadout::Exact),
        // sampled single-shot readout so the flip itself is drawn per trajectory
        ("bitflip 0.01", hardware(0.0, 0.0, 0.0, 0.01), TrajectoryReadout::Shots(1)),
    ];
    let mut rng = RngStream::new(seed, 14);
    let mut worst = [0.0f64; 5];
    for k in 0..50 {
        let c = random_two_qubit_circuit(&mut rng)?;
        let o = random_pauli(&mut rng)?;
        for (j, (_, noise, readout)) in noises.iter().enumerate() {
            let exact = density_matrix_expectation(&c, &o, noise)?;
            let ch = noise.parts().channel;
            let mut r = RngStream::new(seed, 14).derive((k * 8 + j) as u64);
            let e = trajectory_estimates(&c, &[&o], ch.as_ref(), N_TRAJ, *readout, &mut r)?[0];
            let se = rare_event_stderr(e.mean, e.stderr, N_TRAJ, o.infinity_norm());
            worst[j] = worst[j].max(z_score(e.mean, exact, se));
        }
    }
    // single-channel closed forms on idle qubits
    let mut analytic_ok = true;
    let mut details = Vec::new();
    for p in [0.01, 0.1] {
        let mut c = Circuit::new(1)?;
        c.push(Gate::Rz { qubit: 0, angle: 0.0 })?;
        let ch = NoiseConfig::Depolarizing { p }.parts().channel;
        let e = trajectory_estimates(&c, &[&Observable::z(0)], ch.as_ref(), 100_000, TrajectoryReadout::Exact, &mut rng)?[0];
        let z = z_score(e.mean, 1.0 - 4.0 * p / 3.0, e.stderr);
        analytic_ok &= z <= 4.0;
        details.push(format!("depol {p}: {z:.2} SE"));
    }
    for gamma in [0.0003, 0.03] {
        let mut c = Circuit::new(1)?;
        c.push(Gate::X { qubit: 0 })?;
        let ch = hardware(0.0, 0.0, gamma, 0.0).parts().channel;
        let e = trajectory_estimates(&c, &[&Observable::z(0)], ch.as_ref(), 100_000, TrajectoryReadout::Exact, &mut rng)?[0];
        let z = z_score(e.mean, 2.0 * gamma - 1.0, e.stderr);
        analytic_ok &= z <= 4.0;
        details.push(format!("damping {gamma}: {z:.2} SE"));
    }
    let per_channel: Vec<String> = noises.iter().zip(worst).map(|((name, _, _), w)| format!("{name}: {w:.2}")).collect();
    Ok((
        worst.iter().all(|&w| w <= 4.0) && analytic_ok,
        format!(
            "worst oracle deviation in SE over 50 circuits ({}); analytic {}",
            per_channel.join(", "),
            details.join(", ")
        ),
    ))
}

fn shot_noise_scaling(seed: u64) -> Result<(bool, String)> {
    let spec = build(AnsatzKind::HwePg, 4, 5)?;
    let (input, obs) = analysis_target(&spec)?;
    let theta = spec.init_params(&mut RngStream::new(seed, 0)).theta;
    let rows = shot_scaling(&spec, &theta, &input, &obs, &[100, 1000, 10_000], 10_000, &RngStream::new(seed, 15))?;
    let slope = log_log_slope(&rows);
    Ok(((slope + 0.5).abs() <= 0.05, format!("slope {slope:.4} (target -0.5 ± 0.05)")))
}

fn allocation_behavior(seed: u64) -> Result<(bool, String)> {
    let cfg = ShotAllocConfig::new(100, 100, 10_000)?;
    let base = RngStream::new(seed, 16);
    let runs = 10_000usize;
    let wide: Vec<(u64, usize)> = (0..runs)
        .into_par_iter()
        .map(|k| synthetic_allocation([0.6, 0.0], 1.0, &cfg, &mut base.derive(k as u64)))
        .collect::<Result<_>>()?;
    let good = wide.iter().filter(|&&(m, a)| m == 100 && a == 0).count();
    // two actions read from the same observable share one estimate, so the observed gap is exactly zero
    let tied: Vec<u64> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut r = base.derive((runs + k) as u64);
            let mut est = super::experiments::SyntheticEstimator::new([0.3, 0.3], 1.0);
            crate::shots::allocate_shots(
                |m| {
                    let v = est.values(m, &mut r)[0];
                    Ok(vec![v, v])
                },
                &cfg,
            )
            .map(|a| a.shots)
        })
        .collect::<Result<_>>()?;
    let all_max = tied.iter().all(|&m| m == cfg.m_max);
    let (m_small, _) = synthetic_allocation([0.05, 0.0], 0.0, &cfg, &mut base.derive(u64::MAX))?;
    let frac = good as f64 / runs as f64;
    Ok((
        frac >= 0.99 && all_max && (m_small >= 1600 || m_small == cfg.m_max),
        format!(
            "gap 0.6: {:.2}% stop at 100 with correct argmax; gap 0: all at m_max = {all_max}; gap 0.05: m = {m_small}",
            100.0 * frac
        ),
    ))
}

fn bound_consistency() -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for eps in [1e-4, 1e-3, 0.01, 0.05, 0.1, 0.5, 1.0, 1.7] {
        for m in [1usize, 2, 10, 60, 92, 100, 1000, 10_000] {
            for c in [0.5, 1.0, 2.0, 4.0, 10.0] {
                if eps / c > std::f64::consts::E - 1.0 {
                    continue;
                }
                let s = sufficient_sigma(eps, m, c)?;
                let b = gaussian_error_bound(s, m, c)?.value;
                worst = worst.max(b - eps);
                cases += 1;
            }
        }
    }
    Ok((worst <= 1e-12, format!("{cases} grid points, max(bound - ε) = {worst:.2e}")))
}

fn tsp_config(seed: u64, episodes: u64) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::preset("tsp_q")?;
    cfg.seeds = vec![seed];
    cfg.episodes = episodes;
    cfg.evaluate.episodes = 200;
    Ok(cfg)
}

fn noise_robustness(seed: u64) -> Result<(bool, String)> {
    let cfg = tsp_config(seed, 600)?;
    let mut agent = make_agent(&cfg, seed)?;
    let mut env = make_env(&cfg, Split::Train)?;
    let tc = TrainConfig {
        episodes: cfg.episodes,
        stop_when_solved: false,
        exec: ExecConfig::exact(),
    };
    train(&mut agent, env.as_mut(), &tc, &mut RngStream::new(seed, STREAM_TRAIN), &mut ShotLedger::new())?;
    let rows = cross_noise_eval(&cfg, &agent, seed, 0.0, &[0.0, 0.05, 0.1, 0.5])?;
    let r: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    Ok((
        (r[1] - r[0]).abs() <= 0.05 && r[3] > r[2],
        format!("ratio at σ = 0 / 0.05 / 0.1 / 0.5: {:.4} / {:.4} / {:.4} / {:.4}", r[0], r[1], r[2], r[3]),
    ))
}

fn rl_smoke(seed: u64) -> Result<(bool, String)> {
    let cp = {
        let mut c = ExperimentConfig::preset("cartpole_q")?;
        c.episodes = 5000;
        c.stop_when_solved = true;
        c
    };
    let tsp = {
        let mut c = tsp_config(seed, 3000)?;
        c.stop_when_solved = false;
        c
    };
    let run_seed = |cfg: &ExperimentConfig, s: u64| -> Result<Vec<f64>> {
        let mut agent = make_agent(cfg, s)?;
        let mut env = make_env(cfg, Split::Train)?;
        let tc = TrainConfig {
            episodes: cfg.episodes,
            stop_when_solved: cfg.stop_when_solved,
            exec: ExecConfig::exact(),
        };
        let log = train(&mut agent, env.as_mut(), &tc, &mut RngStream::new(s, STREAM_TRAIN), &mut ShotLedger::new())?;
        Ok(log.metrics())
    };
    // one success per environment suffices, so later seeds only run after a miss
    let first_hit = |cfg: &ExperimentConfig, ok: &dyn Fn(f64) -> bool| -> Result<(Option<u64>, u64)> {
        for k in 0..3 {
            if windows_reach(&run_seed(cfg, seed + k)?, ok) {
                return Ok((Some(seed + k), k + 1));
            }
        }
        Ok((None, 3))
    };
    let (cp_hit, cp_tried) = first_hit(&cp, &|x| x >= 195.0)?;
    let (tsp_hit, tsp_tried) = first_hit(&tsp, &|x| x <= 1.10)?;
    let show = |hit: Option<u64>, tried: u64| match hit {
        Some(s) => format!("seed {s} after {tried} tried"),
        None => format!("none of {tried}"),
    };
    Ok((
        cp_hit.is_some() && tsp_hit.is_some(),
        format!(
            "CartPole solved: {}; TSP ratio 1.10 reached: {}",
            show(cp_hit, cp_tried),
            show(tsp_hit, tsp_tried)
        ),
    ))
}

fn windows_reach(metrics: &[f64], ok: impl Fn(f64) -> bool) -> bool {
    metrics.len() >= 100 && metrics.windows(100).any(|w| ok(w.iter().sum::<f64>() / 100.0))
}

fn data_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            data_files(&p, out)?;
        } else if !matches!(p.file_name().and_then(|n| n.to_str()), Some("manifest.json" | "wall_time.json")) {
            out.push(p);
        }
    }
    Ok(())
}

/// Small configurations of every data-producing experiment.
pub fn determinism_configs(seed: u64) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    let mut a = ExperimentConfig::preset("analysis")?;
    a.seeds = vec![seed];
    a.analysis.samples = 200;
    a.analysis.sigma_points = 4;
    a.analysis.hessian_samples = 500;
    a.analysis.repetitions = 50;
    a.analysis.shots = vec![10, 100];
    for kind in [ExperimentKind::Perturbation, ExperimentKind::Hessian, ExperimentKind::ShotsBench, ExperimentKind::ExportSurface] {
        let mut c = a.clone();
        c.experiment = kind;
        c.surface.grid = 4;
        out.push(c);
    }
    let mut cp = ExperimentConfig::preset("cartpole_q")?;
    cp.seeds = vec![seed];
    cp.episodes = 3;
    cp.q.batch_size = 4;
    cp.exec.noise = NoiseConfig::shots(100);
    out.push(cp);
    let mut pg = ExperimentConfig::preset("cartpole_pg")?;
    pg.seeds = vec![seed];
    pg.episodes = 2;
    pg.pg.batch_episodes = 1;
    pg.exec.noise = NoiseConfig::Depolarizing { p: 0.01 };
    pg.exec.n_traj = 4;
    out.push(pg);
    let mut t = tsp_config(seed, 3)?;
    t.experiment = ExperimentKind::Evaluate;
    t.q.batch_size = 4;
    t.evaluate.episodes = 3;
    t.evaluate.eval_sigmas = vec![0.0, 0.1];
    out.push(t);
    Ok(out)
}

/// Byte-compares the data files of two runs of every configuration in fresh directories under `scratch`.
pub fn compare_reruns(configs: &[ExperimentConfig], scratch: &Path) -> Result<(bool, String)> {
    let mut files = 0;
    let mut mismatched = Vec::new();
    for (k, cfg) in configs.iter().enumerate() {
        let dirs = [scratch.join(format!("{k}_a")), scratch.join(format!("{k}_b"))];
        for d in &dirs {
            if d.exists() {
                fs::remove_dir_all(d)?;
            }
            run(cfg, d)?;
        }
        let (mut fa, mut fb) = (Vec::new(), Vec::new());
        data_files(&dirs[0], &mut fa)?;
        data_files(&dirs[1], &mut fb)?;
        if fa.len() != fb.len() {
            mismatched.push(format!("{:?}: file sets differ", cfg.experiment));
            continue;
        }
        for (a, b) in fa.iter().zip(&fb) {
            files += 1;
            if fs::read(a)? != fs::read(b)? {
                mismatched.push(a.strip_prefix(scratch).unwrap_or(a).display().to_string());
            }
        }
    }
    Ok((
        mismatched.is_empty() && files > 0,
        if mismatched.is_empty() {
            format!("{files} data files identical across reruns of {} commands", configs.len())
        } else {
            format!("differing: {}", mismatched.join(", "))
        },
    ))
}

fn determinism(seed: u64) -> Result<(bool, String)> {
    let scratch = std::env::temp_dir().join(format!("qrl-verify-{}-{seed}", std::process::id()));
    let res = compare_reruns(&determinism_configs(seed)?, &scratch);
    let _ = fs::remove_dir_all(&scratch);
    res
}
