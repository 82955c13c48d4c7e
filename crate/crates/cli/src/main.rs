//! `qrl`: runs training, evaluation, analysis and acceptance checks and writes
//! self-describing result directories.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qrl_core::envs::generate_dataset;
use qrl_core::harness::{
    aggregate, parse_floats, parse_log_grid, parse_seeds, preset_names, run, verify, ExperimentConfig, ExperimentKind,
    FAST_CRITERIA,
};
use qrl_core::QrlError;

/// Environment variable naming the root directory for runs without `--out`.
const OUTPUT_ROOT_VAR: &str = "QRL_OUTPUT_ROOT";

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "qrl", version, about = "Variational quantum RL experiments under shot, coherent and incoherent noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed.
    Train(Common),
    /// Train (or load) agents and evaluate them at several coherent-noise levels.
    Evaluate(EvaluateArgs),
    /// Train at every σ of a grid and evaluate each at every evaluation σ.
    Sweep(SweepArgs),
    /// Coherent-noise analyses of a fixed circuit.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Shot-noise scaling and flexible shot allocation benchmark.
    ShotsBench(ShotsArgs),
    /// Action-right probability or Q-value over pairs of CartPole state features.
    ExportSurface(SurfaceArgs),
    /// Mean curves, trailing means and solved episodes across the seeds of a run directory.
    Aggregate {
        /// Run directory written by `train`, `evaluate` or `sweep`.
        dir: PathBuf,
    },
    /// Runs the built-in acceptance checks; exits 3 if any fails.
    Verify(VerifyArgs),
    /// Writes a directory of random TSP instances.
    GenTsp {
        #[arg(long, default_value_t = 5)]
        cities: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prints the fully resolved configuration as TOML.
    ShowConfig(Common),
    /// Lists the embedded presets.
    Presets,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Mean |f(θ0+δ) - f(θ0)| over Gaussian perturbations across a σ grid.
    Perturbation(PerturbationArgs),
    /// Distribution of the Hessian trace over uniform random parameters.
    Hessian(HessianArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedded preset; overrides the file's `preset` key.
    #[arg(long)]
    preset: Option<String>,
    /// Seeds as `a..b`, `a..=b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory; defaults to the config's `output_dir` under $QRL_OUTPUT_ROOT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Episode budget per seed.
    #[arg(long)]
    episodes: Option<u64>,
    /// Coherent noise level σ during training.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// σ used while training (alias of --sigma).
    #[arg(long, conflicts_with = "sigma")]
    train_sigma: Option<f64>,
    /// Comma list of evaluation σ values.
    #[arg(long)]
    eval_sigmas: Option<String>,
    /// Evaluation episodes per σ.
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Evaluate this checkpoint instead of training.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma list of training σ values.
    #[arg(long)]
    train_sigmas: Option<String>,
    #[arg(long)]
    eval_sigmas: Option<String>,
    #[arg(long)]
    eval_episodes: Option<usize>,
}

#[derive(Args)]
struct PerturbationArgs {
    #[command(flatten)]
    common: Common,
    /// `lo:hi:log` or `lo:hi:log:points`.
    #[arg(long)]
    sigma_grid: Option<String>,
    /// Perturbation vectors per σ.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct HessianArgs {
    #[command(flatten)]
    common: Common,
    /// Uniform parameter draws.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct ShotsArgs {
    #[command(flatten)]
    common: Common,
    /// Comma list of shot counts.
    #[arg(long)]
    shots: Option<String>,
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint written by `train`; omitted means freshly initialised parameters.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Points per axis.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma list of criterion ids; defaults to every fast criterion.
    #[arg(long)]
    criteria: Option<String>,
    /// Also run the long RL smoke criterion.
    #[arg(long)]
    long: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes the reports as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_counts(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| QrlError::Config(format!("cannot parse shot count {s:?}")).into())
        })
        .collect()
}

fn config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<QrlError>(),
            Some(QrlError::Config(_) | QrlError::UnknownPreset(_) | QrlError::InvalidArgument(_))
        )
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if config_error(&e) { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

impl Common {
    fn resolve(&self, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| {
                anyhow::Error::new(QrlError::Config(format!("cannot read {}: {e}", p.display())))
            })?),
            None => None,
        };
        let mut cfg = ExperimentConfig::resolve(self.preset.as_deref(), text.as_deref())?;
        if let Some(k) = kind {
            cfg.experiment = k;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(n) = self.episodes {
            cfg.episodes = n;
        }
        if let Some(s) = self.sigma {
            cfg.exec.noise = cfg.exec.noise.with_sigma(s);
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        match (&self.out, std::env::var_os(OUTPUT_ROOT_VAR)) {
            (Some(o), _) => o.clone(),
            (None, Some(root)) => Path::new(&root).join(&cfg.output_dir),
            (None, None) => PathBuf::from(&cfg.output_dir),
        }
    }

    fn execute(&self, mut cfg: ExperimentConfig) -> Result<ExitCode> {
        cfg.validate()?;
        let out = self.out_dir(&cfg);
        cfg.output_dir = out.display().to_string();
        let manifest = run(&cfg, &out).with_context(|| format!("running into {}", out.display()))?;
        println!(
            "{:?} finished: {} seed(s), config {}, results in {}",
            manifest.experiment,
            manifest.seeds.len(),
            &manifest.config_hash[..12],
            out.display()
        );
        Ok(ExitCode::SUCCESS)
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Train(c) => {
            let cfg = c.resolve(Some(ExperimentKind::Train))?;
            c.execute(cfg)
        }
        Command::Evaluate(a) => {
            let mut cfg = a.common.resolve(Some(ExperimentKind::Evaluate))?;
            if let Some(s) = a.train_sigma {
                cfg.exec.noise = cfg.exec.noise.with_sigma(s);
            }
            if let Some(s) = &a.eval_sigmas {
                cfg.evaluate.eval_sigmas = parse_floats(s)?;
            }
            if let Some(n) = a.eval_episodes {
                cfg.evaluate.episodes = n;
            }
            if let Some(p) = &a.checkpoint {
                cfg.evaluate.checkpoint = Some(p.display().to_string());
            }
            a.common.execute(cfg)
        }
        Command::Sweep(a) => {
            let mut cfg = a.common.resolve(Some(ExperimentKind::Sweep))?;
            if let Some(s) = &a.train_sigmas {
                cfg.sweep.train_sigmas = parse_floats(s)?;
            }
            if let Some(s) = &a.eval_sigmas {
                cfg.evaluate.eval_sigmas = parse_floats(s)?;
            }
            if let Some(n) = a.eval_episodes {
                cfg.evaluate.episodes = n;
            }
            a.common.execute(cfg)
        }
        Command::Analyze(AnalyzeCommand::Perturbation(a)) => {
            let mut cfg = a.common.resolve(Some(ExperimentKind::Perturbation))?;
            if let Some(g) = &a.sigma_grid {
                let (lo, hi, points) = parse_log_grid(g)?;
                cfg.analysis.sigma_min = lo;
                cfg.analysis.sigma_max = hi;
                cfg.analysis.sigma_points = points;
            }
            if let Some(n) = a.samples {
                cfg.analysis.samples = n;
            }
            a.common.execute(cfg)
        }
        Command::Analyze(AnalyzeCommand::Hessian(a)) => {
            let mut cfg = a.common.resolve(Some(ExperimentKind::Hessian))?;
            if let Some(n) = a.samples {
                cfg.analysis.hessian_samples = n;
            }
            a.common.execute(cfg)
        }
        Command::ShotsBench(a) => {
            let mut cfg = a.common.resolve(Some(ExperimentKind::ShotsBench))?;
            if let Some(s) = &a.shots {
                cfg.analysis.shots = parse_counts(s)?;
            }
            if let Some(n) = a.repetitions {
                cfg.analysis.repetitions = n;
            }
            a.common.execute(cfg)
        }
        Command::ExportSurface(a) => {
            let mut cfg = a.common.resolve(Some(ExperimentKind::ExportSurface))?;
            if let Some(p) = &a.checkpoint {
                cfg.surface.checkpoint = Some(p.display().to_string());
            }
            if let Some(g) = a.grid {
                cfg.surface.grid = g;
            }
            a.common.execute(cfg)
        }
        Command::Aggregate { dir } => {
            let summary = aggregate(&dir)?;
            summary.write_curves_csv(BufWriter::new(File::create(dir.join("curves.csv"))?))?;
            summary.write_runs_csv(BufWriter::new(File::create(dir.join("runs.csv"))?))?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "aggregated {} run(s) into {} and {}",
                summary.runs.len(),
                dir.join("curves.csv").display(),
                dir.join("runs.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(a) => {
            let mut ids: Vec<u8> = match &a.criteria {
                Some(s) => parse_seeds(s)?
                    .into_iter()
                    .map(|v| u8::try_from(v).map_err(|_| QrlError::Config(format!("no criterion {v}"))))
                    .collect::<Result<_, _>>()?,
                None => FAST_CRITERIA.to_vec(),
            };
            if a.long && !ids.contains(&8) {
                ids.push(8);
                ids.sort_unstable();
            }
            let reports = verify(&ids, a.seed);
            for r in &reports {
                println!("{r}");
            }
            if let Some(p) = &a.report {
                fs::write(p, serde_json::to_string_pretty(&reports)?)?;
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            println!("{} of {} criteria passed", reports.len() - failed, reports.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECK_FAILED) })
        }
        Command::GenTsp { cities, count, seed, out } => {
            generate_dataset(cities, count, seed)?.write_dir(&out)?;
            println!("wrote {count} instances with {cities} cities to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ShowConfig(c) => {
            print!("{}", c.resolve(None)?.to_toml_string()?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets => {
            for p in preset_names() {
                println!("{p}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
