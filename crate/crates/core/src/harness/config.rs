//! Experiment configuration: TOML files layered over embedded presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{PgConfig, QConfig};
use crate::ansatz::{build, AnsatzKind, AnsatzSpec, ExecConfig};
use crate::envs::{EnvKind, TspSampling};
use crate::error::{QrlError, Result};

const PRESETS: &[(&str, &str)] = &[
    ("cartpole_q", include_str!("presets/cartpole_q.toml")),
    ("cartpole_pg", include_str!("presets/cartpole_pg.toml")),
    ("tsp_q", include_str!("presets/tsp_q.toml")),
    ("analysis", include_str!("presets/analysis.toml")),
];

/// Names of the embedded presets.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Train,
    Evaluate,
    Sweep,
    Perturbation,
    Hessian,
    ShotsBench,
    ExportSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Q,
    Pg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSection {
    pub kind: AnsatzKind,
    /// Qubit count; the equivariant ansatz uses one qubit per city instead.
    pub qubits: usize,
    pub layers: usize,
}

/// Where TSP instances come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Instance sets shipped with the crate.
    Frozen,
    /// Instances generated from `dataset_seed` (training) and `dataset_seed + 1` (evaluation).
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKind,
    pub clip_velocities: bool,
    pub cities: usize,
    pub dataset: DatasetSource,
    pub dataset_seed: u64,
    pub dataset_size: usize,
    pub sampling: TspSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub episodes: usize,
    pub eval_sigmas: Vec<f64>,
    /// Checkpoint to evaluate; when absent each seed is trained first.
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub train_sigmas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Log-spaced σ grid `sigma_min..=sigma_max` with `sigma_points` points.
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_points: usize,
    /// Extra σ values merged into the grid.
    pub extra_sigmas: Vec<f64>,
    pub samples: usize,
    pub hessian_samples: usize,
    /// Smallest `|f(θ0)|` accepted for the sweep base point.
    pub f_min: f64,
    pub shots: Vec<u64>,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub grid: usize,
    /// Half-widths of the plotted range per CartPole feature.
    pub ranges: Vec<f64>,
    pub checkpoint: Option<String>,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub agent: AgentKind,
    pub seeds: Vec<u64>,
    pub episodes: u64,
    pub stop_when_solved: bool,
    /// Not part of the configuration hash.
    pub output_dir: String,
    pub ansatz: AnsatzSection,
    pub env: EnvSection,
    pub exec: ExecConfig,
    pub q: QConfig,
    pub pg: PgConfig,
    pub evaluate: EvaluateSection,
    pub sweep: SweepSection,
    pub analysis: AnalysisSection,
    pub surface: SurfaceSection,
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // a tagged noise table is replaced wholesale so stale variant fields do not linger
                    Some(slot) if k != "noise" => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn preset_value(name: &str) -> Result<toml::Value> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| QrlError::UnknownPreset(name.to_string()))?;
    let mut base: toml::Value = toml::from_str(include_str!("presets/defaults.toml"))
        .map_err(|e| QrlError::Config(format!("embedded defaults: {e}")))?;
    let layer: toml::Value =
        toml::from_str(text).map_err(|e| QrlError::Config(format!("embedded preset {name}: {e}")))?;
    merge(&mut base, layer);
    Ok(base)
}

impl ExperimentConfig {
    /// Embedded preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        Self::from_value(preset_value(name)?)
    }

    /// Parses TOML text. A top-level `preset` key selects the base layer
    /// (default `cartpole_q`); every other key overrides it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut over: toml::Value = toml::from_str(text).map_err(|e| QrlError::Config(e.to_string()))?;
        let name = match over.as_table_mut().and_then(|t| t.remove("preset")) {
            None => "cartpole_q".to_string(),
            Some(toml::Value::String(s)) => s,
            Some(_) => return Err(QrlError::Config("preset must be a string".into())),
        };
        let mut base = preset_value(&name)?;
        merge(&mut base, over);
        Self::from_value(base)
    }

    /// Layers an optional file over a preset. An explicit `preset` wins over
    /// the file's own `preset` key.
    pub fn resolve(preset: Option<&str>, text: Option<&str>) -> Result<Self> {
        let mut over: toml::Value = match text {
            Some(t) => toml::from_str(t).map_err(|e| QrlError::Config(e.to_string()))?,
            None => toml::Value::Table(Default::default()),
        };
        if let (Some(p), Some(t)) = (preset, over.as_table_mut()) {
            t.insert("preset".into(), toml::Value::String(p.to_string()));
        }
        Self::from_toml_str(&toml::to_string(&over).map_err(|e| QrlError::Config(e.to_string()))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn from_value(v: toml::Value) -> Result<Self> {
        let cfg: Self = v.try_into().map_err(|e: toml::de::Error| QrlError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| QrlError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(QrlError::Config("seeds must not be empty".into()));
        }
        self.exec.validate()?;
        self.q.validate()?;
        self.pg.validate()?;
        let pairing = matches!(
            (self.agent, self.ansatz.kind, self.env.kind),
            (AgentKind::Q, AnsatzKind::HweQ, EnvKind::CartPole)
                | (AgentKind::Pg, AnsatzKind::HwePg, EnvKind::CartPole)
                | (AgentKind::Q, AnsatzKind::Eqc, EnvKind::Tsp)
        );
        if !pairing {
            return Err(QrlError::Config(format!(
                "unsupported combination: agent {:?}, ansatz {:?}, env {:?}",
                self.agent, self.ansatz.kind, self.env.kind
            )));
        }
        self.spec()?;
        let a = &self.analysis;
        if !(a.sigma_min > 0.0 && a.sigma_max >= a.sigma_min) || a.sigma_points == 0 {
            return Err(QrlError::Config("analysis sigma grid needs 0 < sigma_min <= sigma_max".into()));
        }
        let sigmas = self.evaluate.eval_sigmas.iter().chain(&self.sweep.train_sigmas).chain(&a.extra_sigmas);
        if sigmas.clone().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(QrlError::Config("sigma values must be finite and >= 0".into()));
        }
        if self.surface.ranges.len() != 4 || self.surface.grid < 2 {
            return Err(QrlError::Config("surface needs 4 ranges and grid >= 2".into()));
        }
        if self.evaluate.episodes == 0 {
            return Err(QrlError::Config("evaluate.episodes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<AnsatzSpec> {
        let n = match self.ansatz.kind {
            AnsatzKind::Eqc => self.env.cities,
            _ => self.ansatz.qubits,
        };
        build(self.ansatz.kind, n, self.ansatz.layers)
    }

    /// Analysis σ grid: log-spaced points plus extras, sorted and deduplicated.
    pub fn analysis_sigmas(&self) -> Vec<f64> {
        let a = &self.analysis;
        let mut out: Vec<f64> = if a.sigma_points == 1 {
            vec![a.sigma_min]
        } else {
            let (lo, hi) = (a.sigma_min.ln(), a.sigma_max.ln());
            let last = a.sigma_points - 1;
            (0..a.sigma_points)
                .map(|k| match k {
                    0 => a.sigma_min,
                    k if k == last => a.sigma_max,
                    k => (lo + (hi - lo) * k as f64 / last as f64).exp(),
                })
                .collect()
        };
        out.extend(&a.extra_sigmas);
        out.sort_by(f64::total_cmp);
        // log-spaced points carry round-off, so near-equal extras are duplicates
        out.dedup_by(|b, a| (*b - *a).abs() <= 1e-9 * a.abs());
        out
    }

    /// Hex SHA-256 of the canonical JSON form, with the output directory removed.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        // serde_json maps are key-sorted, so field order never reaches the digest
        let canonical = serde_json::to_string(&v)?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }
}

/// Parses `a..b` (exclusive), `a..=b` or a comma list into seeds.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || QrlError::Config(format!("cannot parse seeds {text:?}"));
    let t = text.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = t.split_once("..=") {
        let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else if let Some((a, b)) = t.split_once("..") {
        let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        (a..b).collect()
    } else {
        t.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Parses a comma list of floats.
pub fn parse_floats(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| QrlError::Config(format!("cannot parse number {s:?}")))
        })
        .collect()
}

/// Parses `lo:hi:log` or `lo:hi:log:points` into a log-spaced grid spec `(lo, hi, points)`.
pub fn parse_log_grid(text: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || QrlError::Config(format!("cannot parse grid {text:?}; expected lo:hi:log[:points]"));
    if !(parts.len() == 3 || parts.len() == 4) || parts[2] != "log" {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let points = match parts.get(3) {
        Some(p) => p.parse().map_err(|_| bad())?,
        None => 30,
    };
    Ok((lo, hi, points))
}
