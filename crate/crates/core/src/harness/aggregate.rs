//! Cross-seed summaries of training runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::agents::{EpisodeRecord, SOLVED_WINDOW};
use crate::envs::EnvKind;
use crate::error::{QrlError, Result};
use crate::gradients::mean_std;

/// Per-episode statistics of one group of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub group: String,
    pub episode: u64,
    pub n_runs: usize,
    pub mean: f64,
    pub std: f64,
    /// Mean over runs of the trailing-window mean ending at this episode.
    pub trailing_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub group: String,
    pub run: String,
    pub episodes: usize,
    /// First episode whose trailing window meets the benchmark bar.
    pub solved_at: Option<u64>,
    pub final_trailing_mean: Option<f64>,
    pub shots_reads: u64,
    pub shots_executions: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregateSummary {
    pub curves: Vec<CurveRow>,
    pub runs: Vec<RunSummary>,
    /// Logs that could not be read, with the reason.
    pub warnings: Vec<String>,
}

fn find_logs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_logs(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "episodes.csv") {
            out.push(p);
        }
    }
    Ok(())
}

fn read_log(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<EpisodeRecord> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.iter().enumerate().any(|(k, e)| e.episode != k as u64) {
        return Err(QrlError::Format("episode indices are not contiguous from 0".into()));
    }
    Ok(rows)
}

/// First episode index at which the trailing window meets the bar.
pub fn solved_episode(kind: EnvKind, metrics: &[f64], window: usize) -> Option<u64> {
    if window == 0 || metrics.len() < window {
        return None;
    }
    let mut sum: f64 = metrics[..window].iter().sum();
    for end in window..=metrics.len() {
        if end > window {
            sum += metrics[end - 1] - metrics[end - 1 - window];
        }
        if kind.is_solved(sum / window as f64) {
            return Some((end - 1) as u64);
        }
    }
    None
}

fn trailing(metrics: &[f64], end: usize, window: usize) -> Option<f64> {
    (end + 1 >= window).then(|| metrics[end + 1 - window..=end].iter().sum::<f64>() / window as f64)
}

/// Aggregates every `episodes.csv` under `run_dir`, grouping runs by the
/// directory that holds their seed directories. Unreadable logs are skipped
/// and reported in `warnings`.
pub fn aggregate(run_dir: &Path) -> Result<AggregateSummary> {
    let cfg = ExperimentConfig::load(&run_dir.join("config.toml"))?;
    let kind = cfg.env.kind;
    let mut logs = Vec::new();
    find_logs(run_dir, &mut logs)?;
    let mut summary = AggregateSummary::default();
    let mut groups: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for path in logs {
        let run_path = path.parent().unwrap_or(run_dir);
        let group_path = run_path.parent().unwrap_or(run_dir);
        let group = group_path.strip_prefix(run_dir).unwrap_or(group_path).to_string_lossy().replace('\\', "/");
        let run = run_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let rows = match read_log(&path) {
            Ok(r) if !r.is_empty() => r,
            Ok(_) => {
                summary.warnings.push(format!("{}: empty log", path.display()));
                continue;
            }
            Err(e) => {
                summary.warnings.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let metrics: Vec<f64> = rows.iter().map(|e| e.metric).collect();
        summary.runs.push(RunSummary {
            group: group.clone(),
            run,
            episodes: rows.len(),
            solved_at: solved_episode(kind, &metrics, SOLVED_WINDOW),
            final_trailing_mean: trailing(&metrics, metrics.len() - 1, SOLVED_WINDOW),
            shots_reads: rows.iter().map(|e| e.shots_reads).sum(),
            shots_executions: rows.iter().map(|e| e.shots_executions).sum(),
        });
        groups.entry(group).or_default().push(metrics);
    }
    if summary.runs.is_empty() {
        return Err(QrlError::Config(format!("no readable training logs under {}", run_dir.display())));
    }
    for (group, runs) in groups {
        let longest = runs.iter().map(Vec::len).max().unwrap_or(0);
        for ep in 0..longest {
            let vals: Vec<f64> = runs.iter().filter_map(|m| m.get(ep).copied()).collect();
            let trails: Vec<f64> = runs.iter().filter(|m| ep < m.len()).filter_map(|m| trailing(m, ep, SOLVED_WINDOW)).collect();
            let (mean, std) = mean_std(&vals);
            summary.curves.push(CurveRow {
                group: group.clone(),
                episode: ep as u64,
                n_runs: vals.len(),
                mean,
                std,
                trailing_mean: (!trails.is_empty()).then(|| trails.iter().sum::<f64>() / trails.len() as f64),
            });
        }
    }
    Ok(summary)
}

impl AggregateSummary {
    /// CSV with header `group,episode,n_runs,mean,std,trailing_mean`.
    pub fn write_curves_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.curves {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// CSV with header `group,run,episodes,solved_at,final_trailing_mean,shots_reads,shots_executions`.
    pub fn write_runs_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.runs {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solved_index_is_window_end() {
        let mut m = vec![10.0; 50];
        m.extend(vec![200.0; 150]);
        // first window averaging >= 195: needs at most 2 low episodes among 100
        let s = solved_episode(EnvKind::CartPole, &m, 100).unwrap();
        assert_eq!(s, 147);
        assert_eq!(solved_episode(EnvKind::CartPole, &m[..99], 100), None);
        let tsp = vec![1.04; 100];
        assert_eq!(solved_episode(EnvKind::Tsp, &tsp, 100), Some(99));
    }
}
