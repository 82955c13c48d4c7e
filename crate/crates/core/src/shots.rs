//! Flexible shot allocation for Q-learning and shot accounting.
//!
//! [`allocate_shots`] escalates the measurement count of a set of Q-value
//! estimates until the largest and second-largest are separated by at least
//! `2/√m`, or the budget `m_max` is reached. Estimates are pooled: each
//! escalation adds `m_inc` new shots to those already taken.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotAllocConfig {
    pub m_init: u64,
    pub m_inc: u64,
    pub m_max: u64,
}

impl ShotAllocConfig {
    pub fn new(m_init: u64, m_inc: u64, m_max: u64) -> Result<Self> {
        let c = Self {
            m_init,
            m_inc,
            m_max,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_init == 0 || self.m_init > self.m_max || self.m_inc == 0 {
            return Err(QrlError::InvalidArgument(format!(
                "shot allocation needs 0 < m_init <= m_max and m_inc > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Outcome of one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Cumulative shots spent per observable.
    pub shots: u64,
    /// Estimates at `shots`.
    pub values: Vec<f64>,
    /// `(m, observed top-two gap)` for every evaluated shot count, in order.
    pub history: Vec<(u64, f64)>,
}

impl Allocation {
    /// Index of the largest estimate; lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Difference between the largest and second-largest value.
pub fn top_two_gap(values: &[f64]) -> f64 {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in values {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    first - second
}

/// Confidence threshold at `m` shots.
pub fn gap_threshold(m: u64) -> f64 {
    2.0 / (m as f64).sqrt()
}

/// Runs the escalation loop. `estimator(m)` must return the estimates built
/// from `m` cumulative shots per observable.
pub fn allocate_shots<F>(mut estimator: F, config: &ShotAllocConfig) -> Result<Allocation>
where
    F: FnMut(u64) -> Result<Vec<f64>>,
{
    config.validate()?;
    let mut m = config.m_init;
    let mut history = Vec::new();
    loop {
        let values = estimator(m)?;
        if values.len() < 2 {
            return Err(QrlError::InvalidArgument(
                "shot allocation needs at least two candidate values".into(),
            ));
        }
        let gap = top_two_gap(&values);
        history.push((m, gap));
        if gap >= gap_threshold(m) || m >= config.m_max {
            return Ok(Allocation {
                shots: m,
                values,
                history,
            });
        }
        m = (m + config.m_inc).min(config.m_max);
    }
}

/// One aggregated ledger row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub episode: u64,
    pub step: u64,
    pub observable: String,
    pub shots: u64,
    pub cumulative: u64,
}

/// Totals reported by [`ShotLedger::summary`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LedgerSummary {
    /// Shots counted once per observable read.
    pub total_reads: u64,
    /// Shots counted once per physical circuit execution.
    pub total_executions: u64,
    pub per_observable: BTreeMap<String, u64>,
    pub per_episode_reads: BTreeMap<u64, u64>,
}

/// Exact accounting of simulated measurements.
#[derive(Debug, Clone, Default)]
pub struct ShotLedger {
    episode: u64,
    step: u64,
    rows: Vec<LedgerRow>,
    step_start: usize,
    summary: LedgerSummary,
}

impl ShotLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_position(&mut self, episode: u64, step: u64) {
        if episode != self.episode || step != self.step {
            self.episode = episode;
            self.step = step;
            self.step_start = self.rows.len();
        }
    }

    /// `shots` measurements read for one observable.
    pub fn record(&mut self, observable: &str, shots: u64) {
        if shots == 0 {
            return;
        }
        let cumulative = {
            let e = self
                .summary
                .per_observable
                .entry(observable.to_string())
                .or_insert(0);
            *e += shots;
            *e
        };
        self.summary.total_reads += shots;
        *self.summary.per_episode_reads.entry(self.episode).or_insert(0) += shots;
        if let Some(row) = self.rows[self.step_start..]
            .iter_mut()
            .find(|r| r.observable == observable)
        {
            row.shots += shots;
            row.cumulative = cumulative;
        } else {
            self.rows.push(LedgerRow {
                episode: self.episode,
                step: self.step,
                observable: observable.to_string(),
                shots,
                cumulative,
            });
        }
    }

    /// One physical batch of `shots` executions from which every listed observable is read.
    pub fn record_execution<S: AsRef<str>>(&mut self, observables: &[S], shots: u64) {
        self.summary.total_executions += shots;
        for o in observables {
            self.record(o.as_ref(), shots);
        }
    }

    pub fn summary(&self) -> &LedgerSummary {
        &self.summary
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Ledger summary of a run; the free-function form of [`ShotLedger::summary`].
pub fn ledger_summary(ledger: &ShotLedger) -> LedgerSummary {
    ledger.summary().clone()
}

/// Records `shots` for `observable`.
pub fn ledger_record(ledger: &mut ShotLedger, observable: &str, shots: u64) {
    ledger.record(observable, shots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(i: u64, inc: u64, max: u64) -> ShotAllocConfig {
        ShotAllocConfig::new(i, inc, max).unwrap()
    }

    #[test]
    fn large_gap_stops_at_m_init() {
        // gap 0.5 >= 2/√100 = 0.2
        let a = allocate_shots(|_| Ok(vec![0.7, 0.2]), &cfg(100, 100, 1000)).unwrap();
        assert_eq!(a.shots, 100);
        assert_eq!(a.argmax(), 0);
    }

    #[test]
    fn identical_values_escalate_to_max() {
        let a = allocate_shots(|_| Ok(vec![0.3, 0.3]), &cfg(100, 100, 1000)).unwrap();
        assert_eq!(a.shots, 1000);
        assert_eq!(a.history.len(), 10);
    }

    #[test]
    fn threshold_algebra_for_small_gap() {
        // 2/√m <= 0.05 first at m = 1600
        let a = allocate_shots(|_| Ok(vec![0.05, 0.0]), &cfg(100, 100, 10_000)).unwrap();
        assert_eq!(a.shots, 1600);
        let a = allocate_shots(|_| Ok(vec![0.05, 0.0]), &cfg(100, 100, 1000)).unwrap();
        assert_eq!(a.shots, 1000);
    }

    #[test]
    fn increment_overshoot_is_capped() {
        let a = allocate_shots(|_| Ok(vec![0.0, 0.0]), &cfg(100, 300, 500)).unwrap();
        assert_eq!(a.shots, 500);
        let ms: Vec<u64> = a.history.iter().map(|h| h.0).collect();
        assert_eq!(ms, vec![100, 400, 500]);
    }

    #[test]
    fn more_than_two_candidates_uses_top_two() {
        assert!((top_two_gap(&[0.1, 0.9, 0.85, -1.0]) - 0.05).abs() < 1e-12);
        let a = allocate_shots(|_| Ok(vec![0.1, 0.9, 0.3]), &cfg(100, 100, 1000)).unwrap();
        assert_eq!(a.shots, 100);
        assert_eq!(a.argmax(), 1);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(ShotAllocConfig::new(0, 1, 10).is_err());
        assert!(ShotAllocConfig::new(20, 1, 10).is_err());
        assert!(ShotAllocConfig::new(1, 0, 10).is_err());
        assert!(allocate_shots(|_| Ok(vec![1.0]), &cfg(1, 1, 2)).is_err());
    }

    #[test]
    fn estimator_errors_propagate() {
        let r = allocate_shots(
            |_| Err(QrlError::InvalidArgument("boom".into())),
            &cfg(1, 1, 2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn ledger_fixed_agent_arithmetic() {
        // E episodes × S steps × A observables × m shots
        let (e, s, a, m) = (3u64, 4u64, 2usize, 100u64);
        let mut l = ShotLedger::new();
        for ep in 0..e {
            for st in 0..s {
                l.set_position(ep, st);
                let names: Vec<String> = (0..a).map(|i| format!("O{i}")).collect();
                l.record_execution(&names, m);
            }
        }
        let sum = l.summary();
        assert_eq!(sum.total_reads, e * s * a as u64 * m);
        assert_eq!(sum.total_executions, e * s * m);
        assert_eq!(l.rows().len() as u64, e * s * a as u64);
        assert_eq!(l.rows().last().unwrap().cumulative, e * s * m);
    }

    #[test]
    fn empty_ledger_is_zero() {
        let l = ShotLedger::new();
        assert_eq!(l.summary().total_reads, 0);
        assert_eq!(l.summary().total_executions, 0);
    }

    #[test]
    fn rows_merge_within_step() {
        let mut l = ShotLedger::new();
        l.set_position(0, 0);
        l.record("A", 10);
        l.record("B", 5);
        l.record("A", 7);
        assert_eq!(l.rows().len(), 2);
        assert_eq!(l.rows()[0].shots, 17);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("episode,step,observable,shots,cumulative\n"));
    }
}
