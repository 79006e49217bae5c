//! Experiment report: per-trial metrics, means, and significance against a
//! baseline system.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionCounts, MetricKind, Metrics};
use super::stats::paired_t_test;
use super::EvalError;

/// One system evaluated on one trial's test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub system: String,
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub weights: Vec<f64>,
    pub threshold: f64,
    /// Rows the system's classifiers were trained on, duplicates included.
    pub train_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    None,
    Level90,
    Level95,
    Level99,
    /// Differences have zero variance; no test statistic exists.
    NotApplicable,
}

impl Significance {
    pub fn from_p(p: f64) -> Self {
        if p < 0.01 {
            Significance::Level99
        } else if p < 0.05 {
            Significance::Level95
        } else if p < 0.10 {
            Significance::Level90
        } else {
            Significance::None
        }
    }

    pub fn stars(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::Level90 => "*",
            Significance::Level95 => "**",
            Significance::Level99 => "***",
            Significance::NotApplicable => " n/a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceCell {
    pub metric: MetricKind,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub mark: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: String,
    pub mean: Metrics,
    /// Empty for the baseline itself or when there is no baseline.
    pub significance: Vec<SignificanceCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: String,
    pub trials: usize,
    pub baseline: Option<String>,
    pub systems: Vec<SystemSummary>,
    pub results: Vec<TrialResult>,
}

impl EvalReport {
    /// Assembles means and one-sided paired t-tests (system > baseline) from
    /// per-trial results. `systems` fixes the row order.
    pub fn assemble(
        experiment: &str,
        systems: &[String],
        baseline: Option<&str>,
        results: Vec<TrialResult>,
    ) -> Result<Self, EvalError> {
        if systems.is_empty() {
            return Err(EvalError::NoSystems);
        }
        let trials = results.iter().map(|r| r.trial + 1).max().unwrap_or(0);
        let baseline = baseline.filter(|b| systems.iter().any(|s| s == b));
        let series = |system: &str, metric: MetricKind| -> Vec<f64> {
            let mut rows: Vec<&TrialResult> = results.iter().filter(|r| r.system == system).collect();
            rows.sort_by_key(|r| r.trial);
            rows.iter().map(|r| r.metrics.get(metric)).collect()
        };
        let mut summaries = Vec::with_capacity(systems.len());
        for system in systems {
            let values: Vec<Vec<f64>> = MetricKind::ALL.iter().map(|&m| series(system, m)).collect();
            let n = values[0].len();
            if n == 0 {
                return Err(EvalError::TooFewTrials(0));
            }
            let mean_of = |i: usize| values[i].iter().sum::<f64>() / n as f64;
            let mean = Metrics {
                accuracy: mean_of(0),
                precision: mean_of(1),
                recall: mean_of(2),
                f_measure: mean_of(3),
            };
            let mut significance = Vec::new();
            if let Some(base) = baseline.filter(|b| *b != system) {
                for (i, &metric) in MetricKind::ALL.iter().enumerate() {
                    significance.push(significance_cell(metric, &values[i], &series(base, metric))?);
                }
            }
            summaries.push(SystemSummary {
                system: system.clone(),
                mean,
                significance,
            });
        }
        Ok(EvalReport {
            experiment: experiment.to_string(),
            trials,
            baseline: baseline.map(str::to_string),
            systems: summaries,
            results,
        })
    }

    pub fn summary(&self, system: &str) -> Option<&SystemSummary> {
        self.systems.iter().find(|s| s.system == system)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut json = self.to_json();
        json.push('\n');
        std::fs::write(path, json)
    }

    /// Systems by metric, percentages with significance stars.
    pub fn to_table(&self) -> String {
        let width = self.systems.iter().map(|s| s.system.len()).max().unwrap_or(6).max(6) + 2;
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "System");
        for m in MetricKind::ALL {
            let _ = write!(out, "{:<16}", m.name());
        }
        out.push('\n');
        for s in &self.systems {
            let _ = write!(out, "{:<width$}", s.system);
            for m in MetricKind::ALL {
                let stars = s
                    .significance
                    .iter()
                    .find(|c| c.metric == m)
                    .map_or("", |c| c.mark.stars());
                let cell = format!("{:.2}%{}", 100.0 * s.mean.get(m), stars);
                let _ = write!(out, "{cell:<16}");
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
        if let Some(b) = &self.baseline {
            let _ = writeln!(
                out,
                "one-sided paired t-test vs {b} over {} trials: * p<0.10, ** p<0.05, *** p<0.01",
                self.trials
            );
        }
        out
    }
}

fn significance_cell(metric: MetricKind, system: &[f64], baseline: &[f64]) -> Result<SignificanceCell, EvalError> {
    let d: Vec<f64> = system.iter().zip(baseline).map(|(a, b)| a - b).collect();
    // identical differences (including all zero) leave nothing to test
    if system.len() == baseline.len() && d.windows(2).all(|w| w[0] == w[1]) && d.len() >= 2 {
        return Ok(SignificanceCell {
            metric,
            t: None,
            p: None,
            mark: Significance::NotApplicable,
        });
    }
    match paired_t_test(system, baseline) {
        Ok(test) => Ok(SignificanceCell {
            metric,
            t: Some(test.t),
            p: Some(test.p),
            mark: Significance::from_p(test.p),
        }),
        Err(EvalError::DegenerateVariance) => Ok(SignificanceCell {
            metric,
            t: None,
            p: None,
            mark: Significance::NotApplicable,
        }),
        Err(e) => Err(e),
    }
}
