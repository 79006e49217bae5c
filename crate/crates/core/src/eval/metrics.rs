use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::preprocess::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    /// Tallies (predicted, actual) pairs with `Urgent` as the positive class.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (predicted, actual) in pairs {
            match (predicted.is_urgent(), actual.is_urgent()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Harmonic mean of precision and recall, as `2tp / (2tp + fp + fn)`;
    /// zero when there are no true positives.
    pub fn f_measure(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / (2 * self.tp + self.fp + self.fn_) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl Metrics {
    pub fn get(&self, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::Accuracy => self.accuracy,
            MetricKind::Precision => self.precision,
            MetricKind::Recall => self.recall,
            MetricKind::FMeasure => self.f_measure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    Precision,
    Recall,
    FMeasure,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Accuracy,
        MetricKind::Precision,
        MetricKind::Recall,
        MetricKind::FMeasure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "Accuracy",
            MetricKind::Precision => "Precision",
            MetricKind::Recall => "Recall",
            MetricKind::FMeasure => "F-Measure",
        }
    }
}

/// Accuracy, precision, recall and F-measure. Precision (recall) is 0 when
/// nothing was predicted (present) positive; F is 0 when both are 0.
pub fn compute_metrics(c: &ConfusionCounts) -> Result<Metrics, EvalError> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::EmptyConfusion);
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, total),
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        f_measure: c.f_measure(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier() {
        let m = compute_metrics(&ConfusionCounts::new(10, 0, 10, 0)).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f_measure), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn predict_all_positive() {
        let m = compute_metrics(&ConfusionCounts::new(10, 10, 0, 0)).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.f_measure, 2.0 / 3.0);
    }

    #[test]
    fn harmonic_mean_example() {
        // P = 0.6, R = 0.3: tp=3, fp=2, fn=7.
        let m = compute_metrics(&ConfusionCounts::new(3, 2, 0, 7)).unwrap();
        assert!((m.precision - 0.6).abs() < 1e-15 && (m.recall - 0.3).abs() < 1e-15);
        assert!((m.f_measure - 0.4).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(
            compute_metrics(&ConfusionCounts::default()),
            Err(EvalError::EmptyConfusion)
        ));
    }

    #[test]
    fn f_between_precision_and_recall() {
        for tp in 0..6 {
            for fp in 0..6 {
                for fn_ in 0..6 {
                    let c = ConfusionCounts::new(tp, fp, 1, fn_);
                    let m = compute_metrics(&c).unwrap();
                    if m.precision > 0.0 && m.recall > 0.0 {
                        let lo = m.precision.min(m.recall);
                        let hi = m.precision.max(m.recall);
                        assert!(m.f_measure >= lo - 1e-15 && m.f_measure <= hi + 1e-15);
                    }
                    assert_eq!(m.f_measure == 0.0, m.precision + m.recall == 0.0);
                }
            }
        }
    }

    #[test]
    fn from_pairs_counts() {
        use Label::*;
        let c = ConfusionCounts::from_pairs([
            (Urgent, Urgent),
            (Urgent, NonUrgent),
            (NonUrgent, NonUrgent),
            (NonUrgent, Urgent),
            (NonUrgent, Urgent),
        ]);
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 2));
    }
}
