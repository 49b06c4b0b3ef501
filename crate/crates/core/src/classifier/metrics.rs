//! Confusion-matrix metrics. Class 1 is the positive class.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn record(&mut self, truth: u8, predicted: u8) {
        match (truth, predicted) {
            (1, 1) => self.tp += 1,
            (0, 0) => self.tn += 1,
            (0, _) => self.fp += 1,
            _ => self.fn_ += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut cm = Self::default();
        for (t, p) in pairs {
            cm.record(t, p);
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall_accuracy: f64,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f_score: f64,
    pub mcc: f64,
}

/// Metric names in report order.
pub const METRIC_NAMES: [&str; 7] = [
    "overall_accuracy",
    "balanced_accuracy",
    "precision",
    "recall",
    "specificity",
    "f_score",
    "mcc",
];

impl MetricsReport {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.overall_accuracy,
            self.balanced_accuracy,
            self.precision,
            self.recall,
            self.specificity,
            self.f_score,
            self.mcc,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            overall_accuracy: a[0],
            balanced_accuracy: a[1],
            precision: a[2],
            recall: a[3],
            specificity: a[4],
            f_score: a[5],
            mcc: a[6],
        }
    }

    /// Arithmetic mean of each metric, accumulated in slice order.
    pub fn mean(reports: &[MetricsReport]) -> MetricsReport {
        if reports.is_empty() {
            return MetricsReport::default();
        }
        let mut acc = [0.0; 7];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.to_array()) {
                *a += v;
            }
        }
        let n = reports.len() as f64;
        MetricsReport::from_array(acc.map(|a| a / n))
    }

    /// Sample standard deviation (n - 1) of each metric; zeros for fewer than two reports.
    pub fn std_dev(reports: &[MetricsReport]) -> MetricsReport {
        if reports.len() < 2 {
            return MetricsReport::default();
        }
        let mean = MetricsReport::mean(reports).to_array();
        let mut acc = [0.0; 7];
        for r in reports {
            for ((a, v), m) in acc.iter_mut().zip(r.to_array()).zip(mean) {
                *a += (v - m) * (v - m);
            }
        }
        let d = (reports.len() - 1) as f64;
        MetricsReport::from_array(acc.map(|a| (a / d).sqrt()))
    }
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let overall_accuracy = safe_div(tp + tn, tp + tn + fp + fn_);
    let recall = safe_div(tp, tp + fn_);
    let specificity = safe_div(tn, tn + fp);
    let precision = safe_div(tp, tp + fp);
    let f_score = safe_div(2.0 * precision * recall, precision + recall);
    let mcc_den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = safe_div(tp * tn - fp * fn_, mcc_den);
    MetricsReport {
        overall_accuracy,
        balanced_accuracy: (recall + specificity) / 2.0,
        precision,
        recall,
        specificity,
        f_score,
        mcc,
    }
}
