//! Confusion matrix, per-class precision/recall/F1 and class-weighted F1.
//!
//! Any metric with a zero denominator is reported as 0.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::label::{Label, CLASS_COUNT};

/// Rows are true labels, columns predicted labels, both in (good, bad, ugly) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; CLASS_COUNT]; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        self.predicted(class) - self.true_positives(class)
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        self.support(class) - self.true_positives(class)
    }

    /// Each row divided by its support; empty rows stay zero.
    pub fn row_normalized(&self) -> [[f64; CLASS_COUNT]; CLASS_COUNT] {
        let mut out = [[0.0; CLASS_COUNT]; CLASS_COUNT];
        for (t, row) in self.counts.iter().enumerate() {
            let s = self.support(t);
            if s > 0 {
                for (p, &v) in row.iter().enumerate() {
                    out[t][p] = v as f64 / s as f64;
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted,good,bad,ugly\n");
        for l in Label::ALL {
            let row = &self.counts[l.index()];
            let _ = writeln!(s, "{},{},{},{}", l, row[0], row[1], row[2]);
        }
        s
    }

    pub fn normalized_csv(&self) -> String {
        let norm = self.row_normalized();
        let mut s = String::from("true\\predicted,good,bad,ugly\n");
        for l in Label::ALL {
            let row = &norm[l.index()];
            let _ = writeln!(s, "{},{:.4},{:.4},{:.4}", l, row[0], row[1], row[2]);
        }
        s
    }
}

/// Tallies `(true, predicted)` index pairs.
pub fn confusion(truth: &[usize], predicted: &[usize]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(
            "confusion",
            format!("{} true labels but {} predictions", truth.len(), predicted.len()),
        ));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= CLASS_COUNT {
            return Err(Error::LabelOutOfRange(t));
        }
        if p >= CLASS_COUNT {
            return Err(Error::LabelOutOfRange(p));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

pub fn confusion_from_labels(truth: &[Label], predicted: &[Label]) -> Result<ConfusionMatrix> {
    let t: Vec<usize> = truth.iter().map(|l| l.index()).collect();
    let p: Vec<usize> = predicted.iter().map(|l| l.index()).collect();
    confusion(&t, &p)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn per_class_metrics(cm: &ConfusionMatrix) -> [ClassMetrics; CLASS_COUNT] {
    let mut out = [ClassMetrics::default(); CLASS_COUNT];
    for (c, m) in out.iter_mut().enumerate() {
        let tp = cm.true_positives(c);
        let precision = ratio(tp, tp + cm.false_positives(c));
        let recall = ratio(tp, tp + cm.false_negatives(c));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        *m = ClassMetrics { precision, recall, f1 };
    }
    out
}

/// Class proportions of the evaluated set (true-label supports).
pub fn class_proportions(cm: &ConfusionMatrix) -> [f64; CLASS_COUNT] {
    let total = cm.total();
    let mut p = [0.0; CLASS_COUNT];
    for (c, v) in p.iter_mut().enumerate() {
        *v = ratio(cm.support(c), total);
    }
    p
}

/// `Σ F1_l · p_l`.
pub fn f1_weighted(per_class: &[ClassMetrics; CLASS_COUNT], proportions: &[f64; CLASS_COUNT]) -> f64 {
    per_class.iter().zip(proportions).map(|(m, p)| m.f1 * p).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class: [ClassMetrics; CLASS_COUNT],
    pub proportions: [f64; CLASS_COUNT],
    pub f1_weighted: f64,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let per_class = per_class_metrics(&confusion);
        let proportions = class_proportions(&confusion);
        EvalReport {
            confusion,
            per_class,
            proportions,
            f1_weighted: f1_weighted(&per_class, &proportions),
        }
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        Ok(Self::from_confusion(confusion_from_labels(truth, predicted)?))
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..CLASS_COUNT).map(|c| self.confusion.true_positives(c)).sum();
        ratio(correct, self.confusion.total())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,f1,recall,precision,support,proportion\n");
        for l in Label::ALL {
            let m = &self.per_class[l.index()];
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{},{:.6}",
                l,
                m.f1,
                m.recall,
                m.precision,
                self.confusion.support(l.index()),
                self.proportions[l.index()]
            );
        }
        let _ = writeln!(s, "weighted,{:.6},,,{},1.000000", self.f1_weighted, self.confusion.total());
        s
    }

    /// Aligned text: the F1-W headline, then F1/recall/precision per class (percent).
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "F1-W (%)  {:>8.2}", 100.0 * self.f1_weighted);
        let _ = writeln!(s, "{:<8}{:>10}{:>12}{:>15}", "", "F1 (%)", "Recall (%)", "Precision (%)");
        for l in Label::ALL {
            let m = &self.per_class[l.index()];
            let name = format!("{}{}", l.name()[..1].to_uppercase(), &l.name()[1..]);
            let _ = writeln!(
                s,
                "{:<8}{:>10.2}{:>12.2}{:>15.2}",
                name,
                100.0 * m.f1,
                100.0 * m.recall,
                100.0 * m.precision
            );
        }
        s
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
