use serde::{Deserialize, Serialize};

use crate::geometry::TransformTag;

/// Accuracy broken down by augmentation kind, plus a confusion matrix
/// (`confusion[true][predicted]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Accuracy per tag in `O, R, SC, SH` order; `None` when a tag has no
    /// samples.
    pub per_tag: [Option<f64>; 4],
    pub tag_counts: [usize; 4],
    pub overall: f64,
    pub total: usize,
    pub correct: usize,
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    /// Builds a report from `(label, prediction, tag)` triples.
    pub fn from_predictions(n_classes: usize, items: impl IntoIterator<Item = (usize, usize, TransformTag)>) -> Self {
        let mut confusion = vec![vec![0; n_classes]; n_classes];
        let mut hits = [0usize; 4];
        let mut counts = [0usize; 4];
        for (label, pred, tag) in items {
            confusion[label][pred] += 1;
            counts[tag.index()] += 1;
            if label == pred {
                hits[tag.index()] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        let correct: usize = hits.iter().sum();
        let per_tag = std::array::from_fn(|k| (counts[k] > 0).then(|| hits[k] as f64 / counts[k] as f64));
        Self {
            per_tag,
            tag_counts: counts,
            overall: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
            total,
            correct,
            confusion,
        }
    }

    pub fn accuracy(&self, tag: TransformTag) -> Option<f64> {
        self.per_tag[tag.index()]
    }

    /// `model,trans_ratio,acc_O,acc_R,acc_SC,acc_SH,OA`
    pub const CSV_HEADER: &'static str = "model,trans_ratio,acc_O,acc_R,acc_SC,acc_SH,OA";

    pub fn csv_row(&self, model: &str, ratio: Option<f64>) -> String {
        let fmt = |v: Option<f64>| v.map(|a| format!("{a:.4}")).unwrap_or_default();
        let mut row = format!("{model},{}", ratio.map(|r| format!("{r:.1}")).unwrap_or_default());
        for a in self.per_tag {
            row.push(',');
            row.push_str(&fmt(a));
        }
        row.push(',');
        row.push_str(&fmt(Some(self.overall)));
        row
    }
}
