//! Ranking and classification criteria: average precision, AUC, hamming
//! loss, and per-label means with undefined-label skipping.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::types::{Label, LabelMatrix};

/// Scores and ±1 ground truth for one label over a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScores {
    scores: Vec<f64>,
    positive: Vec<bool>,
}

impl LabelScores {
    /// Build from a score vector and a ±1 truth vector of equal length.
    pub fn new(scores: &Array1<f64>, truth: &Array1<f64>) -> Result<Self> {
        if scores.len() != truth.len() {
            return Err(Error::dim(format!(
                "{} scores vs {} truth entries",
                scores.len(),
                truth.len()
            )));
        }
        let positive = truth
            .iter()
            .map(|&t| {
                if t == 1.0 {
                    Ok(true)
                } else if t == -1.0 {
                    Ok(false)
                } else {
                    Err(Error::invalid(format!("truth entry {t} is not -1 or +1")))
                }
            })
            .collect::<Result<Vec<bool>>>()?;
        Self::from_parts(scores.to_vec(), positive)
    }

    /// Build from raw parts; `positive[i]` marks sample `i` as a positive.
    pub fn from_parts(scores: Vec<f64>, positive: Vec<bool>) -> Result<Self> {
        if scores.len() != positive.len() {
            return Err(Error::dim(format!(
                "{} scores vs {} truth entries",
                scores.len(),
                positive.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("scores must be finite"));
        }
        Ok(LabelScores { scores, positive })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn num_positives(&self) -> usize {
        self.positive.iter().filter(|&&p| p).count()
    }

    pub fn num_negatives(&self) -> usize {
        self.len() - self.num_positives()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn positives(&self) -> &[bool] {
        &self.positive
    }
}

/// Sample order induced by descending score, ties broken by ascending
/// original index.
pub(crate) fn ranking_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores validated finite")
            .then(a.cmp(&b))
    });
    order
}

/// Average precision: mean of Prec@k over the ranks k that hold a positive
/// sample, with the ranking induced by descending score.
pub fn average_precision(ls: &LabelScores) -> Result<f64> {
    if ls.num_positives() == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs at least one positive sample".into(),
        ));
    }
    let order = ranking_order(&ls.scores);
    let mut positives_seen = 0usize;
    let mut sum = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if ls.positive[idx] {
            positives_seen += 1;
            sum += positives_seen as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / positives_seen as f64)
}

/// Area under the ROC curve via the tie-corrected rank-sum statistic:
/// the fraction of (positive, negative) pairs ranked correctly, ties ½.
pub fn auc(ls: &LabelScores) -> Result<f64> {
    let p = ls.num_positives();
    let q = ls.num_negatives();
    if p == 0 || q == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one positive and one negative sample".into(),
        ));
    }
    let n = ls.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        ls.scores[a]
            .partial_cmp(&ls.scores[b])
            .expect("scores validated finite")
    });

    // Average 1-based ranks over tied score groups, summed over positives.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ls.scores[order[j + 1]] == ls.scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if ls.positive[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }

    let p = p as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q as f64))
}

/// Fraction of entries whose hard prediction disagrees with the truth.
/// Every compared entry must be known in both matrices.
pub fn hamming_loss(pred: &LabelMatrix, truth: &LabelMatrix) -> Result<f64> {
    if pred.num_labels() != truth.num_labels() || pred.num_samples() != truth.num_samples() {
        return Err(Error::dim(format!(
            "prediction is {}x{} but truth is {}x{}",
            pred.num_labels(),
            pred.num_samples(),
            truth.num_labels(),
            truth.num_samples()
        )));
    }
    let total = pred.num_labels() * pred.num_samples();
    if total == 0 {
        return Err(Error::invalid("hamming loss over zero entries is undefined"));
    }
    let mut mismatches = 0usize;
    for t in 0..pred.num_labels() {
        for j in 0..pred.num_samples() {
            let (p, y) = (pred.get(t, j), truth.get(t, j));
            if !p.is_known() || !y.is_known() {
                return Err(Error::invalid(format!(
                    "hamming loss requires known entries on both sides at ({t}, {j})"
                )));
            }
            if p != y {
                mismatches += 1;
            }
        }
    }
    Ok(mismatches as f64 / total as f64)
}

/// Mean over labels with undefined labels skipped.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LabelMean {
    pub mean: f64,
    /// Number of labels skipped because their metric was undefined.
    pub skipped: usize,
}

/// Arithmetic mean of the defined per-label values; undefined labels are
/// skipped and counted. Errors when every label is undefined.
pub fn mean_over_labels(per_label: &[Option<f64>]) -> Result<LabelMean> {
    let defined: Vec<f64> = per_label.iter().filter_map(|v| *v).collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric(
            "metric undefined on every label".into(),
        ));
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(LabelMean {
        mean,
        skipped: per_label.len() - defined.len(),
    })
}

/// Harden a score matrix: entries strictly above `threshold` become positive.
pub fn threshold_predictions(scores: &Array2<f64>, threshold: f64) -> LabelMatrix {
    let mut out = LabelMatrix::unknown(scores.nrows(), scores.ncols());
    for ((t, j), &s) in scores.indexed_iter() {
        out.set(
            t,
            j,
            if s > threshold { Label::Pos } else { Label::Neg },
        );
    }
    out
}
