//! Evaluation mathematics: AP@K and mAP@K over ranked lists, hit rate,
//! per-class precision/recall/F1 with macro averages, and confusion
//! matrices.
//!
//! The default AP is the step-sampled variant: the precision-times-relevance
//! sum runs only over ranks k = step·n, normalized by GTP@K = min(K, R).
//! With step 5 this caps AP at 0.2 whenever R ≥ K, and a lone relevant
//! document at rank 1 scores 0. A classical truncated AP (`standard`) is
//! provided for comparison only.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    StepSampled,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    pub step: usize,
    pub mode: ApMode,
    pub k: usize,
}

impl ApConfig {
    pub fn step_sampled(k: usize) -> ApConfig {
        ApConfig {
            step: 5,
            mode: ApMode::StepSampled,
            k,
        }
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.step == 0 {
            return Err(CoreError::Config("AP step must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(CoreError::Config("AP K must be at least 1".into()));
        }
        if self.mode == ApMode::StepSampled && !self.k.is_multiple_of(self.step) {
            return Err(CoreError::Config(format!(
                "K={} must be a multiple of step={} in step-sampled mode",
                self.k, self.step
            )));
        }
        Ok(())
    }
}

/// Ordered relevance flags for one ranked list, plus the total ground-truth
/// relevant count R for the query. Ranks beyond the list count as
/// irrelevant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgedList {
    pub rels: Vec<bool>,
    pub total_relevant: usize,
}

impl RelevanceJudgedList {
    pub fn new(rels: Vec<bool>, total_relevant: usize) -> RelevanceJudgedList {
        RelevanceJudgedList {
            rels,
            total_relevant,
        }
    }

    fn rel_at(&self, k: usize) -> bool {
        self.rels.get(k - 1).copied().unwrap_or(false)
    }

    fn precision_at(&self, k: usize) -> f64 {
        let cutoff = k.min(self.rels.len());
        let hits = self.rels[..cutoff].iter().filter(|&&r| r).count();
        hits as f64 / k as f64
    }
}

/// AP@K of one judged list. GTP@K = min(K, R); GTP@K = 0 yields 0 by the
/// declared degenerate-case rule.
pub fn average_precision_at_k(judged: &RelevanceJudgedList, cfg: &ApConfig) -> CoreResult<f64> {
    cfg.validate()?;
    let gtp = cfg.k.min(judged.total_relevant);
    if gtp == 0 {
        return Ok(0.0);
    }
    let ranks: Vec<usize> = match cfg.mode {
        ApMode::StepSampled => (1..=cfg.k / cfg.step).map(|n| n * cfg.step).collect(),
        ApMode::Standard => (1..=cfg.k).collect(),
    };
    let sum: f64 = ranks
        .into_iter()
        .filter(|&k| judged.rel_at(k))
        .map(|k| judged.precision_at(k))
        .sum();
    // An empty f64 sum is -0.0; keep zeros positive in serialized reports.
    Ok((sum + 0.0) / gtp as f64)
}

/// Arithmetic mean of per-query AP values; empty input is an error.
pub fn map_at_k(aps: &[f64]) -> CoreResult<f64> {
    if aps.is_empty() {
        return Err(CoreError::Data(
            "mAP is undefined over zero queries".into(),
        ));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Relevant retrieved over total retrieved; 0 when nothing was retrieved.
pub fn hit_rate(relevant_retrieved: usize, total_retrieved: usize) -> f64 {
    if total_retrieved == 0 {
        0.0
    } else {
        relevant_retrieved as f64 / total_retrieved as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrf {
    pub label: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class precision/recall/F1 plus macro averages over the classes
/// present in the true labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    pub per_class: Vec<ClassPrf>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn check_labels(labels: &[String], label_set: &[String]) -> CoreResult<()> {
    for label in labels {
        if !label_set.contains(label) {
            return Err(CoreError::Data(format!(
                "label {label:?} is not in the label set"
            )));
        }
    }
    Ok(())
}

/// One-vs-rest P/R/F1 per class with the 0-convention for empty
/// denominators. Macro averages are unweighted means over classes present
/// in `true_labels`, preserving `label_set` order.
pub fn prf_scores(
    true_labels: &[String],
    pred_labels: &[String],
    label_set: &[String],
) -> CoreResult<PrfReport> {
    if true_labels.len() != pred_labels.len() {
        return Err(CoreError::Data(format!(
            "label sequences differ in length: {} vs {}",
            true_labels.len(),
            pred_labels.len()
        )));
    }
    check_labels(true_labels, label_set)?;
    check_labels(pred_labels, label_set)?;

    let mut per_class = Vec::new();
    for label in label_set {
        let support = true_labels.iter().filter(|t| *t == label).count();
        if support == 0 {
            continue;
        }
        let tp = true_labels
            .iter()
            .zip(pred_labels)
            .filter(|(t, p)| *t == label && *p == label)
            .count();
        let pred_count = pred_labels.iter().filter(|p| *p == label).count();
        let precision = if pred_count == 0 {
            0.0
        } else {
            tp as f64 / pred_count as f64
        };
        let recall = tp as f64 / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassPrf {
            label: label.clone(),
            support,
            precision,
            recall,
            f1,
        });
    }

    let n = per_class.len() as f64;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for c in &per_class {
        p += c.precision;
        r += c.recall;
        f += c.f1;
    }
    Ok(PrfReport {
        per_class,
        macro_precision: if n > 0.0 { p / n } else { 0.0 },
        macro_recall: if n > 0.0 { r / n } else { 0.0 },
        macro_f1: if n > 0.0 { f / n } else { 0.0 },
    })
}

/// Row-major confusion counts: `counts[true][pred]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(
    true_labels: &[String],
    pred_labels: &[String],
    label_set: &[String],
) -> CoreResult<ConfusionMatrix> {
    if true_labels.len() != pred_labels.len() {
        return Err(CoreError::Data(format!(
            "label sequences differ in length: {} vs {}",
            true_labels.len(),
            pred_labels.len()
        )));
    }
    check_labels(true_labels, label_set)?;
    check_labels(pred_labels, label_set)?;

    let idx = |label: &String| label_set.iter().position(|l| l == label).unwrap();
    let mut counts = vec![vec![0u64; label_set.len()]; label_set.len()];
    for (t, p) in true_labels.iter().zip(pred_labels) {
        counts[idx(t)][idx(p)] += 1;
    }
    Ok(ConfusionMatrix {
        labels: label_set.to_vec(),
        counts,
    })
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    /// CSV with labeled axes: first column holds the true label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true_label");
        for label in &self.labels {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (row, label) in self.labels.iter().enumerate() {
            out.push_str(label);
            for count in &self.counts[row] {
                out.push(',');
                out.push_str(&count.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Derive the PRF report from a confusion matrix. Agrees exactly with
/// [`prf_scores`] computed on the underlying labels.
pub fn prf_from_confusion(matrix: &ConfusionMatrix) -> PrfReport {
    let n_labels = matrix.labels.len();
    let mut per_class = Vec::new();
    for i in 0..n_labels {
        let support: u64 = matrix.row_sum(i);
        if support == 0 {
            continue;
        }
        let tp = matrix.counts[i][i];
        let pred_count: u64 = (0..n_labels).map(|r| matrix.counts[r][i]).sum();
        let precision = if pred_count == 0 {
            0.0
        } else {
            tp as f64 / pred_count as f64
        };
        let recall = tp as f64 / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassPrf {
            label: matrix.labels[i].clone(),
            support: support as usize,
            precision,
            recall,
            f1,
        });
    }
    let n = per_class.len() as f64;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for c in &per_class {
        p += c.precision;
        r += c.recall;
        f += c.f1;
    }
    PrfReport {
        per_class,
        macro_precision: if n > 0.0 { p / n } else { 0.0 },
        macro_recall: if n > 0.0 { r / n } else { 0.0 },
        macro_f1: if n > 0.0 { f / n } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judged(pattern: &[u8], r: usize) -> RelevanceJudgedList {
        RelevanceJudgedList::new(pattern.iter().map(|&b| b == 1).collect(), r)
    }

    #[test]
    fn ap_worked_example() {
        // P@5 = 2/5, rel@5 = 1, GTP = 2.
        let ap = average_precision_at_k(&judged(&[0, 1, 0, 0, 1], 2), &ApConfig::step_sampled(5))
            .unwrap();
        assert!((ap - 0.2).abs() <= 1e-15, "{ap}");
    }

    #[test]
    fn ap_all_irrelevant_is_zero() {
        let ap = average_precision_at_k(
            &judged(&[0; 10], 3),
            &ApConfig::step_sampled(10),
        )
        .unwrap();
        assert_eq!(ap, 0.0);
    }

    #[test]
    fn ap_no_relevant_documents_is_zero() {
        let ap = average_precision_at_k(&judged(&[1, 1, 1], 0), &ApConfig::step_sampled(5)).unwrap();
        assert_eq!(ap, 0.0);
    }

    #[test]
    fn ap_fifty_all_relevant_hits_the_ceiling() {
        let ap = average_precision_at_k(&judged(&[1; 50], 50), &ApConfig::step_sampled(50)).unwrap();
        assert!((ap - 0.2).abs() <= 1e-15, "{ap}");
    }

    #[test]
    fn ap_ignores_ranks_past_k() {
        let short = judged(&[0, 0, 0, 0, 1], 2);
        let long = judged(&[0, 0, 0, 0, 1, 1, 1, 1], 2);
        let cfg = ApConfig::step_sampled(5);
        assert_eq!(
            average_precision_at_k(&short, &cfg).unwrap(),
            average_precision_at_k(&long, &cfg).unwrap()
        );
    }

    #[test]
    fn ap_step_sampling_skips_rank_one() {
        // A lone relevant document at rank 1 scores 0 under step sampling
        // but 1.0 under the standard truncated AP.
        let list = judged(&[1], 1);
        let literal = average_precision_at_k(&list, &ApConfig::step_sampled(5)).unwrap();
        assert_eq!(literal, 0.0);
        let standard = average_precision_at_k(
            &list,
            &ApConfig {
                step: 5,
                mode: ApMode::Standard,
                k: 5,
            },
        )
        .unwrap();
        assert!((standard - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn ap_rejects_k_not_multiple_of_step() {
        let err = average_precision_at_k(&judged(&[1], 1), &ApConfig::step_sampled(7));
        assert!(matches!(err, Err(CoreError::Config(_))));
    }

    #[test]
    fn map_examples() {
        assert!((map_at_k(&[0.2, 0.0, 0.1]).unwrap() - 0.1).abs() <= 1e-15);
        assert_eq!(map_at_k(&[0.37]).unwrap(), 0.37);
        assert!(map_at_k(&[]).is_err());
    }

    #[test]
    fn hit_rate_examples() {
        assert!((hit_rate(30, 1000) - 0.03).abs() <= 1e-15);
        assert_eq!(hit_rate(5, 5), 1.0);
        assert_eq!(hit_rate(0, 0), 0.0);
    }

    fn strings(labels: &[&str]) -> Vec<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn prf_hand_computed_three_class_example() {
        let truth = strings(&["a", "a", "b", "c"]);
        let pred = strings(&["a", "b", "b", "b"]);
        let set = strings(&["a", "b", "c"]);
        let report = prf_scores(&truth, &pred, &set).unwrap();

        let a = &report.per_class[0];
        assert_eq!((a.precision, a.recall), (1.0, 0.5));
        let b = &report.per_class[1];
        assert!((b.precision - 1.0 / 3.0).abs() <= 1e-15);
        assert_eq!(b.recall, 1.0);
        let c = &report.per_class[2];
        assert_eq!((c.precision, c.recall), (0.0, 0.0));

        assert!((report.macro_precision - 4.0 / 9.0).abs() <= 1e-15);
        assert!((report.macro_recall - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn prf_perfect_prediction() {
        let labels = strings(&["x", "y", "x"]);
        let set = strings(&["x", "y"]);
        let report = prf_scores(&labels, &labels, &set).unwrap();
        assert_eq!(report.macro_precision, 1.0);
        assert_eq!(report.macro_recall, 1.0);
        assert_eq!(report.macro_f1, 1.0);
    }

    #[test]
    fn prf_single_class_collapse() {
        // Balanced two-class data, everything predicted as "a".
        let truth = strings(&["a", "b", "a", "b"]);
        let pred = strings(&["a", "a", "a", "a"]);
        let set = strings(&["a", "b"]);
        let report = prf_scores(&truth, &pred, &set).unwrap();
        assert!((report.macro_f1 - 1.0 / 3.0).abs() <= 1e-15);
    }

    #[test]
    fn prf_macro_is_mean_of_emitted_classes() {
        let truth = strings(&["a", "b", "c", "a"]);
        let pred = strings(&["b", "b", "a", "a"]);
        let set = strings(&["a", "b", "c", "d"]);
        let report = prf_scores(&truth, &pred, &set).unwrap();
        let mean_f1: f64 =
            report.per_class.iter().map(|c| c.f1).sum::<f64>() / report.per_class.len() as f64;
        assert!((report.macro_f1 - mean_f1).abs() <= 1e-15);
        // "d" has no support and is not emitted.
        assert!(report.per_class.iter().all(|c| c.label != "d"));
    }

    #[test]
    fn prf_length_mismatch_is_error() {
        let err = prf_scores(&strings(&["a"]), &strings(&["a", "b"]), &strings(&["a", "b"]));
        assert!(matches!(err, Err(CoreError::Data(_))));
    }

    #[test]
    fn confusion_diagonal_for_perfect_prediction() {
        let labels = strings(&["a", "b", "b", "c"]);
        let set = strings(&["a", "b", "c"]);
        let m = confusion_matrix(&labels, &labels, &set).unwrap();
        for (i, row) in m.counts.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                if i == j {
                    assert_eq!(count, labels.iter().filter(|l| **l == set[i]).count() as u64);
                } else {
                    assert_eq!(count, 0);
                }
            }
        }
    }

    #[test]
    fn confusion_row_sums_equal_supports_and_total_equals_samples() {
        let truth = strings(&["a", "b", "a", "c", "b", "a"]);
        let pred = strings(&["b", "b", "a", "a", "c", "a"]);
        let set = strings(&["a", "b", "c"]);
        let m = confusion_matrix(&truth, &pred, &set).unwrap();
        assert_eq!(m.total(), 6);
        for (i, label) in set.iter().enumerate() {
            let support = truth.iter().filter(|t| *t == label).count() as u64;
            assert_eq!(m.row_sum(i), support);
        }
    }

    #[test]
    fn confusion_rejects_unknown_label() {
        let err = confusion_matrix(
            &strings(&["a", "zzz"]),
            &strings(&["a", "a"]),
            &strings(&["a"]),
        );
        match err {
            Err(CoreError::Data(msg)) => assert!(msg.contains("zzz"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn prf_from_confusion_matches_direct() {
        let truth = strings(&["a", "b", "a", "c", "b", "a", "c", "c"]);
        let pred = strings(&["b", "b", "a", "a", "c", "a", "c", "b"]);
        let set = strings(&["a", "b", "c"]);
        let direct = prf_scores(&truth, &pred, &set).unwrap();
        let via_matrix = prf_from_confusion(&confusion_matrix(&truth, &pred, &set).unwrap());
        assert_eq!(direct, via_matrix);
    }

    #[test]
    fn confusion_csv_shape() {
        let truth = strings(&["a", "b"]);
        let pred = strings(&["a", "a"]);
        let set = strings(&["a", "b"]);
        let m = confusion_matrix(&truth, &pred, &set).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv, "true_label,a,b\na,1,0\nb,1,0\n");
    }
}
