/// Number of recall sample points used for interpolated AP.
pub const RECALL_POINTS: usize = 101;

/// 101-point interpolated AP and the maximum recall of a ranked list.
///
/// `tp` holds one flag per non-ignored prediction, sorted by descending
/// score. Returns `None` when there is no ground truth to recall.
pub fn precision_recall_summary(tp: &[bool], num_gt: usize) -> Option<(f64, f64)> {
    if num_gt == 0 {
        return None;
    }
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &is_tp) in tp.iter().enumerate() {
        if is_tp {
            hits += 1;
        }
        precision.push(hits as f64 / (k + 1) as f64);
        recall.push(hits as f64 / num_gt as f64);
    }
    // Precision envelope, right to left.
    for k in (0..precision.len().saturating_sub(1)).rev() {
        if precision[k] < precision[k + 1] {
            precision[k] = precision[k + 1];
        }
    }
    let mut sum = 0.0;
    let mut k = 0;
    for r in 0..RECALL_POINTS {
        let threshold = r as f64 / (RECALL_POINTS - 1) as f64;
        while k < recall.len() && recall[k] < threshold {
            k += 1;
        }
        if k < recall.len() {
            sum += precision[k];
        }
    }
    let max_recall = recall.last().copied().unwrap_or(0.0);
    Some((sum / RECALL_POINTS as f64, max_recall))
}

/// AP and AR averaged over matching thresholds.
///
/// Each entry is one threshold's ranked TP flags; all share `num_gt`.
pub fn average_precision(per_threshold: &[Vec<bool>], num_gt: usize) -> Option<(f64, f64)> {
    if per_threshold.is_empty() {
        return None;
    }
    let mut ap = 0.0;
    let mut ar = 0.0;
    for flags in per_threshold {
        let (a, r) = precision_recall_summary(flags, num_gt)?;
        ap += a;
        ar += r;
    }
    let n = per_threshold.len() as f64;
    Some((ap / n, ar / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_ranking() {
        assert_eq!(
            precision_recall_summary(&[true, true, true], 3),
            Some((1.0, 1.0))
        );
    }

    #[test]
    fn no_true_positives() {
        assert_eq!(
            precision_recall_summary(&[false, false], 2),
            Some((0.0, 0.0))
        );
        assert_eq!(precision_recall_summary(&[], 2), Some((0.0, 0.0)));
    }

    #[test]
    fn no_ground_truth_excluded() {
        assert_eq!(precision_recall_summary(&[false], 0), None);
    }

    #[test]
    fn tp_fp_tp_by_hand() {
        // PR points: (r 0.5, p 1), (r 0.5, p 1/2), (r 1, p 2/3).
        // Recall samples 0..=0.5 (51 points) see precision 1, 0.51..=1 (50 points) see 2/3.
        let expected = (51.0 * 1.0 + 50.0 * (2.0 / 3.0)) / 101.0;
        let (ap, ar) = precision_recall_summary(&[true, false, true], 2).unwrap();
        assert_relative_eq!(ap, expected, epsilon = 1e-15);
        assert_eq!(ar, 1.0);
    }

    #[test]
    fn averaged_over_thresholds() {
        let (ap, ar) = average_precision(&[vec![true], vec![false]], 1).unwrap();
        assert_eq!(ap, 0.5);
        assert_eq!(ar, 0.5);
    }
}
