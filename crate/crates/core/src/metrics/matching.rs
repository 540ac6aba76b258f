use std::cmp::Ordering;

use crate::nms::rank_order;
use crate::types::BoundingBox;

/// Similarity matrix, `sim[pred][gt]`, predictions in rank order.
pub type SimMatrix = Vec<Vec<f64>>;

/// Result of one greedy matching pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// Matched ground-truth index per prediction.
    pub pred_to_gt: Vec<Option<usize>>,
    /// Matched prediction index per ground truth.
    pub gt_to_pred: Vec<Option<usize>>,
}

impl Matching {
    pub fn true_positives(&self) -> usize {
        self.pred_to_gt.iter().filter(|m| m.is_some()).count()
    }
}

/// Order in which predictions are matched: descending confidence, then box
/// geometry, then input index.
pub fn rank_predictions(boxes: &[&BoundingBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| rank_order(boxes[i], boxes[j]).then(i.cmp(&j)));
    order
}

/// COCO-style greedy matching.
///
/// Predictions (rows of `sim`) are visited in order; each takes the unmatched
/// ground truth with the highest similarity `>= tau`, preferring
/// non-ignored ground truths over ignored ones. Equal similarities are broken
/// by `tie` (same shape as `sim`, higher wins) when given, then go to the
/// lower ground-truth index.
pub fn match_greedy(
    sim: &[Vec<f64>],
    tie: Option<&[Vec<f64>]>,
    gt_ignore: &[bool],
    tau: f64,
) -> Matching {
    let n_gt = gt_ignore.len();
    let mut gt_to_pred: Vec<Option<usize>> = vec![None; n_gt];
    let pred_to_gt = sim
        .iter()
        .enumerate()
        .map(|(d, row)| {
            let pick = |want_ignored: bool, gt_to_pred: &[Option<usize>]| {
                let mut best: Option<(usize, f64, f64)> = None;
                for (g, &s) in row.iter().enumerate() {
                    if gt_ignore[g] != want_ignored || gt_to_pred[g].is_some() || s < tau {
                        continue;
                    }
                    let t = tie.map_or(0.0, |t| t[d][g]);
                    let better = best.is_none_or(|(_, bs, bt)| {
                        s.total_cmp(&bs).then(t.total_cmp(&bt)) == Ordering::Greater
                    });
                    if better {
                        best = Some((g, s, t));
                    }
                }
                best.map(|(g, _, _)| g)
            };
            let m = pick(false, &gt_to_pred).or_else(|| pick(true, &gt_to_pred));
            if let Some(g) = m {
                gt_to_pred[g] = Some(d);
            }
            m
        })
        .collect();
    Matching {
        pred_to_gt,
        gt_to_pred,
    }
}
