//! Box and keypoint similarity kernels: IoU, inner IoU, CIoU and two OKS flavours.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BoundingBox, Skeleton, NUM_KEYPOINTS};

/// Published COCO per-keypoint sigmas.
pub const COCO_SIGMAS: [f64; NUM_KEYPOINTS] = [
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107,
    0.087, 0.087, 0.089, 0.089,
];

/// Per-keypoint tolerance weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OksSigmas([f64; NUM_KEYPOINTS]);

impl OksSigmas {
    pub fn new(sigmas: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_KEYPOINTS] = sigmas.try_into().map_err(|_| {
            Error::invalid(
                "sigmas",
                format!("expected {NUM_KEYPOINTS} values, got {}", sigmas.len()),
            )
        })?;
        if let Some(bad) = arr.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid(
                "sigmas",
                format!("sigma {bad} is not positive"),
            ));
        }
        Ok(Self(arr))
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Default for OksSigmas {
    fn default() -> Self {
        Self(COCO_SIGMAS)
    }
}

impl TryFrom<Vec<f64>> for OksSigmas {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<OksSigmas> for Vec<f64> {
    fn from(s: OksSigmas) -> Self {
        s.0.to_vec()
    }
}

/// Area normalisation used by the loss-side OKS.
///
/// `Squared` divides by `2 * area^2 * w^2` as the training objective is
/// written; `Linear` divides by `2 * area * w^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaNorm {
    #[default]
    Squared,
    Linear,
}

fn intersection(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.x2().min(b.x2()) - a.x1().max(b.x1());
    let ih = a.y2().min(b.y2()) - a.y1().max(b.y1());
    if iw <= 0.0 || ih <= 0.0 {
        0.0
    } else {
        iw * ih
    }
}

// Areas from corners so that identical boxes give exactly 1.
fn corner_area(b: &BoundingBox) -> f64 {
    (b.x2() - b.x1()) * (b.y2() - b.y1())
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = intersection(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = corner_area(a) + corner_area(b) - inter;
    (inter / union).min(1.0)
}

/// Fraction of the ground-truth box covered by the prediction.
pub fn inner_iou(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let inter = intersection(pred, gt);
    if inter == 0.0 {
        return 0.0;
    }
    (inter / corner_area(gt)).min(1.0)
}

/// Complete IoU: IoU minus a normalised center-distance penalty and an
/// aspect-ratio consistency term.
pub fn ciou(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let iou = iou(pred, gt);
    let (dx, dy) = (pred.cx() - gt.cx(), pred.cy() - gt.cy());
    let rho2 = dx * dx + dy * dy;
    let cw = pred.x2().max(gt.x2()) - pred.x1().min(gt.x1());
    let ch = pred.y2().max(gt.y2()) - pred.y1().min(gt.y1());
    let c2 = cw * cw + ch * ch;
    let dv = (gt.w() / gt.h()).atan() - (pred.w() / pred.h()).atan();
    let v = 4.0 / (PI * PI) * dv * dv;
    let alpha = if v == 0.0 { 0.0 } else { v / ((1.0 - iou) + v) };
    iou - rho2 / c2 - alpha * v
}

/// Keypoint similarity of the training objective, one slot per keypoint.
///
/// Uses the plain Euclidean distance (not squared) in the exponent. Slots
/// whose ground-truth keypoint is unlabeled are `None`.
pub fn oks_per_keypoint(
    pred: &Skeleton,
    gt: &Skeleton,
    gt_area: f64,
    sigmas: &OksSigmas,
    norm: AreaNorm,
) -> Vec<Option<f64>> {
    let scale = area_scale(gt_area, norm);
    pred.keypoints()
        .iter()
        .zip(gt.keypoints())
        .enumerate()
        .map(|(k, (p, g))| {
            g.is_visible()
                .then(|| point_oks((p.x, p.y), (g.x, g.y), scale, sigmas.get(k)))
        })
        .collect()
}

pub(crate) fn area_scale(gt_area: f64, norm: AreaNorm) -> f64 {
    match norm {
        AreaNorm::Squared => gt_area * gt_area,
        AreaNorm::Linear => gt_area,
    }
}

/// `exp(-d / (2 * scale * weight^2))` for a single point pair.
pub(crate) fn point_oks(pred: (f64, f64), gt: (f64, f64), scale: f64, weight: f64) -> f64 {
    let d = (pred.0 - gt.0).hypot(pred.1 - gt.1);
    (-d / (2.0 * scale * weight * weight)).exp()
}

/// COCO evaluation OKS.
///
/// Returns `None` when the ground truth has no labeled keypoints, since
/// such a pair cannot be scored.
pub fn oks_coco(pred: &Skeleton, gt: &Skeleton, gt_area: f64, sigmas: &OksSigmas) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (k, (p, g)) in pred.keypoints().iter().zip(gt.keypoints()).enumerate() {
        if !g.is_visible() {
            continue;
        }
        let kappa = 2.0 * sigmas.get(k);
        let (dx, dy) = (p.x - g.x, p.y - g.y);
        let e = (dx * dx + dy * dy) / (2.0 * gt_area * kappa * kappa);
        sum += (-e).exp();
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Keypoint, Visibility};
    use approx::assert_relative_eq;

    fn corners(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::from_corners(x1, y1, x2, y2, 1.0).unwrap()
    }

    fn skeleton_with(points: &[(usize, f64, f64)]) -> Skeleton {
        let mut kps = vec![Keypoint::unlabeled(); NUM_KEYPOINTS];
        for &(i, x, y) in points {
            kps[i] = Keypoint::new(x, y, Visibility::Visible);
        }
        Skeleton::new(kps).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = corners(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &corners(10.0, 10.0, 20.0, 20.0)), 0.0);
        // inter 50, union 150
        assert_relative_eq!(
            iou(&a, &corners(5.0, 0.0, 15.0, 10.0)),
            1.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn inner_iou_examples() {
        let gt = corners(0.0, 0.0, 10.0, 10.0);
        assert_eq!(inner_iou(&corners(-1.0, -1.0, 11.0, 11.0), &gt), 1.0);
        assert_relative_eq!(
            inner_iou(&corners(0.0, 0.0, 5.0, 10.0), &gt),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(inner_iou(&corners(20.0, 20.0, 30.0, 30.0), &gt), 0.0);
        assert_eq!(inner_iou(&gt, &gt), 1.0);
    }

    #[test]
    fn ciou_examples() {
        let gt = corners(0.0, 0.0, 10.0, 10.0);
        assert_eq!(ciou(&gt, &gt), 1.0);
        assert_relative_eq!(
            ciou(&corners(2.5, 2.5, 7.5, 7.5), &gt),
            0.25,
            epsilon = 1e-15
        );
        // Frozen from a straight-line evaluation of the published formula.
        assert_relative_eq!(
            ciou(
                &corners(0.0, 0.0, 10.0, 10.0),
                &corners(20.0, 0.0, 30.0, 10.0)
            ),
            -0.4,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            ciou(
                &corners(0.0, 0.0, 10.0, 20.0),
                &corners(5.0, 5.0, 25.0, 15.0)
            ),
            0.017816777396541594,
            epsilon = 1e-14
        );
    }

    #[test]
    fn oks_per_keypoint_examples() {
        let gt = skeleton_with(&[(0, 0.0, 0.0)]);
        let pred = skeleton_with(&[(0, 8.0, 0.0)]);
        let sigmas = OksSigmas::new(&[0.5; NUM_KEYPOINTS]).unwrap();
        let out = oks_per_keypoint(&pred, &gt, 4.0, &sigmas, AreaNorm::Squared);
        assert_relative_eq!(out[0].unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert!(out[1..].iter().all(Option::is_none));

        let same = oks_per_keypoint(&gt, &gt, 4.0, &sigmas, AreaNorm::Squared);
        assert_eq!(same[0], Some(1.0));

        let empty = Skeleton::new(vec![Keypoint::unlabeled(); NUM_KEYPOINTS]).unwrap();
        assert!(
            oks_per_keypoint(&pred, &empty, 4.0, &sigmas, AreaNorm::Squared)
                .iter()
                .all(Option::is_none)
        );

        // Linear normalisation: exp(-8 / (2 * 4 * 0.25)) = exp(-4)
        let lin = oks_per_keypoint(&pred, &gt, 4.0, &sigmas, AreaNorm::Linear);
        assert_relative_eq!(lin[0].unwrap(), (-4.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn oks_coco_examples() {
        let sigmas = OksSigmas::default();
        let gt = skeleton_with(&[(5, 10.0, 10.0), (6, 30.0, 10.0)]);
        assert_eq!(oks_coco(&gt, &gt, 400.0, &sigmas), Some(1.0));

        // one labeled keypoint at d^2 = 2 s^2 kappa^2
        let area = 900.0;
        let kappa = 2.0 * COCO_SIGMAS[5];
        let d = (2.0 * area * kappa * kappa).sqrt();
        let gt1 = skeleton_with(&[(5, 0.0, 0.0)]);
        let pred1 = skeleton_with(&[(5, d, 0.0)]);
        assert_relative_eq!(
            oks_coco(&pred1, &gt1, area, &sigmas).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-12
        );

        let empty = Skeleton::new(vec![Keypoint::unlabeled(); NUM_KEYPOINTS]).unwrap();
        assert_eq!(oks_coco(&pred1, &empty, area, &sigmas), None);
    }

    #[test]
    fn sigmas_validated() {
        assert!(OksSigmas::new(&[0.1; 16]).is_err());
        let mut s = COCO_SIGMAS;
        s[3] = 0.0;
        assert!(OksSigmas::new(&s).is_err());
    }
}
