//! Forward evaluation of the training objective.
//!
//! Each component is a plain function of already decoded predictions and
//! matched targets. Nothing here computes gradients.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::classmap::ClassMap;
use crate::error::{Error, Result};
use crate::geometry::{area_scale, ciou, iou, point_oks, AreaNorm, OksSigmas};
use crate::types::{BoundingBox, Skeleton, NUM_KEYPOINTS};

/// Probability clamp used by [`bce`].
pub const BCE_EPS: f64 = 1e-12;

const DEFAULTS_TOML: &str = include_str!("../defaults/loss_weights.v1.toml");

/// Binary cross-entropy with natural log; `p` is clamped to `[eps, 1 - eps]`.
pub fn bce(p: f64, target: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Smallest value [`bce`] can reach for `target`: its entropy.
pub fn bce_floor(target: f64) -> f64 {
    let h = |t: f64| if t <= 0.0 { 0.0 } else { -t * t.ln() };
    h(target) + h(1.0 - target)
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_box: f64,
    pub lambda_conf: f64,
    pub lambda_kpts: f64,
    pub lambda_kconf: f64,
    pub lambda_pbox: f64,
    pub lambda_pconf: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} = {v} must be a non-negative number"
                )));
            }
        }
        Ok(())
    }

    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("lambda_box", self.lambda_box),
            ("lambda_conf", self.lambda_conf),
            ("lambda_kpts", self.lambda_kpts),
            ("lambda_kconf", self.lambda_kconf),
            ("lambda_pbox", self.lambda_pbox),
            ("lambda_pconf", self.lambda_pconf),
        ]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            lambda_box: self.lambda_box * k,
            lambda_conf: self.lambda_conf * k,
            lambda_kpts: self.lambda_kpts * k,
            lambda_kconf: self.lambda_kconf * k,
            lambda_pbox: self.lambda_pbox * k,
            lambda_pconf: self.lambda_pconf * k,
        }
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        #[derive(Deserialize)]
        struct File {
            version: u32,
            weights: LossWeights,
        }
        static DEFAULTS: OnceLock<LossWeights> = OnceLock::new();
        *DEFAULTS.get_or_init(|| {
            let file: File = toml::from_str(DEFAULTS_TOML).expect("bundled loss defaults parse");
            assert_eq!(file.version, 1, "unexpected loss defaults version");
            file.weights
        })
    }
}

/// Which overlap measure the part-box terms use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartIou {
    #[default]
    Ciou,
    Iou,
}

impl PartIou {
    fn eval(self, pred: &BoundingBox, gt: &BoundingBox) -> f64 {
        match self {
            PartIou::Ciou => ciou(pred, gt),
            PartIou::Iou => iou(pred, gt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxLoss {
    /// `1 - CIoU(gt, pred)`
    pub loss: f64,
    /// CIoU, the target of the objectness BCE.
    pub conf_target: f64,
}

pub fn loss_box(pred: &BoundingBox, gt: &BoundingBox) -> BoxLoss {
    let c = ciou(gt, pred);
    BoxLoss {
        loss: 1.0 - c,
        conf_target: c,
    }
}

/// Objectness BCE against an overlap target clipped to `[0, 1]`.
pub fn loss_conf(conf_pred: f64, overlap: f64) -> f64 {
    bce(conf_pred, overlap.clamp(0.0, 1.0))
}

/// Predicted keypoint: `[x, y, visibility probability]`.
pub type KeypointOutput = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointLoss {
    pub kpts: f64,
    pub kconf: f64,
}

/// Keypoint distance and visibility terms.
///
/// The distance term averages `1 - OKS_k` over labeled ground-truth keypoints
/// and is 0 when there are none. The visibility term is the mean BCE against
/// the binarised ground-truth flags.
pub fn loss_kpts(
    pred: &[KeypointOutput; NUM_KEYPOINTS],
    gt: Option<&Skeleton>,
    gt_area: f64,
    sigmas: &OksSigmas,
    norm: AreaNorm,
) -> KeypointLoss {
    let scale = area_scale(gt_area, norm);
    let mut sum = 0.0;
    let mut eta = 0usize;
    let mut kconf = 0.0;
    for (k, p) in pred.iter().enumerate() {
        let visible = gt.is_some_and(|g| g.keypoints()[k].is_visible());
        if visible {
            let g = &gt.expect("visible implies present").keypoints()[k];
            sum += 1.0 - point_oks((p[0], p[1]), (g.x, g.y), scale, sigmas.get(k));
            eta += 1;
        }
        kconf += bce(p[2], if visible { 1.0 } else { 0.0 });
    }
    KeypointLoss {
        kpts: if eta == 0 { 0.0 } else { sum / eta as f64 },
        kconf: kconf / NUM_KEYPOINTS as f64,
    }
}

/// One part slot's contribution: visibility flag, overlap and center OKS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartTerm {
    pub visible: bool,
    pub overlap: f64,
    pub oks: f64,
}

/// `(1/eta) * sum over visible parts of (1 - overlap) + (1 - oks)`; 0 when no part is visible.
pub fn pbox_from_terms(terms: &[PartTerm]) -> f64 {
    let visible: Vec<&PartTerm> = terms.iter().filter(|t| t.visible).collect();
    if visible.is_empty() {
        return 0.0;
    }
    visible
        .iter()
        .map(|t| (1.0 - t.overlap) + (1.0 - t.oks))
        .sum::<f64>()
        / visible.len() as f64
}

/// Per-slot terms for aligned part lists. `gt[i] == None` marks an invisible part.
pub fn part_terms(
    pred: &[BoundingBox],
    gt: &[Option<BoundingBox>],
    gt_area: f64,
    gammas: &[f64],
    norm: AreaNorm,
    kind: PartIou,
) -> Result<Vec<PartTerm>> {
    if pred.len() != gt.len() || gt.len() != gammas.len() {
        return Err(Error::invalid(
            "part targets",
            format!(
                "{} predictions, {} targets, {} gammas",
                pred.len(),
                gt.len(),
                gammas.len()
            ),
        ));
    }
    let scale = area_scale(gt_area, norm);
    Ok(pred
        .iter()
        .zip(gt)
        .zip(gammas)
        .map(|((p, g), &gamma)| match g {
            Some(g) => PartTerm {
                visible: true,
                overlap: kind.eval(p, g),
                oks: point_oks(p.center(), g.center(), scale, gamma),
            },
            None => PartTerm {
                visible: false,
                overlap: 0.0,
                oks: 0.0,
            },
        })
        .collect())
}

pub fn loss_pbox(
    pred: &[BoundingBox],
    gt: &[Option<BoundingBox>],
    gt_area: f64,
    gammas: &[f64],
    norm: AreaNorm,
    kind: PartIou,
) -> Result<f64> {
    Ok(pbox_from_terms(&part_terms(
        pred, gt, gt_area, gammas, norm, kind,
    )?))
}

/// Mean BCE of part confidences against `visibility * overlap`.
pub fn loss_pconf(conf_pred: &[f64], visible: &[bool], overlaps: &[f64]) -> Result<f64> {
    if conf_pred.len() != visible.len() || visible.len() != overlaps.len() {
        return Err(Error::invalid(
            "part confidences",
            format!(
                "lengths differ: {} predictions, {} flags, {} overlaps",
                conf_pred.len(),
                visible.len(),
                overlaps.len()
            ),
        ));
    }
    Ok(mean(conf_pred.iter().zip(visible).zip(overlaps).map(
        |((&p, &v), &o)| {
            let target = if v { o.clamp(0.0, 1.0) } else { 0.0 };
            bce(p, target)
        },
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    #[serde(rename = "box")]
    pub box_: f64,
    pub conf: f64,
    pub kpts: f64,
    pub kconf: f64,
    pub pbox: f64,
    pub pconf: f64,
}

impl LossComponents {
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("box", self.box_),
            ("conf", self.conf),
            ("kpts", self.kpts),
            ("kconf", self.kconf),
            ("pbox", self.pbox),
            ("pconf", self.pconf),
        ]
    }

    /// Component-wise mean; zero for an empty slice.
    pub fn mean(items: &[LossComponents]) -> LossComponents {
        let n = items.len().max(1) as f64;
        let sum = items
            .iter()
            .fold(LossComponents::default(), |a, b| LossComponents {
                box_: a.box_ + b.box_,
                conf: a.conf + b.conf,
                kpts: a.kpts + b.kpts,
                kconf: a.kconf + b.kconf,
                pbox: a.pbox + b.pbox,
                pconf: a.pconf + b.pconf,
            });
        LossComponents {
            box_: sum.box_ / n,
            conf: sum.conf / n,
            kpts: sum.kpts / n,
            kconf: sum.kconf / n,
            pbox: sum.pbox / n,
            pconf: sum.pconf / n,
        }
    }
}

/// Weighted sum of the components. Fails on the first non-finite component.
pub fn loss_total(components: &LossComponents, weights: &LossWeights) -> Result<f64> {
    let mut total = 0.0;
    for ((name, value), (_, w)) in components.named().into_iter().zip(weights.named()) {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                component: name,
                value,
            });
        }
        total += w * value;
    }
    Ok(total)
}

/// A ground-truth person matched to one prediction slot.
///
/// Part lists are aligned with the class map; a `None` ground-truth part is
/// invisible.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedTarget {
    pub gt_body: BoundingBox,
    pub gt_skeleton: Option<Skeleton>,
    pub gt_parts: Vec<Option<BoundingBox>>,
    /// Predicted body; `conf()` is the predicted objectness.
    pub pred_body: BoundingBox,
    pub pred_keypoints: [KeypointOutput; NUM_KEYPOINTS],
    /// Predicted part boxes; `conf()` is the predicted part confidence.
    pub pred_parts: Vec<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub sigmas: OksSigmas,
    pub area_norm: AreaNorm,
    pub part_iou: PartIou,
}

/// Every component for one matched target.
pub fn evaluate_target(
    t: &MatchedTarget,
    cmap: &ClassMap,
    cfg: &LossConfig,
) -> Result<LossComponents> {
    let gt_area = t.gt_body.area();
    let b = loss_box(&t.pred_body, &t.gt_body);
    let k = loss_kpts(
        &t.pred_keypoints,
        t.gt_skeleton.as_ref(),
        gt_area,
        &cfg.sigmas,
        cfg.area_norm,
    );
    let terms = part_terms(
        &t.pred_parts,
        &t.gt_parts,
        gt_area,
        &cmap.gammas(),
        cfg.area_norm,
        cfg.part_iou,
    )?;
    let confs: Vec<f64> = t.pred_parts.iter().map(BoundingBox::conf).collect();
    let vis: Vec<bool> = terms.iter().map(|t| t.visible).collect();
    let overlaps: Vec<f64> = terms.iter().map(|t| t.overlap).collect();
    Ok(LossComponents {
        box_: b.loss,
        conf: loss_conf(t.pred_body.conf(), b.conf_target),
        kpts: k.kpts,
        kconf: k.kconf,
        pbox: pbox_from_terms(&terms),
        pconf: loss_pconf(&confs, &vis, &overlaps)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Keypoint, Visibility};
    use approx::assert_relative_eq;

    fn corners(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::from_corners(x1, y1, x2, y2, 1.0).unwrap()
    }

    #[test]
    fn defaults_file_loads() {
        let w = LossWeights::default();
        assert_eq!(w.lambda_box, 0.05);
        assert_eq!(w.lambda_pbox, w.lambda_box);
        assert_eq!(w.lambda_pconf, w.lambda_conf);
        w.validate().unwrap();
    }

    #[test]
    fn box_examples() {
        let gt = corners(0.0, 0.0, 10.0, 10.0);
        let perfect = loss_box(&gt, &gt);
        assert_eq!(perfect.loss, 0.0);
        assert_eq!(perfect.conf_target, 1.0);
        assert!(loss_box(&corners(100.0, 100.0, 110.0, 110.0), &gt).loss > 1.0);
        assert_relative_eq!(
            loss_box(&corners(2.5, 2.5, 7.5, 7.5), &gt).loss,
            0.75,
            epsilon = 1e-15
        );
    }

    #[test]
    fn kpts_examples() {
        let sigmas = OksSigmas::new(&[0.5; NUM_KEYPOINTS]).unwrap();
        let mut kps = vec![Keypoint::unlabeled(); NUM_KEYPOINTS];
        kps[0] = Keypoint::new(0.0, 0.0, Visibility::Visible);
        let gt = Skeleton::new(kps).unwrap();
        let mut pred = [[0.0, 0.0, 0.0]; NUM_KEYPOINTS];
        pred[0] = [0.0, 0.0, 1.0];
        assert_eq!(
            loss_kpts(&pred, Some(&gt), 4.0, &sigmas, AreaNorm::Squared).kpts,
            0.0
        );
        // d = 8, area 4, w 0.5 -> OKS = exp(-1)
        pred[0] = [8.0, 0.0, 1.0];
        let l = loss_kpts(&pred, Some(&gt), 4.0, &sigmas, AreaNorm::Squared);
        assert_relative_eq!(l.kpts, 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert!(l.kconf < 1e-9);
        let none = loss_kpts(&pred, None, 4.0, &sigmas, AreaNorm::Squared);
        assert_eq!(none.kpts, 0.0);
        assert!(none.kpts.is_finite() && none.kconf.is_finite());
    }

    #[test]
    fn pbox_examples() {
        let t = |visible, overlap, oks| PartTerm {
            visible,
            overlap,
            oks,
        };
        assert_relative_eq!(pbox_from_terms(&[t(true, 0.5, 0.8)]), 0.7, epsilon = 1e-15);
        assert_relative_eq!(
            pbox_from_terms(&[t(true, 0.5, 0.8), t(false, -0.9, 0.0)]),
            0.7,
            epsilon = 1e-15
        );
        assert_eq!(pbox_from_terms(&[t(false, 0.1, 0.1)]), 0.0);
        assert_eq!(pbox_from_terms(&[]), 0.0);

        let g = corners(0.0, 0.0, 10.0, 10.0);
        let l = loss_pbox(
            &[g, g],
            &[Some(g), None],
            100.0,
            &[0.1, 0.1],
            AreaNorm::Squared,
            PartIou::Ciou,
        )
        .unwrap();
        assert_eq!(l, 0.0);
        assert!(loss_pbox(
            &[g],
            &[Some(g), None],
            100.0,
            &[0.1],
            AreaNorm::Squared,
            PartIou::Ciou
        )
        .is_err());
    }

    #[test]
    fn pconf_examples() {
        assert_relative_eq!(
            loss_pconf(&[0.5], &[true], &[0.25]).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert!(loss_pconf(&[0.0, 0.0], &[false, false], &[0.3, 0.9]).unwrap() < 1e-11);
        let exact = loss_pconf(&[0.3], &[true], &[0.3]).unwrap();
        assert_relative_eq!(exact, bce_floor(0.3), epsilon = 1e-12);
        assert!(loss_pconf(&[0.3], &[true, false], &[0.3]).is_err());
    }

    #[test]
    fn total_examples() {
        let w = LossWeights::default();
        assert_eq!(loss_total(&LossComponents::default(), &w).unwrap(), 0.0);
        let c = LossComponents {
            box_: 0.3,
            conf: 0.2,
            kpts: 0.1,
            kconf: 0.4,
            pbox: 0.6,
            pconf: 0.5,
        };
        let t = loss_total(&c, &w).unwrap();
        let dot = 0.05 * 0.3 + 1.0 * 0.2 + 0.1 * 0.1 + 0.5 * 0.4 + 0.05 * 0.6 + 1.0 * 0.5;
        assert_relative_eq!(t, dot, epsilon = 1e-15);
        assert_relative_eq!(
            loss_total(&c, &w.scaled(2.0)).unwrap(),
            2.0 * t,
            epsilon = 1e-15
        );
        let bad = LossComponents {
            kpts: f64::NAN,
            ..c
        };
        match loss_total(&bad, &w) {
            Err(Error::NonFinite { component, .. }) => assert_eq!(component, "kpts"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn bce_floor_matches_bce_at_target() {
        for t in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!((bce(t, t) - bce_floor(t)).abs() < 1e-9);
        }
    }
}
