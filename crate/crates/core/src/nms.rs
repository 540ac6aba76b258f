//! Confidence filtering and class-aware greedy NMS.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::types::BoundingBox;

/// Detection class: the person body or one part class id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetClass {
    Body,
    Part(u32),
}

impl fmt::Display for DetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetClass::Body => f.write_str("body"),
            DetClass::Part(id) => write!(f, "part:{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNmsConfig")]
pub struct NmsConfig {
    pub tau_conf_body: f64,
    pub tau_iou_body: f64,
    pub tau_conf_part: f64,
    pub tau_iou_part: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNmsConfig {
    tau_conf_body: f64,
    tau_iou_body: f64,
    tau_conf_part: f64,
    tau_iou_part: f64,
}

impl Default for RawNmsConfig {
    fn default() -> Self {
        let d = NmsConfig::default();
        Self {
            tau_conf_body: d.tau_conf_body,
            tau_iou_body: d.tau_iou_body,
            tau_conf_part: d.tau_conf_part,
            tau_iou_part: d.tau_iou_part,
        }
    }
}

impl TryFrom<RawNmsConfig> for NmsConfig {
    type Error = Error;

    fn try_from(r: RawNmsConfig) -> Result<Self> {
        NmsConfig::new(
            r.tau_conf_body,
            r.tau_iou_body,
            r.tau_conf_part,
            r.tau_iou_part,
        )
    }
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            tau_conf_body: 0.05,
            tau_iou_body: 0.6,
            tau_conf_part: 0.1,
            tau_iou_part: 0.3,
        }
    }
}

impl NmsConfig {
    pub fn new(
        tau_conf_body: f64,
        tau_iou_body: f64,
        tau_conf_part: f64,
        tau_iou_part: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("tau_conf_body", tau_conf_body),
            ("tau_iou_body", tau_iou_body),
            ("tau_conf_part", tau_conf_part),
            ("tau_iou_part", tau_iou_part),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(Self {
            tau_conf_body,
            tau_iou_body,
            tau_conf_part,
            tau_iou_part,
        })
    }

    /// `(tau_conf, tau_iou)` for a class.
    pub fn thresholds(&self, class: DetClass) -> (f64, f64) {
        match class {
            DetClass::Body => (self.tau_conf_body, self.tau_iou_body),
            DetClass::Part(_) => (self.tau_conf_part, self.tau_iou_part),
        }
    }
}

/// A box awaiting suppression.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T = ()> {
    pub bbox: BoundingBox,
    pub class: DetClass,
    /// Data carried along untouched, e.g. a skeleton.
    pub payload: T,
}

impl Candidate<()> {
    pub fn new(bbox: BoundingBox, class: DetClass) -> Self {
        Self {
            bbox,
            class,
            payload: (),
        }
    }
}

/// Sort key: descending confidence, then ascending `(cx, cy, w, h)`.
pub fn rank_order(a: &BoundingBox, b: &BoundingBox) -> Ordering {
    b.conf()
        .total_cmp(&a.conf())
        .then(a.cx().total_cmp(&b.cx()))
        .then(a.cy().total_cmp(&b.cy()))
        .then(a.w().total_cmp(&b.w()))
        .then(a.h().total_cmp(&b.h()))
}

/// Indices of the surviving candidates.
///
/// Output is grouped by class (body first, then part ids ascending) and
/// within a class follows [`rank_order`].
pub fn nms_indices<T>(candidates: &[Candidate<T>], cfg: &NmsConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len())
        .filter(|&i| {
            let c = &candidates[i];
            c.bbox.conf() >= cfg.thresholds(c.class).0
        })
        .collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&candidates[i], &candidates[j]);
        a.class
            .cmp(&b.class)
            .then(rank_order(&a.bbox, &b.bbox))
            .then(i.cmp(&j))
    });

    let mut keep: Vec<usize> = Vec::with_capacity(order.len());
    let mut class_start = 0;
    for &i in &order {
        let c = &candidates[i];
        if keep.get(class_start).map(|&k| candidates[k].class) != Some(c.class) {
            class_start = keep.len();
        }
        let tau_iou = cfg.thresholds(c.class).1;
        let suppressed = keep[class_start..]
            .iter()
            .any(|&k| iou(&candidates[k].bbox, &c.bbox) > tau_iou);
        if !suppressed {
            keep.push(i);
        }
    }
    keep
}

pub fn nms<T: Clone>(candidates: &[Candidate<T>], cfg: &NmsConfig) -> Vec<Candidate<T>> {
    nms_indices(candidates, cfg)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(x1: f64, y1: f64, x2: f64, y2: f64, conf: f64) -> Candidate {
        Candidate::new(
            BoundingBox::from_corners(x1, y1, x2, y2, conf).unwrap(),
            DetClass::Body,
        )
    }

    #[test]
    fn single_box_kept() {
        let c = vec![body(0.0, 0.0, 10.0, 10.0, 0.9)];
        assert_eq!(nms(&c, &NmsConfig::default()), c);
    }

    #[test]
    fn empty_input() {
        assert!(nms::<()>(&[], &NmsConfig::default()).is_empty());
    }

    #[test]
    fn duplicate_suppressed() {
        let c = vec![
            body(0.0, 0.0, 10.0, 10.0, 0.8),
            body(0.0, 0.0, 10.0, 10.0, 0.9),
        ];
        let out = nms(&c, &NmsConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox.conf(), 0.9);
    }

    #[test]
    fn low_overlap_survives() {
        // IoU 1/3 < 0.6
        let c = vec![
            body(0.0, 0.0, 10.0, 10.0, 0.9),
            body(5.0, 0.0, 15.0, 10.0, 0.8),
        ];
        assert_eq!(nms(&c, &NmsConfig::default()).len(), 2);
    }

    #[test]
    fn part_threshold_applies_per_class() {
        let cfg = NmsConfig::default();
        let part = |cls, x1: f64, conf| {
            Candidate::new(
                BoundingBox::from_corners(x1, 0.0, x1 + 10.0, 10.0, conf).unwrap(),
                DetClass::Part(cls),
            )
        };
        // IoU 1/3 > 0.3 within a part class -> suppressed
        let same = vec![part(0, 0.0, 0.9), part(0, 5.0, 0.8)];
        assert_eq!(nms(&same, &cfg).len(), 1);
        // different part classes never interact
        let diff = vec![part(0, 0.0, 0.9), part(1, 0.0, 0.8)];
        assert_eq!(nms(&diff, &cfg).len(), 2);
        // below tau_conf_part
        assert!(nms(&[part(0, 0.0, 0.09)], &cfg).is_empty());
        // same box at 0.09 is fine as a body (tau 0.05)
        assert_eq!(nms(&[body(0.0, 0.0, 1.0, 1.0, 0.09)], &cfg).len(), 1);
    }

    #[test]
    fn ties_broken_by_geometry() {
        let c = vec![
            body(2.0, 0.0, 12.0, 10.0, 0.9),
            body(0.0, 0.0, 10.0, 10.0, 0.9),
        ];
        let out = nms_indices(&c, &NmsConfig::default());
        assert_eq!(out, vec![1]);
    }

    #[test]
    fn config_range_checked() {
        assert!(NmsConfig::new(0.1, 1.1, 0.1, 0.3).is_err());
        assert!(serde_json::from_str::<NmsConfig>(r#"{"tau_iou_part": -0.1}"#).is_err());
        let c: NmsConfig = serde_json::from_str(r#"{"tau_iou_part": 0.5}"#).unwrap();
        assert_eq!(c.tau_iou_part, 0.5);
        assert_eq!(c.tau_conf_body, 0.05);
    }
}
