//! Matched ground-truth/prediction pairs for the loss command.
//!
//! ```json
//! {
//!   "classmap": {"mode": "bkpd"},
//!   "pairs": [{
//!     "gt_body": [x1, y1, x2, y2],
//!     "gt_keypoints": [x, y, v, ...],
//!     "gt_parts": {"head": [x1, y1, x2, y2]},
//!     "pred_body": [x1, y1, x2, y2, conf],
//!     "pred_keypoints": [[x, y, visibility_prob], ...],
//!     "pred_parts": {"head": [x1, y1, x2, y2, conf], ...}
//!   }]
//! }
//! ```
//!
//! `gt_parts` lists only visible parts; `pred_parts` must cover every class.
//! Boxes are not clamped: loss inputs need not come from a bounded image.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::read_text;
use crate::classmap::ClassMap;
use crate::error::{Error, Result};
use crate::loss::MatchedTarget;
use crate::types::{BoundingBox, Skeleton, NUM_KEYPOINTS};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPairs {
    #[serde(default)]
    classmap: Option<ClassMap>,
    pairs: Vec<RawPair>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    gt_body: Vec<f64>,
    #[serde(default)]
    gt_keypoints: Option<Vec<f64>>,
    #[serde(default)]
    gt_parts: BTreeMap<String, Vec<f64>>,
    pred_body: Vec<f64>,
    pred_keypoints: Vec<[f64; 3]>,
    #[serde(default)]
    pred_parts: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub classmap: ClassMap,
    pub targets: Vec<MatchedTarget>,
}

fn unbounded_box(values: &[f64]) -> std::result::Result<BoundingBox, String> {
    let (x1, y1, x2, y2, conf) = match values {
        [x1, y1, x2, y2] => (*x1, *y1, *x2, *y2, 1.0),
        [x1, y1, x2, y2, c] => (*x1, *y1, *x2, *y2, *c),
        _ => return Err(format!("box needs 4 or 5 numbers, got {}", values.len())),
    };
    BoundingBox::from_corners(x1, y1, x2, y2, conf).map_err(|e| e.to_string())
}

pub fn load_pairs(path: &Path) -> Result<PairSet> {
    parse_pairs(&read_text(path)?, &path.display().to_string())
}

pub fn parse_pairs(text: &str, origin: &str) -> Result<PairSet> {
    let raw: RawPairs =
        serde_json::from_str(text).map_err(|e| Error::parse(origin, None, e.to_string()))?;
    let classmap = raw.classmap.unwrap_or_default();
    let mut targets = Vec::with_capacity(raw.pairs.len());
    for (i, p) in raw.pairs.into_iter().enumerate() {
        let fail = |r: String| Error::parse(origin, Some(format!("pair {i}")), r);
        for name in p.gt_parts.keys().chain(p.pred_parts.keys()) {
            if classmap.by_name(name).is_none() {
                return Err(fail(format!("unknown part class `{name}`")));
            }
        }
        let gt_parts = classmap
            .parts()
            .iter()
            .map(|c| {
                p.gt_parts
                    .get(&c.name)
                    .map(|v| unbounded_box(v))
                    .transpose()
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(fail)?;
        let pred_parts = classmap
            .parts()
            .iter()
            .map(|c| {
                p.pred_parts
                    .get(&c.name)
                    .ok_or_else(|| format!("`pred_parts` lacks class `{}`", c.name))
                    .and_then(|v| unbounded_box(v))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(fail)?;
        let gt_skeleton = match p.gt_keypoints {
            Some(flat) => Some(Skeleton::from_flat(&flat).map_err(|e| fail(e.to_string()))?),
            None => None,
        };
        let pred_keypoints: [[f64; 3]; NUM_KEYPOINTS] =
            p.pred_keypoints.try_into().map_err(|v: Vec<[f64; 3]>| {
                fail(format!(
                    "`pred_keypoints` needs 17 entries, got {}",
                    v.len()
                ))
            })?;
        if pred_keypoints.iter().flatten().any(|x| !x.is_finite()) {
            return Err(fail("`pred_keypoints` holds a non-finite value".into()));
        }
        targets.push(MatchedTarget {
            gt_body: unbounded_box(&p.gt_body).map_err(fail)?,
            gt_skeleton,
            gt_parts,
            pred_body: unbounded_box(&p.pred_body).map_err(fail)?,
            pred_keypoints,
            pred_parts,
        });
    }
    Ok(PairSet { classmap, targets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(pred_parts: &str) -> String {
        let kps = vec!["[1, 1, 0.9]"; 17].join(",");
        format!(
            r#"{{"pairs": [{{"gt_body": [0, 0, 10, 10], "gt_parts": {{"head": [1, 1, 3, 3]}},
                "pred_body": [0, 0, 10, 10, 0.5], "pred_keypoints": [{kps}], "pred_parts": {pred_parts}}}]}}"#
        )
    }

    #[test]
    fn aligns_parts_with_class_map() {
        let all = r#"{"head": [1,1,3,3,0.9], "chest": [1,1,3,3,0.1], "hip": [1,1,3,3,0.1],
                      "left-hand": [1,1,3,3,0.1], "right-hand": [1,1,3,3,0.1]}"#;
        let set = parse_pairs(&sample(all), "p").unwrap();
        let t = &set.targets[0];
        assert!(t.gt_parts[0].is_some() && t.gt_parts[1].is_none());
        assert_eq!(t.pred_parts.len(), 5);
    }

    #[test]
    fn missing_prediction_slot_is_an_error() {
        let err = parse_pairs(&sample(r#"{"head": [1,1,3,3,0.9]}"#), "p")
            .unwrap_err()
            .to_string();
        assert!(err.contains("chest"), "{err}");
    }
}
