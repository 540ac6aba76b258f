//! File formats: hierarchical annotations, COCO keypoints, flat detection
//! lists, matched loss pairs, and canonical JSON output.

mod canonical;
mod coco;
mod detections;
mod hier;
mod merge;
mod pairs;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::BoundingBox;

pub use canonical::{round_sig, to_canonical_json, SIGNIFICANT_DIGITS};
pub use coco::{load_coco_keypoints, load_coco_results, parse_coco_keypoints, parse_coco_results};
pub use detections::{
    detections_to_json, load_detections, parse_detections, Detection, DetectionImage, DetectionSet,
    BODY_CLASS,
};
pub use hier::{hier_to_json, load_hier, parse_hier, save_hier, HierData};
pub use merge::{merge_by_person_box, MERGE_IOU_DEFAULT};
pub use pairs::{load_pairs, parse_pairs, PairSet};

/// Image ids may be written as numbers or strings; they are strings in memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum ImageId {
    Int(i64),
    Text(String),
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageId::Int(i) => write!(f, "{i}"),
            ImageId::Text(s) => f.write_str(s),
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), None, e.to_string()))
}

/// Corner-form `[x1, y1, x2, y2]` or `[x1, y1, x2, y2, conf]`, clamped to the image.
pub(crate) fn box_from_values(
    values: &[f64],
    width: f64,
    height: f64,
) -> std::result::Result<BoundingBox, String> {
    let (corners, conf) = match values {
        [x1, y1, x2, y2] => ([*x1, *y1, *x2, *y2], 1.0),
        [x1, y1, x2, y2, c] => ([*x1, *y1, *x2, *y2], *c),
        _ => return Err(format!("box needs 4 or 5 numbers, got {}", values.len())),
    };
    let [x1, y1, x2, y2] = corners;
    if !(x2 > x1 && y2 > y1) {
        return Err(format!("box {corners:?} has no area"));
    }
    let b = BoundingBox::from_corners(x1, y1, x2, y2, conf).map_err(|e| e.to_string())?;
    if b.is_within(width, height) {
        Ok(b)
    } else {
        b.clamped(width, height).map_err(|e| e.to_string())
    }
}

pub(crate) fn box_to_values(b: &BoundingBox) -> Vec<f64> {
    let [x1, y1, x2, y2] = b.corners();
    vec![x1, y1, x2, y2, b.conf()]
}
