//! Hierarchical annotation files: body box, skeleton and part boxes grouped
//! under one person.
//!
//! ```json
//! {
//!   "classmap": {"mode": "bkpd"},
//!   "source": "gt",
//!   "images": [{"id": "img-1", "width": 640, "height": 480}],
//!   "people": [{
//!     "image_id": "img-1",
//!     "body": [x1, y1, x2, y2, conf],
//!     "keypoints": [x, y, v, ...],
//!     "parts": {"head": [[x1, y1, x2, y2, conf]]}
//!   }],
//!   "unassigned_parts": [{"image_id": "img-1", "class": "head", "box": [x1, y1, x2, y2]}]
//! }
//! ```
//!
//! Boxes are corner form with an optional trailing confidence (default 1).
//! `classmap` defaults to bkpd, `source` to gt, and `keypoints` may be
//! omitted; all-zero keypoints are read as an absent skeleton.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Number;

use super::canonical::to_canonical_json;
use super::{box_from_values, box_to_values, read_text, ImageId};
use crate::classmap::ClassMap;
use crate::error::{Error, Result};
use crate::types::{LoosePart, PersonInstance, Scene, SceneSource, Skeleton, NUM_KEYPOINTS};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    classmap: Option<ClassMap>,
    #[serde(default)]
    source: SceneSource,
    images: Vec<RawImage>,
    #[serde(default)]
    people: Vec<RawPerson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    unassigned_parts: Vec<RawLoose>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImage {
    id: ImageId,
    width: f64,
    height: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerson {
    image_id: ImageId,
    body: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keypoints: Option<Vec<Number>>,
    #[serde(default)]
    parts: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoose {
    image_id: ImageId,
    class: String,
    #[serde(rename = "box")]
    bbox: Vec<f64>,
}

/// Contents of a hierarchical file.
#[derive(Debug, Clone, PartialEq)]
pub struct HierData {
    pub classmap: ClassMap,
    pub scenes: Vec<Scene>,
}

pub fn load_hier(path: &Path) -> Result<HierData> {
    parse_hier(&read_text(path)?, &path.display().to_string())
}

/// Parses a hierarchical document; `origin` names it in error messages.
pub fn parse_hier(text: &str, origin: &str) -> Result<HierData> {
    let raw: RawFile =
        serde_json::from_str(text).map_err(|e| Error::parse(origin, None, e.to_string()))?;
    let classmap = raw.classmap.unwrap_or_default();
    let mut scenes = Vec::with_capacity(raw.images.len());
    let mut index: HashMap<String, usize> = HashMap::new();
    for img in &raw.images {
        let id = img.id.to_string();
        let scene = Scene::new(id.clone(), img.width, img.height, raw.source)
            .map_err(|e| Error::parse(origin, Some(format!("image {id}")), e.to_string()))?;
        if index.insert(id.clone(), scenes.len()).is_some() {
            return Err(Error::parse(
                origin,
                Some(format!("image {id}")),
                "duplicate image id",
            ));
        }
        scenes.push(scene);
    }

    let lookup = |image_id: &ImageId, record: &str| -> Result<usize> {
        index.get(&image_id.to_string()).copied().ok_or_else(|| {
            Error::parse(
                origin,
                Some(record.to_string()),
                format!("unknown image id {image_id}"),
            )
        })
    };
    let class_id = |name: &str, record: &str| -> Result<u32> {
        classmap.by_name(name).map(|c| c.id).ok_or_else(|| {
            Error::parse(
                origin,
                Some(record.to_string()),
                format!("unknown part class `{name}`"),
            )
        })
    };

    for (i, p) in raw.people.iter().enumerate() {
        let record = format!("person {i} (image {})", p.image_id);
        let si = lookup(&p.image_id, &record)?;
        let (w, h) = (scenes[si].width, scenes[si].height);
        let fail = |reason: String| Error::parse(origin, Some(record.clone()), reason);
        let body = box_from_values(&p.body, w, h).map_err(fail)?;
        let skeleton = match &p.keypoints {
            None => None,
            Some(values) => {
                let flat: Vec<f64> = values
                    .iter()
                    .map(|n| n.as_f64().unwrap_or(f64::NAN))
                    .collect();
                let s = Skeleton::from_flat(&flat).map_err(|e| fail(e.to_string()))?;
                (s.visible_count() > 0).then_some(s)
            }
        };
        let mut person = PersonInstance::new(body, skeleton).map_err(|e| fail(e.to_string()))?;
        for (name, boxes) in &p.parts {
            let id = class_id(name, &record)?;
            for values in boxes {
                person.push_part(id, box_from_values(values, w, h).map_err(fail)?);
            }
        }
        scenes[si].people.push(person);
    }

    for (i, lp) in raw.unassigned_parts.iter().enumerate() {
        let record = format!("unassigned part {i} (image {})", lp.image_id);
        let si = lookup(&lp.image_id, &record)?;
        let (w, h) = (scenes[si].width, scenes[si].height);
        let bbox = box_from_values(&lp.bbox, w, h)
            .map_err(|r| Error::parse(origin, Some(record.clone()), r))?;
        let class_id = class_id(&lp.class, &record)?;
        scenes[si]
            .unassigned_parts
            .push(LoosePart { class_id, bbox });
    }
    Ok(HierData { classmap, scenes })
}

fn keypoint_numbers(s: &Skeleton) -> Vec<Number> {
    let mut out = Vec::with_capacity(3 * NUM_KEYPOINTS);
    for k in s.keypoints() {
        out.push(Number::from_f64(k.x).unwrap_or_else(|| Number::from(0)));
        out.push(Number::from_f64(k.y).unwrap_or_else(|| Number::from(0)));
        out.push(Number::from(k.v.flag()));
    }
    out
}

/// Canonical JSON text for a set of scenes.
///
/// Parts whose class is missing from `classmap` are an error.
pub fn hier_to_json(classmap: &ClassMap, scenes: &[Scene]) -> Result<String> {
    let name_of = |id: u32| -> Result<String> {
        classmap.by_id(id).map(|c| c.name.clone()).ok_or_else(|| {
            Error::invalid(
                "scene",
                format!("part class id {id} is not in the class map"),
            )
        })
    };
    let mut raw = RawFile {
        classmap: Some(classmap.clone()),
        source: scenes.first().map(|s| s.source).unwrap_or_default(),
        images: Vec::new(),
        people: Vec::new(),
        unassigned_parts: Vec::new(),
    };
    for s in scenes {
        raw.images.push(RawImage {
            id: ImageId::Text(s.image_id.clone()),
            width: s.width,
            height: s.height,
        });
        for p in &s.people {
            let mut parts = BTreeMap::new();
            for (&id, boxes) in p.parts() {
                parts.insert(name_of(id)?, boxes.iter().map(box_to_values).collect());
            }
            raw.people.push(RawPerson {
                image_id: ImageId::Text(s.image_id.clone()),
                body: box_to_values(p.body()),
                keypoints: p.skeleton().map(keypoint_numbers),
                parts,
            });
        }
        for lp in &s.unassigned_parts {
            raw.unassigned_parts.push(RawLoose {
                image_id: ImageId::Text(s.image_id.clone()),
                class: name_of(lp.class_id)?,
                bbox: box_to_values(&lp.bbox),
            });
        }
    }
    to_canonical_json(&raw)
}

pub fn save_hier(path: &Path, classmap: &ClassMap, scenes: &[Scene]) -> Result<()> {
    std::fs::write(path, hier_to_json(classmap, scenes)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "images": [{"id": 7, "width": 100, "height": 80}],
        "people": [{
            "image_id": 7,
            "body": [10, 10, 60, 90],
            "parts": {"head": [[20, 10, 30, 20, 0.9]]}
        }],
        "unassigned_parts": [{"image_id": "7", "class": "chest", "box": [0, 0, 5, 5]}]
    }"#;

    #[test]
    fn parses_and_clamps() {
        let d = parse_hier(SAMPLE, "sample").unwrap();
        let s = &d.scenes[0];
        assert_eq!(s.image_id, "7");
        let body = s.people[0].body();
        assert_eq!(body.corners(), [10.0, 10.0, 60.0, 80.0]);
        assert_eq!(s.people[0].parts_of(0)[0].conf(), 0.9);
        assert_eq!(s.unassigned_parts[0].class_id, 1);
        s.validate().unwrap();
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let first = hier_to_json(
            &ClassMap::default(),
            &parse_hier(SAMPLE, "s").unwrap().scenes,
        )
        .unwrap();
        let second = hier_to_json(
            &ClassMap::default(),
            &parse_hier(&first, "s").unwrap().scenes,
        )
        .unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn errors_name_the_record() {
        let bad = SAMPLE.replace("\"image_id\": 7,", "\"image_id\": 8,");
        let err = parse_hier(&bad, "f.json").unwrap_err().to_string();
        assert!(err.contains("f.json") && err.contains("person 0"), "{err}");
        let bad = SAMPLE.replace("\"head\"", "\"tail\"");
        assert!(parse_hier(&bad, "f")
            .unwrap_err()
            .to_string()
            .contains("tail"));
        let bad = SAMPLE.replace("[10, 10, 60, 90]", "[10, 10, 60]");
        assert!(parse_hier(&bad, "f").is_err());
        let outside = SAMPLE.replace("[10, 10, 60, 90]", "[200, 200, 300, 300]");
        assert!(parse_hier(&outside, "f").is_err());
    }

    #[test]
    fn all_zero_keypoints_mean_absent() {
        let zeros = format!("[{}]", vec!["0"; 51].join(","));
        let text = SAMPLE.replace(
            "\"body\": [10, 10, 60, 90],",
            &format!("\"body\": [10, 10, 60, 90], \"keypoints\": {zeros},"),
        );
        let d = parse_hier(&text, "f").unwrap();
        assert!(d.scenes[0].people[0].skeleton().is_none());
    }
}
