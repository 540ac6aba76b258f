//! Flat per-image detection lists, the format between decode, suppression
//! and association.
//!
//! ```json
//! {
//!   "classmap": {"mode": "bkpd"},
//!   "images": [{
//!     "image_id": "img-1", "width": 640, "height": 480,
//!     "detections": [
//!       {"class": "body", "box": [x1, y1, x2, y2, conf], "keypoints": [x, y, v, ...]},
//!       {"class": "head", "box": [x1, y1, x2, y2, conf]}
//!     ]
//!   }]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Number;

use super::canonical::to_canonical_json;
use super::{box_from_values, box_to_values, read_text, ImageId};
use crate::classmap::ClassMap;
use crate::error::{Error, Result};
use crate::nms::DetClass;
use crate::types::{BoundingBox, LoosePart, PersonInstance, Scene, SceneSource, Skeleton};

pub const BODY_CLASS: &str = "body";

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class: DetClass,
    pub bbox: BoundingBox,
    /// Only bodies carry keypoints.
    pub skeleton: Option<Skeleton>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionImage {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub detections: Vec<Detection>,
}

impl DetectionImage {
    /// Bodies become people without parts; parts become unassigned.
    pub fn to_scene(&self) -> Result<Scene> {
        let mut scene = Scene::new(
            self.image_id.clone(),
            self.width,
            self.height,
            SceneSource::Prediction,
        )?;
        for d in &self.detections {
            match d.class {
                DetClass::Body => scene
                    .people
                    .push(PersonInstance::new(d.bbox, d.skeleton.clone())?),
                DetClass::Part(class_id) => scene.unassigned_parts.push(LoosePart {
                    class_id,
                    bbox: d.bbox,
                }),
            }
        }
        Ok(scene)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub classmap: ClassMap,
    pub images: Vec<DetectionImage>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSet {
    #[serde(default)]
    classmap: Option<ClassMap>,
    images: Vec<RawImage>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImage {
    image_id: ImageId,
    width: f64,
    height: f64,
    #[serde(default)]
    detections: Vec<RawDetection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    class: String,
    #[serde(rename = "box")]
    bbox: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keypoints: Option<Vec<Number>>,
}

pub fn load_detections(path: &Path) -> Result<DetectionSet> {
    parse_detections(&read_text(path)?, &path.display().to_string())
}

pub fn parse_detections(text: &str, origin: &str) -> Result<DetectionSet> {
    let raw: RawSet =
        serde_json::from_str(text).map_err(|e| Error::parse(origin, None, e.to_string()))?;
    let classmap = raw.classmap.unwrap_or_default();
    let mut images = Vec::with_capacity(raw.images.len());
    for img in raw.images {
        let image_id = img.image_id.to_string();
        if !(img.width > 0.0 && img.height > 0.0 && img.width.is_finite() && img.height.is_finite())
        {
            return Err(Error::parse(
                origin,
                Some(format!("image {image_id}")),
                "image size must be positive",
            ));
        }
        let mut detections = Vec::with_capacity(img.detections.len());
        for (i, d) in img.detections.iter().enumerate() {
            let record = format!("detection {i} (image {image_id})");
            let fail = |r: String| Error::parse(origin, Some(record.clone()), r);
            let class = if d.class == BODY_CLASS {
                DetClass::Body
            } else {
                let part = classmap
                    .by_name(&d.class)
                    .ok_or_else(|| fail(format!("unknown class `{}`", d.class)))?;
                DetClass::Part(part.id)
            };
            let bbox = box_from_values(&d.bbox, img.width, img.height).map_err(fail)?;
            let skeleton = match (&d.keypoints, class) {
                (None, _) => None,
                (Some(_), DetClass::Part(_)) => {
                    return Err(fail("only bodies may carry keypoints".into()))
                }
                (Some(values), DetClass::Body) => {
                    let flat: Vec<f64> = values
                        .iter()
                        .map(|n| n.as_f64().unwrap_or(f64::NAN))
                        .collect();
                    let s = Skeleton::from_flat(&flat).map_err(|e| fail(e.to_string()))?;
                    (s.visible_count() > 0).then_some(s)
                }
            };
            detections.push(Detection {
                class,
                bbox,
                skeleton,
            });
        }
        images.push(DetectionImage {
            image_id,
            width: img.width,
            height: img.height,
            detections,
        });
    }
    Ok(DetectionSet { classmap, images })
}

pub fn detections_to_json(set: &DetectionSet) -> Result<String> {
    let mut raw = RawSet {
        classmap: Some(set.classmap.clone()),
        images: Vec::with_capacity(set.images.len()),
    };
    for img in &set.images {
        let mut detections = Vec::with_capacity(img.detections.len());
        for d in &img.detections {
            let class = match d.class {
                DetClass::Body => BODY_CLASS.to_string(),
                DetClass::Part(id) => {
                    set.classmap
                        .by_id(id)
                        .map(|c| c.name.clone())
                        .ok_or_else(|| {
                            Error::invalid(
                                "detection",
                                format!("part class id {id} is not in the class map"),
                            )
                        })?
                }
            };
            let keypoints = d.skeleton.as_ref().map(|s| {
                s.keypoints()
                    .iter()
                    .flat_map(|k| {
                        [
                            Number::from_f64(k.x).unwrap_or_else(|| Number::from(0)),
                            Number::from_f64(k.y).unwrap_or_else(|| Number::from(0)),
                            Number::from(k.v.flag()),
                        ]
                    })
                    .collect()
            });
            detections.push(RawDetection {
                class,
                bbox: box_to_values(&d.bbox),
                keypoints,
            });
        }
        raw.images.push(RawImage {
            image_id: ImageId::Text(img.image_id.clone()),
            width: img.width,
            height: img.height,
            detections,
        });
    }
    to_canonical_json(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"images": [{"image_id": "a", "width": 50, "height": 50, "detections": [
        {"class": "body", "box": [1, 1, 40, 49, 0.8]},
        {"class": "left-hand", "box": [2, 2, 6, 6, 0.4]}
    ]}]}"#;

    #[test]
    fn round_trip() {
        let set = parse_detections(SAMPLE, "d").unwrap();
        assert_eq!(set.images[0].detections[1].class, DetClass::Part(3));
        let text = detections_to_json(&set).unwrap();
        assert_eq!(parse_detections(&text, "d").unwrap(), set);
    }

    #[test]
    fn to_scene_splits_bodies_and_parts() {
        let scene = parse_detections(SAMPLE, "d").unwrap().images[0]
            .to_scene()
            .unwrap();
        assert_eq!(scene.people.len(), 1);
        assert_eq!(scene.unassigned_parts.len(), 1);
    }

    #[test]
    fn rejects_unknown_class_and_part_keypoints() {
        assert!(parse_detections(&SAMPLE.replace("left-hand", "tail"), "d").is_err());
        let kp = format!("[{}]", vec!["1"; 51].join(","));
        let bad = SAMPLE.replace(
            "[2, 2, 6, 6, 0.4]",
            &format!("[2, 2, 6, 6, 0.4], \"keypoints\": {kp}"),
        );
        assert!(parse_detections(&bad, "d").is_err());
    }
}
