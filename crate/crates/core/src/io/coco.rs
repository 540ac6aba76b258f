//! COCO keypoint annotations and COCO-style result lists.
//!
//! Crowd annotations are skipped, as are boxes with no area left after
//! clamping to the image. Annotations with `num_keypoints == 0` or all-zero
//! keypoints get no skeleton.

use std::collections::HashMap;
use std::path::Path;

use serde_json::Value;

use super::read_text;
use crate::error::{Error, Result};
use crate::types::{BoundingBox, PersonInstance, Scene, SceneSource, Skeleton};

struct Ctx<'a> {
    origin: &'a str,
}

impl Ctx<'_> {
    fn err(&self, record: Option<String>, reason: impl Into<String>) -> Error {
        Error::parse(self.origin, record, reason)
    }
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn number(obj: &Value, key: &str) -> std::result::Result<f64, String> {
    obj.get(key)
        .ok_or_else(|| format!("missing `{key}`"))?
        .as_f64()
        .ok_or_else(|| format!("`{key}` is not a number"))
}

fn numbers(obj: &Value, key: &str) -> std::result::Result<Option<Vec<f64>>, String> {
    let Some(v) = obj.get(key) else {
        return Ok(None);
    };
    let arr = v
        .as_array()
        .ok_or_else(|| format!("`{key}` is not an array"))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .ok_or_else(|| format!("`{key}` holds a non-number"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Some)
}

fn record_name(obj: &Value, i: usize) -> String {
    match obj.get("id").and_then(id_string) {
        Some(id) => format!("annotation {id}"),
        None => format!("annotation #{i}"),
    }
}

/// One person from an annotation or result record; `None` means skipped.
fn person(
    obj: &Value,
    width: f64,
    height: f64,
    default_conf: Option<f64>,
) -> std::result::Result<Option<PersonInstance>, String> {
    if obj.get("iscrowd").and_then(Value::as_i64).unwrap_or(0) != 0 {
        return Ok(None);
    }
    let bbox = numbers(obj, "bbox")?.ok_or("missing `bbox`")?;
    let [x, y, w, h] = bbox[..] else {
        return Err(format!("`bbox` needs 4 numbers, got {}", bbox.len()));
    };
    let conf = match default_conf {
        Some(c) => c,
        None => number(obj, "score")?,
    };
    if !(w > 0.0 && h > 0.0) {
        return Ok(None);
    }
    let Ok(body) = BoundingBox::from_corners(x, y, x + w, y + h, conf.clamp(0.0, 1.0))
        .map_err(|e| e.to_string())?
        .clamped(width, height)
    else {
        return Ok(None);
    };
    let declared_empty = obj.get("num_keypoints").and_then(Value::as_i64) == Some(0);
    let skeleton = match numbers(obj, "keypoints")? {
        Some(flat) if !declared_empty => {
            let s = Skeleton::from_flat(&flat).map_err(|e| e.to_string())?;
            (s.visible_count() > 0).then_some(s)
        }
        _ => None,
    };
    PersonInstance::new(body, skeleton)
        .map(Some)
        .map_err(|e| e.to_string())
}

fn scenes_from_images(ctx: &Ctx, root: &Value, source: SceneSource) -> Result<Vec<Scene>> {
    let images = root
        .get("images")
        .and_then(Value::as_array)
        .ok_or_else(|| ctx.err(None, "missing `images` array"))?;
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let record = img.get("id").and_then(id_string);
            let name = || {
                Some(format!(
                    "image {}",
                    record.clone().unwrap_or_else(|| format!("#{i}"))
                ))
            };
            let id = record
                .clone()
                .ok_or_else(|| ctx.err(name(), "missing `id`"))?;
            let w = number(img, "width").map_err(|r| ctx.err(name(), r))?;
            let h = number(img, "height").map_err(|r| ctx.err(name(), r))?;
            Scene::new(id, w, h, source).map_err(|e| ctx.err(name(), e.to_string()))
        })
        .collect()
}

pub fn load_coco_keypoints(path: &Path) -> Result<Vec<Scene>> {
    parse_coco_keypoints(&read_text(path)?, &path.display().to_string())
}

/// Scenes with skeletons and no parts, one per image, in file order.
pub fn parse_coco_keypoints(text: &str, origin: &str) -> Result<Vec<Scene>> {
    let ctx = Ctx { origin };
    let root: Value = serde_json::from_str(text).map_err(|e| ctx.err(None, e.to_string()))?;
    let mut scenes = scenes_from_images(&ctx, &root, SceneSource::Gt)?;
    let index: HashMap<String, usize> = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.image_id.clone(), i))
        .collect();
    let anns = root
        .get("annotations")
        .and_then(Value::as_array)
        .ok_or_else(|| ctx.err(None, "missing `annotations` array"))?;
    for (i, ann) in anns.iter().enumerate() {
        let record = record_name(ann, i);
        let image_id = ann
            .get("image_id")
            .and_then(id_string)
            .ok_or_else(|| ctx.err(Some(record.clone()), "missing `image_id`"))?;
        let si = *index
            .get(&image_id)
            .ok_or_else(|| ctx.err(Some(record.clone()), format!("unknown image id {image_id}")))?;
        let (w, h) = (scenes[si].width, scenes[si].height);
        if let Some(p) = person(ann, w, h, Some(1.0)).map_err(|r| ctx.err(Some(record), r))? {
            scenes[si].people.push(p);
        }
    }
    Ok(scenes)
}

pub fn load_coco_results(path: &Path, images: &[Scene]) -> Result<Vec<Scene>> {
    parse_coco_results(&read_text(path)?, &path.display().to_string(), images)
}

/// A COCO result list (`[{image_id, bbox, score, keypoints?}]`) as prediction
/// scenes. Image sizes come from `images`; every listed image gets a scene,
/// even without detections.
pub fn parse_coco_results(text: &str, origin: &str, images: &[Scene]) -> Result<Vec<Scene>> {
    let ctx = Ctx { origin };
    let root: Value = serde_json::from_str(text).map_err(|e| ctx.err(None, e.to_string()))?;
    let list = root
        .as_array()
        .ok_or_else(|| ctx.err(None, "expected a top-level array"))?;
    let mut scenes: Vec<Scene> = images
        .iter()
        .map(|s| {
            Scene::new(
                s.image_id.clone(),
                s.width,
                s.height,
                SceneSource::Prediction,
            )
        })
        .collect::<Result<_>>()?;
    let index: HashMap<String, usize> = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.image_id.clone(), i))
        .collect();
    for (i, det) in list.iter().enumerate() {
        let record = format!("result #{i}");
        let image_id = det
            .get("image_id")
            .and_then(id_string)
            .ok_or_else(|| ctx.err(Some(record.clone()), "missing `image_id`"))?;
        let Some(&si) = index.get(&image_id) else {
            return Err(ctx.err(Some(record), format!("unknown image id {image_id}")));
        };
        let (w, h) = (scenes[si].width, scenes[si].height);
        if let Some(p) = person(det, w, h, None).map_err(|r| ctx.err(Some(record), r))? {
            scenes[si].people.push(p);
        }
    }
    Ok(scenes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kps(n_visible: usize) -> String {
        let v: Vec<String> = (0..17)
            .flat_map(|k| {
                let flag = if k < n_visible { 2 } else { 0 };
                [format!("{}", 10 + k), "20".into(), flag.to_string()]
            })
            .collect();
        format!("[{}]", v.join(","))
    }

    fn doc(anns: &str) -> String {
        format!(
            r#"{{"images": [{{"id": 1, "width": 100, "height": 100}}], "annotations": [{anns}], "categories": []}}"#
        )
    }

    #[test]
    fn minimal_file() {
        let text = doc(&format!(
            r#"{{"id": 5, "image_id": 1, "bbox": [10, 10, 30, 60], "keypoints": {}, "num_keypoints": 3}}"#,
            kps(3)
        ));
        let scenes = parse_coco_keypoints(&text, "f").unwrap();
        assert_eq!(scenes.len(), 1);
        assert_eq!(scenes[0].people.len(), 1);
        let p = &scenes[0].people[0];
        assert_eq!(p.body().corners(), [10.0, 10.0, 40.0, 70.0]);
        assert_eq!(p.skeleton().unwrap().visible_count(), 3);
    }

    #[test]
    fn zero_keypoints_mean_no_skeleton() {
        let text = doc(&format!(
            r#"{{"id": 5, "image_id": 1, "bbox": [10, 10, 30, 60], "keypoints": {}, "num_keypoints": 0}}"#,
            kps(0)
        ));
        assert!(parse_coco_keypoints(&text, "f").unwrap()[0].people[0]
            .skeleton()
            .is_none());
    }

    #[test]
    fn crowd_and_empty_boxes_skipped() {
        let text = doc(
            r#"{"id": 1, "image_id": 1, "bbox": [0, 0, 5, 5], "iscrowd": 1},
                           {"id": 2, "image_id": 1, "bbox": [0, 0, 0, 5]}"#,
        );
        assert!(parse_coco_keypoints(&text, "f").unwrap()[0]
            .people
            .is_empty());
    }

    #[test]
    fn errors_carry_path_and_record() {
        let err = parse_coco_keypoints(&doc(r#"{"id": 77, "image_id": 1}"#), "ann.json")
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("ann.json") && err.contains("annotation 77") && err.contains("bbox"),
            "{err}"
        );
        let truncated = doc(r#"{"id": 77, "image_id": 1, "bbox": [1, 2"#);
        assert!(matches!(
            parse_coco_keypoints(&truncated, "t.json"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn results_use_scores() {
        let gt = parse_coco_keypoints(&doc(""), "g").unwrap();
        let preds = parse_coco_results(
            r#"[{"image_id": 1, "bbox": [1, 1, 10, 10], "score": 0.25}]"#,
            "r",
            &gt,
        )
        .unwrap();
        assert_eq!(preds[0].people[0].body().conf(), 0.25);
        assert!(
            parse_coco_results(r#"[{"image_id": 1, "bbox": [1, 1, 10, 10]}]"#, "r", &gt).is_err()
        );
    }
}
