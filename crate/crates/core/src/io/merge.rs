use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::types::{PersonInstance, Scene};

pub const MERGE_IOU_DEFAULT: f64 = 0.9;

/// Joins a keypoint-labeled and a part-labeled version of the same images.
///
/// Per image, person boxes are paired greedily by descending IoU (ties by
/// keypoint-side index, then part-side index), one to one, when IoU is at
/// least `iou_thresh`. A merged person keeps the keypoint side's body box and
/// skeleton and takes the part side's parts. Unmatched people from both sides
/// are kept: keypoint side first, each in input order. Images are returned in
/// keypoint-side order followed by images only the part side has.
pub fn merge_by_person_box(kpts: &[Scene], parts: &[Scene], iou_thresh: f64) -> Result<Vec<Scene>> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(Error::Config(format!(
            "merge IoU threshold {iou_thresh} outside (0, 1]"
        )));
    }
    let by_id: HashMap<&str, &Scene> = parts.iter().map(|s| (s.image_id.as_str(), s)).collect();
    let mut out = Vec::with_capacity(kpts.len());
    for k in kpts {
        match by_id.get(k.image_id.as_str()) {
            Some(p) => out.push(merge_scene(k, p, iou_thresh)?),
            None => out.push(k.clone()),
        }
    }
    let seen: std::collections::HashSet<&str> = kpts.iter().map(|s| s.image_id.as_str()).collect();
    out.extend(
        parts
            .iter()
            .filter(|p| !seen.contains(p.image_id.as_str()))
            .cloned(),
    );
    Ok(out)
}

fn merge_scene(k: &Scene, p: &Scene, iou_thresh: f64) -> Result<Scene> {
    if k.width != p.width || k.height != p.height {
        return Err(Error::invalid(
            "merge",
            format!(
                "image {} is {}x{} on the keypoint side but {}x{} on the part side",
                k.image_id, k.width, k.height, p.width, p.height
            ),
        ));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in k.people.iter().enumerate() {
        for (j, b) in p.people.iter().enumerate() {
            let o = iou(a.body(), b.body());
            if o >= iou_thresh {
                pairs.push((o, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut k_match = vec![None; k.people.len()];
    let mut p_used = vec![false; p.people.len()];
    for (_, i, j) in pairs {
        if k_match[i].is_none() && !p_used[j] {
            k_match[i] = Some(j);
            p_used[j] = true;
        }
    }

    let mut scene = Scene::new(k.image_id.clone(), k.width, k.height, k.source)?;
    for (i, person) in k.people.iter().enumerate() {
        let mut merged = PersonInstance::new(*person.body(), person.skeleton().cloned())?;
        for (&class_id, boxes) in person.parts() {
            for b in boxes {
                merged.push_part(class_id, *b);
            }
        }
        if let Some(j) = k_match[i] {
            for (&class_id, boxes) in p.people[j].parts() {
                for b in boxes {
                    merged.push_part(class_id, *b);
                }
            }
        }
        scene.people.push(merged);
    }
    scene.people.extend(
        p.people
            .iter()
            .zip(&p_used)
            .filter(|(_, used)| !**used)
            .map(|(q, _)| q.clone()),
    );
    scene.unassigned_parts = k
        .unassigned_parts
        .iter()
        .chain(&p.unassigned_parts)
        .copied()
        .collect();
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BoundingBox, Keypoint, SceneSource, Skeleton, Visibility, NUM_KEYPOINTS};

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::from_corners(x1, y1, x2, y2, 1.0).unwrap()
    }

    fn skel() -> Skeleton {
        Skeleton::new(vec![
            Keypoint::new(5.0, 5.0, Visibility::Visible);
            NUM_KEYPOINTS
        ])
        .unwrap()
    }

    fn scene(people: Vec<PersonInstance>) -> Scene {
        let mut s = Scene::new("x", 200.0, 200.0, SceneSource::Gt).unwrap();
        s.people = people;
        s
    }

    #[test]
    fn identical_boxes_merge() {
        let k = scene(vec![PersonInstance::new(
            bx(0.0, 0.0, 100.0, 100.0),
            Some(skel()),
        )
        .unwrap()]);
        let p = scene(vec![PersonInstance::new(bx(0.0, 0.0, 100.0, 100.0), None)
            .unwrap()
            .with_part(0, bx(10.0, 10.0, 20.0, 20.0))]);
        let m = merge_by_person_box(&[k], &[p], MERGE_IOU_DEFAULT).unwrap();
        assert_eq!(m[0].people.len(), 1);
        assert!(m[0].people[0].skeleton().is_some());
        assert_eq!(m[0].people[0].parts_of(0).len(), 1);
    }

    #[test]
    fn disjoint_boxes_both_kept() {
        let k = scene(vec![PersonInstance::new(
            bx(0.0, 0.0, 50.0, 50.0),
            Some(skel()),
        )
        .unwrap()]);
        let p = scene(vec![PersonInstance::new(
            bx(100.0, 100.0, 150.0, 150.0),
            None,
        )
        .unwrap()]);
        let m = merge_by_person_box(&[k], &[p], MERGE_IOU_DEFAULT).unwrap();
        assert_eq!(m[0].people.len(), 2);
    }

    #[test]
    fn higher_overlap_wins() {
        // Part-side candidates with IoU 0.95 and 0.92 against one keypoint person.
        let k = scene(vec![PersonInstance::new(
            bx(0.0, 0.0, 100.0, 100.0),
            Some(skel()),
        )
        .unwrap()]);
        let p92 = PersonInstance::new(bx(0.0, 0.0, 100.0, 92.0), None)
            .unwrap()
            .with_part(1, bx(1.0, 1.0, 2.0, 2.0));
        let p95 = PersonInstance::new(bx(0.0, 0.0, 100.0, 95.0), None)
            .unwrap()
            .with_part(0, bx(1.0, 1.0, 2.0, 2.0));
        let m =
            merge_by_person_box(&[k], &[scene(vec![p92.clone(), p95])], MERGE_IOU_DEFAULT).unwrap();
        let people = &m[0].people;
        assert_eq!(people.len(), 2);
        assert_eq!(people[0].parts_of(0).len(), 1);
        assert!(people[0].parts_of(1).is_empty());
        assert_eq!(people[1], p92);
    }
}
