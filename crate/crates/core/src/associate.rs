//! Skeleton-driven part association.
//!
//! Every part detection goes to the body whose keypoint centroid for that
//! part class is nearest to the part's box center. Bodies without a visible
//! keypoint in the class's index set are not candidates for that class.

use serde::{Deserialize, Serialize};

use crate::classmap::ClassMap;
use crate::error::{Error, Result};
use crate::types::{
    BoundingBox, Keypoint, LoosePart, PersonInstance, Scene, Skeleton, NUM_KEYPOINTS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedBody {
    pub bbox: BoundingBox,
    pub skeleton: Skeleton,
}

/// Centroid per `(body, part class)`, part classes in class-map order.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidTable {
    rows: Vec<Vec<Option<(f64, f64)>>>,
}

impl CentroidTable {
    pub fn get(&self, body: usize, class_pos: usize) -> Option<(f64, f64)> {
        self.rows
            .get(body)
            .and_then(|r| r.get(class_pos))
            .copied()
            .flatten()
    }

    pub fn num_bodies(&self) -> usize {
        self.rows.len()
    }
}

/// Mean position of the visible keypoints of each class's index set.
pub fn centroids(bodies: &[DetectedBody], cmap: &ClassMap) -> CentroidTable {
    let rows = bodies
        .iter()
        .map(|b| {
            cmap.parts()
                .iter()
                .map(|class| {
                    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
                    for &k in &class.keypoint_indices {
                        let kp = &b.skeleton.keypoints()[k];
                        if kp.is_visible() {
                            sx += kp.x;
                            sy += kp.y;
                            n += 1;
                        }
                    }
                    (n > 0).then(|| (sx / n as f64, sy / n as f64))
                })
                .collect()
        })
        .collect();
    CentroidTable { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssociateConfig {
    /// Keep at most this many parts per class on one body (highest confidence
    /// first); the rest are reported unassigned.
    pub max_per_class: Option<usize>,
    /// A body is only a candidate when the centroid distance is at most
    /// `factor * body diagonal`.
    pub max_dist_factor: Option<f64>,
}

impl AssociateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_per_class == Some(0) {
            return Err(Error::Config("max_per_class must be at least 1".into()));
        }
        if let Some(f) = self.max_dist_factor {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::Config(format!(
                    "max_dist_factor {f} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Association result.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// Owner body index per input part, `None` when unassigned.
    pub owners: Vec<Option<usize>>,
    /// One person per input body, in input order, with its parts attached in
    /// input part order.
    pub people: Vec<PersonInstance>,
    /// Parts without an owner, in input order.
    pub unassigned: Vec<LoosePart>,
}

/// Nearest-centroid owner of a single part, ties going to the lower body index.
pub fn nearest_body(
    table: &CentroidTable,
    class_pos: usize,
    part: &BoundingBox,
) -> Option<(usize, f64)> {
    let (px, py) = part.center();
    let mut best: Option<(usize, f64)> = None;
    for b in 0..table.num_bodies() {
        let Some((kx, ky)) = table.get(b, class_pos) else {
            continue;
        };
        let d2 = (px - kx) * (px - kx) + (py - ky) * (py - ky);
        if best.is_none_or(|(_, bd)| d2 < bd) {
            best = Some((b, d2));
        }
    }
    best
}

pub fn bkp_associate(
    bodies: &[DetectedBody],
    parts: &[LoosePart],
    cmap: &ClassMap,
    cfg: &AssociateConfig,
) -> Association {
    let table = centroids(bodies, cmap);
    let mut owners: Vec<Option<usize>> = parts
        .iter()
        .map(|p| {
            let pos = cmap.position(p.class_id)?;
            match cfg.max_dist_factor {
                None => nearest_body(&table, pos, &p.bbox).map(|(b, _)| b),
                Some(factor) => nearest_within(&table, pos, &p.bbox, bodies, factor),
            }
        })
        .collect();

    if let Some(limit) = cfg.max_per_class {
        cap_per_class(&mut owners, parts, limit);
    }

    let mut people: Vec<PersonInstance> = bodies
        .iter()
        .map(|b| {
            PersonInstance::new(b.bbox, Some(b.skeleton.clone())).unwrap_or_else(|_| {
                PersonInstance::new(b.bbox, None).expect("skeleton-free person is always valid")
            })
        })
        .collect();
    let mut unassigned = Vec::new();
    for (part, owner) in parts.iter().zip(&owners) {
        match owner {
            Some(b) => people[*b].push_part(part.class_id, part.bbox),
            None => unassigned.push(*part),
        }
    }
    Association {
        owners,
        people,
        unassigned,
    }
}

/// Discards the part ownership in `scene` and associates every part again.
///
/// People keep their order, body and skeleton; a person without a skeleton
/// can not own parts. Owned parts are fed in person order before the loose ones.
pub fn reassociate_scene(scene: &Scene, cmap: &ClassMap, cfg: &AssociateConfig) -> Result<Scene> {
    let bodies: Vec<DetectedBody> = scene
        .people
        .iter()
        .map(|p| DetectedBody {
            bbox: *p.body(),
            skeleton: p.skeleton().cloned().unwrap_or_else(|| {
                Skeleton::new(vec![Keypoint::unlabeled(); NUM_KEYPOINTS]).expect("17 keypoints")
            }),
        })
        .collect();
    let mut parts: Vec<LoosePart> = Vec::new();
    for p in &scene.people {
        for (&class_id, boxes) in p.parts() {
            parts.extend(boxes.iter().map(|&bbox| LoosePart { class_id, bbox }));
        }
    }
    parts.extend(scene.unassigned_parts.iter().copied());
    let out = bkp_associate(&bodies, &parts, cmap, cfg);
    let mut result = Scene::new(
        scene.image_id.clone(),
        scene.width,
        scene.height,
        scene.source,
    )?;
    result.people = out.people;
    result.unassigned_parts = out.unassigned;
    Ok(result)
}

fn nearest_within(
    table: &CentroidTable,
    class_pos: usize,
    part: &BoundingBox,
    bodies: &[DetectedBody],
    factor: f64,
) -> Option<usize> {
    let (px, py) = part.center();
    let mut best: Option<(usize, f64)> = None;
    for (b, body) in bodies.iter().enumerate() {
        let Some((kx, ky)) = table.get(b, class_pos) else {
            continue;
        };
        let d2 = (px - kx) * (px - kx) + (py - ky) * (py - ky);
        let limit = factor * body.bbox.w().hypot(body.bbox.h());
        if d2.sqrt() > limit {
            continue;
        }
        if best.is_none_or(|(_, bd)| d2 < bd) {
            best = Some((b, d2));
        }
    }
    best.map(|(b, _)| b)
}

fn cap_per_class(owners: &mut [Option<usize>], parts: &[LoosePart], limit: usize) {
    let mut order: Vec<usize> = (0..parts.len()).filter(|&i| owners[i].is_some()).collect();
    // Highest confidence first; input order breaks ties.
    order.sort_by(|&i, &j| {
        parts[j]
            .bbox
            .conf()
            .total_cmp(&parts[i].bbox.conf())
            .then(i.cmp(&j))
    });
    let mut counts: std::collections::HashMap<(usize, u32), usize> =
        std::collections::HashMap::new();
    for i in order {
        let key = (owners[i].expect("filtered"), parts[i].class_id);
        let n = counts.entry(key).or_insert(0);
        if *n >= limit {
            owners[i] = None;
        } else {
            *n += 1;
        }
    }
}
