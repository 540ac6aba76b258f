//! Domain types shared by every stage of the pipeline.
//!
//! Boxes are stored in center form. Corner form only shows up at I/O
//! boundaries through [`BoundingBox::from_corners`] and [`BoundingBox::corners`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of keypoints in the COCO body layout.
pub const NUM_KEYPOINTS: usize = 17;

/// COCO keypoint names, in skeleton order.
pub const KEYPOINT_NAMES: [&str; NUM_KEYPOINTS] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Axis-aligned box with a confidence score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    conf: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, conf: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::invalid(
                "bounding box",
                format!("non-finite center ({cx}, {cy})"),
            ));
        }
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(Error::invalid(
                "bounding box",
                format!("size must be positive, got {w}x{h}"),
            ));
        }
        if !(0.0..=1.0).contains(&conf) {
            return Err(Error::invalid(
                "bounding box",
                format!("confidence {conf} outside [0, 1]"),
            ));
        }
        Ok(Self { cx, cy, w, h, conf })
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64, conf: f64) -> Result<Self> {
        Self::new((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1, conf)
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn conf(&self) -> f64 {
        self.conf
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    pub fn x1(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn y1(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn x2(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn y2(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    /// `[x1, y1, x2, y2]`.
    pub fn corners(&self) -> [f64; 4] {
        [self.x1(), self.y1(), self.x2(), self.y2()]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn with_conf(&self, conf: f64) -> Result<Self> {
        Self::new(self.cx, self.cy, self.w, self.h, conf)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(self.cx + dx, self.cy + dy, self.w, self.h, self.conf)
    }

    /// Clips the box to `[0, width] x [0, height]`. Fails when nothing is left.
    pub fn clamped(&self, width: f64, height: f64) -> Result<Self> {
        let [x1, y1, x2, y2] = self.corners();
        let (x1, x2) = (x1.clamp(0.0, width), x2.clamp(0.0, width));
        let (y1, y2) = (y1.clamp(0.0, height), y2.clamp(0.0, height));
        if x2 <= x1 || y2 <= y1 {
            return Err(Error::invalid(
                "bounding box",
                format!(
                    "box {:?} has no area inside the {width}x{height} image",
                    self.corners()
                ),
            ));
        }
        if x1 == self.x1() && y1 == self.y1() && x2 == self.x2() && y2 == self.y2() {
            return Ok(*self);
        }
        Self::from_corners(x1, y1, x2, y2, self.conf)
    }

    /// True when the box lies inside `[0, width] x [0, height]`, allowing the
    /// rounding slack of a center-form round trip.
    pub fn is_within(&self, width: f64, height: f64) -> bool {
        let tol = 1e-9 * width.max(height).max(1.0);
        self.x1() >= -tol
            && self.y1() >= -tol
            && self.x2() <= width + tol
            && self.y2() <= height + tol
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1() && x <= self.x2() && y >= self.y1() && y <= self.y2()
    }
}

/// COCO three-state visibility flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Visibility {
    Unlabeled = 0,
    Occluded = 1,
    Visible = 2,
}

impl Visibility {
    pub fn from_flag(flag: f64) -> Result<Self> {
        match flag {
            0.0 => Ok(Visibility::Unlabeled),
            1.0 => Ok(Visibility::Occluded),
            2.0 => Ok(Visibility::Visible),
            other => Err(Error::invalid(
                "keypoint",
                format!("visibility flag {other} not in {{0, 1, 2}}"),
            )),
        }
    }

    pub fn flag(self) -> u8 {
        self as u8
    }

    /// Labeled keypoints (`v > 0`) count as visible for losses and association.
    pub fn is_visible(self) -> bool {
        self != Visibility::Unlabeled
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub v: Visibility,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, v: Visibility) -> Self {
        Self { x, y, v }
    }

    pub fn unlabeled() -> Self {
        Self::new(0.0, 0.0, Visibility::Unlabeled)
    }

    pub fn is_visible(&self) -> bool {
        self.v.is_visible()
    }
}

/// Seventeen keypoints in COCO order.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    keypoints: [Keypoint; NUM_KEYPOINTS],
}

impl Skeleton {
    pub fn new(keypoints: Vec<Keypoint>) -> Result<Self> {
        let n = keypoints.len();
        let keypoints: [Keypoint; NUM_KEYPOINTS] = keypoints.try_into().map_err(|_| {
            Error::invalid(
                "skeleton",
                format!("expected {NUM_KEYPOINTS} keypoints, got {n}"),
            )
        })?;
        for kp in &keypoints {
            if kp.is_visible() && !(kp.x.is_finite() && kp.y.is_finite()) {
                return Err(Error::invalid(
                    "skeleton",
                    "labeled keypoint with non-finite coordinates",
                ));
            }
        }
        Ok(Self { keypoints })
    }

    /// Parses the flat `[x0, y0, v0, ..., x16, y16, v16]` layout.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != NUM_KEYPOINTS * 3 {
            return Err(Error::invalid(
                "skeleton",
                format!(
                    "expected {} values, got {}",
                    NUM_KEYPOINTS * 3,
                    values.len()
                ),
            ));
        }
        let kps = values
            .chunks_exact(3)
            .map(|c| Ok(Keypoint::new(c[0], c[1], Visibility::from_flag(c[2])?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kps)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.keypoints
            .iter()
            .flat_map(|k| [k.x, k.y, f64::from(k.v.flag())])
            .collect()
    }

    pub fn keypoints(&self) -> &[Keypoint; NUM_KEYPOINTS] {
        &self.keypoints
    }

    pub fn get(&self, index: usize) -> Option<&Keypoint> {
        self.keypoints.get(index)
    }

    pub fn visible_count(&self) -> usize {
        self.keypoints.iter().filter(|k| k.is_visible()).count()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut keypoints = self.keypoints;
        for k in keypoints.iter_mut() {
            k.x += dx;
            k.y += dy;
        }
        Self { keypoints }
    }
}

/// Body box, optional skeleton and the part boxes owned by one person.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonInstance {
    body: BoundingBox,
    skeleton: Option<Skeleton>,
    parts: BTreeMap<u32, Vec<BoundingBox>>,
}

impl PersonInstance {
    /// Rejects a skeleton whose keypoints are all unlabeled; pass `None` instead.
    pub fn new(body: BoundingBox, skeleton: Option<Skeleton>) -> Result<Self> {
        if let Some(s) = &skeleton {
            if s.visible_count() == 0 {
                return Err(Error::invalid(
                    "person",
                    "skeleton with no labeled keypoints; absence must be explicit",
                ));
            }
        }
        Ok(Self {
            body,
            skeleton,
            parts: BTreeMap::new(),
        })
    }

    pub fn with_part(mut self, class_id: u32, part: BoundingBox) -> Self {
        self.parts.entry(class_id).or_default().push(part);
        self
    }

    pub fn push_part(&mut self, class_id: u32, part: BoundingBox) {
        self.parts.entry(class_id).or_default().push(part);
    }

    pub fn body(&self) -> &BoundingBox {
        &self.body
    }

    pub fn skeleton(&self) -> Option<&Skeleton> {
        self.skeleton.as_ref()
    }

    pub fn parts(&self) -> &BTreeMap<u32, Vec<BoundingBox>> {
        &self.parts
    }

    pub fn parts_of(&self, class_id: u32) -> &[BoundingBox] {
        self.parts.get(&class_id).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SceneSource {
    #[default]
    Gt,
    Prediction,
    Synthetic,
}

impl fmt::Display for SceneSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneSource::Gt => "gt",
            SceneSource::Prediction => "prediction",
            SceneSource::Synthetic => "synthetic",
        })
    }
}

/// A part detection that no person claimed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoosePart {
    pub class_id: u32,
    pub bbox: BoundingBox,
}

/// All people in one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub people: Vec<PersonInstance>,
    /// Part detections without an owner. Always empty for ground truth.
    pub unassigned_parts: Vec<LoosePart>,
    pub source: SceneSource,
}

impl Scene {
    pub fn new(
        image_id: impl Into<String>,
        width: f64,
        height: f64,
        source: SceneSource,
    ) -> Result<Self> {
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(Error::invalid(
                "scene",
                format!("image size must be positive, got {width}x{height}"),
            ));
        }
        Ok(Self {
            image_id: image_id.into(),
            width,
            height,
            people: Vec::new(),
            unassigned_parts: Vec::new(),
            source,
        })
    }

    /// Iterates every part box of class `class_id` together with its owner index.
    pub fn parts_of(
        &self,
        class_id: u32,
    ) -> impl Iterator<Item = (Option<usize>, &BoundingBox)> + '_ {
        let owned = self
            .people
            .iter()
            .enumerate()
            .flat_map(move |(i, p)| p.parts_of(class_id).iter().map(move |b| (Some(i), b)));
        let loose = self
            .unassigned_parts
            .iter()
            .filter(move |p| p.class_id == class_id)
            .map(|p| (None, &p.bbox));
        owned.chain(loose)
    }

    /// Checks the in-bounds invariant for every box in the scene.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width, self.height);
        let check = |b: &BoundingBox| {
            if b.is_within(w, h) {
                Ok(())
            } else {
                Err(Error::invalid(
                    "scene",
                    format!(
                        "box {:?} escapes image {} ({w}x{h})",
                        b.corners(),
                        self.image_id
                    ),
                ))
            }
        };
        for p in &self.people {
            check(p.body())?;
            for b in p.parts().values().flatten() {
                check(b)?;
            }
        }
        for p in &self.unassigned_parts {
            check(&p.bbox)?;
        }
        Ok(())
    }
}
