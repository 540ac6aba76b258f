//! Seeded synthetic scenes and brute-force reference implementations.
//!
//! People are stick figures from a small articulated model (torso lean, arm
//! and leg joint angles, sideways turn). Part boxes are the bounding
//! rectangle of each class's keypoints, dilated by a per-class factor with a
//! minimum side proportional to the person's height. Predictions are derived
//! from the ground truth by a noise model; with every noise knob at zero the
//! prediction equals the ground truth.
//!
//! Each scene depends only on `(seed, index)`, so corpora can be generated in
//! parallel and in any order.

mod oracle;
mod rng;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classmap::ClassMap;
use crate::error::{Error, Result};
use crate::types::{
    BoundingBox, Keypoint, LoosePart, PersonInstance, Scene, SceneSource, Skeleton, Visibility,
    NUM_KEYPOINTS,
};

pub use oracle::{
    oracle_associate, oracle_evaluate, OracleAssocRow, OracleDetectionRow, OracleReport,
};
pub use rng::SynthRng;

/// Dilation applied to a part's keypoint rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartPadding {
    /// Multiplier on the keypoint rectangle's width and height.
    pub scale: f64,
    /// Minimum side as a fraction of the person's height.
    pub min_side: f64,
}

impl PartPadding {
    pub const FALLBACK: PartPadding = PartPadding {
        scale: 1.5,
        min_side: 0.08,
    };
}

fn default_padding() -> BTreeMap<String, PartPadding> {
    [
        ("head", 1.8, 0.12),
        ("face", 1.4, 0.08),
        ("chest", 1.3, 0.10),
        ("hip", 1.3, 0.10),
        ("left-hand", 1.0, 0.07),
        ("right-hand", 1.0, 0.07),
        ("left-foot", 1.0, 0.06),
        ("right-foot", 1.0, 0.06),
    ]
    .into_iter()
    .map(|(n, scale, min_side)| (n.to_string(), PartPadding { scale, min_side }))
    .collect()
}

/// How predictions deviate from the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Center shift and log-size change, as a fraction of box size (std dev).
    pub box_jitter: f64,
    /// Keypoint shift as a fraction of the person's box height (std dev).
    pub keypoint_jitter: f64,
    /// Detection confidences are uniform in `[conf_min, conf_max]`.
    pub conf_min: f64,
    pub conf_max: f64,
    /// Per person, and per person and part class, chance of a spurious detection.
    pub fp_rate: f64,
    /// Chance that a true body or part is missed.
    pub fn_rate: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            box_jitter: 0.0,
            keypoint_jitter: 0.0,
            conf_min: 1.0,
            conf_max: 1.0,
            fp_rate: 0.0,
            fn_rate: 0.0,
        }
    }
}

impl NoiseModel {
    /// A detector that is decent but not perfect.
    pub fn moderate() -> Self {
        Self {
            box_jitter: 0.05,
            keypoint_jitter: 0.04,
            conf_min: 0.3,
            conf_max: 1.0,
            fp_rate: 0.1,
            fn_rate: 0.1,
        }
    }

    /// Localization noise only: every object is found once, nothing spurious.
    pub fn jitter() -> Self {
        Self {
            fp_rate: 0.0,
            fn_rate: 0.0,
            ..Self::moderate()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("box_jitter", self.box_jitter),
            ("keypoint_jitter", self.keypoint_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be a non-negative number, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("conf_min", self.conf_min),
            ("conf_max", self.conf_max),
            ("fp_rate", self.fp_rate),
            ("fn_rate", self.fn_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.conf_min > self.conf_max {
            return Err(Error::Config("conf_min exceeds conf_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_scenes: usize,
    pub people_min: usize,
    pub people_max: usize,
    pub arena_width: f64,
    pub arena_height: f64,
    pub person_height_min: f64,
    pub person_height_max: f64,
    /// Std dev in pixels added to every ground-truth keypoint.
    pub pose_noise: f64,
    /// Chance that a keypoint is labeled occluded instead of visible.
    pub occlusion_prob: f64,
    pub noise: NoiseModel,
    /// Keyed by part class name; classes not listed use [`PartPadding::FALLBACK`].
    pub part_padding: BTreeMap<String, PartPadding>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_scenes: 10,
            people_min: 1,
            people_max: 7,
            arena_width: 640.0,
            arena_height: 480.0,
            person_height_min: 120.0,
            person_height_max: 320.0,
            pose_noise: 1.5,
            occlusion_prob: 0.1,
            noise: NoiseModel::default(),
            part_padding: default_padding(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.people_min > self.people_max {
            return Err(Error::Config(format!(
                "people range {}..={} is empty",
                self.people_min, self.people_max
            )));
        }
        if !(self.arena_width >= 32.0
            && self.arena_height >= 32.0
            && self.arena_width.is_finite()
            && self.arena_height.is_finite())
        {
            return Err(Error::Config("arena must be at least 32x32 pixels".into()));
        }
        if !(self.person_height_min > 0.0
            && self.person_height_min <= self.person_height_max
            && self.person_height_max.is_finite())
        {
            return Err(Error::Config(
                "person height range is empty or non-positive".into(),
            ));
        }
        if !(self.pose_noise.is_finite() && self.pose_noise >= 0.0) {
            return Err(Error::Config("pose_noise must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.occlusion_prob) {
            return Err(Error::Config("occlusion_prob must lie in [0, 1]".into()));
        }
        for (name, p) in &self.part_padding {
            if !(p.scale >= 1.0
                && p.scale.is_finite()
                && p.min_side > 0.0
                && p.min_side.is_finite())
            {
                return Err(Error::Config(format!(
                    "padding for {name} needs scale >= 1 and min_side > 0"
                )));
            }
        }
        self.noise.validate()
    }

    fn padding(&self, class_name: &str) -> PartPadding {
        self.part_padding
            .get(class_name)
            .copied()
            .unwrap_or(PartPadding::FALLBACK)
    }
}

pub fn image_id(seed: u64, index: u64) -> String {
    format!("synth-{seed}-{index:06}")
}

/// Unit-height stick figure, hip center at the origin, y pointing down.
fn articulated_pose(rng: &mut SynthRng) -> [(f64, f64); NUM_KEYPOINTS] {
    let turn = rng.range(0.35, 1.0) * if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
    let lean = 0.12 * rng.normal();
    let (sl, cl) = lean.sin_cos();
    let rot = |x: f64, y: f64| (x * cl - y * sl, x * sl + y * cl);
    let add = |a: (f64, f64), b: (f64, f64)| (a.0 + b.0, a.1 + b.1);
    // Direction at angle `a` from straight down, swung toward `side`.
    let limb = |a: f64, side: f64, len: f64| (len * a.sin() * side, len * a.cos());

    let neck = rot(0.0, -0.30);
    let head = rot(0.0, -0.42);
    let mut k = [(0.0, 0.0); NUM_KEYPOINTS];
    k[0] = add(head, (0.02 * turn.signum() * (1.0 - turn.abs()), 0.01));
    k[1] = add(head, (0.025 * turn, -0.015));
    k[2] = add(head, (-0.025 * turn, -0.015));
    k[3] = add(head, (0.05 * turn, 0.0));
    k[4] = add(head, (-0.05 * turn, 0.0));
    for (i, side) in [(0usize, 1.0), (1, -1.0)] {
        let s = side * turn.signum();
        let shoulder = add(neck, rot(0.11 * side * turn, 0.02));
        let a = rng.range(-0.6, 2.4);
        let elbow = add(shoulder, limb(a, s, 0.17));
        let wrist = add(elbow, limb(a + rng.range(0.0, 2.2), s, 0.15));
        k[5 + i] = shoulder;
        k[7 + i] = elbow;
        k[9 + i] = wrist;
        let hip = (0.09 * side * turn, 0.0);
        let b = rng.range(-0.25, 0.45);
        let knee = add(hip, limb(b, s, 0.24));
        let ankle = add(knee, limb(b + rng.range(-0.6, 0.2), s, 0.24));
        k[11 + i] = hip;
        k[13 + i] = knee;
        k[15 + i] = ankle;
    }
    k
}

fn bounds(points: impl Iterator<Item = (f64, f64)>) -> [f64; 4] {
    points.fold(
        [
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ],
        |b, (x, y)| [b[0].min(x), b[1].min(y), b[2].max(x), b[3].max(y)],
    )
}

/// Keypoint-box margins as fractions of height: left/right, top, bottom.
const BODY_MARGIN: (f64, f64, f64) = (0.05, 0.10, 0.03);

struct Figure {
    points: [(f64, f64); NUM_KEYPOINTS],
    flags: [Visibility; NUM_KEYPOINTS],
    height: f64,
    body: [f64; 4],
}

fn place_person(cfg: &SynthConfig, rng: &mut SynthRng) -> Figure {
    let unit = articulated_pose(rng);
    let height = rng.range(cfg.person_height_min, cfg.person_height_max);
    let mut points = unit.map(|(x, y)| {
        (
            x * height + cfg.pose_noise * rng.normal(),
            y * height + cfg.pose_noise * rng.normal(),
        )
    });
    let flags = std::array::from_fn(|_| {
        if rng.bernoulli(cfg.occlusion_prob) {
            Visibility::Occluded
        } else {
            Visibility::Visible
        }
    });

    let (mx, mt, mb) = BODY_MARGIN;
    let kb = bounds(points.iter().copied());
    let mut body = [
        kb[0] - mx * height,
        kb[1] - mt * height,
        kb[2] + mx * height,
        kb[3] + mb * height,
    ];
    // Shrink about the box origin until it fits the arena with a 1px border.
    let fit = ((cfg.arena_width - 2.0) / (body[2] - body[0]))
        .min((cfg.arena_height - 2.0) / (body[3] - body[1]))
        .min(1.0);
    let height = height * fit;
    for p in &mut points {
        *p = ((p.0 - body[0]) * fit, (p.1 - body[1]) * fit);
    }
    body = [
        0.0,
        0.0,
        (body[2] - body[0]) * fit,
        (body[3] - body[1]) * fit,
    ];

    let dx = rng.range(1.0, cfg.arena_width - 1.0 - body[2]);
    let dy = rng.range(1.0, cfg.arena_height - 1.0 - body[3]);
    for p in &mut points {
        *p = (p.0 + dx, p.1 + dy);
    }
    Figure {
        points,
        flags,
        height,
        body: [body[0] + dx, body[1] + dy, body[2] + dx, body[3] + dy],
    }
}

fn part_box(
    fig: &Figure,
    indices: &[usize],
    pad: PartPadding,
    w: f64,
    h: f64,
) -> Result<BoundingBox> {
    let b = bounds(indices.iter().map(|&i| fig.points[i]));
    let min_side = pad.min_side * fig.height;
    let bw = ((b[2] - b[0]) * pad.scale).max(min_side);
    let bh = ((b[3] - b[1]) * pad.scale).max(min_side);
    let (cx, cy) = ((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0);
    BoundingBox::from_corners(
        cx - bw / 2.0,
        cy - bh / 2.0,
        cx + bw / 2.0,
        cy + bh / 2.0,
        1.0,
    )?
    .clamped(w, h)
}

/// One person's ground truth, drawn from that person's own lane.
fn ground_truth_person(
    cfg: &SynthConfig,
    cmap: &ClassMap,
    rng: &mut SynthRng,
) -> Result<PersonInstance> {
    let (w, h) = (cfg.arena_width, cfg.arena_height);
    let fig = place_person(cfg, rng);
    let kps = (0..NUM_KEYPOINTS)
        .map(|i| Keypoint::new(fig.points[i].0, fig.points[i].1, fig.flags[i]))
        .collect();
    let b = fig.body;
    let body = BoundingBox::from_corners(b[0], b[1], b[2], b[3], 1.0)?.clamped(w, h)?;
    let mut person = PersonInstance::new(body, Some(Skeleton::new(kps)?))?;
    for class in cmap.parts() {
        // A part whose keypoints are all occluded is not annotated.
        if class
            .keypoint_indices
            .iter()
            .all(|&i| fig.flags[i] == Visibility::Occluded)
        {
            continue;
        }
        let part = part_box(
            &fig,
            &class.keypoint_indices,
            cfg.padding(&class.name),
            w,
            h,
        )?;
        person.push_part(class.id, part);
    }
    Ok(person)
}

fn jitter_box(
    b: &BoundingBox,
    noise: &NoiseModel,
    rng: &mut SynthRng,
    w: f64,
    h: f64,
) -> Option<BoundingBox> {
    let s = noise.box_jitter;
    let cx = b.cx() + s * b.w() * rng.normal();
    let cy = b.cy() + s * b.h() * rng.normal();
    let bw = b.w() * (s * rng.normal()).exp();
    let bh = b.h() * (s * rng.normal()).exp();
    let conf = rng.range(noise.conf_min, noise.conf_max);
    fit(BoundingBox::new(cx, cy, bw, bh, conf).ok()?, w, h)
}

/// Clamps only boxes that actually escape, so in-bounds boxes keep their exact values.
fn fit(b: BoundingBox, w: f64, h: f64) -> Option<BoundingBox> {
    if b.is_within(w, h) {
        Some(b)
    } else {
        b.clamped(w, h).ok()
    }
}

fn jitter_skeleton(s: &Skeleton, scale: f64, rng: &mut SynthRng) -> Skeleton {
    let kps = s
        .keypoints()
        .iter()
        .map(|k| Keypoint::new(k.x + scale * rng.normal(), k.y + scale * rng.normal(), k.v))
        .collect();
    Skeleton::new(kps).expect("jitter keeps the labeled set")
}

fn spurious_box(
    like: &BoundingBox,
    rng: &mut SynthRng,
    w: f64,
    h: f64,
    noise: &NoiseModel,
) -> Option<BoundingBox> {
    let bw = like.w().min(w - 1.0);
    let bh = like.h().min(h - 1.0);
    let cx = rng.range(bw / 2.0, w - bw / 2.0);
    let cy = rng.range(bh / 2.0, h - bh / 2.0);
    let conf = rng.range(noise.conf_min, noise.conf_max);
    fit(BoundingBox::new(cx, cy, bw, bh, conf).ok()?, w, h)
}

/// Noisy detections of one ground-truth person, appended to `pred`.
fn predict_person(
    person: &PersonInstance,
    pred: &mut Scene,
    cfg: &SynthConfig,
    cmap: &ClassMap,
    rng: &mut SynthRng,
) -> Result<()> {
    let noise = &cfg.noise;
    let (w, h) = (pred.width, pred.height);
    {
        let missed = rng.bernoulli(noise.fn_rate);
        let body = jitter_box(person.body(), noise, rng, w, h);
        let skeleton = person
            .skeleton()
            .map(|s| jitter_skeleton(s, noise.keypoint_jitter * person.body().h(), rng));
        let owner = match (missed, body) {
            (false, Some(b)) => {
                pred.people.push(PersonInstance::new(b, skeleton)?);
                Some(pred.people.len() - 1)
            }
            _ => None,
        };
        for (&class_id, boxes) in person.parts() {
            for b in boxes {
                let missed = rng.bernoulli(noise.fn_rate);
                let Some(jb) = jitter_box(b, noise, rng, w, h) else {
                    continue;
                };
                if missed {
                    continue;
                }
                match owner {
                    Some(o) => pred.people[o].push_part(class_id, jb),
                    None => pred.unassigned_parts.push(LoosePart { class_id, bbox: jb }),
                }
            }
        }
        if rng.bernoulli(noise.fp_rate) {
            if let Some(b) = spurious_box(person.body(), rng, w, h, noise) {
                pred.people.push(PersonInstance::new(b, None)?);
            }
        }
        for class in cmap.parts() {
            let fire = rng.bernoulli(noise.fp_rate);
            let like = person
                .parts_of(class.id)
                .first()
                .copied()
                .unwrap_or(*person.body());
            let b = spurious_box(&like, rng, w, h, noise);
            if let (true, Some(bbox)) = (fire, b) {
                pred.unassigned_parts.push(LoosePart {
                    class_id: class.id,
                    bbox,
                });
            }
        }
    }
    Ok(())
}

/// Ground truth and noisy prediction for one scene index.
pub fn generate_scene(cfg: &SynthConfig, cmap: &ClassMap, index: u64) -> Result<(Scene, Scene)> {
    cfg.validate()?;
    let id = image_id(cfg.seed, index);
    let (w, h) = (cfg.arena_width, cfg.arena_height);
    let mut gt = Scene::new(id.clone(), w, h, SceneSource::Gt)?;
    let mut pred = Scene::new(id, w, h, SceneSource::Prediction)?;
    let span = (cfg.people_max - cfg.people_min + 1) as u64;
    let n = cfg.people_min + SynthRng::new(cfg.seed, index).below(span) as usize;
    // Per-person lanes make a scene with k people a prefix of the one with k + 1.
    for j in 0..n as u64 {
        let mut rng = SynthRng::with_lane(cfg.seed, index, j + 1);
        let person = ground_truth_person(cfg, cmap, &mut rng)?;
        predict_person(&person, &mut pred, cfg, cmap, &mut rng)?;
        gt.people.push(person);
    }
    Ok((gt, pred))
}

/// Scenes `0..cfg.n_scenes`, generated in parallel and returned in index order.
pub fn generate_corpus(cfg: &SynthConfig, cmap: &ClassMap) -> Result<(Vec<Scene>, Vec<Scene>)> {
    cfg.validate()?;
    let pairs: Vec<(Scene, Scene)> = (0..cfg.n_scenes as u64)
        .into_par_iter()
        .map(|i| generate_scene(cfg, cmap, i))
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmap() -> ClassMap {
        ClassMap::default()
    }

    #[test]
    fn deterministic_per_index() {
        let cfg = SynthConfig {
            seed: 42,
            noise: NoiseModel::moderate(),
            ..SynthConfig::default()
        };
        let a = generate_scene(&cfg, &cmap(), 5).unwrap();
        let b = generate_scene(&cfg, &cmap(), 5).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&cfg, &cmap(), 6).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn zero_noise_prediction_equals_truth() {
        let cfg = SynthConfig {
            seed: 3,
            ..SynthConfig::default()
        };
        for i in 0..50 {
            let (gt, mut pred) = generate_scene(&cfg, &cmap(), i).unwrap();
            pred.source = SceneSource::Gt;
            assert_eq!(gt, pred);
        }
    }

    #[test]
    fn full_miss_rate_gives_empty_predictions() {
        let cfg = SynthConfig {
            noise: NoiseModel {
                fn_rate: 1.0,
                ..NoiseModel::default()
            },
            ..SynthConfig::default()
        };
        for i in 0..20 {
            let (gt, pred) = generate_scene(&cfg, &cmap(), i).unwrap();
            assert!(!gt.people.is_empty());
            assert!(pred.people.is_empty() && pred.unassigned_parts.is_empty());
        }
    }

    #[test]
    fn smaller_crowds_are_prefixes() {
        let at = |k| SynthConfig {
            people_min: k,
            people_max: k,
            noise: NoiseModel::moderate(),
            ..SynthConfig::default()
        };
        for i in 0..20 {
            let (g3, p3) = generate_scene(&at(3), &cmap(), i).unwrap();
            let (g5, p5) = generate_scene(&at(5), &cmap(), i).unwrap();
            assert_eq!(g3.people[..], g5.people[..3]);
            assert_eq!(p3.people[..], p5.people[..p3.people.len()]);
        }
    }

    #[test]
    fn people_count_within_range() {
        let cfg = SynthConfig {
            people_min: 2,
            people_max: 4,
            ..SynthConfig::default()
        };
        for i in 0..100 {
            let n = generate_scene(&cfg, &cmap(), i).unwrap().0.people.len();
            assert!((2..=4).contains(&n));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            SynthConfig {
                people_min: 3,
                people_max: 2,
                ..SynthConfig::default()
            },
            SynthConfig {
                occlusion_prob: 1.5,
                ..SynthConfig::default()
            },
            SynthConfig {
                noise: NoiseModel {
                    conf_min: 0.9,
                    conf_max: 0.1,
                    ..NoiseModel::default()
                },
                ..SynthConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }
}
