//! Evaluation engine.
//!
//! Detection targets (person and each part class) are scored with IoU or
//! inner-IoU AP/AR, pose with COCO OKS AP/AR. Association is scored per
//! part class with joint AP and conditional accuracy at a fixed IoU of 0.5.
//!
//! Matching follows the COCO protocol: per image and target, predictions are
//! ranked by confidence, truncated to `max_dets` and greedily matched; ground
//! truths outside the size band are ignored, as are unmatched predictions
//! outside it. AP is the 101-point interpolated precision averaged over the
//! threshold list; a target with no countable ground truth gets no AP.

mod ap;
mod matching;
mod table;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classmap::ClassMap;
use crate::error::{Error, Result};
use crate::geometry::{inner_iou, iou, oks_coco, OksSigmas};
use crate::types::{BoundingBox, Scene, Skeleton};

pub use ap::{average_precision, precision_recall_summary, RECALL_POINTS};
pub use matching::{match_greedy, rank_predictions, Matching, SimMatrix};
pub use table::render_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Iou,
    InnerIou,
    Oks,
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Similarity::Iou => "iou",
            Similarity::InnerIou => "inner_iou",
            Similarity::Oks => "oks",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeBand {
    All,
    Tiny,
    Small,
    Medium,
    Large,
}

impl fmt::Display for SizeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeBand::All => "all",
            SizeBand::Tiny => "tiny",
            SizeBand::Small => "small",
            SizeBand::Medium => "medium",
            SizeBand::Large => "large",
        })
    }
}

/// Inclusive upper area bounds (px^2) of the tiny, small and medium bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizeCutoffs {
    pub tiny_max: f64,
    pub small_max: f64,
    pub medium_max: f64,
}

impl Default for SizeCutoffs {
    fn default() -> Self {
        Self {
            tiny_max: 20.0 * 20.0,
            small_max: 32.0 * 32.0,
            medium_max: 96.0 * 96.0,
        }
    }
}

impl SizeCutoffs {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.tiny_max
            && self.tiny_max < self.small_max
            && self.small_max < self.medium_max)
        {
            return Err(Error::Config(format!(
                "size cutoffs must increase strictly: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Size band of a box area. Never returns [`SizeBand::All`].
pub fn size_band(area: f64, cutoffs: &SizeCutoffs) -> SizeBand {
    if area <= cutoffs.tiny_max {
        SizeBand::Tiny
    } else if area <= cutoffs.small_max {
        SizeBand::Small
    } else if area <= cutoffs.medium_max {
        SizeBand::Medium
    } else {
        SizeBand::Large
    }
}

fn in_band(area: f64, band: SizeBand, cutoffs: &SizeCutoffs) -> bool {
    band == SizeBand::All || size_band(area, cutoffs) == band
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProtocol")]
pub struct MatchProtocol {
    pub kind: Similarity,
    pub thresholds: Vec<f64>,
    pub band: SizeBand,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    kind: Similarity,
    thresholds: Vec<f64>,
    #[serde(default = "default_band")]
    band: SizeBand,
}

fn default_band() -> SizeBand {
    SizeBand::All
}

impl TryFrom<RawProtocol> for MatchProtocol {
    type Error = Error;

    fn try_from(r: RawProtocol) -> Result<Self> {
        MatchProtocol::new(r.kind, r.thresholds, r.band)
    }
}

/// `0.50, 0.55, ..., 0.95`.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

impl MatchProtocol {
    pub fn new(kind: Similarity, thresholds: Vec<f64>, band: SizeBand) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Config(
                "protocol needs at least one threshold".into(),
            ));
        }
        if thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::Config(format!(
                "thresholds must lie in (0, 1]: {thresholds:?}"
            )));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "thresholds must increase strictly: {thresholds:?}"
            )));
        }
        Ok(Self {
            kind,
            thresholds,
            band,
        })
    }

    pub fn coco(kind: Similarity, band: SizeBand) -> Self {
        Self::new(kind, coco_thresholds(), band).expect("coco thresholds are valid")
    }

    pub fn inner_default() -> Self {
        Self::new(Similarity::InnerIou, vec![0.6, 0.75], SizeBand::All).expect("valid thresholds")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub protocols: Vec<MatchProtocol>,
    pub sigmas: OksSigmas,
    pub size_cutoffs: SizeCutoffs,
    pub max_dets: usize,
    /// Only evaluate a target on images whose ground truth contains it.
    pub restrict_to_present: bool,
    /// Emit per-image matching traces.
    pub traces: bool,
    /// IoU threshold for part and person correspondence in the association metrics.
    pub assoc_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let mut protocols: Vec<MatchProtocol> = [
            SizeBand::All,
            SizeBand::Tiny,
            SizeBand::Small,
            SizeBand::Medium,
            SizeBand::Large,
        ]
        .into_iter()
        .map(|b| MatchProtocol::coco(Similarity::Iou, b))
        .collect();
        protocols.push(MatchProtocol::inner_default());
        protocols.push(MatchProtocol::coco(Similarity::Oks, SizeBand::All));
        Self {
            protocols,
            sigmas: OksSigmas::default(),
            size_cutoffs: SizeCutoffs::default(),
            max_dets: 100,
            restrict_to_present: false,
            traces: false,
            assoc_iou: 0.5,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.size_cutoffs.validate()?;
        if self.max_dets == 0 {
            return Err(Error::Config("max_dets must be at least 1".into()));
        }
        if !(self.assoc_iou > 0.0 && self.assoc_iou <= 1.0) {
            return Err(Error::Config(format!(
                "assoc_iou {} outside (0, 1]",
                self.assoc_iou
            )));
        }
        Ok(())
    }
}

/// What a report row scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Person,
    Pose,
    Part(u32),
}

impl Target {
    pub fn name(&self, cmap: &ClassMap) -> String {
        match self {
            Target::Person => "person".into(),
            Target::Pose => "pose".into(),
            Target::Part(id) => cmap
                .by_id(*id)
                .map(|p| p.name.clone())
                .unwrap_or_else(|| format!("part-{id}")),
        }
    }
}

/// Targets a protocol applies to, in report order.
pub fn targets_for(kind: Similarity, cmap: &ClassMap) -> Vec<Target> {
    match kind {
        Similarity::Oks => vec![Target::Pose],
        Similarity::Iou | Similarity::InnerIou => std::iter::once(Target::Person)
            .chain(cmap.parts().iter().map(|p| Target::Part(p.id)))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub target: String,
    pub protocol: Similarity,
    pub band: SizeBand,
    pub thresholds: Vec<f64>,
    pub num_gt: usize,
    /// Mean AP over thresholds; absent when `num_gt == 0`.
    pub ap: Option<f64>,
    pub ap_at: Vec<f64>,
    pub ar: Option<f64>,
    pub ar_at: Vec<f64>,
    pub counts: Vec<Counts>,
}

impl MetricRow {
    /// AP at one specific threshold, if it is in the list.
    pub fn ap_at_threshold(&self, t: f64) -> Option<f64> {
        let i = self.thresholds.iter().position(|x| (x - t).abs() < 1e-12)?;
        self.ap_at.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocRow {
    pub target: String,
    pub num_gt: usize,
    pub ap50: Option<f64>,
    pub jap: Option<f64>,
    /// Percentage in `[0, 100]`; absent without true positives.
    pub ca: Option<f64>,
    pub tp: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTrace {
    pub image_id: String,
    pub target: String,
    pub protocol: Similarity,
    pub band: SizeBand,
    pub threshold: f64,
    /// `(prediction index, matched ground-truth index)` in rank order.
    pub matches: Vec<(usize, Option<usize>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub images: usize,
    /// Image ids present on only one side; those images were skipped.
    pub skipped: Vec<String>,
    pub detection: Vec<MetricRow>,
    pub association: Vec<AssocRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<ImageTrace>,
}

impl EvalReport {
    pub fn row(&self, target: &str, protocol: Similarity, band: SizeBand) -> Option<&MetricRow> {
        self.detection
            .iter()
            .find(|r| r.target == target && r.protocol == protocol && r.band == band)
    }

    pub fn assoc(&self, target: &str) -> Option<&AssocRow> {
        self.association.iter().find(|r| r.target == target)
    }
}

#[derive(Clone, Copy)]
struct Item<'a> {
    bbox: &'a BoundingBox,
    skeleton: Option<&'a Skeleton>,
    owner: Option<usize>,
}

fn items(scene: &Scene, target: Target, for_prediction: bool) -> Vec<Item<'_>> {
    match target {
        Target::Person => scene
            .people
            .iter()
            .enumerate()
            .map(|(i, p)| Item {
                bbox: p.body(),
                skeleton: p.skeleton(),
                owner: Some(i),
            })
            .collect(),
        Target::Pose => scene
            .people
            .iter()
            .enumerate()
            .filter(|(_, p)| !for_prediction || p.skeleton().is_some())
            .map(|(i, p)| Item {
                bbox: p.body(),
                skeleton: p.skeleton(),
                owner: Some(i),
            })
            .collect(),
        Target::Part(c) => scene
            .parts_of(c)
            .map(|(owner, bbox)| Item {
                bbox,
                skeleton: None,
                owner,
            })
            .collect(),
    }
}

fn similarity(kind: Similarity, pred: &Item, gt: &Item, sigmas: &OksSigmas) -> f64 {
    match kind {
        Similarity::Iou => iou(pred.bbox, gt.bbox),
        Similarity::InnerIou => inner_iou(pred.bbox, gt.bbox),
        Similarity::Oks => match (pred.skeleton, gt.skeleton) {
            (Some(p), Some(g)) => oks_coco(p, g, gt.bbox.area(), sigmas).unwrap_or(0.0),
            _ => 0.0,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Tp,
    Fp,
    Ignored,
}

/// One image's contribution to a (target, protocol) row.
struct ImageEval {
    scores: Vec<f64>,
    /// `outcomes[t][rank]`
    outcomes: Vec<Vec<Outcome>>,
    num_gt: usize,
    trace: Vec<(usize, Option<usize>)>,
}

fn ranked<'a>(preds: &[Item<'a>], max_dets: usize) -> Vec<usize> {
    let boxes: Vec<&BoundingBox> = preds.iter().map(|p| p.bbox).collect();
    let mut order = rank_predictions(&boxes);
    order.truncate(max_dets);
    order
}

fn eval_image(gt: &[Item], pred: &[Item], proto: &MatchProtocol, cfg: &EvalConfig) -> ImageEval {
    let order = ranked(pred, cfg.max_dets);
    let gt_ignore: Vec<bool> = gt
        .iter()
        .map(|g| {
            !in_band(g.bbox.area(), proto.band, &cfg.size_cutoffs)
                || (proto.kind == Similarity::Oks
                    && g.skeleton.is_none_or(|s| s.visible_count() == 0))
        })
        .collect();
    let sim: SimMatrix = order
        .iter()
        .map(|&d| {
            gt.iter()
                .map(|g| similarity(proto.kind, &pred[d], g, &cfg.sigmas))
                .collect()
        })
        .collect();
    // Coverage-style similarities saturate for nested boxes; plain IoU then
    // picks the ground truth closest in extent.
    let tie: Option<SimMatrix> = (proto.kind != Similarity::Iou).then(|| {
        order
            .iter()
            .map(|&d| gt.iter().map(|g| iou(pred[d].bbox, g.bbox)).collect())
            .collect()
    });
    let mut trace = Vec::new();
    let outcomes = proto
        .thresholds
        .iter()
        .enumerate()
        .map(|(ti, &tau)| {
            let m = match_greedy(&sim, tie.as_deref(), &gt_ignore, tau);
            if ti == 0 && cfg.traces {
                trace = order
                    .iter()
                    .zip(&m.pred_to_gt)
                    .map(|(&d, g)| (d, *g))
                    .collect();
            }
            order
                .iter()
                .zip(&m.pred_to_gt)
                .map(|(&d, g)| match g {
                    Some(g) if gt_ignore[*g] => Outcome::Ignored,
                    Some(_) => Outcome::Tp,
                    None if !in_band(pred[d].bbox.area(), proto.band, &cfg.size_cutoffs) => {
                        Outcome::Ignored
                    }
                    None => Outcome::Fp,
                })
                .collect()
        })
        .collect();
    ImageEval {
        scores: order.iter().map(|&d| pred[d].bbox.conf()).collect(),
        outcomes,
        num_gt: gt_ignore.iter().filter(|i| !**i).count(),
        trace,
    }
}

/// Sorts (score, image, rank) triples into the global ranking.
fn global_order(per_image: &[(usize, &[f64])]) -> Vec<(usize, usize)> {
    let mut all: Vec<(f64, usize, usize)> = per_image
        .iter()
        .flat_map(|&(img, scores)| scores.iter().enumerate().map(move |(r, &s)| (s, img, r)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    all.into_iter().map(|(_, img, r)| (img, r)).collect()
}

fn accumulate(target: String, proto: &MatchProtocol, evals: &[(usize, ImageEval)]) -> MetricRow {
    let num_gt: usize = evals.iter().map(|(_, e)| e.num_gt).sum();
    let by_img: HashMap<usize, &ImageEval> = evals.iter().map(|(i, e)| (*i, e)).collect();
    let keys: Vec<(usize, &[f64])> = evals
        .iter()
        .map(|(i, e)| (*i, e.scores.as_slice()))
        .collect();
    let order = global_order(&keys);

    let mut ap_at = Vec::new();
    let mut ar_at = Vec::new();
    let mut counts = Vec::new();
    for t in 0..proto.thresholds.len() {
        let flags: Vec<bool> = order
            .iter()
            .map(|&(img, r)| by_img[&img].outcomes[t][r])
            .filter(|o| *o != Outcome::Ignored)
            .map(|o| o == Outcome::Tp)
            .collect();
        let tp = flags.iter().filter(|f| **f).count();
        counts.push(Counts {
            tp,
            fp: flags.len() - tp,
            fn_: num_gt - tp,
        });
        if let Some((ap, ar)) = precision_recall_summary(&flags, num_gt) {
            ap_at.push(ap);
            ar_at.push(ar);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    MetricRow {
        target,
        protocol: proto.kind,
        band: proto.band,
        thresholds: proto.thresholds.clone(),
        num_gt,
        ap: mean(&ap_at),
        ap_at,
        ar: mean(&ar_at),
        ar_at,
        counts,
    }
}

/// Per-image association outcome for one part class.
struct AssocImage {
    scores: Vec<f64>,
    /// `(matched, correctly associated)` per ranked prediction.
    outcomes: Vec<(bool, bool)>,
    num_gt: usize,
}

fn assoc_image(gt: &Scene, pred: &Scene, class_id: u32, cfg: &EvalConfig) -> AssocImage {
    let gt_people = items(gt, Target::Person, false);
    let pred_people = items(pred, Target::Person, true);
    let person_order = ranked(&pred_people, usize::MAX);
    let person_sim: SimMatrix = person_order
        .iter()
        .map(|&d| {
            gt_people
                .iter()
                .map(|g| iou(pred_people[d].bbox, g.bbox))
                .collect()
        })
        .collect();
    let pm = match_greedy(
        &person_sim,
        None,
        &vec![false; gt_people.len()],
        cfg.assoc_iou,
    );
    let mut person_match: Vec<Option<usize>> = vec![None; pred_people.len()];
    for (&d, g) in person_order.iter().zip(&pm.pred_to_gt) {
        person_match[d] = *g;
    }

    let gt_parts = items(gt, Target::Part(class_id), false);
    let pred_parts = items(pred, Target::Part(class_id), true);
    let order = ranked(&pred_parts, cfg.max_dets);
    let sim: SimMatrix = order
        .iter()
        .map(|&d| {
            gt_parts
                .iter()
                .map(|g| iou(pred_parts[d].bbox, g.bbox))
                .collect()
        })
        .collect();
    let m = match_greedy(&sim, None, &vec![false; gt_parts.len()], cfg.assoc_iou);
    let outcomes = order
        .iter()
        .zip(&m.pred_to_gt)
        .map(|(&d, g)| match g {
            None => (false, false),
            Some(g) => {
                let correct = match (pred_parts[d].owner, gt_parts[*g].owner) {
                    (Some(po), Some(go)) => person_match[po] == Some(go),
                    _ => false,
                };
                (true, correct)
            }
        })
        .collect();
    AssocImage {
        scores: order.iter().map(|&d| pred_parts[d].bbox.conf()).collect(),
        outcomes,
        num_gt: gt_parts.len(),
    }
}

fn accumulate_assoc(target: String, evals: &[(usize, AssocImage)]) -> AssocRow {
    let num_gt: usize = evals.iter().map(|(_, e)| e.num_gt).sum();
    let by_img: HashMap<usize, &AssocImage> = evals.iter().map(|(i, e)| (*i, e)).collect();
    let keys: Vec<(usize, &[f64])> = evals
        .iter()
        .map(|(i, e)| (*i, e.scores.as_slice()))
        .collect();
    let ranked: Vec<(bool, bool)> = global_order(&keys)
        .into_iter()
        .map(|(img, r)| by_img[&img].outcomes[r])
        .collect();
    let matched: Vec<bool> = ranked.iter().map(|o| o.0).collect();
    let joint: Vec<bool> = ranked.iter().map(|o| o.0 && o.1).collect();
    let tp = matched.iter().filter(|m| **m).count();
    let correct = joint.iter().filter(|m| **m).count();
    AssocRow {
        target,
        num_gt,
        ap50: precision_recall_summary(&matched, num_gt).map(|x| x.0),
        jap: precision_recall_summary(&joint, num_gt).map(|x| x.0),
        ca: (tp > 0).then(|| 100.0 * correct as f64 / tp as f64),
        tp,
        correct,
    }
}

fn has_target(scene: &Scene, target: Target) -> bool {
    match target {
        Target::Person => !scene.people.is_empty(),
        Target::Pose => scene.people.iter().any(|p| p.skeleton().is_some()),
        Target::Part(c) => scene.parts_of(c).next().is_some(),
    }
}

/// Pairs ground-truth and prediction scenes by image id.
///
/// Returns the aligned pairs in ground-truth order and the sorted ids that
/// exist on only one side.
pub fn align<'a>(gt: &'a [Scene], pred: &'a [Scene]) -> (Vec<(&'a Scene, &'a Scene)>, Vec<String>) {
    let pred_by_id: HashMap<&str, &Scene> = pred.iter().map(|s| (s.image_id.as_str(), s)).collect();
    let gt_ids: BTreeSet<&str> = gt.iter().map(|s| s.image_id.as_str()).collect();
    let mut skipped: BTreeSet<String> = BTreeSet::new();
    let mut pairs = Vec::new();
    for g in gt {
        match pred_by_id.get(g.image_id.as_str()) {
            Some(p) => pairs.push((g, *p)),
            None => {
                skipped.insert(g.image_id.clone());
            }
        }
    }
    for p in pred {
        if !gt_ids.contains(p.image_id.as_str()) {
            skipped.insert(p.image_id.clone());
        }
    }
    (pairs, skipped.into_iter().collect())
}

/// Scores a prediction corpus against ground truth.
pub fn evaluate(
    gt: &[Scene],
    pred: &[Scene],
    cmap: &ClassMap,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let (pairs, skipped) = align(gt, pred);

    let jobs: Vec<(usize, &MatchProtocol, Target)> = cfg
        .protocols
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| {
            targets_for(p.kind, cmap)
                .into_iter()
                .map(move |t| (pi, p, t))
        })
        .collect();

    // Per image: one ImageEval per job (None when restricted away).
    let per_image: Vec<Vec<Option<ImageEval>>> = pairs
        .par_iter()
        .map(|(g, p)| {
            jobs.iter()
                .map(|&(_, proto, target)| {
                    if cfg.restrict_to_present && !has_target(g, target) {
                        return None;
                    }
                    Some(eval_image(
                        &items(g, target, false),
                        &items(p, target, true),
                        proto,
                        cfg,
                    ))
                })
                .collect()
        })
        .collect();

    let mut detection = Vec::with_capacity(jobs.len());
    let mut traces = Vec::new();
    let mut columns: Vec<Vec<(usize, ImageEval)>> = (0..jobs.len()).map(|_| Vec::new()).collect();
    for (img, row) in per_image.into_iter().enumerate() {
        for (j, e) in row.into_iter().enumerate() {
            if let Some(e) = e {
                columns[j].push((img, e));
            }
        }
    }
    for (j, &(_, proto, target)) in jobs.iter().enumerate() {
        let name = target.name(cmap);
        if cfg.traces {
            for (img, e) in &columns[j] {
                traces.push(ImageTrace {
                    image_id: pairs[*img].0.image_id.clone(),
                    target: name.clone(),
                    protocol: proto.kind,
                    band: proto.band,
                    threshold: proto.thresholds[0],
                    matches: e.trace.clone(),
                });
            }
        }
        detection.push(accumulate(name, proto, &columns[j]));
    }

    let association = cmap
        .parts()
        .par_iter()
        .map(|class| {
            let target = Target::Part(class.id);
            let evals: Vec<(usize, AssocImage)> = pairs
                .iter()
                .enumerate()
                .filter(|(_, (g, _))| !cfg.restrict_to_present || has_target(g, target))
                .map(|(i, (g, p))| (i, assoc_image(g, p, class.id, cfg)))
                .collect();
            accumulate_assoc(class.name.clone(), &evals)
        })
        .collect();

    Ok(EvalReport {
        images: pairs.len(),
        skipped,
        detection,
        association,
        traces,
    })
}
