//! Slow, literal reference implementations used to check the fast paths.
//!
//! Nothing here calls into `associate` or `metrics`; only the similarity
//! kernels from `geometry` and the plain data types are shared.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::associate::DetectedBody;
use crate::classmap::ClassMap;
use crate::geometry::{inner_iou, iou, oks_coco};
use crate::metrics::{EvalConfig, MatchProtocol, Similarity, SizeBand};
use crate::types::{BoundingBox, LoosePart, Scene, Skeleton, Visibility};

/// Owner per part: fills the full part-by-body distance table and takes the
/// first minimum of each row.
pub fn oracle_associate(
    bodies: &[DetectedBody],
    parts: &[LoosePart],
    cmap: &ClassMap,
) -> Vec<Option<usize>> {
    let mut table: Vec<Vec<Option<f64>>> = vec![vec![None; bodies.len()]; parts.len()];
    for (pi, part) in parts.iter().enumerate() {
        let Some(class) = cmap.parts().iter().find(|c| c.id == part.class_id) else {
            continue;
        };
        for (bi, body) in bodies.iter().enumerate() {
            let pts: Vec<(f64, f64)> = class
                .keypoint_indices
                .iter()
                .map(|&k| body.skeleton.keypoints()[k])
                .filter(|kp| kp.v != Visibility::Unlabeled)
                .map(|kp| (kp.x, kp.y))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let n = pts.len() as f64;
            let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
            let (kx, ky) = (sx / n, sy / n);
            let dx = part.bbox.cx() - kx;
            let dy = part.bbox.cy() - ky;
            table[pi][bi] = Some(dx * dx + dy * dy);
        }
    }
    table
        .iter()
        .map(|row| {
            let min = row.iter().flatten().copied().reduce(f64::min)?;
            row.iter().position(|d| *d == Some(min))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleDetectionRow {
    pub target: String,
    pub protocol: Similarity,
    pub band: SizeBand,
    pub ap: Option<f64>,
    pub ar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAssocRow {
    pub target: String,
    pub ap50: Option<f64>,
    pub jap: Option<f64>,
    pub ca: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub detection: Vec<OracleDetectionRow>,
    pub association: Vec<OracleAssocRow>,
}

impl OracleReport {
    pub fn row(
        &self,
        target: &str,
        protocol: Similarity,
        band: SizeBand,
    ) -> Option<&OracleDetectionRow> {
        self.detection
            .iter()
            .find(|r| r.target == target && r.protocol == protocol && r.band == band)
    }

    pub fn assoc(&self, target: &str) -> Option<&OracleAssocRow> {
        self.association.iter().find(|r| r.target == target)
    }
}

#[derive(Clone, Copy)]
struct Obj<'a> {
    bbox: &'a BoundingBox,
    skeleton: Option<&'a Skeleton>,
    owner: Option<usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum What {
    Person,
    Pose,
    Part(u32),
}

fn objects(scene: &Scene, what: What, pred: bool) -> Vec<Obj<'_>> {
    let mut out = Vec::new();
    match what {
        What::Person | What::Pose => {
            for (i, p) in scene.people.iter().enumerate() {
                if what == What::Pose && pred && p.skeleton().is_none() {
                    continue;
                }
                out.push(Obj {
                    bbox: p.body(),
                    skeleton: p.skeleton(),
                    owner: Some(i),
                });
            }
        }
        What::Part(c) => {
            for (i, p) in scene.people.iter().enumerate() {
                for b in p.parts_of(c) {
                    out.push(Obj {
                        bbox: b,
                        skeleton: None,
                        owner: Some(i),
                    });
                }
            }
            for lp in scene.unassigned_parts.iter().filter(|lp| lp.class_id == c) {
                out.push(Obj {
                    bbox: &lp.bbox,
                    skeleton: None,
                    owner: None,
                });
            }
        }
    }
    out
}

fn present(scene: &Scene, what: What) -> bool {
    !objects(scene, what, false).is_empty()
        && (what != What::Pose || scene.people.iter().any(|p| p.skeleton().is_some()))
}

/// Prediction indices sorted by descending confidence, then box geometry, then index.
fn sorted(preds: &[Obj]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (preds[i].bbox, preds[j].bbox);
        let ka = [-a.conf(), a.cx(), a.cy(), a.w(), a.h()];
        let kb = [-b.conf(), b.cx(), b.cy(), b.w(), b.h()];
        ka.partial_cmp(&kb).expect("finite boxes").then(i.cmp(&j))
    });
    idx
}

fn band_of(area: f64, cfg: &EvalConfig) -> SizeBand {
    let c = &cfg.size_cutoffs;
    if area <= c.tiny_max {
        SizeBand::Tiny
    } else if area <= c.small_max {
        SizeBand::Small
    } else if area <= c.medium_max {
        SizeBand::Medium
    } else {
        SizeBand::Large
    }
}

fn outside(area: f64, band: SizeBand, cfg: &EvalConfig) -> bool {
    band != SizeBand::All && band_of(area, cfg) != band
}

fn sim(kind: Similarity, p: &Obj, g: &Obj, cfg: &EvalConfig) -> f64 {
    match kind {
        Similarity::Iou => iou(p.bbox, g.bbox),
        Similarity::InnerIou => inner_iou(p.bbox, g.bbox),
        Similarity::Oks => match (p.skeleton, g.skeleton) {
            (Some(ps), Some(gs)) => oks_coco(ps, gs, g.bbox.area(), &cfg.sigmas).unwrap_or(0.0),
            _ => 0.0,
        },
    }
}

/// Greedy one-to-one matching, scanning every ground truth for every
/// prediction. Returns the matched ground-truth index per prediction.
fn naive_match(
    preds: &[Obj],
    gts: &[Obj],
    ignore: &[bool],
    tau: f64,
    kind: Similarity,
    cfg: &EvalConfig,
) -> Vec<Option<usize>> {
    let mut taken = vec![false; gts.len()];
    let mut result = Vec::new();
    for p in preds {
        let mut chosen = None;
        for want_ignored in [false, true] {
            let mut best: Option<(usize, f64, f64)> = None;
            for (gi, g) in gts.iter().enumerate() {
                if taken[gi] || ignore[gi] != want_ignored {
                    continue;
                }
                let s = sim(kind, p, g, cfg);
                // Equal similarity: larger plain IoU wins, then the earlier ground truth.
                let t = if kind == Similarity::Iou {
                    0.0
                } else {
                    iou(p.bbox, g.bbox)
                };
                if s >= tau && best.is_none_or(|(_, bs, bt)| s > bs || (s == bs && t > bt)) {
                    best = Some((gi, s, t));
                }
            }
            if let Some((gi, _, _)) = best {
                chosen = Some(gi);
                break;
            }
        }
        if let Some(gi) = chosen {
            taken[gi] = true;
        }
        result.push(chosen);
    }
    result
}

fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact 101-point AP and final recall of a ranked TP list.
fn exact_ap(flags: &[bool], num_gt: usize) -> Option<(BigRational, BigRational)> {
    if num_gt == 0 {
        return None;
    }
    let mut points = Vec::new();
    let mut hits = 0;
    for (k, f) in flags.iter().enumerate() {
        hits += usize::from(*f);
        points.push((ratio(hits, num_gt), ratio(hits, k + 1)));
    }
    // best[k]: highest precision at any rank >= k
    let mut best: Vec<BigRational> = Vec::with_capacity(points.len());
    for (_, prec) in points.iter().rev() {
        let m = match best.last() {
            Some(b) if b > prec => b.clone(),
            _ => prec.clone(),
        };
        best.push(m);
    }
    best.reverse();
    let mut sum = BigRational::zero();
    let mut k = 0;
    for r in 0..=100 {
        let level = ratio(r, 100);
        while k < points.len() && points[k].0 < level {
            k += 1;
        }
        if k < points.len() {
            sum += &best[k];
        }
    }
    Some((sum / BigInt::from(101), ratio(hits, num_gt)))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("bounded ratio")
}

struct Ranked {
    score: f64,
    img: usize,
    rank: usize,
}

fn global_sort<T>(v: &mut [(Ranked, T)]) {
    v.sort_by(|a, b| {
        b.0.score
            .partial_cmp(&a.0.score)
            .expect("finite scores")
            .then(a.0.img.cmp(&b.0.img))
            .then(a.0.rank.cmp(&b.0.rank))
    });
}

fn detection_row(
    pairs: &[(&Scene, &Scene)],
    what: What,
    name: String,
    proto: &MatchProtocol,
    cfg: &EvalConfig,
) -> OracleDetectionRow {
    // Per prediction: outcome per threshold, None meaning ignored.
    let mut dets: Vec<(Ranked, Vec<Option<bool>>)> = Vec::new();
    let mut num_gt = 0;
    for (img, (g, p)) in pairs.iter().enumerate() {
        if cfg.restrict_to_present && !present(g, what) {
            continue;
        }
        let gts = objects(g, what, false);
        let all = objects(p, what, true);
        let order: Vec<usize> = sorted(&all).into_iter().take(cfg.max_dets).collect();
        let preds: Vec<Obj> = order.iter().map(|&i| all[i]).collect();
        let ignore: Vec<bool> = gts
            .iter()
            .map(|o| {
                let no_pose = proto.kind == Similarity::Oks
                    && o.skeleton
                        .is_none_or(|s| s.keypoints().iter().all(|k| k.v == Visibility::Unlabeled));
                outside(o.bbox.area(), proto.band, cfg) || no_pose
            })
            .collect();
        num_gt += ignore.iter().filter(|x| !**x).count();
        let per_thr: Vec<Vec<Option<usize>>> = proto
            .thresholds
            .iter()
            .map(|&t| naive_match(&preds, &gts, &ignore, t, proto.kind, cfg))
            .collect();
        for (rank, pr) in preds.iter().enumerate() {
            let outcomes = per_thr
                .iter()
                .map(|m| match m[rank] {
                    Some(gi) if ignore[gi] => None,
                    Some(_) => Some(true),
                    None if outside(pr.bbox.area(), proto.band, cfg) => None,
                    None => Some(false),
                })
                .collect();
            dets.push((
                Ranked {
                    score: pr.bbox.conf(),
                    img,
                    rank,
                },
                outcomes,
            ));
        }
    }
    global_sort(&mut dets);
    let mut ap_sum = BigRational::zero();
    let mut ar_sum = BigRational::zero();
    let mut any = false;
    for t in 0..proto.thresholds.len() {
        let flags: Vec<bool> = dets.iter().filter_map(|(_, o)| o[t]).collect();
        if let Some((ap, ar)) = exact_ap(&flags, num_gt) {
            ap_sum += ap;
            ar_sum += ar;
            any = true;
        }
    }
    let n = BigInt::from(proto.thresholds.len());
    OracleDetectionRow {
        target: name,
        protocol: proto.kind,
        band: proto.band,
        ap: any.then(|| to_f64(&(ap_sum / n.clone()))),
        ar: any.then(|| to_f64(&(ar_sum / n))),
    }
}

fn assoc_row(
    pairs: &[(&Scene, &Scene)],
    class_id: u32,
    name: String,
    cfg: &EvalConfig,
) -> OracleAssocRow {
    let what = What::Part(class_id);
    let mut dets: Vec<(Ranked, (bool, bool))> = Vec::new();
    let mut num_gt = 0;
    for (img, (g, p)) in pairs.iter().enumerate() {
        if cfg.restrict_to_present && !present(g, what) {
            continue;
        }
        let gp = objects(g, What::Person, false);
        let pp_all = objects(p, What::Person, true);
        let pp_order = sorted(&pp_all);
        let pp: Vec<Obj> = pp_order.iter().map(|&i| pp_all[i]).collect();
        let person_m = naive_match(
            &pp,
            &gp,
            &vec![false; gp.len()],
            cfg.assoc_iou,
            Similarity::Iou,
            cfg,
        );
        let person_of = |pred_person: usize| {
            let rank = pp_order.iter().position(|&i| i == pred_person)?;
            person_m[rank]
        };

        let gts = objects(g, what, false);
        num_gt += gts.len();
        let all = objects(p, what, true);
        let preds: Vec<Obj> = sorted(&all)
            .into_iter()
            .take(cfg.max_dets)
            .map(|i| all[i])
            .collect();
        let m = naive_match(
            &preds,
            &gts,
            &vec![false; gts.len()],
            cfg.assoc_iou,
            Similarity::Iou,
            cfg,
        );
        for (rank, pr) in preds.iter().enumerate() {
            let outcome = match m[rank] {
                None => (false, false),
                Some(gi) => {
                    let ok = match (pr.owner, gts[gi].owner) {
                        (Some(po), Some(go)) => person_of(po) == Some(go),
                        _ => false,
                    };
                    (true, ok)
                }
            };
            dets.push((
                Ranked {
                    score: pr.bbox.conf(),
                    img,
                    rank,
                },
                outcome,
            ));
        }
    }
    global_sort(&mut dets);
    let matched: Vec<bool> = dets.iter().map(|(_, o)| o.0).collect();
    let joint: Vec<bool> = dets.iter().map(|(_, o)| o.0 && o.1).collect();
    let tp = matched.iter().filter(|x| **x).count();
    let ok = joint.iter().filter(|x| **x).count();
    OracleAssocRow {
        target: name,
        ap50: exact_ap(&matched, num_gt).map(|(a, _)| to_f64(&a)),
        jap: exact_ap(&joint, num_gt).map(|(a, _)| to_f64(&a)),
        ca: (tp > 0).then(|| to_f64(&(ratio(ok, tp) * BigInt::from(100)))),
    }
}

/// Reference evaluation over images present on both sides.
pub fn oracle_evaluate(
    gt: &[Scene],
    pred: &[Scene],
    cmap: &ClassMap,
    cfg: &EvalConfig,
) -> OracleReport {
    let pairs: Vec<(&Scene, &Scene)> = gt
        .iter()
        .filter_map(|g| {
            pred.iter()
                .find(|p| p.image_id == g.image_id)
                .map(|p| (g, p))
        })
        .collect();
    let mut report = OracleReport::default();
    for proto in &cfg.protocols {
        let whats: Vec<(What, String)> = if proto.kind == Similarity::Oks {
            vec![(What::Pose, "pose".to_string())]
        } else {
            let mut v = vec![(What::Person, "person".to_string())];
            v.extend(
                cmap.parts()
                    .iter()
                    .map(|c| (What::Part(c.id), c.name.clone())),
            );
            v
        };
        for (what, name) in whats {
            report
                .detection
                .push(detection_row(&pairs, what, name, proto, cfg));
        }
    }
    for class in cmap.parts() {
        report
            .association
            .push(assoc_row(&pairs, class.id, class.name.clone(), cfg));
    }
    report
}
