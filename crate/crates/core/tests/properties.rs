use bkp_core::associate::{bkp_associate, AssociateConfig, DetectedBody};
use bkp_core::decode::{
    decode_body, decode_parts, encode_body, GridContext, RawPrediction, WhMode,
};
use bkp_core::io::{hier_to_json, merge_by_person_box, parse_hier};
use bkp_core::loss::{evaluate_target, loss_box, LossConfig, MatchedTarget};
use bkp_core::nms::{nms_indices, Candidate, DetClass, NmsConfig};
use bkp_core::synth::{generate_corpus, generate_scene, NoiseModel, SynthConfig};
use bkp_core::types::{
    BoundingBox, Keypoint, LoosePart, PersonInstance, Scene, Skeleton, Visibility, NUM_KEYPOINTS,
};
use bkp_core::{ciou, inner_iou, iou, oks_coco, ClassMap, OksSigmas};
use proptest::prelude::*;

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (
        0.0..500.0f64,
        0.0..500.0f64,
        1.0..200.0f64,
        1.0..200.0f64,
        0.0..=1.0f64,
    )
        .prop_map(|(cx, cy, w, h, c)| BoundingBox::new(cx, cy, w, h, c).unwrap())
}

/// An outer box and a box lying inside it.
fn arb_nested() -> impl Strategy<Value = (BoundingBox, BoundingBox)> {
    (
        arb_box(),
        0.0..1.0f64,
        0.0..1.0f64,
        0.05..1.0f64,
        0.05..1.0f64,
    )
        .prop_map(|(outer, fx, fy, fw, fh)| {
            let (w, h) = (outer.w() * fw, outer.h() * fh);
            let x1 = outer.x1() + fx * (outer.w() - w);
            let y1 = outer.y1() + fy * (outer.h() - h);
            let inner = BoundingBox::from_corners(
                x1,
                y1,
                (x1 + w).min(outer.x2()),
                (y1 + h).min(outer.y2()),
                1.0,
            )
            .unwrap();
            (outer, inner)
        })
}

fn arb_skeleton() -> impl Strategy<Value = Skeleton> {
    prop::collection::vec((0.0..400.0f64, 0.0..400.0f64, 0u8..3), NUM_KEYPOINTS).prop_map(|kps| {
        let kps = kps
            .into_iter()
            .map(|(x, y, v)| Keypoint::new(x, y, Visibility::from_flag(f64::from(v)).unwrap()))
            .collect();
        Skeleton::new(kps).unwrap()
    })
}

fn shifted(s: &Skeleton, dx: f64, dy: f64) -> Skeleton {
    Skeleton::new(
        s.keypoints()
            .iter()
            .map(|k| Keypoint::new(k.x + dx, k.y + dy, k.v))
            .collect(),
    )
    .unwrap()
}

fn synth_cfg(seed: u64, n: usize) -> SynthConfig {
    SynthConfig {
        seed,
        n_scenes: n,
        noise: NoiseModel::moderate(),
        ..SynthConfig::default()
    }
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let (ab, ba) = (iou(&a, &b), iou(&b, &a));
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn ciou_never_exceeds_iou(a in arb_box(), b in arb_box()) {
        prop_assert!(ciou(&a, &b) <= iou(&a, &b) + 1e-12);
        prop_assert!((ciou(&a, &b) - ciou(&b, &a)).abs() < 1e-12);
        prop_assert!((ciou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_iou_is_one_exactly_for_contained_gt((outer, inner) in arb_nested()) {
        prop_assert!((inner_iou(&outer, &inner) - 1.0).abs() < 1e-12);
        prop_assert!(inner_iou(&outer, &inner) >= iou(&outer, &inner));
        if inner.area() < outer.area() * 0.99 {
            prop_assert!(inner_iou(&inner, &outer) < 1.0);
        }
    }

    #[test]
    fn oks_is_translation_invariant(gt in arb_skeleton(), pred in arb_skeleton(), dx in -300.0..300.0f64, dy in -300.0..300.0f64, area in 100.0..50_000.0f64) {
        let sig = OksSigmas::default();
        let a = oks_coco(&pred, &gt, area, &sig);
        let b = oks_coco(&shifted(&pred, dx, dy), &shifted(&gt, dx, dy), area, &sig);
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn oks_falls_as_predictions_drift(gt in arb_skeleton(), noise in arb_skeleton(), t in 0.0..1.0f64, area in 100.0..50_000.0f64) {
        let sig = OksSigmas::default();
        let at = |k: f64| {
            let kps = gt.keypoints().iter().zip(noise.keypoints()).map(|(g, n)| {
                Keypoint::new(g.x + k * (n.x - 200.0), g.y + k * (n.y - 200.0), Visibility::Visible)
            });
            Skeleton::new(kps.collect()).unwrap()
        };
        let near = oks_coco(&at(t), &gt, area, &sig);
        let far = oks_coco(&at(t + 0.5), &gt, area, &sig);
        if let (Some(near), Some(far)) = (near, far) {
            prop_assert!(far <= near + 1e-12);
        }
    }

    #[test]
    fn decoded_body_stays_near_its_cell(raw in prop::collection::vec(-60.0..60.0f64, 5 + 51 + 25), gx in 0u32..100, gy in 0u32..100, doubled: bool) {
        let cmap = ClassMap::default();
        let raw = RawPrediction::from_flat(&raw, cmap.len()).unwrap();
        let ctx = GridContext::new(gx, gy, 16.0, 3.0, 5.0).unwrap();
        let mode = if doubled { WhMode::Doubled } else { WhMode::Unit };
        let body = decode_body(&raw, &ctx, mode);
        let (ox, oy) = (body.cx() / 16.0 - f64::from(gx), body.cy() / 16.0 - f64::from(gy));
        prop_assert!((-0.5..=1.5).contains(&ox) && (-0.5..=1.5).contains(&oy));
        for p in decode_parts(&raw, &ctx, &body, &cmap, 0.5).unwrap() {
            prop_assert!(p.bbox.w() < body.w() && p.bbox.h() < body.h());
            prop_assert_eq!(p.visible, p.bbox.conf() >= 0.5);
        }
    }

    #[test]
    fn body_encoding_round_trips(raw in prop::collection::vec(-6.0..6.0f64, 5), doubled: bool) {
        let ctx = GridContext::new(4, 7, 8.0, 2.0, 3.0).unwrap();
        let mode = if doubled { WhMode::Doubled } else { WhMode::Unit };
        let mut flat = raw.clone();
        flat.resize(5 + 51, 0.0);
        let r = RawPrediction::from_flat(&flat, 0).unwrap();
        let back = encode_body(&decode_body(&r, &ctx, mode), &ctx, mode);
        for (a, b) in raw.iter().zip(back) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn nms_is_idempotent(boxes in prop::collection::vec((arb_box(), 0u32..3), 0..40)) {
        let cfg = NmsConfig::default();
        let cands: Vec<Candidate> = boxes
            .into_iter()
            .map(|(b, c)| Candidate::new(b, if c == 0 { DetClass::Body } else { DetClass::Part(c - 1) }))
            .collect();
        let keep = nms_indices(&cands, &cfg);
        let survivors: Vec<Candidate> = keep.iter().map(|&i| cands[i].clone()).collect();
        prop_assert_eq!(nms_indices(&survivors, &cfg), (0..survivors.len()).collect::<Vec<_>>());
    }
}

fn detected(scene: &Scene) -> (Vec<DetectedBody>, Vec<LoosePart>) {
    let bodies = scene
        .people
        .iter()
        .filter_map(|p| {
            p.skeleton().map(|s| DetectedBody {
                bbox: *p.body(),
                skeleton: s.clone(),
            })
        })
        .collect();
    let mut parts: Vec<LoosePart> = scene
        .people
        .iter()
        .flat_map(|p| {
            p.parts().iter().flat_map(|(&class_id, bs)| {
                bs.iter().map(move |b| LoosePart { class_id, bbox: *b })
            })
        })
        .collect();
    parts.extend(scene.unassigned_parts.iter().copied());
    (bodies, parts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn association_ignores_translation(seed in 0u64..1000, index in 0u64..50, dx in -200i32..200, dy in -200i32..200) {
        let cmap = ClassMap::default();
        let (_, pred) = generate_scene(&synth_cfg(seed, 1), &cmap, index).unwrap();
        let (bodies, parts) = detected(&pred);
        let (dx, dy) = (f64::from(dx), f64::from(dy));
        let moved_bodies: Vec<DetectedBody> = bodies
            .iter()
            .map(|b| DetectedBody { bbox: b.bbox.translated(dx, dy).unwrap(), skeleton: b.skeleton.translated(dx, dy) })
            .collect();
        let moved_parts: Vec<LoosePart> = parts
            .iter()
            .map(|p| LoosePart { class_id: p.class_id, bbox: p.bbox.translated(dx, dy).unwrap() })
            .collect();
        let cfg = AssociateConfig::default();
        prop_assert_eq!(
            bkp_associate(&bodies, &parts, &cmap, &cfg).owners,
            bkp_associate(&moved_bodies, &moved_parts, &cmap, &cfg).owners
        );
    }

    #[test]
    fn synthetic_scenes_are_valid_and_parts_cover_keypoints(seed in 0u64..1000, index in 0u64..100) {
        let cmap = ClassMap::default();
        let (gt, pred) = generate_scene(&synth_cfg(seed, 1), &cmap, index).unwrap();
        gt.validate().unwrap();
        pred.validate().unwrap();
        for person in &gt.people {
            let skeleton = person.skeleton().unwrap();
            for class in cmap.parts() {
                for b in person.parts_of(class.id) {
                    for &k in &class.keypoint_indices {
                        let kp = skeleton.keypoints()[k];
                        prop_assert!(b.contains_point(kp.x, kp.y), "{} misses keypoint {}", class.name, k);
                    }
                }
            }
        }
    }

    #[test]
    fn hierarchical_format_reaches_a_fixed_point(seed in 0u64..1000) {
        let cmap = ClassMap::default();
        let (_, pred) = generate_corpus(&synth_cfg(seed, 3), &cmap).unwrap();
        let once = hier_to_json(&cmap, &parse_hier(&hier_to_json(&cmap, &pred).unwrap(), "a").unwrap().scenes).unwrap();
        let twice = hier_to_json(&cmap, &parse_hier(&once, "b").unwrap().scenes).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn merge_is_deterministic_and_restores_parts(seed in 0u64..1000) {
        let cmap = ClassMap::default();
        let (gt, _) = generate_corpus(&synth_cfg(seed, 3), &cmap).unwrap();
        let bare: Vec<Scene> = gt
            .iter()
            .map(|s| Scene {
                people: s.people.iter().map(|p| PersonInstance::new(*p.body(), p.skeleton().cloned()).unwrap()).collect(),
                ..s.clone()
            })
            .collect();
        let a = merge_by_person_box(&bare, &gt, 0.9).unwrap();
        let b = merge_by_person_box(&bare, &gt, 0.9).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a, gt);
    }

    #[test]
    fn loss_components_are_finite_and_nonnegative(seed in 0u64..1000, shift in -50.0..50.0f64, stretch in -2.0..2.0f64, vis in 0.0..=1.0f64) {
        let cmap = ClassMap::default();
        let (gt, _) = generate_scene(&synth_cfg(seed, 1), &cmap, 0).unwrap();
        let person = &gt.people[0];
        let move_box = |b: &BoundingBox| {
            BoundingBox::new(b.cx() + shift, b.cy() - shift, b.w() * stretch.exp(), b.h() * (-stretch).exp(), vis).unwrap()
        };
        let mut pred_keypoints = [[0.0; 3]; NUM_KEYPOINTS];
        for (o, k) in pred_keypoints.iter_mut().zip(person.skeleton().unwrap().keypoints()) {
            *o = [k.x + shift, k.y + 2.0 * shift, vis];
        }
        let t = MatchedTarget {
            gt_body: *person.body(),
            gt_skeleton: person.skeleton().cloned(),
            gt_parts: cmap.parts().iter().map(|c| person.parts_of(c.id).first().copied()).collect(),
            pred_body: move_box(person.body()),
            pred_keypoints,
            pred_parts: cmap.parts().iter().map(|c| move_box(person.parts_of(c.id).first().unwrap_or(person.body()))).collect(),
        };
        let c = evaluate_target(&t, &cmap, &LossConfig::default()).unwrap();
        for (name, v) in c.named() {
            prop_assert!(v.is_finite() && v >= 0.0, "{} = {}", name, v);
        }
        prop_assert!(c.box_ <= 2.0 && c.kpts <= 1.0 && c.pbox <= 4.0);
    }

    #[test]
    fn box_loss_is_continuous(a in arb_box(), b in arb_box(), eps in -1e-6..1e-6f64) {
        let nudged = BoundingBox::new(a.cx() + eps, a.cy() - eps, a.w(), a.h(), a.conf()).unwrap();
        prop_assert!((loss_box(&a, &b).loss - loss_box(&nudged, &b).loss).abs() < 1e-4);
    }
}

fn dilated(scenes: &[Scene], by: f64) -> Vec<Scene> {
    let grow = |b: &BoundingBox, w: f64, h: f64| {
        BoundingBox::new(b.cx(), b.cy(), b.w() * by, b.h() * by, 1.0)
            .unwrap()
            .clamped(w, h)
            .unwrap()
    };
    scenes
        .iter()
        .map(|s| {
            let mut out = s.clone();
            out.people = s
                .people
                .iter()
                .map(|p| {
                    let mut q = PersonInstance::new(
                        grow(p.body(), s.width, s.height),
                        p.skeleton().cloned(),
                    )
                    .unwrap();
                    for (&c, bs) in p.parts() {
                        for b in bs {
                            q.push_part(c, grow(b, s.width, s.height));
                        }
                    }
                    q
                })
                .collect();
            out
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_orderings_hold_on_noisy_corpora(seed in 0u64..1000) {
        use bkp_core::metrics::{evaluate, EvalConfig};
        let cmap = ClassMap::default();
        let (gt, pred) = generate_corpus(&synth_cfg(seed, 20), &cmap).unwrap();
        let r = evaluate(&gt, &pred, &cmap, &EvalConfig::default()).unwrap();
        // Band rows are left out: matching prefers in-band ground truth, so a
        // loose threshold can trade an ignored match for a counted false positive.
        for row in r.detection.iter().filter(|r| r.num_gt > 0 && r.band == bkp_core::SizeBand::All) {
            for w in row.ap_at.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{} {} {}: {:?}", row.target, row.protocol, row.band, row.ap_at);
            }
            for w in row.ar_at.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
        for a in &r.association {
            let ap50 = r.row(&a.target, bkp_core::Similarity::Iou, bkp_core::SizeBand::All).unwrap().ap_at_threshold(0.5);
            if let (Some(jap), Some(ap50)) = (a.jap, ap50) {
                prop_assert!(jap <= ap50 + 1e-12);
            }
        }
    }

    #[test]
    fn inner_iou_ap_dominates_iou_ap_for_dilated_predictions(seed in 0u64..1000, by in 1.0..1.6f64) {
        use bkp_core::metrics::{evaluate, EvalConfig, MatchProtocol};
        use bkp_core::{Similarity, SizeBand};
        let cmap = ClassMap::default();
        let (gt, _) = generate_corpus(&synth_cfg(seed, 10), &cmap).unwrap();
        let pred = dilated(&gt, by);
        let thresholds = vec![0.5, 0.6, 0.75];
        let cfg = EvalConfig {
            protocols: vec![
                MatchProtocol::new(Similarity::Iou, thresholds.clone(), SizeBand::All).unwrap(),
                MatchProtocol::new(Similarity::InnerIou, thresholds, SizeBand::All).unwrap(),
            ],
            ..EvalConfig::default()
        };
        let r = evaluate(&gt, &pred, &cmap, &cfg).unwrap();
        for plain in r.detection.iter().filter(|x| x.protocol == Similarity::Iou && x.num_gt > 0) {
            let inner = r.row(&plain.target, Similarity::InnerIou, SizeBand::All).unwrap();
            for (a, b) in inner.ap_at.iter().zip(&plain.ap_at) {
                prop_assert!(a + 1e-12 >= *b, "{}: inner {:?} vs iou {:?}", plain.target, inner.ap_at, plain.ap_at);
            }
        }
    }
}
