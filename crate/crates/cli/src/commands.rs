use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bkp_core::decode::TensorDump;
use bkp_core::io::{
    detections_to_json, hier_to_json, load_coco_keypoints, load_coco_results, load_hier,
    load_pairs, merge_by_person_box, parse_detections, parse_hier, to_canonical_json, Detection,
    DetectionImage, DetectionSet,
};
use bkp_core::loss::{evaluate_target, loss_total};
use bkp_core::metrics::{render_table, AssocRow, MatchProtocol};
use bkp_core::{
    generate_corpus, nms, reassociate_scene, BoundingBox, Candidate, ClassMap, DetClass,
    EvalConfig, LossComponents, NoiseModel, Scene, SceneSource, Similarity, SizeBand,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::{
    Command, DecodeArgs, EvalArgs, GtFormat, InOut, KptsFormat, MergeArgs, NoisePreset, PredFormat,
    SweepArgs, SynthArgs,
};

pub fn dispatch(command: Command, cfg: Config) -> Result<()> {
    match command {
        Command::Decode(a) => decode(a, &cfg),
        Command::Nms(a) => run_nms(a, &cfg),
        Command::Associate(a) => associate(a, &cfg),
        Command::Loss(a) => loss(a, &cfg),
        Command::Eval(a) => eval(a, &cfg),
        Command::Synth(a) => synth(a, &cfg),
        Command::Merge(a) => merge(a, &cfg),
        Command::Sweep(a) => sweep(a, &cfg),
    }
}

fn strict(cfg: &Config) -> bool {
    cfg.strict.unwrap_or(false)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| bkp_core::Error::parse(path.display().to_string(), None, e.to_string()).into())
}

/// Clamps a box into the image, or drops it when nothing is left.
fn fit(b: BoundingBox, w: f64, h: f64) -> Option<BoundingBox> {
    if b.is_within(w, h) {
        Some(b)
    } else {
        b.clamped(w, h).ok()
    }
}

fn decode(a: DecodeArgs, cfg: &Config) -> Result<()> {
    let mut dump = TensorDump::load(&a.io.input)?;
    if let Some(mode) = cfg.decode.wh_mode {
        dump.wh_mode = mode;
    }
    let visibility = a.part_visibility.unwrap_or(cfg.decode.part_visibility);
    let extent =
        |f: fn(&bkp_core::decode::DumpLevel) -> f64| dump.levels.iter().map(f).fold(0.0, f64::max);
    let width = a
        .width
        .unwrap_or_else(|| extent(|l| f64::from(l.grid_w) * l.stride));
    let height = a
        .height
        .unwrap_or_else(|| extent(|l| f64::from(l.grid_h) * l.stride));
    let image_id = a.image_id.unwrap_or_else(|| {
        a.io.input
            .file_stem()
            .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned())
    });

    let mut detections = Vec::new();
    for cell in dump.decode(&cfg.classmap, visibility)? {
        if let Some(bbox) = fit(cell.body, width, height) {
            let skeleton = (cell.skeleton.visible_count() > 0).then_some(cell.skeleton.clone());
            detections.push(Detection {
                class: DetClass::Body,
                bbox,
                skeleton,
            });
        }
        for part in cell.parts.iter().filter(|p| p.visible) {
            if let Some(bbox) = fit(part.bbox, width, height) {
                detections.push(Detection {
                    class: DetClass::Part(part.class_id),
                    bbox,
                    skeleton: None,
                });
            }
        }
    }
    let set = DetectionSet {
        classmap: cfg.classmap.clone(),
        images: vec![DetectionImage {
            image_id,
            width,
            height,
            detections,
        }],
    };
    write_output(a.io.output.as_deref(), &detections_to_json(&set)?)
}

fn run_nms(a: InOut, cfg: &Config) -> Result<()> {
    let mut set = parse_detections(&read(&a.input)?, &a.input.display().to_string())?;
    for img in &mut set.images {
        let candidates: Vec<Candidate<Option<bkp_core::Skeleton>>> = img
            .detections
            .iter()
            .map(|d| Candidate {
                bbox: d.bbox,
                class: d.class,
                payload: d.skeleton.clone(),
            })
            .collect();
        img.detections = nms(&candidates, &cfg.nms)
            .into_iter()
            .map(|c| Detection {
                class: c.class,
                bbox: c.bbox,
                skeleton: c.payload,
            })
            .collect();
    }
    write_output(a.output.as_deref(), &detections_to_json(&set)?)
}

fn associate(a: InOut, cfg: &Config) -> Result<()> {
    let text = read(&a.input)?;
    let origin = a.input.display().to_string();
    let root: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| bkp_core::Error::parse(origin.clone(), None, e.to_string()))?;
    let is_detection_list = root.get("people").is_none()
        && root
            .get("images")
            .and_then(|v| v.as_array())
            .is_some_and(|imgs| imgs.iter().any(|i| i.get("detections").is_some()));
    let (classmap, scenes) = if is_detection_list {
        let set = parse_detections(&text, &origin)?;
        let scenes = set
            .images
            .iter()
            .map(DetectionImage::to_scene)
            .collect::<bkp_core::Result<Vec<_>>>()?;
        (set.classmap, scenes)
    } else {
        let data = parse_hier(&text, &origin)?;
        (data.classmap, data.scenes)
    };
    let out: Vec<Scene> = scenes
        .par_iter()
        .map(|s| {
            let mut r = reassociate_scene(s, &classmap, &cfg.associate)?;
            r.source = SceneSource::Prediction;
            Ok(r)
        })
        .collect::<bkp_core::Result<_>>()?;
    write_output(a.output.as_deref(), &hier_to_json(&classmap, &out)?)
}

#[derive(Serialize)]
struct PairLoss {
    components: LossComponents,
    total: f64,
}

#[derive(Serialize)]
struct LossReport {
    weights: bkp_core::LossWeights,
    pairs: Vec<PairLoss>,
    mean: LossComponents,
    total: f64,
}

fn loss(a: InOut, cfg: &Config) -> Result<()> {
    let set = load_pairs(&a.input)?;
    let weights = cfg.loss_weights();
    let kernel = cfg.loss.kernel_config();
    let mut pairs = Vec::with_capacity(set.targets.len());
    for t in &set.targets {
        let components = evaluate_target(t, &set.classmap, &kernel)?;
        pairs.push(PairLoss {
            components,
            total: loss_total(&components, &weights)?,
        });
    }
    let mean = LossComponents::mean(&pairs.iter().map(|p| p.components).collect::<Vec<_>>());
    let report = LossReport {
        weights,
        total: loss_total(&mean, &weights)?,
        mean,
        pairs,
    };
    write_output(a.output.as_deref(), &to_canonical_json(&report)?)
}

fn check_compatible(gt: &ClassMap, pred: &ClassMap) -> Result<()> {
    for p in pred.parts() {
        match gt.by_id(p.id) {
            Some(g) if g.name == p.name => {}
            _ => bail!(bkp_core::Error::Config(format!(
                "prediction class `{}` (id {}) does not match the ground-truth class map",
                p.name, p.id
            ))),
        }
    }
    Ok(())
}

fn eval(a: EvalArgs, cfg: &Config) -> Result<()> {
    let (classmap, gt) = match a.gt_format {
        GtFormat::Hier => {
            let d = load_hier(&a.gt)?;
            (d.classmap, d.scenes)
        }
        GtFormat::Coco => (cfg.classmap.clone(), load_coco_keypoints(&a.gt)?),
    };
    let pred = match a.pred_format {
        PredFormat::Hier => {
            let d = load_hier(&a.pred)?;
            check_compatible(&classmap, &d.classmap)?;
            d.scenes
        }
        PredFormat::CocoResults => load_coco_results(&a.pred, &gt)?,
    };
    let eval_cfg = EvalConfig {
        traces: cfg.eval.traces || a.traces,
        restrict_to_present: cfg.eval.restrict_to_present || a.restrict,
        ..cfg.eval.clone()
    };
    let report = bkp_core::evaluate(&gt, &pred, &classmap, &eval_cfg)?;
    if !report.skipped.is_empty() {
        let msg = format!(
            "{} image id(s) present on one side only: {}",
            report.skipped.len(),
            report.skipped.join(", ")
        );
        if strict(cfg) {
            bail!(bkp_core::Error::Config(msg));
        }
        eprintln!("warning: {msg}");
    }
    write_output(a.report.as_deref(), &to_canonical_json(&report)?)?;
    if a.table {
        let table = render_table(&report);
        if a.report.is_some() {
            print!("{table}");
        } else {
            eprint!("{table}");
        }
    }
    Ok(())
}

fn noise_of(preset: NoisePreset) -> NoiseModel {
    match preset {
        NoisePreset::None => NoiseModel::default(),
        NoisePreset::Jitter => NoiseModel::jitter(),
        NoisePreset::Moderate => NoiseModel::moderate(),
    }
}

fn synth(a: SynthArgs, cfg: &Config) -> Result<()> {
    let mut sc = cfg.synth.clone();
    if let Some(n) = a.scenes {
        sc.n_scenes = n;
    }
    if let Some(n) = a.people_min {
        sc.people_min = n;
    }
    if let Some(n) = a.people_max {
        sc.people_max = n;
    }
    if let Some(p) = a.noise {
        sc.noise = noise_of(p);
    }
    let (gt, pred) = generate_corpus(&sc, &cfg.classmap)?;
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    std::fs::write(a.out_dir.join("gt.json"), hier_to_json(&cfg.classmap, &gt)?)?;
    std::fs::write(
        a.out_dir.join("pred.json"),
        hier_to_json(&cfg.classmap, &pred)?,
    )?;
    Ok(())
}

fn merge(a: MergeArgs, cfg: &Config) -> Result<()> {
    let kpts = match a.kpts_format {
        KptsFormat::Coco => load_coco_keypoints(&a.kpts)?,
        KptsFormat::Hier => load_hier(&a.kpts)?.scenes,
    };
    let parts = load_hier(&a.parts)?;
    let merged = merge_by_person_box(&kpts, &parts.scenes, a.iou.unwrap_or(cfg.merge.iou))?;
    write_output(
        a.output.as_deref(),
        &hier_to_json(&parts.classmap, &merged)?,
    )
}

#[derive(Serialize)]
struct SweepLevel {
    people: usize,
    scenes: usize,
    /// Pooled over part classes: `100 * correct / matched`.
    ca: Option<f64>,
    tp: usize,
    correct: usize,
    /// Mean over classes that have ground truth.
    jap: Option<f64>,
    classes: Vec<AssocRow>,
}

#[derive(Serialize)]
struct SweepReport {
    seed: u64,
    noise: NoiseModel,
    levels: Vec<SweepLevel>,
    ca_non_increasing: bool,
}

fn sweep(a: SweepArgs, cfg: &Config) -> Result<()> {
    if a.people_min == 0 || a.people_min > a.people_max {
        bail!(bkp_core::Error::Config(format!(
            "people range {}..={} must be non-empty and start at 1 or more",
            a.people_min, a.people_max
        )));
    }
    let noise = a.noise.map_or_else(NoiseModel::jitter, noise_of);
    let eval_cfg = EvalConfig {
        protocols: vec![MatchProtocol::new(
            Similarity::Iou,
            vec![0.5],
            SizeBand::All,
        )?],
        ..cfg.eval.clone()
    };
    let mut levels = Vec::new();
    for people in a.people_min..=a.people_max {
        let sc = bkp_core::SynthConfig {
            n_scenes: a.scenes,
            people_min: people,
            people_max: people,
            noise,
            ..cfg.synth.clone()
        };
        let (gt, pred) = generate_corpus(&sc, &cfg.classmap)?;
        let pred: Vec<Scene> = pred
            .par_iter()
            .map(|s| reassociate_scene(s, &cfg.classmap, &cfg.associate))
            .collect::<bkp_core::Result<_>>()?;
        let report = bkp_core::evaluate(&gt, &pred, &cfg.classmap, &eval_cfg)?;
        let tp: usize = report.association.iter().map(|r| r.tp).sum();
        let correct: usize = report.association.iter().map(|r| r.correct).sum();
        let japs: Vec<f64> = report.association.iter().filter_map(|r| r.jap).collect();
        levels.push(SweepLevel {
            people,
            scenes: a.scenes,
            ca: (tp > 0).then(|| 100.0 * correct as f64 / tp as f64),
            tp,
            correct,
            jap: (!japs.is_empty()).then(|| japs.iter().sum::<f64>() / japs.len() as f64),
            classes: report.association,
        });
    }
    let cas: Vec<f64> = levels.iter().filter_map(|l| l.ca).collect();
    let ca_non_increasing = cas.windows(2).all(|w| w[1] <= w[0]);
    for l in &levels {
        eprintln!(
            "people={} ca={} jap={}",
            l.people,
            l.ca.map_or("-".into(), |c| format!("{c:.2}")),
            l.jap.map_or("-".into(), |j| format!("{:.2}", 100.0 * j))
        );
    }
    let report = SweepReport {
        seed: cfg.synth.seed,
        noise,
        levels,
        ca_non_increasing,
    };
    write_output(a.report.as_deref(), &to_canonical_json(&report)?)?;
    if !ca_non_increasing {
        let msg = "conditional accuracy rose between consecutive people counts";
        if strict(cfg) {
            bail!(bkp_core::Error::Invalid {
                what: "sweep",
                reason: msg.into()
            });
        }
        eprintln!("warning: {msg}");
    }
    Ok(())
}
