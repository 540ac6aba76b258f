//! Shared inputs for the benchmarks.

use bkp_core::associate::DetectedBody;
use bkp_core::synth::{generate_corpus, NoiseModel, SynthConfig};
use bkp_core::types::{LoosePart, Scene};
use bkp_core::ClassMap;

/// A noisy synthetic corpus with a fixed seed.
pub fn corpus(n_scenes: usize, people: usize) -> (Vec<Scene>, Vec<Scene>) {
    let cfg = SynthConfig {
        seed: 7,
        n_scenes,
        people_min: people,
        people_max: people,
        noise: NoiseModel::moderate(),
        ..SynthConfig::default()
    };
    generate_corpus(&cfg, &ClassMap::default()).expect("valid config")
}

/// Bodies with skeletons and every part of a prediction scene, owners dropped.
pub fn detections(scene: &Scene) -> (Vec<DetectedBody>, Vec<LoosePart>) {
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
