//! Post-backbone machinery for joint body, keypoint and part perception.
//!
//! The crate covers everything after the network forward pass: grid decoding,
//! suppression, skeleton-driven part association, the training objective as
//! plain numeric kernels, and an evaluation engine (detection AP/AR, pose
//! AP/AR, joint AP and conditional accuracy) with synthetic scenes and
//! brute-force oracles to check it against.

pub mod associate;
pub mod classmap;
pub mod decode;
pub mod error;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod nms;
pub mod synth;
pub mod types;

pub use associate::{bkp_associate, reassociate_scene, AssociateConfig, Association, DetectedBody};
pub use classmap::{ClassMap, ClassMapMode, PartClass};
pub use error::{Error, Result};
pub use geometry::{ciou, inner_iou, iou, oks_coco, oks_per_keypoint, AreaNorm, OksSigmas};
pub use loss::{LossComponents, LossConfig, LossWeights, MatchedTarget};
pub use metrics::{evaluate, EvalConfig, EvalReport, MatchProtocol, Similarity, SizeBand};
pub use nms::{nms, Candidate, DetClass, NmsConfig};
pub use synth::{generate_corpus, generate_scene, NoiseModel, SynthConfig};
pub use types::{
    BoundingBox, Keypoint, LoosePart, PersonInstance, Scene, SceneSource, Skeleton, Visibility,
    KEYPOINT_NAMES, NUM_KEYPOINTS,
};
