use std::path::Path;

use anyhow::{Context, Result};
use bkp_core::decode::WhMode;
use bkp_core::io::{to_canonical_json, MERGE_IOU_DEFAULT};
use bkp_core::loss::PartIou;
use bkp_core::{
    AreaNorm, AssociateConfig, ClassMap, EvalConfig, LossConfig, LossWeights, NmsConfig, OksSigmas,
    SynthConfig,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeSection {
    /// Part slots below this confidence are not emitted.
    pub part_visibility: f64,
    /// Overrides the mode recorded in the dump.
    pub wh_mode: Option<WhMode>,
}

impl Default for DecodeSection {
    fn default() -> Self {
        Self {
            part_visibility: 0.0,
            wh_mode: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub weights: Option<LossWeights>,
    pub sigmas: OksSigmas,
    pub area_norm: AreaNorm,
    pub part_iou: PartIou,
}

impl LossSection {
    pub fn kernel_config(&self) -> LossConfig {
        LossConfig {
            sigmas: self.sigmas,
            area_norm: self.area_norm,
            part_iou: self.part_iou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeSection {
    pub iou: f64,
}

impl Default for MergeSection {
    fn default() -> Self {
        Self {
            iou: MERGE_IOU_DEFAULT,
        }
    }
}

/// Everything a run can be configured with. Every flag has a key here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub strict: Option<bool>,
    pub classmap: ClassMap,
    pub decode: DecodeSection,
    pub nms: NmsConfig,
    pub associate: AssociateConfig,
    pub loss: LossSection,
    pub eval: EvalConfig,
    pub synth: SynthConfig,
    pub merge: MergeSection,
}

impl Config {
    /// TOML when the extension is `.toml`, JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text)
                .map_err(|e| bkp_core::Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)
                .map_err(|e| bkp_core::Error::Config(format!("{}: {e}", path.display())))?
        };
        Ok(parsed)
    }

    pub fn validate(&self) -> Result<()> {
        self.associate.validate()?;
        self.eval.validate()?;
        self.synth.validate()?;
        if let Some(w) = &self.loss.weights {
            w.validate()?;
        }
        if !(0.0..=1.0).contains(&self.decode.part_visibility) {
            return Err(bkp_core::Error::Config(
                "decode.part_visibility must lie in [0, 1]".into(),
            )
            .into());
        }
        if self.threads == Some(0) {
            return Err(bkp_core::Error::Config("threads must be at least 1".into()).into());
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(to_canonical_json(self)?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn loss_weights(&self) -> LossWeights {
        self.loss.weights.unwrap_or_default()
    }
}
