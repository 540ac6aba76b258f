//! Part classes and the keypoint sets used to associate them with a body.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::NUM_KEYPOINTS;

pub const GAMMA_HEAD: f64 = 0.10;
pub const GAMMA_FACE: f64 = 0.10;
pub const GAMMA_CHEST: f64 = 0.12;
pub const GAMMA_HIP: f64 = 0.12;
pub const GAMMA_HAND: f64 = 0.062;
pub const GAMMA_FOOT: f64 = 0.089;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassMapMode {
    #[serde(rename = "coco-humanparts")]
    CocoHumanParts,
    #[serde(rename = "bkpd")]
    Bkpd,
    #[serde(rename = "custom")]
    Custom,
}

impl FromStr for ClassMapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coco-humanparts" => Ok(Self::CocoHumanParts),
            "bkpd" => Ok(Self::Bkpd),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Config(format!(
                "unknown class map mode `{other}` (expected coco-humanparts, bkpd or custom)"
            ))),
        }
    }
}

impl fmt::Display for ClassMapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CocoHumanParts => "coco-humanparts",
            Self::Bkpd => "bkpd",
            Self::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartClass {
    pub id: u32,
    pub name: String,
    /// Skeleton indices whose centroid anchors the association.
    #[serde(rename = "keypoints")]
    pub keypoint_indices: Vec<usize>,
    /// Center-distance tolerance for the part-box OKS term.
    #[serde(rename = "gamma")]
    pub oks_weight: f64,
}

impl PartClass {
    pub fn new(
        id: u32,
        name: impl Into<String>,
        keypoint_indices: Vec<usize>,
        oks_weight: f64,
    ) -> Result<Self> {
        let part = Self {
            id,
            name: name.into(),
            keypoint_indices,
            oks_weight,
        };
        part.validate()?;
        Ok(part)
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config(format!(
                "part class {} has an empty name",
                self.id
            )));
        }
        if self.keypoint_indices.is_empty() {
            return Err(Error::Config(format!(
                "part class `{}` has no keypoints",
                self.name
            )));
        }
        if let Some(bad) = self.keypoint_indices.iter().find(|&&i| i >= NUM_KEYPOINTS) {
            return Err(Error::Config(format!(
                "part class `{}` references keypoint {bad}, outside 0..{NUM_KEYPOINTS}",
                self.name
            )));
        }
        if !(self.oks_weight.is_finite() && self.oks_weight > 0.0) {
            return Err(Error::Config(format!(
                "part class `{}` has non-positive gamma {}",
                self.name, self.oks_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClassMap {
    mode: ClassMapMode,
    #[serde(default)]
    parts: Option<Vec<PartClass>>,
}

/// The ordered set of part classes a pipeline works with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClassMap")]
pub struct ClassMap {
    mode: ClassMapMode,
    parts: Vec<PartClass>,
}

impl TryFrom<RawClassMap> for ClassMap {
    type Error = Error;

    fn try_from(raw: RawClassMap) -> Result<Self> {
        match (raw.mode, raw.parts) {
            (ClassMapMode::Custom, None) => Err(Error::Config(
                "custom class map needs a `parts` list".into(),
            )),
            (ClassMapMode::Custom, Some(parts)) => ClassMap::custom(parts),
            (mode, None) => ClassMap::builtin(mode),
            (mode, Some(parts)) => {
                // Builtin layouts are fixed; only gamma may be overridden.
                let reference = ClassMap::builtin(mode)?;
                let same_layout = parts.len() == reference.parts.len()
                    && parts.iter().zip(&reference.parts).all(|(a, b)| {
                        a.id == b.id && a.name == b.name && a.keypoint_indices == b.keypoint_indices
                    });
                if !same_layout {
                    return Err(Error::Config(format!(
                        "parts listed for `{mode}` do not match its builtin layout; use mode = \"custom\""
                    )));
                }
                let map = ClassMap { mode, parts };
                map.validate()?;
                Ok(map)
            }
        }
    }
}

impl ClassMap {
    /// The fixed mapping for a builtin mode.
    pub fn builtin(mode: ClassMapMode) -> Result<Self> {
        let p = |id, name: &str, idx: &[usize], gamma| PartClass {
            id,
            name: name.to_string(),
            keypoint_indices: idx.to_vec(),
            oks_weight: gamma,
        };
        let parts = match mode {
            ClassMapMode::CocoHumanParts => vec![
                p(0, "head", &[0, 1, 2, 3, 4], GAMMA_HEAD),
                p(1, "face", &[0, 1, 2], GAMMA_FACE),
                p(2, "left-hand", &[9], GAMMA_HAND),
                p(3, "right-hand", &[10], GAMMA_HAND),
                p(4, "left-foot", &[15], GAMMA_FOOT),
                p(5, "right-foot", &[16], GAMMA_FOOT),
            ],
            ClassMapMode::Bkpd => vec![
                p(0, "head", &[0, 1, 2, 3, 4], GAMMA_HEAD),
                p(1, "chest", &[5, 6], GAMMA_CHEST),
                p(2, "hip", &[11, 12], GAMMA_HIP),
                p(3, "left-hand", &[9], GAMMA_HAND),
                p(4, "right-hand", &[10], GAMMA_HAND),
            ],
            ClassMapMode::Custom => {
                return Err(Error::Config("`custom` has no builtin layout".into()));
            }
        };
        Ok(Self { mode, parts })
    }

    /// Parses a mode name and returns its builtin mapping.
    pub fn builtin_named(mode: &str) -> Result<Self> {
        Self::builtin(mode.parse()?)
    }

    pub fn custom(parts: Vec<PartClass>) -> Result<Self> {
        let map = Self {
            mode: ClassMapMode::Custom,
            parts,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Config("class map has no parts".into()));
        }
        for (i, part) in self.parts.iter().enumerate() {
            part.validate()?;
            if self.parts[..i].iter().any(|q| q.id == part.id) {
                return Err(Error::Config(format!(
                    "duplicate part class id {}",
                    part.id
                )));
            }
            if self.parts[..i].iter().any(|q| q.name == part.name) {
                return Err(Error::Config(format!(
                    "duplicate part class name `{}`",
                    part.name
                )));
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> ClassMapMode {
        self.mode
    }

    pub fn parts(&self) -> &[PartClass] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Position of a class id in the ordered part list.
    pub fn position(&self, id: u32) -> Option<usize> {
        self.parts.iter().position(|p| p.id == id)
    }

    pub fn by_id(&self, id: u32) -> Option<&PartClass> {
        self.parts.iter().find(|p| p.id == id)
    }

    pub fn by_name(&self, name: &str) -> Option<&PartClass> {
        self.parts.iter().find(|p| p.name == name)
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.parts.iter().map(|p| p.oks_weight).collect()
    }
}

impl Default for ClassMap {
    fn default() -> Self {
        Self::builtin(ClassMapMode::Bkpd).expect("builtin layout is valid")
    }
}
