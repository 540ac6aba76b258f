//! Grid-cell decoding of raw head outputs into image-space boxes and keypoints.
//!
//! Body boxes follow the usual single-stage transform: the center stays within the
//! `[-0.5, 1.5]` neighbourhood of its cell and the size is a squashed multiple
//! of the anchor. Part boxes hang off the decoded body: the center offset is
//! unbounded and the size is a `[0, 1]` fraction of the body size.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classmap::ClassMap;
use crate::error::{Error, Result};
use crate::types::{BoundingBox, Keypoint, Skeleton, Visibility, NUM_KEYPOINTS};

/// Fields per cell for the body box: x, y, w, h, conf.
pub const BODY_FIELDS: usize = 5;
/// Fields per cell for the keypoints: 17 x (x, y, v).
pub const KEYPOINT_FIELDS: usize = NUM_KEYPOINTS * 3;
/// Fields per part class: x, y, w, h, conf.
pub const PART_FIELDS: usize = 5;

/// Logit written by the encoders for the visibility flag.
pub const VISIBILITY_LOGIT: f64 = 10.0;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// How the body width/height logits map onto the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhMode {
    /// `sigmoid(w)^2 * anchor`
    #[default]
    Unit,
    /// `(2 * sigmoid(w))^2 * anchor`, the common single-stage detector variant.
    Doubled,
}

impl WhMode {
    fn scale(self, raw: f64) -> f64 {
        let s = match self {
            WhMode::Unit => sigmoid(raw),
            WhMode::Doubled => 2.0 * sigmoid(raw),
        };
        s * s
    }

    fn unscale(self, ratio: f64) -> f64 {
        match self {
            WhMode::Unit => logit(ratio.sqrt()),
            WhMode::Doubled => logit(ratio.sqrt() / 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridContext {
    grid_x: f64,
    grid_y: f64,
    stride: f64,
    anchor_w: f64,
    anchor_h: f64,
}

impl GridContext {
    /// `anchor_w`/`anchor_h` are in grid units; `stride` is pixels per cell.
    pub fn new(
        grid_x: u32,
        grid_y: u32,
        stride: f64,
        anchor_w: f64,
        anchor_h: f64,
    ) -> Result<Self> {
        if !(stride.is_finite() && stride > 0.0) {
            return Err(Error::invalid(
                "grid context",
                format!("stride {stride} must be positive"),
            ));
        }
        if !(anchor_w.is_finite() && anchor_h.is_finite() && anchor_w > 0.0 && anchor_h > 0.0) {
            return Err(Error::invalid(
                "grid context",
                format!("anchor {anchor_w}x{anchor_h} must be positive"),
            ));
        }
        Ok(Self {
            grid_x: f64::from(grid_x),
            grid_y: f64::from(grid_y),
            stride,
            anchor_w,
            anchor_h,
        })
    }

    pub fn grid(&self) -> (f64, f64) {
        (self.grid_x, self.grid_y)
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }
}

/// Undecoded output of one cell/anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPrediction {
    pub body: [f64; BODY_FIELDS],
    pub keypoints: [[f64; 3]; NUM_KEYPOINTS],
    pub parts: Vec<[f64; PART_FIELDS]>,
}

impl RawPrediction {
    /// Splits a flat cell vector laid out as body, keypoints, parts.
    pub fn from_flat(values: &[f64], num_parts: usize) -> Result<Self> {
        let expected = cell_len(num_parts);
        if values.len() != expected {
            return Err(Error::invalid(
                "raw prediction",
                format!(
                    "expected {expected} values for {num_parts} parts, got {}",
                    values.len()
                ),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("raw prediction", "non-finite value"));
        }
        let mut body = [0.0; BODY_FIELDS];
        body.copy_from_slice(&values[..BODY_FIELDS]);
        let mut keypoints = [[0.0; 3]; NUM_KEYPOINTS];
        for (k, c) in values[BODY_FIELDS..BODY_FIELDS + KEYPOINT_FIELDS]
            .chunks_exact(3)
            .enumerate()
        {
            keypoints[k] = [c[0], c[1], c[2]];
        }
        let parts = values[BODY_FIELDS + KEYPOINT_FIELDS..]
            .chunks_exact(PART_FIELDS)
            .map(|c| [c[0], c[1], c[2], c[3], c[4]])
            .collect();
        Ok(Self {
            body,
            keypoints,
            parts,
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(cell_len(self.parts.len()));
        out.extend_from_slice(&self.body);
        out.extend(self.keypoints.iter().flatten());
        out.extend(self.parts.iter().flatten());
        out
    }

    pub fn check(&self, cmap: &ClassMap) -> Result<()> {
        if self.parts.len() != cmap.len() {
            return Err(Error::invalid(
                "raw prediction",
                format!(
                    "{} part slots but the class map has {}",
                    self.parts.len(),
                    cmap.len()
                ),
            ));
        }
        Ok(())
    }
}

/// Length of one flattened cell vector.
pub fn cell_len(num_parts: usize) -> usize {
    BODY_FIELDS + KEYPOINT_FIELDS + PART_FIELDS * num_parts
}

fn positive(x: f64) -> f64 {
    x.max(f64::MIN_POSITIVE)
}

pub fn decode_body(raw: &RawPrediction, ctx: &GridContext, mode: WhMode) -> BoundingBox {
    let [x, y, w, h, conf] = raw.body;
    let s = ctx.stride;
    let cx = (2.0 * sigmoid(x) - 0.5 + ctx.grid_x) * s;
    let cy = (2.0 * sigmoid(y) - 0.5 + ctx.grid_y) * s;
    let bw = positive(mode.scale(w) * ctx.anchor_w * s);
    let bh = positive(mode.scale(h) * ctx.anchor_h * s);
    BoundingBox::new(cx, cy, bw, bh, sigmoid(conf)).expect("decoded body box is valid")
}

/// `sigmoid(raw)^2`, kept strictly below 1 where f64 sigmoid saturates.
fn part_scale(raw: f64) -> f64 {
    sigmoid(raw).powi(2).min(1.0 - f64::EPSILON)
}

/// A decoded part slot. `bbox.conf()` carries the raw sigmoid confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedPart {
    pub class_id: u32,
    pub bbox: BoundingBox,
    pub visible: bool,
}

/// Decodes every part slot relative to an already decoded body.
///
/// `visible` is `conf >= visibility_threshold`; no slot is dropped here.
pub fn decode_parts(
    raw: &RawPrediction,
    ctx: &GridContext,
    body: &BoundingBox,
    cmap: &ClassMap,
    visibility_threshold: f64,
) -> Result<Vec<DecodedPart>> {
    raw.check(cmap)?;
    Ok(raw
        .parts
        .iter()
        .zip(cmap.parts())
        .map(|(&[x, y, w, h, conf], class)| {
            let s = ctx.stride;
            let pw = positive(part_scale(w) * body.w());
            let ph = positive(part_scale(h) * body.h());
            let bbox = BoundingBox::new(
                (x + ctx.grid_x) * s,
                (y + ctx.grid_y) * s,
                pw,
                ph,
                sigmoid(conf),
            )
            .expect("decoded part box is valid");
            DecodedPart {
                class_id: class.id,
                bbox,
                visible: bbox.conf() >= visibility_threshold,
            }
        })
        .collect())
}

/// Keypoint offsets are unbounded (`2 * raw - 0.5 + grid`, no sigmoid);
/// visibility is `sigmoid(v) >= 0.5` mapped to flag 2, else 0.
pub fn decode_keypoints(raw: &RawPrediction, ctx: &GridContext) -> Skeleton {
    let s = ctx.stride;
    let kps = raw
        .keypoints
        .iter()
        .map(|&[x, y, v]| {
            let vis = if sigmoid(v) >= 0.5 {
                Visibility::Visible
            } else {
                Visibility::Unlabeled
            };
            Keypoint::new(
                (2.0 * x - 0.5 + ctx.grid_x) * s,
                (2.0 * y - 0.5 + ctx.grid_y) * s,
                vis,
            )
        })
        .collect();
    Skeleton::new(kps).expect("17 decoded keypoints")
}

/// Inverse of [`decode_body`]. The center must lie strictly inside the cell
/// neighbourhood and the size strictly below the mode's maximum.
pub fn encode_body(bbox: &BoundingBox, ctx: &GridContext, mode: WhMode) -> [f64; BODY_FIELDS] {
    let s = ctx.stride;
    [
        logit(((bbox.cx() / s - ctx.grid_x) + 0.5) / 2.0),
        logit(((bbox.cy() / s - ctx.grid_y) + 0.5) / 2.0),
        mode.unscale(bbox.w() / (ctx.anchor_w * s)),
        mode.unscale(bbox.h() / (ctx.anchor_h * s)),
        logit(bbox.conf()),
    ]
}

/// Inverse of the part transform in [`decode_parts`] for one slot.
pub fn encode_part(
    part: &BoundingBox,
    ctx: &GridContext,
    body: &BoundingBox,
) -> [f64; PART_FIELDS] {
    let s = ctx.stride;
    [
        part.cx() / s - ctx.grid_x,
        part.cy() / s - ctx.grid_y,
        logit((part.w() / body.w()).sqrt()),
        logit((part.h() / body.h()).sqrt()),
        logit(part.conf()),
    ]
}

/// Inverse of [`decode_keypoints`]; visibility becomes `+-VISIBILITY_LOGIT`.
pub fn encode_keypoints(skeleton: &Skeleton, ctx: &GridContext) -> [[f64; 3]; NUM_KEYPOINTS] {
    let s = ctx.stride;
    let mut out = [[0.0; 3]; NUM_KEYPOINTS];
    for (o, k) in out.iter_mut().zip(skeleton.keypoints()) {
        let v = if k.is_visible() {
            VISIBILITY_LOGIT
        } else {
            -VISIBILITY_LOGIT
        };
        *o = [
            ((k.x / s - ctx.grid_x) + 0.5) / 2.0,
            ((k.y / s - ctx.grid_y) + 0.5) / 2.0,
            v,
        ];
    }
    out
}

/// One fully decoded cell/anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedCell {
    pub level: usize,
    pub anchor: usize,
    pub grid_x: u32,
    pub grid_y: u32,
    pub body: BoundingBox,
    pub skeleton: Skeleton,
    pub parts: Vec<DecodedPart>,
}

/// A flat dump of one or more detection-head levels.
///
/// Each level stores its values row-major as `[anchor][grid_y][grid_x][field]`
/// with fields ordered body `(x, y, w, h, conf)`, then the 17 keypoints
/// `(x, y, v)`, then one `(x, y, w, h, conf)` block per part class in class
/// map order. Values are either inline in `data` or in `data_file`, a raw
/// little-endian `f32` file resolved relative to the dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDump {
    pub num_parts: usize,
    #[serde(default)]
    pub wh_mode: WhMode,
    pub levels: Vec<DumpLevel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpLevel {
    pub stride: f64,
    pub grid_w: u32,
    pub grid_h: u32,
    /// Anchor sizes in grid units.
    pub anchors: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<String>,
}

impl TensorDump {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut dump: TensorDump = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), None, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for (i, level) in dump.levels.iter_mut().enumerate() {
            if level.data.is_none() {
                let Some(file) = &level.data_file else {
                    return Err(Error::parse(
                        path.display().to_string(),
                        Some(format!("level {i}")),
                        "neither `data` nor `data_file` given",
                    ));
                };
                let bytes = std::fs::read(base.join(file))?;
                level.data = Some(f32_le_values(&bytes).map_err(|reason| {
                    Error::parse(file.clone(), Some(format!("level {i}")), reason)
                })?);
            }
        }
        Ok(dump)
    }

    /// Decodes every cell of every level, in storage order.
    pub fn decode(&self, cmap: &ClassMap, part_visibility: f64) -> Result<Vec<DecodedCell>> {
        if self.num_parts != cmap.len() {
            return Err(Error::Config(format!(
                "dump has {} part slots, class map has {}",
                self.num_parts,
                cmap.len()
            )));
        }
        let per_cell = cell_len(self.num_parts);
        let mut out = Vec::new();
        for (li, level) in self.levels.iter().enumerate() {
            let data = level.data.as_ref().ok_or_else(|| {
                Error::invalid("tensor dump", format!("level {li} has no data loaded"))
            })?;
            let cells = level.anchors.len() * level.grid_w as usize * level.grid_h as usize;
            if data.len() != cells * per_cell {
                return Err(Error::invalid(
                    "tensor dump",
                    format!(
                        "level {li}: expected {} values, got {}",
                        cells * per_cell,
                        data.len()
                    ),
                ));
            }
            let mut chunks = data.chunks_exact(per_cell);
            for (ai, &[aw, ah]) in level.anchors.iter().enumerate() {
                for gy in 0..level.grid_h {
                    for gx in 0..level.grid_w {
                        let raw = RawPrediction::from_flat(
                            chunks.next().expect("length checked"),
                            self.num_parts,
                        )?;
                        let ctx = GridContext::new(gx, gy, level.stride, aw, ah)?;
                        let body = decode_body(&raw, &ctx, self.wh_mode);
                        out.push(DecodedCell {
                            level: li,
                            anchor: ai,
                            grid_x: gx,
                            grid_y: gy,
                            body,
                            skeleton: decode_keypoints(&raw, &ctx),
                            parts: decode_parts(&raw, &ctx, &body, cmap, part_visibility)?,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

fn f32_le_values(bytes: &[u8]) -> std::result::Result<Vec<f64>, String> {
    if !bytes.len().is_multiple_of(4) {
        return Err(format!(
            "{} bytes is not a whole number of f32 values",
            bytes.len()
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}
