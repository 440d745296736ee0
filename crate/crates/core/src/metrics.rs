//! Object-consistency and end-state metrics over masked frame sequences.
//!
//! Frames are reduced to background-zeroed, letterboxed 224x224 object crops
//! and compared through a pluggable embedder; end state is judged on the
//! penultimate frame's mask against the commanded target. All reductions run
//! in ascending frame order so reports are bitwise reproducible.

use crate::raster::{BinaryMask, Image};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of an object crop.
pub const CROP_SIZE: usize = 224;

/// Cells per axis in the built-in embedder's spatial grid.
const EMBED_CELLS: usize = 4;

/// Orientation bins in the built-in embedder's gradient histogram.
const EMBED_BINS: usize = 8;

/// Dimension of the built-in embedding: cells x (mean RGB + bins).
pub const EMBED_DIM: usize = EMBED_CELLS * EMBED_CELLS * (3 + EMBED_BINS);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("sequence has {frames} frames but {masks} masks")]
    LengthMismatch { frames: usize, masks: usize },
    #[error("sequence needs at least {needed} frames, got {got}")]
    SequenceTooShort { needed: usize, got: usize },
    #[error("frame {index} is {frame:?} but its mask is {mask:?}")]
    FrameMaskMismatch {
        index: usize,
        frame: (usize, usize),
        mask: (usize, usize),
    },
    #[error("masks are {a:?} and {b:?}")]
    MaskPairDimensionMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("no scorable frame pair remains")]
    AllFramesLost,
    #[error("the first-frame object is lost")]
    FirstFrameLost,
    #[error("the penultimate-frame object is lost")]
    PenultimateLost,
    #[error("embeddings differ in length ({a} vs {b})")]
    EmbeddingLengthMismatch { a: usize, b: usize },
}

/// A generated clip: per-frame images paired with per-frame object masks.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSequence {
    frames: Vec<Image>,
    masks: Vec<BinaryMask>,
}

impl MaskedSequence {
    /// Length must be at least 2 and each frame must match its mask's
    /// dimensions; masks may be empty (a lost object is data, not an error).
    pub fn new(frames: Vec<Image>, masks: Vec<BinaryMask>) -> Result<MaskedSequence, MetricsError> {
        if frames.len() != masks.len() {
            return Err(MetricsError::LengthMismatch {
                frames: frames.len(),
                masks: masks.len(),
            });
        }
        if frames.len() < 2 {
            return Err(MetricsError::SequenceTooShort {
                needed: 2,
                got: frames.len(),
            });
        }
        for (index, (frame, mask)) in frames.iter().zip(&masks).enumerate() {
            if (frame.width(), frame.height()) != (mask.width(), mask.height()) {
                return Err(MetricsError::FrameMaskMismatch {
                    index,
                    frame: (frame.width(), frame.height()),
                    mask: (mask.width(), mask.height()),
                });
            }
        }
        Ok(MaskedSequence { frames, masks })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn masks(&self) -> &[BinaryMask] {
        &self.masks
    }
}

/// A background-zeroed, letterboxed object view.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCrop {
    /// RGB, exactly CROP_SIZE x CROP_SIZE; zero outside the resized object.
    pub image: Image,
    pub frame_index: usize,
    /// Set when the source mask was empty; the image is then all zero.
    pub empty: bool,
}

/// Isolates the masked object: zero the background, crop the mask's bounding
/// box, resize so the longer side spans the crop (aspect preserved, bilinear
/// with edge clamping), and center on a zero canvas. An empty mask yields a
/// flagged all-zero crop.
pub fn crop_object(
    frame: &Image,
    mask: &BinaryMask,
    frame_index: usize,
) -> Result<ObjectCrop, MetricsError> {
    if (frame.width(), frame.height()) != (mask.width(), mask.height()) {
        return Err(MetricsError::FrameMaskMismatch {
            index: frame_index,
            frame: (frame.width(), frame.height()),
            mask: (mask.width(), mask.height()),
        });
    }
    let canvas = Image::new(
        CROP_SIZE,
        CROP_SIZE,
        3,
        vec![0u8; CROP_SIZE * CROP_SIZE * 3],
    )
    .expect("constant dims");
    let bbox = match mask.bbox() {
        Some(b) => b,
        None => {
            return Ok(ObjectCrop {
                image: canvas,
                frame_index,
                empty: true,
            })
        }
    };

    let mut patch = vec![0u8; bbox.width * bbox.height * 3];
    for cy in 0..bbox.height {
        for cx in 0..bbox.width {
            if mask.get(bbox.x + cx, bbox.y + cy) {
                let src = frame.pixel(bbox.x + cx, bbox.y + cy);
                let o = (cy * bbox.width + cx) * 3;
                patch[o..o + 3].copy_from_slice(&src[..3]);
            }
        }
    }

    let (new_w, new_h) = if bbox.width >= bbox.height {
        let h = ((bbox.height * CROP_SIZE) as f64 / bbox.width as f64).round() as usize;
        (CROP_SIZE, h.max(1))
    } else {
        let w = ((bbox.width * CROP_SIZE) as f64 / bbox.height as f64).round() as usize;
        (w.max(1), CROP_SIZE)
    };
    let resized = resize_bilinear(&patch, bbox.width, bbox.height, new_w, new_h);

    let off_x = (CROP_SIZE - new_w) / 2;
    let off_y = (CROP_SIZE - new_h) / 2;
    let mut data = canvas.into_data();
    for ry in 0..new_h {
        let dst = ((off_y + ry) * CROP_SIZE + off_x) * 3;
        let src = ry * new_w * 3;
        data[dst..dst + new_w * 3].copy_from_slice(&resized[src..src + new_w * 3]);
    }
    Ok(ObjectCrop {
        image: Image::new(CROP_SIZE, CROP_SIZE, 3, data).expect("constant dims"),
        frame_index,
        empty: false,
    })
}

/// Bilinear RGB resize with pixel-center alignment and edge clamping; a
/// same-size resize reproduces the input exactly.
fn resize_bilinear(src: &[u8], sw: usize, sh: usize, nw: usize, nh: usize) -> Vec<u8> {
    let mut out = vec![0u8; nw * nh * 3];
    let sx_ratio = sw as f64 / nw as f64;
    let sy_ratio = sh as f64 / nh as f64;
    for oy in 0..nh {
        let sy = (oy as f64 + 0.5) * sy_ratio - 0.5;
        let y0 = sy.floor();
        let fy = sy - y0;
        let ya = (y0 as i64).clamp(0, sh as i64 - 1) as usize;
        let yb = (y0 as i64 + 1).clamp(0, sh as i64 - 1) as usize;
        for ox in 0..nw {
            let sx = (ox as f64 + 0.5) * sx_ratio - 0.5;
            let x0 = sx.floor();
            let fx = sx - x0;
            let xa = (x0 as i64).clamp(0, sw as i64 - 1) as usize;
            let xb = (x0 as i64 + 1).clamp(0, sw as i64 - 1) as usize;
            let o = (oy * nw + ox) * 3;
            for ch in 0..3 {
                let p00 = src[(ya * sw + xa) * 3 + ch] as f64;
                let p10 = src[(ya * sw + xb) * 3 + ch] as f64;
                let p01 = src[(yb * sw + xa) * 3 + ch] as f64;
                let p11 = src[(yb * sw + xb) * 3 + ch] as f64;
                let top = p00 * (1.0 - fx) + p10 * fx;
                let bot = p01 * (1.0 - fx) + p11 * fx;
                let v = top * (1.0 - fy) + bot * fy;
                out[o + ch] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Maps object crops to fixed-length vectors for consistency scoring.
///
/// Implementations must be deterministic. The default similarity is cosine
/// (exactly 1 for bitwise-equal vectors, 0 when either vector is zero) and
/// the default distance is Euclidean.
pub trait Embedder {
    fn name(&self) -> &str;
    fn embed(&self, crop: &ObjectCrop) -> Vec<f64>;

    fn similarity(&self, a: &[f64], b: &[f64]) -> f64 {
        if a == b {
            return if a.iter().all(|v| *v == 0.0) { 0.0 } else { 1.0 };
        }
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        dot / (na.sqrt() * nb.sqrt())
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Deterministic stand-in for a learned appearance embedding: a 4x4 spatial
/// grid of mean RGB plus a magnitude-weighted 8-bin gradient-orientation
/// histogram on luminance, L2-normalized over all 176 entries.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinEmbedder;

impl Embedder for BuiltinEmbedder {
    fn name(&self) -> &str {
        "patch_stats"
    }

    fn embed(&self, crop: &ObjectCrop) -> Vec<f64> {
        let img = &crop.image;
        let cell = CROP_SIZE / EMBED_CELLS;
        let stride = 3 + EMBED_BINS;
        let mut v = vec![0.0f64; EMBED_DIM];

        let lum = |x: usize, y: usize| -> f64 {
            let p = img.pixel(x, y);
            (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
        };
        for y in 0..CROP_SIZE {
            for x in 0..CROP_SIZE {
                let idx = ((y / cell) * EMBED_CELLS + x / cell) * stride;
                let p = img.pixel(x, y);
                for ch in 0..3 {
                    v[idx + ch] += p[ch] as f64 / 255.0;
                }
                if x > 0 && x + 1 < CROP_SIZE && y > 0 && y + 1 < CROP_SIZE {
                    let gx = (lum(x + 1, y) - lum(x - 1, y)) / 2.0;
                    let gy = (lum(x, y + 1) - lum(x, y - 1)) / 2.0;
                    let mag = gx.hypot(gy);
                    if mag > 0.0 {
                        let t = (gy.atan2(gx) + std::f64::consts::PI)
                            / (2.0 * std::f64::consts::PI);
                        let bin = ((t * EMBED_BINS as f64) as usize).min(EMBED_BINS - 1);
                        v[idx + 3 + bin] += mag;
                    }
                }
            }
        }
        let area = (cell * cell) as f64;
        for c in 0..EMBED_CELLS * EMBED_CELLS {
            for ch in 0..3 {
                v[c * stride + ch] /= area;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in v.iter_mut() {
                *x /= norm;
            }
        }
        v
    }
}

/// Whether pairs are scored by similarity (cosine x 100) or by the
/// embedder's distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyMode {
    Similarity,
    Distance,
}

/// Per-frame embeddings with lost frames recorded as None.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSequence {
    embeddings: Vec<Option<Vec<f64>>>,
}

impl EmbeddedSequence {
    /// Assembles from per-frame results computed elsewhere (order must be
    /// ascending frame index).
    pub fn from_parts(embeddings: Vec<Option<Vec<f64>>>) -> EmbeddedSequence {
        EmbeddedSequence { embeddings }
    }

    pub fn embeddings(&self) -> &[Option<Vec<f64>>] {
        &self.embeddings
    }

    pub fn lost_frame_count(&self) -> usize {
        self.embeddings.iter().filter(|e| e.is_none()).count()
    }
}

/// Crops and embeds every frame in ascending order.
pub fn embed_sequence(
    seq: &MaskedSequence,
    embedder: &dyn Embedder,
) -> Result<EmbeddedSequence, MetricsError> {
    let mut embeddings = Vec::with_capacity(seq.len());
    for (index, (frame, mask)) in seq.frames().iter().zip(seq.masks()).enumerate() {
        let crop = crop_object(frame, mask, index)?;
        embeddings.push(if crop.empty {
            None
        } else {
            Some(embedder.embed(&crop))
        });
    }
    Ok(EmbeddedSequence::from_parts(embeddings))
}

fn score_pair(
    embedder: &dyn Embedder,
    mode: ConsistencyMode,
    a: &[f64],
    b: &[f64],
) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::EmbeddingLengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    Ok(match mode {
        ConsistencyMode::Similarity => 100.0 * embedder.similarity(a, b),
        ConsistencyMode::Distance => embedder.distance(a, b),
    })
}

/// Mean pair score between consecutive frames; pairs touching a lost frame
/// are skipped.
pub fn consistency_consecutive_embedded(
    embedded: &EmbeddedSequence,
    embedder: &dyn Embedder,
    mode: ConsistencyMode,
) -> Result<f64, MetricsError> {
    let embs = embedded.embeddings();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for window in embs.windows(2) {
        if let (Some(a), Some(b)) = (&window[0], &window[1]) {
            total += score_pair(embedder, mode, a, b)?;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(MetricsError::AllFramesLost);
    }
    Ok(total / pairs as f64)
}

/// Mean pair score between frame 0 and every later frame; lost frames are
/// skipped.
pub fn consistency_first_anchor_embedded(
    embedded: &EmbeddedSequence,
    embedder: &dyn Embedder,
    mode: ConsistencyMode,
) -> Result<f64, MetricsError> {
    let embs = embedded.embeddings();
    let anchor = match embs.first() {
        Some(Some(a)) => a,
        _ => return Err(MetricsError::FirstFrameLost),
    };
    let mut total = 0.0;
    let mut pairs = 0usize;
    for emb in &embs[1..] {
        if let Some(b) = emb {
            total += score_pair(embedder, mode, anchor, b)?;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(MetricsError::AllFramesLost);
    }
    Ok(total / pairs as f64)
}

pub fn consistency_consecutive(
    seq: &MaskedSequence,
    embedder: &dyn Embedder,
    mode: ConsistencyMode,
) -> Result<f64, MetricsError> {
    consistency_consecutive_embedded(&embed_sequence(seq, embedder)?, embedder, mode)
}

pub fn consistency_first_anchor(
    seq: &MaskedSequence,
    embedder: &dyn Embedder,
    mode: ConsistencyMode,
) -> Result<f64, MetricsError> {
    consistency_first_anchor_embedded(&embed_sequence(seq, embedder)?, embedder, mode)
}

/// Euclidean distance between the two mask centroids, in pixels.
pub fn objmc(pred: &BinaryMask, target: &BinaryMask) -> Result<f64, MetricsError> {
    check_mask_pair(pred, target)?;
    let (px, py) = pred.centroid().ok_or(MetricsError::EmptyMask)?;
    let (tx, ty) = target.centroid().ok_or(MetricsError::EmptyMask)?;
    let dx = px - tx;
    let dy = py - ty;
    Ok((dx * dx + dy * dy).sqrt())
}

/// IoU after shifting `pred` so the centroids align; the shift is rounded
/// half away from zero per axis and shifted-out pixels are clipped.
pub fn ca_iou(pred: &BinaryMask, target: &BinaryMask) -> Result<f64, MetricsError> {
    check_mask_pair(pred, target)?;
    let (px, py) = pred.centroid().ok_or(MetricsError::EmptyMask)?;
    let (tx, ty) = target.centroid().ok_or(MetricsError::EmptyMask)?;
    let shifted = pred.translated((tx - px).round() as i64, (ty - py).round() as i64);
    let mut inter = 0usize;
    let mut union = 0usize;
    for (p, t) in shifted.data().iter().zip(target.data()) {
        inter += (*p && *t) as usize;
        union += (*p || *t) as usize;
    }
    Ok(inter as f64 / union as f64)
}

fn check_mask_pair(a: &BinaryMask, b: &BinaryMask) -> Result<(), MetricsError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(MetricsError::MaskPairDimensionMismatch {
            a: (a.width(), a.height()),
            b: (b.width(), b.height()),
        });
    }
    Ok(())
}

/// End-state metrics on the penultimate frame, which FLF2V models do not
/// simply copy from the conditioning.
pub fn end_state_report(
    seq: &MaskedSequence,
    target_mask: &BinaryMask,
) -> Result<(f64, f64), MetricsError> {
    if seq.len() < 3 {
        return Err(MetricsError::SequenceTooShort {
            needed: 3,
            got: seq.len(),
        });
    }
    let pred = &seq.masks()[seq.len() - 2];
    if pred.count() == 0 {
        return Err(MetricsError::PenultimateLost);
    }
    Ok((objmc(pred, target_mask)?, ca_iou(pred, target_mask)?))
}

/// The full metric table for one generated clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sim_consecutive: f64,
    pub sim_first_frame: f64,
    pub dist_consecutive: f64,
    pub dist_first_frame: f64,
    pub objmc: f64,
    pub ca_iou: f64,
    pub lost_frame_count: usize,
}

/// Computes every metric from one embedding pass over the sequence.
pub fn full_report(
    seq: &MaskedSequence,
    target_mask: &BinaryMask,
    embedder: &dyn Embedder,
) -> Result<MetricReport, MetricsError> {
    let embedded = embed_sequence(seq, embedder)?;
    full_report_embedded(seq, target_mask, embedder, &embedded)
}

/// As `full_report`, with the embeddings supplied by the caller (for
/// parallel embedding; order must be ascending frame index).
pub fn full_report_embedded(
    seq: &MaskedSequence,
    target_mask: &BinaryMask,
    embedder: &dyn Embedder,
    embedded: &EmbeddedSequence,
) -> Result<MetricReport, MetricsError> {
    let (objmc, ca_iou) = end_state_report(seq, target_mask)?;
    Ok(MetricReport {
        sim_consecutive: consistency_consecutive_embedded(
            embedded,
            embedder,
            ConsistencyMode::Similarity,
        )?,
        sim_first_frame: consistency_first_anchor_embedded(
            embedded,
            embedder,
            ConsistencyMode::Similarity,
        )?,
        dist_consecutive: consistency_consecutive_embedded(
            embedded,
            embedder,
            ConsistencyMode::Distance,
        )?,
        dist_first_frame: consistency_first_anchor_embedded(
            embedded,
            embedder,
            ConsistencyMode::Distance,
        )?,
        objmc,
        ca_iou,
        lost_frame_count: embedded.lost_frame_count(),
    })
}
