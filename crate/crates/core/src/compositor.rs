//! Object cutout, affine resampling, and hard-paste compositing.
//!
//! The target frame is built in three stages: extract the object as an RGBA
//! crop, resample it under a rotation/scale about its pivot, and paste it
//! hard (no feathering) onto a background. Translation is realized at paste
//! time by rounding the target pivot position per axis, so pure translations
//! never resample. Rotation is counter-clockwise positive as seen on screen
//! with the y axis pointing down: positive angles carry the +x direction
//! toward -y.

use crate::raster::{BinaryMask, Image, Rect};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pasted pixels whose interpolated alpha reaches this fraction of full
/// opacity count as object; equals the 0.5 threshold on a unit alpha scale.
const ALPHA_THRESHOLD: f64 = 127.5;

/// Output canvases above this pixel count are refused rather than allocated.
const MAX_OUTPUT_PIXELS: usize = 1 << 31;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompositorError {
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("mask is {mask:?} but image is {image:?}")]
    MaskDimensionMismatch {
        image: (usize, usize),
        mask: (usize, usize),
    },
    #[error("background is {background:?} but frame is {frame:?}")]
    BackgroundDimensionMismatch {
        frame: (usize, usize),
        background: (usize, usize),
    },
    #[error("object image must be RGBA")]
    ObjectNotRgba,
    #[error("scale must be finite and positive, got {0}")]
    InvalidScale(f64),
    #[error("transform has a non-finite component")]
    NonFiniteTransform,
    #[error("transformed bounding box has zero area")]
    DegenerateOutput,
    #[error("transformed canvas {width}x{height} exceeds the output limit")]
    OutputTooLarge { width: usize, height: usize },
    #[error("masked pixel lands outside the background at ({x}, {y})")]
    OutOfBounds { x: i64, y: i64 },
    #[error("no valid placement exists")]
    NoValidPlacement,
    #[error("scale range [{lo}, {hi}] is invalid")]
    InvalidScaleRange { lo: f64, hi: f64 },
    #[error("rotation range [{lo}, {hi}] is invalid")]
    InvalidRotationRange { lo: f64, hi: f64 },
    #[error("grid step must be at least 1")]
    InvalidGridStep,
}

/// Rigid-plus-scale placement of an object: rotate by `rotation_deg` and
/// scale by `scale` about `pivot`, then translate by (dx, dy).
///
/// Constructed values keep `scale > 0` and `rotation_deg` in (-180, 180];
/// operations re-validate, so hand-built or deserialized transforms are
/// checked before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub dx: f64,
    pub dy: f64,
    pub rotation_deg: f64,
    pub scale: f64,
    pub pivot: (f64, f64),
}

impl AffineTransform {
    pub fn new(
        dx: f64,
        dy: f64,
        rotation_deg: f64,
        scale: f64,
        pivot: (f64, f64),
    ) -> Result<AffineTransform, CompositorError> {
        let t = AffineTransform {
            dx,
            dy,
            rotation_deg: normalize_degrees(rotation_deg),
            scale,
            pivot,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn identity(pivot: (f64, f64)) -> AffineTransform {
        AffineTransform {
            dx: 0.0,
            dy: 0.0,
            rotation_deg: 0.0,
            scale: 1.0,
            pivot,
        }
    }

    pub fn validate(&self) -> Result<(), CompositorError> {
        if !self.scale.is_finite() || !(self.scale > 0.0) {
            return Err(CompositorError::InvalidScale(self.scale));
        }
        if ![self.dx, self.dy, self.rotation_deg, self.pivot.0, self.pivot.1]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(CompositorError::NonFiniteTransform);
        }
        Ok(())
    }

    /// True when rotation and scale leave geometry untouched; translation
    /// does not count because it is realized at paste time.
    pub fn is_identity_geometry(&self) -> bool {
        self.scale == 1.0 && normalize_degrees(self.rotation_deg) == 0.0
    }
}

/// Folds an angle into (-180, 180].
fn normalize_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// An object lifted out of its frame: RGBA crop of the mask's bounding box
/// plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCutout {
    /// Alpha is 255 inside the mask, 0 outside; color outside is zeroed.
    pub crop: Image,
    /// Bounding box in frame coordinates.
    pub bbox: Rect,
    /// Mean of the mask pixel coordinates, in frame coordinates.
    pub centroid: (f64, f64),
}

/// Cuts the masked object out of `image` as an RGBA crop.
pub fn extract_object(
    image: &Image,
    mask: &BinaryMask,
) -> Result<ObjectCutout, CompositorError> {
    if (image.width(), image.height()) != (mask.width(), mask.height()) {
        return Err(CompositorError::MaskDimensionMismatch {
            image: (image.width(), image.height()),
            mask: (mask.width(), mask.height()),
        });
    }
    let bbox = mask.bbox().ok_or(CompositorError::EmptyMask)?;
    let centroid = mask.centroid().expect("bbox implies non-empty");
    let mut data = vec![0u8; bbox.width * bbox.height * 4];
    for cy in 0..bbox.height {
        for cx in 0..bbox.width {
            if mask.get(bbox.x + cx, bbox.y + cy) {
                let src = image.pixel(bbox.x + cx, bbox.y + cy);
                let o = (cy * bbox.width + cx) * 4;
                data[o..o + 3].copy_from_slice(&src[..3]);
                data[o + 3] = 255;
            }
        }
    }
    let crop = Image::new(bbox.width, bbox.height, 4, data).expect("bbox dims are non-zero");
    Ok(ObjectCutout {
        crop,
        bbox,
        centroid,
    })
}

/// A resampled crop together with where the pivot landed.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedCrop {
    pub image: Image,
    /// Interpolated alpha at or above half opacity.
    pub mask: BinaryMask,
    /// Pivot position in this canvas's coordinates.
    pub pivot: (f64, f64),
}

/// Rotates and scales an RGBA crop about the transform's pivot, which is
/// interpreted in the crop's own coordinates. Translation is ignored here.
///
/// The output canvas is the rounded bounding box of the transformed pixel
/// centers, resampled by inverse mapping with bilinear interpolation on
/// color and alpha; samples falling outside the source contribute
/// transparent black. The identity geometry returns the input bit-exactly.
pub fn apply_affine(
    crop: &Image,
    transform: &AffineTransform,
) -> Result<TransformedCrop, CompositorError> {
    if crop.channels() != 4 {
        return Err(CompositorError::ObjectNotRgba);
    }
    transform.validate()?;
    if transform.is_identity_geometry() {
        return Ok(TransformedCrop {
            image: crop.clone(),
            mask: mask_from_alpha(crop),
            pivot: transform.pivot,
        });
    }

    let theta = normalize_degrees(transform.rotation_deg).to_radians();
    let (s, c) = theta.sin_cos();
    let scale = transform.scale;
    let (px, py) = transform.pivot;

    // forward map of the four corner pixel centers, as offsets from the pivot
    let w = crop.width() as f64;
    let h = crop.height() as f64;
    let corners = [(0.0, 0.0), (w - 1.0, 0.0), (0.0, h - 1.0), (w - 1.0, h - 1.0)];
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for (cx, cy) in corners {
        let ox = cx - px;
        let oy = cy - py;
        let tx = scale * (c * ox + s * oy);
        let ty = scale * (-s * ox + c * oy);
        min_x = min_x.min(tx);
        max_x = max_x.max(tx);
        min_y = min_y.min(ty);
        max_y = max_y.max(ty);
    }
    let span_x = max_x - min_x;
    let span_y = max_y - min_y;
    if !span_x.is_finite() || !span_y.is_finite() {
        return Err(CompositorError::DegenerateOutput);
    }
    let out_w = span_x.round() as usize + 1;
    let out_h = span_y.round() as usize + 1;
    if out_w == 0 || out_h == 0 {
        return Err(CompositorError::DegenerateOutput);
    }
    if out_w.saturating_mul(out_h) > MAX_OUTPUT_PIXELS {
        return Err(CompositorError::OutputTooLarge {
            width: out_w,
            height: out_h,
        });
    }
    let pivot_out = (-min_x, -min_y);

    let mut data = vec![0u8; out_w * out_h * 4];
    let mut mask = vec![false; out_w * out_h];
    for oy in 0..out_h {
        for ox in 0..out_w {
            let dx = ox as f64 - pivot_out.0;
            let dy = oy as f64 - pivot_out.1;
            let sx = px + (c * dx - s * dy) / scale;
            let sy = py + (s * dx + c * dy) / scale;
            let rgba = sample_bilinear(crop, sx, sy);
            let o = (oy * out_w + ox) * 4;
            for ch in 0..4 {
                data[o + ch] = rgba[ch].round().clamp(0.0, 255.0) as u8;
            }
            // thresholded before quantization so the mask does not depend on
            // the stored alpha's rounding direction
            mask[oy * out_w + ox] = rgba[3] >= ALPHA_THRESHOLD;
        }
    }
    Ok(TransformedCrop {
        image: Image::new(out_w, out_h, 4, data).expect("dims are non-zero"),
        mask: BinaryMask::new(out_w, out_h, mask).expect("dims are non-zero"),
        pivot: pivot_out,
    })
}

/// Bilinear RGBA sample at pixel-center coordinates; neighbors outside the
/// image contribute transparent black.
fn sample_bilinear(src: &Image, x: f64, y: f64) -> [f64; 4] {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut out = [0.0f64; 4];
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let weight = wx * wy;
            if weight == 0.0 {
                continue;
            }
            let sx = x0 as i64 + dx;
            let sy = y0 as i64 + dy;
            if sx < 0 || sy < 0 || sx >= src.width() as i64 || sy >= src.height() as i64 {
                continue;
            }
            let px = src.pixel(sx as usize, sy as usize);
            for ch in 0..4 {
                out[ch] += weight * px[ch] as f64;
            }
        }
    }
    out
}

fn mask_from_alpha(image: &Image) -> BinaryMask {
    BinaryMask::from_fn(image.width(), image.height(), |x, y| {
        image.pixel(x, y)[3] as f64 >= ALPHA_THRESHOLD
    })
    .expect("image dims are non-zero")
}

/// Hard-pastes the masked object pixels onto a copy of `background` with the
/// object canvas origin at `top_left` (may be negative while every masked
/// pixel stays inside). Returns the composite and the pasted mask at
/// background dimensions.
pub fn composite(
    background: &Image,
    object: &Image,
    mask: &BinaryMask,
    top_left: (i64, i64),
) -> Result<(Image, BinaryMask), CompositorError> {
    if object.channels() != 4 {
        return Err(CompositorError::ObjectNotRgba);
    }
    if (object.width(), object.height()) != (mask.width(), mask.height()) {
        return Err(CompositorError::MaskDimensionMismatch {
            image: (object.width(), object.height()),
            mask: (mask.width(), mask.height()),
        });
    }
    let bw = background.width() as i64;
    let bh = background.height() as i64;
    for my in 0..mask.height() {
        for mx in 0..mask.width() {
            if !mask.get(mx, my) {
                continue;
            }
            let x = top_left.0 + mx as i64;
            let y = top_left.1 + my as i64;
            if x < 0 || y < 0 || x >= bw || y >= bh {
                return Err(CompositorError::OutOfBounds { x, y });
            }
        }
    }
    let mut out = background.clone();
    let mut pasted =
        BinaryMask::filled(background.width(), background.height(), false).expect("non-zero dims");
    for my in 0..mask.height() {
        for mx in 0..mask.width() {
            if !mask.get(mx, my) {
                continue;
            }
            let x = (top_left.0 + mx as i64) as usize;
            let y = (top_left.1 + my as i64) as usize;
            let src = object.pixel(mx, my);
            if out.channels() == 4 {
                out.set_pixel(x, y, &[src[0], src[1], src[2], 255]);
            } else {
                out.set_pixel(x, y, &src[..3]);
            }
            pasted.set(x, y, true);
        }
    }
    Ok((out, pasted))
}

/// Canvas origin that lands the transformed pivot at the transform's target
/// position, rounded half away from zero per axis.
fn paste_origin(transform: &AffineTransform, pivot_out: (f64, f64)) -> (i64, i64) {
    let tx = transform.pivot.0 + transform.dx;
    let ty = transform.pivot.1 + transform.dy;
    (
        (tx - pivot_out.0).round() as i64,
        (ty - pivot_out.1).round() as i64,
    )
}

/// Extract, transform, paste: builds the target frame and its object mask.
///
/// The transform's pivot is in frame coordinates (conventionally the object
/// centroid); the background must match the frame's dimensions.
pub fn make_target_frame(
    first: &Image,
    object_mask: &BinaryMask,
    background: &Image,
    transform: &AffineTransform,
) -> Result<(Image, BinaryMask), CompositorError> {
    if (background.width(), background.height()) != (first.width(), first.height()) {
        return Err(CompositorError::BackgroundDimensionMismatch {
            frame: (first.width(), first.height()),
            background: (background.width(), background.height()),
        });
    }
    transform.validate()?;
    let cutout = extract_object(first, object_mask)?;
    let local = AffineTransform {
        pivot: (
            transform.pivot.0 - cutout.bbox.x as f64,
            transform.pivot.1 - cutout.bbox.y as f64,
        ),
        ..*transform
    };
    let moved = apply_affine(&cutout.crop, &local)?;
    // the local pivot is bbox-relative, so this origin is already in frame
    // coordinates
    let origin = paste_origin(transform, moved.pivot);
    composite(background, &moved.image, &moved.mask, origin)
}

/// Why a candidate placement was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    /// Some transformed object pixel would land outside the frame.
    OutOfFrame,
    /// The placed centroid does not lie inside the placement mask.
    CentroidOutsidePlacement,
}

/// One drawn placement candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementSample {
    pub transform: AffineTransform,
    pub valid: bool,
    pub rejection_reason: Option<RejectionReason>,
}

impl PlacementSample {
    fn accepted(transform: AffineTransform) -> PlacementSample {
        PlacementSample {
            transform,
            valid: true,
            rejection_reason: None,
        }
    }

    fn rejected(transform: AffineTransform, reason: RejectionReason) -> PlacementSample {
        PlacementSample {
            transform,
            valid: false,
            rejection_reason: Some(reason),
        }
    }
}

/// Draws up to `count` valid placements of the object inside the placement
/// region.
///
/// Candidate target centers are the grid points with stride `grid_step` that
/// lie inside `placement_mask`. Candidate order and the per-candidate scale
/// and rotation draws (in that order) come from the ChaCha8 counter-based
/// stream keyed by `rng_seed`, so results are a pure function of the
/// arguments. A candidate is valid when the transformed object lies entirely
/// in frame and its placed centroid stays inside the placement mask. When
/// fewer than `count` valid samples exist, the rejected candidates follow
/// the valid ones in the returned list.
pub fn sample_placements(
    placement_mask: &BinaryMask,
    object_mask: &BinaryMask,
    scale_range: (f64, f64),
    rotation_range_deg: (f64, f64),
    grid_step: usize,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<PlacementSample>, CompositorError> {
    if (placement_mask.width(), placement_mask.height())
        != (object_mask.width(), object_mask.height())
    {
        return Err(CompositorError::MaskDimensionMismatch {
            image: (placement_mask.width(), placement_mask.height()),
            mask: (object_mask.width(), object_mask.height()),
        });
    }
    let (slo, shi) = scale_range;
    if !slo.is_finite() || !shi.is_finite() || !(slo > 0.0) || slo > shi {
        return Err(CompositorError::InvalidScaleRange { lo: slo, hi: shi });
    }
    let (rlo, rhi) = rotation_range_deg;
    if !rlo.is_finite() || !rhi.is_finite() || rlo > rhi {
        return Err(CompositorError::InvalidRotationRange { lo: rlo, hi: rhi });
    }
    if grid_step == 0 {
        return Err(CompositorError::InvalidGridStep);
    }
    if placement_mask.count() == 0 || object_mask.count() == 0 {
        return Err(CompositorError::EmptyMask);
    }
    if count == 0 {
        return Ok(Vec::new());
    }

    let bbox = object_mask.bbox().expect("non-empty");
    let centroid = object_mask.centroid().expect("non-empty");
    let proxy = Image::new(bbox.width, bbox.height, 4, {
        let mut data = vec![0u8; bbox.width * bbox.height * 4];
        for cy in 0..bbox.height {
            for cx in 0..bbox.width {
                if object_mask.get(bbox.x + cx, bbox.y + cy) {
                    let o = (cy * bbox.width + cx) * 4;
                    data[o..o + 4].copy_from_slice(&[255, 255, 255, 255]);
                }
            }
        }
        data
    })
    .expect("bbox dims are non-zero");

    let mut candidates = Vec::new();
    for gy in (0..placement_mask.height()).step_by(grid_step) {
        for gx in (0..placement_mask.width()).step_by(grid_step) {
            if placement_mask.get(gx, gy) {
                candidates.push((gx, gy));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    candidates.shuffle(&mut rng);

    let frame_w = placement_mask.width() as i64;
    let frame_h = placement_mask.height() as i64;
    let mut valids = Vec::new();
    let mut rejects = Vec::new();
    for (gx, gy) in candidates {
        if valids.len() == count {
            break;
        }
        let scale = rng.random_range(slo..=shi);
        let rotation = rng.random_range(rlo..=rhi);
        let transform = AffineTransform::new(
            gx as f64 - centroid.0,
            gy as f64 - centroid.1,
            rotation,
            scale,
            centroid,
        )?;
        let local = AffineTransform {
            pivot: (centroid.0 - bbox.x as f64, centroid.1 - bbox.y as f64),
            ..transform
        };
        let moved = apply_affine(&proxy, &local)?;
        let origin = paste_origin(&transform, moved.pivot);

        let mut in_frame = true;
        'scan: for my in 0..moved.mask.height() {
            for mx in 0..moved.mask.width() {
                if !moved.mask.get(mx, my) {
                    continue;
                }
                let x = origin.0 + mx as i64;
                let y = origin.1 + my as i64;
                if x < 0 || y < 0 || x >= frame_w || y >= frame_h {
                    in_frame = false;
                    break 'scan;
                }
            }
        }
        let placed_centroid = moved.mask.centroid();
        match (in_frame, placed_centroid) {
            (false, _) | (_, None) => {
                rejects.push(PlacementSample::rejected(
                    transform,
                    RejectionReason::OutOfFrame,
                ));
            }
            (true, Some((lx, ly))) => {
                let cx = (origin.0 as f64 + lx).round() as i64;
                let cy = (origin.1 as f64 + ly).round() as i64;
                let inside = cx >= 0
                    && cy >= 0
                    && cx < frame_w
                    && cy < frame_h
                    && placement_mask.get(cx as usize, cy as usize);
                if inside {
                    valids.push(PlacementSample::accepted(transform));
                } else {
                    rejects.push(PlacementSample::rejected(
                        transform,
                        RejectionReason::CentroidOutsidePlacement,
                    ));
                }
            }
        }
    }
    if valids.is_empty() {
        return Err(CompositorError::NoValidPlacement);
    }
    if valids.len() < count {
        valids.extend(rejects);
    }
    Ok(valids)
}
