//! Deterministic synthetic fixtures: moving-shape videos with exact
//! ground-truth masks, and trajectory-consistent attention records with
//! controllable noise. Everything end-to-end here is testable without a
//! neural model.

use crate::archive::{
    archive_file_name, write_manifest, write_record_file, ArchiveError, ArchiveManifest,
    ManifestEntry,
};
use crate::attention::{AttentionError, AttentionRecord};
use crate::grid::{GridSpec, TokenGrid};
use crate::metrics::{MaskedSequence, MetricsError};
use crate::raster::{BinaryMask, Image};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("shape dimensions must be non-zero")]
    EmptyShape,
    #[error("shape leaves the frame at frame {frame} before jitter")]
    ShapeOutOfFrame { frame: usize },
    #[error("trajectory has {got} points but the grid has {expected} latent slices")]
    TrajectoryLengthMismatch { expected: usize, got: usize },
    #[error("jitter sigma must be finite and non-negative, got {0}")]
    InvalidJitter(f64),
    #[error("concentration must be positive and finite, got {0}")]
    InvalidConcentration(f64),
    #[error("mix_uniform must lie in [0, 1], got {0}")]
    InvalidMixUniform(f64),
    #[error("concentration jitter must lie in [0, 1), got {0}")]
    InvalidConcentrationJitter(f64),
    #[error("need at least 2 inliers, got {0}")]
    TooFewInliers(usize),
    #[error("inlier and outlier specs disagree on grid")]
    GridMismatch,
    #[error("no layers requested")]
    NoLayers,
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
}

/// A single shape moving on a constant background along a straight line,
/// with optional per-frame Gaussian jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub shape: ShapeKind,
    pub shape_width: usize,
    pub shape_height: usize,
    pub color: [u8; 3],
    pub background: [u8; 3],
    /// Object center (x, y) in pixel coordinates at the first frame.
    pub start_center: (f64, f64),
    /// Object center (x, y) at the last frame.
    pub end_center: (f64, f64),
    pub jitter_sigma: f64,
    pub rng_seed: u64,
}

/// Frames, masks, realized per-frame centers, and how many frames had to be
/// clamped back into the frame after jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub sequence: MaskedSequence,
    /// Realized (x, y) centers: the exact centroid of each frame's mask.
    pub centers: Vec<(f64, f64)>,
    pub clamped_frames: usize,
}

fn rasterize(spec: &SceneSpec, left: usize, top: usize, center: (f64, f64)) -> (Image, BinaryMask) {
    // dims are non-zero: the caller has already checked that the shape fits
    let mut frame =
        Image::filled(spec.width, spec.height, &spec.background).expect("non-empty frame");
    let mut mask = BinaryMask::filled(spec.width, spec.height, false).expect("non-empty frame");
    let a = spec.shape_width as f64 / 2.0;
    let b = spec.shape_height as f64 / 2.0;
    for y in top..top + spec.shape_height {
        for x in left..left + spec.shape_width {
            let inside = match spec.shape {
                ShapeKind::Rectangle => true,
                ShapeKind::Ellipse => {
                    let nx = (x as f64 - center.0) / a;
                    let ny = (y as f64 - center.1) / b;
                    nx * nx + ny * ny <= 1.0
                }
            };
            if inside {
                frame.set_pixel(x, y, &spec.color);
                mask.set(x, y, true);
            }
        }
    }
    (frame, mask)
}

/// Renders the scene. The ideal trajectory (pre-jitter) must keep the shape
/// inside the frame; jitter that pushes it out is clamped and counted, not
/// an error. Returned centers are the realized mask centroids, which land on
/// the ideal trajectory whenever rounding and clamping are no-ops.
pub fn synth_video(spec: &SceneSpec) -> Result<SynthVideo, HarnessError> {
    if spec.frame_count < 2 {
        return Err(HarnessError::TooFewFrames(spec.frame_count));
    }
    if spec.shape_width == 0 || spec.shape_height == 0 {
        return Err(HarnessError::EmptyShape);
    }
    if !(spec.jitter_sigma.is_finite() && spec.jitter_sigma >= 0.0) {
        return Err(HarnessError::InvalidJitter(spec.jitter_sigma));
    }
    let steps = (spec.frame_count - 1) as f64;
    let ideal: Vec<(f64, f64)> = (0..spec.frame_count)
        .map(|t| {
            let alpha = t as f64 / steps;
            (
                spec.start_center.0 + alpha * (spec.end_center.0 - spec.start_center.0),
                spec.start_center.1 + alpha * (spec.end_center.1 - spec.start_center.1),
            )
        })
        .collect();
    let half_w = (spec.shape_width - 1) as f64 / 2.0;
    let half_h = (spec.shape_height - 1) as f64 / 2.0;
    for (t, &(cx, cy)) in ideal.iter().enumerate() {
        let left = (cx - half_w).round() as i64;
        let top = (cy - half_h).round() as i64;
        if left < 0
            || top < 0
            || left + spec.shape_width as i64 > spec.width as i64
            || top + spec.shape_height as i64 > spec.height as i64
        {
            return Err(HarnessError::ShapeOutOfFrame { frame: t });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let normal = Normal::new(0.0, spec.jitter_sigma)
        .map_err(|_| HarnessError::InvalidJitter(spec.jitter_sigma))?;
    let max_left = (spec.width - spec.shape_width) as i64;
    let max_top = (spec.height - spec.shape_height) as i64;

    let mut frames = Vec::with_capacity(spec.frame_count);
    let mut masks = Vec::with_capacity(spec.frame_count);
    let mut centers = Vec::with_capacity(spec.frame_count);
    let mut clamped_frames = 0;
    for &(cx, cy) in &ideal {
        let (jx, jy) = if spec.jitter_sigma > 0.0 {
            let jx = normal.sample(&mut rng);
            let jy = normal.sample(&mut rng);
            (jx, jy)
        } else {
            (0.0, 0.0)
        };
        let left_raw = (cx + jx - half_w).round() as i64;
        let top_raw = (cy + jy - half_h).round() as i64;
        let left = left_raw.clamp(0, max_left);
        let top = top_raw.clamp(0, max_top);
        if left != left_raw || top != top_raw {
            clamped_frames += 1;
        }
        let center = (left as f64 + half_w, top as f64 + half_h);
        let (frame, mask) = rasterize(spec, left as usize, top as usize, center);
        frames.push(frame);
        masks.push(mask);
        centers.push(center);
    }
    Ok(SynthVideo {
        sequence: MaskedSequence::new(frames, masks)?,
        centers,
        clamped_frames,
    })
}

/// Attention model: every query row is a softmax over key tokens of
/// `-concentration * distance(key cell center, object center at the key's
/// latent slice)`, blended toward uniform by `mix_uniform`. The row is a
/// pure function of the spec; `rng_seed` only feeds population jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionNoiseSpec {
    /// Object center (x, y) per latent slice, in cell units (x along
    /// width_tokens, y along height_tokens; cell centers at integers).
    pub trajectory: Vec<(f64, f64)>,
    pub grid: TokenGrid,
    pub concentration: f64,
    pub mix_uniform: f64,
    pub rng_seed: u64,
}

/// One row-stochastic record per requested layer, all sharing the same
/// trajectory-determined row.
pub fn synth_attention(
    spec: &AttentionNoiseSpec,
    layers: &[u16],
    step_index: u16,
    seed_id: u32,
) -> Result<Vec<AttentionRecord>, HarnessError> {
    if !(spec.concentration.is_finite() && spec.concentration > 0.0) {
        return Err(HarnessError::InvalidConcentration(spec.concentration));
    }
    if !(spec.mix_uniform >= 0.0 && spec.mix_uniform <= 1.0) {
        return Err(HarnessError::InvalidMixUniform(spec.mix_uniform));
    }
    if layers.is_empty() {
        return Err(HarnessError::NoLayers);
    }
    if spec.trajectory.len() != spec.grid.frames_latent() {
        return Err(HarnessError::TrajectoryLengthMismatch {
            expected: spec.grid.frames_latent(),
            got: spec.trajectory.len(),
        });
    }
    let n = spec.grid.total_tokens();
    let mut logits = Vec::with_capacity(n);
    for k in 0..n {
        let (t, h, w) = spec.grid.token_to_cell(k).expect("token index in range");
        let (ox, oy) = spec.trajectory[t];
        let dx = w as f64 - ox;
        let dy = h as f64 - oy;
        logits.push(-spec.concentration * (dx * dx + dy * dy).sqrt());
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let lambda = spec.mix_uniform;
    let uniform = 1.0 / n as f64;
    let mixed: Vec<f64> = exps
        .iter()
        .map(|&e| (1.0 - lambda) * (e / sum) + lambda * uniform)
        .collect();
    let total: f64 = mixed.iter().sum();
    let row: Vec<f32> = mixed.iter().map(|&v| (v / total) as f32).collect();
    let mut matrix = Vec::with_capacity(n * n);
    for _ in 0..n {
        matrix.extend_from_slice(&row);
    }
    layers
        .iter()
        .map(|&layer| {
            AttentionRecord::new(seed_id, step_index, layer, spec.grid, matrix.clone())
                .map_err(HarnessError::from)
        })
        .collect()
}

/// Recipe for a population of seeds: `n_inliers` draws of the inlier spec
/// plus one outlier, with per-seed multiplicative concentration jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub inlier: AttentionNoiseSpec,
    pub outlier: AttentionNoiseSpec,
    pub n_inliers: usize,
    /// Concentration multiplier range half-width; each seed's concentration
    /// is scaled by a uniform draw from [1 - j, 1 + j].
    pub concentration_jitter: f64,
    pub layers: Vec<u16>,
    pub step_index: u16,
}

/// Per-seed record stacks, indexed by seed id, with the planted outlier.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedPopulation {
    pub records: Vec<Vec<AttentionRecord>>,
    pub outlier_seed_id: u32,
}

/// Builds the population in memory. The RNG stream (seeded from the inlier
/// spec's `rng_seed`) first places the outlier, then draws one concentration
/// multiplier per seed in seed order.
pub fn build_seed_population(spec: &PopulationSpec) -> Result<SeedPopulation, HarnessError> {
    if spec.n_inliers < 2 {
        return Err(HarnessError::TooFewInliers(spec.n_inliers));
    }
    if !(spec.concentration_jitter.is_finite()
        && spec.concentration_jitter >= 0.0
        && spec.concentration_jitter < 1.0)
    {
        return Err(HarnessError::InvalidConcentrationJitter(
            spec.concentration_jitter,
        ));
    }
    if spec.inlier.grid != spec.outlier.grid {
        return Err(HarnessError::GridMismatch);
    }
    if spec.layers.is_empty() {
        return Err(HarnessError::NoLayers);
    }
    let n = spec.n_inliers + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.inlier.rng_seed);
    let outlier_index = rng.random_range(0..n);
    let mut records = Vec::with_capacity(n);
    for seed in 0..n {
        let base = if seed == outlier_index {
            &spec.outlier
        } else {
            &spec.inlier
        };
        let factor = rng.random_range(1.0 - spec.concentration_jitter..=1.0 + spec.concentration_jitter);
        let jittered = AttentionNoiseSpec {
            concentration: base.concentration * factor,
            ..base.clone()
        };
        records.push(synth_attention(
            &jittered,
            &spec.layers,
            spec.step_index,
            seed as u32,
        )?);
    }
    Ok(SeedPopulation {
        records,
        outlier_seed_id: outlier_index as u32,
    })
}

/// Builds the population and writes one archive file per (seed, layer) plus
/// a manifest flagging the outlier.
pub fn make_seed_population(
    spec: &PopulationSpec,
    dir: &Path,
) -> Result<SeedPopulation, HarnessError> {
    let population = build_seed_population(spec)?;
    let mut entries = Vec::new();
    for per_seed in &population.records {
        for record in per_seed {
            let file =
                archive_file_name(record.seed_id(), record.step_index(), record.layer_index());
            write_record_file(&dir.join(&file), record)?;
            entries.push(ManifestEntry {
                seed_id: record.seed_id(),
                step_index: record.step_index(),
                layer_index: record.layer_index(),
                file,
            });
        }
    }
    write_manifest(
        dir,
        &ArchiveManifest {
            entries,
            outlier_seed_id: Some(population.outlier_seed_id),
        },
    )?;
    Ok(population)
}

/// Ten-seed population whose nine inliers share a spatial anchor: one hub
/// seed plus eight seeds on the unit ring around it, and one far-corner
/// outlier.
#[derive(Debug, Clone, PartialEq)]
pub struct HubRingPopulation {
    pub records: Vec<Vec<AttentionRecord>>,
    pub outlier_seed_id: u32,
    pub hub_seed_id: u32,
}

/// Builds a hub-and-ring population on a single-frame 6x6 grid.
///
/// Every inlier's leave-one-out mean is anchored near the hub, so the hub
/// seed is the consensus argmax under cosine overlap and under a spatial
/// transport metric alike, which makes the family suitable for
/// cross-backend agreement checks; the outlier is total-variation separated
/// from every inlier by construction. Hub position, ring phase, outlier
/// position, and the seed-to-slot assignment are all drawn from `rng_seed`.
pub fn build_hub_ring_population(
    rng_seed: u64,
    layers: &[u16],
    step_index: u16,
) -> Result<HubRingPopulation, HarnessError> {
    let grid = TokenGrid::new(GridSpec::cells(1, 6, 6)).expect("static dims");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let hub = (rng.random_range(1.2..1.6), rng.random_range(1.2..1.6));
    let phase = rng.random_range(0.0..TAU);
    let mut positions = vec![(true, hub)];
    for j in 0..8 {
        let theta = TAU * j as f64 / 8.0 + phase;
        positions.push((false, (hub.0 + theta.cos(), hub.1 + theta.sin())));
    }
    let outlier = (
        5.0 - rng.random_range(0.0..0.5),
        5.0 - rng.random_range(0.0..0.5),
    );
    let outlier_slot = rng.random_range(0..10u32);
    positions.shuffle(&mut rng);
    let hub_index = positions
        .iter()
        .position(|&(is_hub, _)| is_hub)
        .expect("hub present") as u32;
    let hub_seed_id = if hub_index >= outlier_slot {
        hub_index + 1
    } else {
        hub_index
    };
    let mut records = Vec::new();
    let mut inliers = positions.into_iter();
    for slot in 0..10u32 {
        let pos = if slot == outlier_slot {
            outlier
        } else {
            inliers.next().expect("nine inliers").1
        };
        let spec = AttentionNoiseSpec {
            trajectory: vec![pos],
            grid,
            concentration: 2.0,
            mix_uniform: 0.1,
            rng_seed: 0,
        };
        records.push(synth_attention(&spec, layers, step_index, slot)?);
    }
    Ok(HubRingPopulation {
        records,
        outlier_seed_id: outlier_slot,
        hub_seed_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::read_record_file;
    use crate::attention::{aggregate_signature, validate_record, RegionKind, TokenSet};
    use crate::consensus::{evaluate_consensus, total_variation, SimilarityBackend};
    use crate::grid::GridSpec;
    use crate::metrics::{consistency_consecutive, consistency_first_anchor, ConsistencyMode};
    use crate::metrics::BuiltinEmbedder;

    fn base_scene() -> SceneSpec {
        SceneSpec {
            width: 64,
            height: 64,
            frame_count: 5,
            shape: ShapeKind::Rectangle,
            shape_width: 9,
            shape_height: 7,
            color: [210, 60, 40],
            background: [16, 16, 16],
            start_center: (8.0, 8.0),
            end_center: (40.0, 40.0),
            jitter_sigma: 0.0,
            rng_seed: 7,
        }
    }

    #[test]
    fn static_scene_scores_perfect_similarity() {
        let spec = SceneSpec {
            end_center: (8.0, 8.0),
            frame_count: 4,
            ..base_scene()
        };
        let video = synth_video(&spec).unwrap();
        assert_eq!(video.clamped_frames, 0);
        let embedder = BuiltinEmbedder;
        let sim = consistency_consecutive(&video.sequence, &embedder, ConsistencyMode::Similarity)
            .unwrap();
        let anchored =
            consistency_first_anchor(&video.sequence, &embedder, ConsistencyMode::Similarity)
                .unwrap();
        assert_eq!(sim, 100.0);
        assert_eq!(anchored, 100.0);
    }

    #[test]
    fn centers_follow_linear_interpolation() {
        let spec = SceneSpec {
            shape_width: 9,
            shape_height: 9,
            ..base_scene()
        };
        let video = synth_video(&spec).unwrap();
        let expected = [(8.0, 8.0), (16.0, 16.0), (24.0, 24.0), (32.0, 32.0), (40.0, 40.0)];
        assert_eq!(video.centers, expected);
        for (mask, &(cx, cy)) in video.sequence.masks().iter().zip(&expected) {
            assert_eq!(mask.count(), 81);
            assert_eq!(mask.centroid().unwrap(), (cx, cy));
        }
    }

    #[test]
    fn rectangle_masks_keep_exact_pixel_count_under_jitter() {
        let spec = SceneSpec {
            jitter_sigma: 3.0,
            rng_seed: 11,
            frame_count: 8,
            ..base_scene()
        };
        let video = synth_video(&spec).unwrap();
        for mask in video.sequence.masks() {
            assert_eq!(mask.count(), 9 * 7);
        }
        for (mask, &center) in video.sequence.masks().iter().zip(&video.centers) {
            assert_eq!(mask.centroid().unwrap(), center);
        }
    }

    #[test]
    fn ellipse_masks_are_centered_and_bounded() {
        let spec = SceneSpec {
            shape: ShapeKind::Ellipse,
            shape_width: 10,
            shape_height: 6,
            ..base_scene()
        };
        let video = synth_video(&spec).unwrap();
        for (mask, &center) in video.sequence.masks().iter().zip(&video.centers) {
            let count = mask.count();
            assert!(count > 0 && count <= 60);
            assert_eq!(mask.centroid().unwrap(), center);
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical_and_other_seed_differs() {
        let spec = SceneSpec {
            jitter_sigma: 2.0,
            ..base_scene()
        };
        let a = synth_video(&spec).unwrap();
        let b = synth_video(&spec).unwrap();
        assert_eq!(a, b);
        let c = synth_video(&SceneSpec {
            rng_seed: 8,
            ..spec
        })
        .unwrap();
        assert_ne!(a.centers, c.centers);
    }

    #[test]
    fn jitter_past_the_border_clamps_and_counts() {
        let spec = SceneSpec {
            start_center: (4.0, 3.0),
            end_center: (4.0, 3.0),
            jitter_sigma: 10.0,
            frame_count: 12,
            rng_seed: 5,
            ..base_scene()
        };
        let video = synth_video(&spec).unwrap();
        assert!(video.clamped_frames > 0);
        for mask in video.sequence.masks() {
            assert_eq!(mask.count(), 9 * 7);
        }
    }

    #[test]
    fn invalid_scenes_are_rejected() {
        assert!(matches!(
            synth_video(&SceneSpec {
                frame_count: 1,
                ..base_scene()
            })
            .unwrap_err(),
            HarnessError::TooFewFrames(1)
        ));
        assert!(matches!(
            synth_video(&SceneSpec {
                shape_width: 0,
                ..base_scene()
            })
            .unwrap_err(),
            HarnessError::EmptyShape
        ));
        assert!(matches!(
            synth_video(&SceneSpec {
                jitter_sigma: -1.0,
                ..base_scene()
            })
            .unwrap_err(),
            HarnessError::InvalidJitter(_)
        ));
        // end center too close to the right edge for a 9-wide shape
        assert!(matches!(
            synth_video(&SceneSpec {
                end_center: (62.0, 32.0),
                ..base_scene()
            })
            .unwrap_err(),
            HarnessError::ShapeOutOfFrame { frame: 4 }
        ));
    }

    fn noise_spec(grid: TokenGrid) -> AttentionNoiseSpec {
        AttentionNoiseSpec {
            trajectory: vec![(1.0, 2.0); grid.frames_latent()],
            grid,
            concentration: 2.5,
            mix_uniform: 0.3,
            rng_seed: 0,
        }
    }

    #[test]
    fn uniform_mix_gives_uniform_rows() {
        let grid = TokenGrid::new(GridSpec::cells(1, 4, 4)).unwrap();
        let spec = AttentionNoiseSpec {
            mix_uniform: 1.0,
            ..noise_spec(grid)
        };
        let records = synth_attention(&spec, &[22], 10, 0).unwrap();
        let row = records[0].row(0);
        for &v in row {
            assert!((v - 1.0 / 16.0).abs() < 1e-7);
        }
    }

    #[test]
    fn high_concentration_approaches_one_hot() {
        let grid = TokenGrid::new(GridSpec::cells(1, 4, 4)).unwrap();
        let spec = AttentionNoiseSpec {
            concentration: 1000.0,
            mix_uniform: 0.0,
            ..noise_spec(grid)
        };
        let records = synth_attention(&spec, &[22], 10, 0).unwrap();
        let row = records[0].row(0);
        // trajectory (x=1, y=2) -> cell (t=0, h=2, w=1) -> token 9
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 9);
        assert!(row[9] >= 0.99);
    }

    #[test]
    fn separated_trajectories_separate_signatures() {
        let grid = TokenGrid::new(GridSpec::cells(2, 4, 4)).unwrap();
        let make = |corner: (f64, f64)| AttentionNoiseSpec {
            trajectory: vec![corner; 2],
            grid,
            concentration: 4.0,
            mix_uniform: 0.0,
            rng_seed: 0,
        };
        let tokens =
            TokenSet::new((0..grid.total_tokens()).collect(), RegionKind::Foreground, &grid)
                .unwrap();
        let sig = |spec: &AttentionNoiseSpec, id: u32| {
            let records = synth_attention(spec, &[22, 23], 10, id).unwrap();
            aggregate_signature(&records, 22, 23, &tokens).unwrap()
        };
        let near = sig(&make((0.5, 0.5)), 0);
        let far = sig(&make((3.0, 3.0)), 1);
        let tv = total_variation(near.vector(), far.vector());
        assert!(tv >= 0.5, "tv = {tv}");
    }

    #[test]
    fn records_validate_cleanly_across_layers() {
        let grid = TokenGrid::new(GridSpec::cells(2, 3, 5)).unwrap();
        let spec = AttentionNoiseSpec {
            trajectory: vec![(0.7, 1.3), (3.2, 1.9)],
            ..noise_spec(grid)
        };
        let records = synth_attention(&spec, &[22, 23, 24], 10, 3).unwrap();
        assert_eq!(records.len(), 3);
        for (record, layer) in records.iter().zip([22u16, 23, 24]) {
            assert_eq!(record.layer_index(), layer);
            assert_eq!(record.seed_id(), 3);
            assert_eq!(record.step_index(), 10);
            assert!(validate_record(record).is_empty());
            for q in [0, 7, 29] {
                assert_eq!(record.row(q), record.row(0));
            }
        }
        assert_eq!(records[0].matrix(), records[1].matrix());
    }

    #[test]
    fn more_uniform_mix_strictly_lowers_the_peak() {
        let grid = TokenGrid::new(GridSpec::cells(1, 4, 4)).unwrap();
        let peak = |lambda: f64| {
            let spec = AttentionNoiseSpec {
                concentration: 3.0,
                mix_uniform: lambda,
                trajectory: vec![(0.7, 1.3)],
                grid,
                rng_seed: 0,
            };
            let records = synth_attention(&spec, &[22], 10, 0).unwrap();
            records[0]
                .row(0)
                .iter()
                .copied()
                .fold(f32::NEG_INFINITY, f32::max)
        };
        let peaks: Vec<f32> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&l| peak(l)).collect();
        for pair in peaks.windows(2) {
            assert!(pair[0] > pair[1], "peaks not strictly decreasing: {peaks:?}");
        }
    }

    #[test]
    fn malformed_noise_specs_are_rejected() {
        let grid = TokenGrid::new(GridSpec::cells(1, 4, 4)).unwrap();
        let good = noise_spec(grid);
        assert!(matches!(
            synth_attention(
                &AttentionNoiseSpec {
                    concentration: 0.0,
                    ..good.clone()
                },
                &[22],
                10,
                0
            )
            .unwrap_err(),
            HarnessError::InvalidConcentration(_)
        ));
        assert!(matches!(
            synth_attention(
                &AttentionNoiseSpec {
                    mix_uniform: 1.5,
                    ..good.clone()
                },
                &[22],
                10,
                0
            )
            .unwrap_err(),
            HarnessError::InvalidMixUniform(_)
        ));
        assert!(matches!(
            synth_attention(&good, &[], 10, 0).unwrap_err(),
            HarnessError::NoLayers
        ));
        assert!(matches!(
            synth_attention(
                &AttentionNoiseSpec {
                    trajectory: vec![(1.0, 1.0); 3],
                    ..good
                },
                &[22],
                10,
                0
            )
            .unwrap_err(),
            HarnessError::TrajectoryLengthMismatch {
                expected: 1,
                got: 3
            }
        ));
    }

    fn population_spec(seed: u64) -> PopulationSpec {
        let grid = TokenGrid::new(GridSpec::cells(1, 6, 6)).unwrap();
        PopulationSpec {
            inlier: AttentionNoiseSpec {
                trajectory: vec![(1.0, 1.0)],
                grid,
                concentration: 2.0,
                mix_uniform: 0.1,
                rng_seed: seed,
            },
            outlier: AttentionNoiseSpec {
                trajectory: vec![(4.5, 4.5)],
                grid,
                concentration: 2.0,
                mix_uniform: 0.1,
                rng_seed: seed,
            },
            n_inliers: 2,
            concentration_jitter: 0.1,
            layers: vec![22, 23],
            step_index: 10,
        }
    }

    #[test]
    fn population_is_deterministic_and_validated() {
        let spec = population_spec(42);
        let a = build_seed_population(&spec).unwrap();
        let b = build_seed_population(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 3);

        assert!(matches!(
            build_seed_population(&PopulationSpec {
                n_inliers: 1,
                ..population_spec(42)
            })
            .unwrap_err(),
            HarnessError::TooFewInliers(1)
        ));
        assert!(matches!(
            build_seed_population(&PopulationSpec {
                concentration_jitter: 1.0,
                ..population_spec(42)
            })
            .unwrap_err(),
            HarnessError::InvalidConcentrationJitter(_)
        ));
        let mut mismatched = population_spec(42);
        mismatched.outlier.grid = TokenGrid::new(GridSpec::cells(1, 5, 5)).unwrap();
        assert!(matches!(
            build_seed_population(&mismatched).unwrap_err(),
            HarnessError::GridMismatch
        ));
    }

    #[test]
    fn outlier_is_never_selected_and_ranks_last() {
        let tokens = {
            let grid = TokenGrid::new(GridSpec::cells(1, 6, 6)).unwrap();
            TokenSet::new((0..36).collect(), RegionKind::Foreground, &grid).unwrap()
        };
        for seed in [1, 2, 3, 4, 5] {
            let population = build_seed_population(&population_spec(seed)).unwrap();
            let signatures: Vec<_> = population
                .records
                .iter()
                .map(|records| aggregate_signature(records, 22, 23, &tokens).unwrap())
                .collect();
            let result = evaluate_consensus(&signatures, &SimilarityBackend::cosine()).unwrap();
            assert_ne!(result.selected, population.outlier_seed_id);
            assert_eq!(*result.ranking.last().unwrap(), population.outlier_seed_id);
        }
    }

    #[test]
    fn population_archives_round_trip_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let spec = population_spec(9);
        let population = make_seed_population(&spec, dir.path()).unwrap();
        let manifest = crate::archive::read_manifest(dir.path()).unwrap();
        assert_eq!(manifest.entries.len(), 3 * 2);
        assert_eq!(manifest.outlier_seed_id, Some(population.outlier_seed_id));
        for entry in &manifest.entries {
            let record = read_record_file(&dir.path().join(&entry.file)).unwrap();
            assert_eq!(record.seed_id(), entry.seed_id);
            assert_eq!(record.layer_index(), entry.layer_index);
            assert_eq!(
                &record,
                population.records[entry.seed_id as usize]
                    .iter()
                    .find(|r| r.layer_index() == entry.layer_index)
                    .unwrap()
            );
        }
    }

    #[test]
    fn hub_ring_population_is_separated_and_distinct() {
        let population = build_hub_ring_population(41, &[22, 23], 10).unwrap();
        assert_eq!(population.records.len(), 10);
        assert_ne!(population.hub_seed_id, population.outlier_seed_id);
        let grid = population.records[0][0].grid();
        let tokens =
            TokenSet::new((0..36).collect(), RegionKind::Foreground, grid).unwrap();
        let signatures: Vec<_> = population
            .records
            .iter()
            .map(|records| aggregate_signature(records, 22, 23, &tokens).unwrap())
            .collect();
        let outlier = &signatures[population.outlier_seed_id as usize];
        for (slot, sig) in signatures.iter().enumerate() {
            if slot as u32 != population.outlier_seed_id {
                assert!(total_variation(sig.vector(), outlier.vector()) >= 0.5);
            }
        }
    }
}
