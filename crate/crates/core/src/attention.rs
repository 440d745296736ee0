//! Attention-tensor data model: row-stochastic records, the pixel-mask to
//! token-set mapping, and per-seed signature aggregation.

use crate::grid::{GridError, TokenGrid};
use crate::raster::BinaryMask;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of an attention row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;
/// Allowed deviation of a signature sum from 1.
pub const SIGNATURE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttentionError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("mask is {mask_width}x{mask_height} but grid frames are {frame_width}x{frame_height}")]
    MaskDimensionMismatch {
        mask_width: usize,
        mask_height: usize,
        frame_width: usize,
        frame_height: usize,
    },
    #[error("coverage threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("no tokens selected for region {region:?}")]
    EmptyTokenSet { region: RegionKind },
    #[error("token indices must be strictly increasing, saw {prev} then {next}")]
    UnsortedIndices { prev: usize, next: usize },
    #[error("matrix has {actual} entries, expected {expected} for {tokens} tokens")]
    MatrixShape {
        expected: usize,
        actual: usize,
        tokens: usize,
    },
    #[error("no attention records supplied")]
    NoRecords,
    #[error("layer range {min}..={max} is empty")]
    InvalidLayerRange { min: u16, max: u16 },
    #[error("layer {0} requested but not present in the records")]
    MissingLayer(u16),
    #[error("layer {0} present more than once")]
    DuplicateLayer(u16),
    #[error("records disagree on grid")]
    GridMismatch,
    #[error("records disagree on seed_id ({first} vs {other})")]
    SeedMismatch { first: u32, other: u32 },
    #[error("records disagree on step_index ({first} vs {other})")]
    StepMismatch { first: u16, other: u16 },
    #[error("signature entry {index} is negative ({value})")]
    SignatureNegativeEntry { index: usize, value: f64 },
    #[error("signature sums to {0}, expected 1 within {SIGNATURE_SUM_TOLERANCE}")]
    SignatureSum(f64),
    #[error("signature vector is empty")]
    EmptySignature,
    #[error("aggregated vector sums to {0}, cannot normalize")]
    DegenerateAggregate(f64),
}

/// Which pixel region a token set was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Foreground,
    InverseForeground,
    PlacementMask,
}

impl RegionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionKind::Foreground => "foreground",
            RegionKind::InverseForeground => "inverse_foreground",
            RegionKind::PlacementMask => "placement_mask",
        }
    }
}

/// Strictly increasing token indices into one grid, tagged with the region
/// they were derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSet {
    indices: Vec<usize>,
    region_kind: RegionKind,
}

impl TokenSet {
    pub fn new(
        indices: Vec<usize>,
        region_kind: RegionKind,
        grid: &TokenGrid,
    ) -> Result<TokenSet, AttentionError> {
        if indices.is_empty() {
            return Err(AttentionError::EmptyTokenSet { region: region_kind });
        }
        let total = grid.total_tokens();
        for pair in indices.windows(2) {
            if pair[1] <= pair[0] {
                return Err(AttentionError::UnsortedIndices {
                    prev: pair[0],
                    next: pair[1],
                });
            }
        }
        let last = *indices.last().expect("non-empty");
        if last >= total {
            return Err(GridError::TokenOutOfRange { index: last, total }.into());
        }
        Ok(TokenSet {
            indices,
            region_kind,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn region_kind(&self) -> RegionKind {
        self.region_kind
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// One head-averaged self-attention matrix for (seed, step, layer).
///
/// The matrix is row-major `total_tokens x total_tokens`; construction checks
/// the shape only, stochasticity is reported by [`validate_record`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    seed_id: u32,
    step_index: u16,
    layer_index: u16,
    grid: TokenGrid,
    matrix: Vec<f32>,
}

impl AttentionRecord {
    pub fn new(
        seed_id: u32,
        step_index: u16,
        layer_index: u16,
        grid: TokenGrid,
        matrix: Vec<f32>,
    ) -> Result<AttentionRecord, AttentionError> {
        let n = grid.total_tokens();
        if matrix.len() != n * n {
            return Err(AttentionError::MatrixShape {
                expected: n * n,
                actual: matrix.len(),
                tokens: n,
            });
        }
        Ok(AttentionRecord {
            seed_id,
            step_index,
            layer_index,
            grid,
            matrix,
        })
    }

    pub fn seed_id(&self) -> u32 {
        self.seed_id
    }

    pub fn step_index(&self) -> u16 {
        self.step_index
    }

    pub fn layer_index(&self) -> u16 {
        self.layer_index
    }

    pub fn grid(&self) -> &TokenGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    /// Attention row of query token `q`. Panics if out of range.
    pub fn row(&self, q: usize) -> &[f32] {
        let n = self.grid.total_tokens();
        assert!(q < n, "query token {q} out of range for {n} tokens");
        &self.matrix[q * n..(q + 1) * n]
    }
}

/// A defect found by [`validate_record`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Row sum outside `1 +- ROW_SUM_TOLERANCE` (also raised for non-finite sums).
    RowSum { row: usize, sum: f64 },
    /// Negative entry.
    Negative { row: usize, col: usize, value: f32 },
    /// NaN or infinite entry.
    NonFinite { row: usize, col: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            Violation::Negative { row, col, value } => {
                write!(f, "entry ({row}, {col}) is negative ({value})")
            }
            Violation::NonFinite { row, col } => write!(f, "entry ({row}, {col}) is not finite"),
        }
    }
}

/// Reports every row-sum, negativity, and non-finite violation in the
/// record; an empty list means the record is row-stochastic.
pub fn validate_record(record: &AttentionRecord) -> Vec<Violation> {
    let n = record.grid.total_tokens();
    let mut out = Vec::new();
    for row in 0..n {
        let mut sum = 0.0f64;
        for col in 0..n {
            let value = record.matrix[row * n + col];
            if !value.is_finite() {
                out.push(Violation::NonFinite { row, col });
            } else if value < 0.0 {
                out.push(Violation::Negative { row, col, value });
            }
            sum += value as f64;
        }
        if !(sum - 1.0).abs().le(&ROW_SUM_TOLERANCE) {
            out.push(Violation::RowSum { row, sum });
        }
    }
    out
}

/// Where a signature came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub step_index: u16,
    pub layer_min: u16,
    pub layer_max: u16,
    pub region_kind: RegionKind,
}

/// A seed's early-step attention signature: a probability vector over key
/// tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    seed_id: u32,
    vector: Vec<f64>,
    provenance: Provenance,
}

impl Signature {
    pub fn new(
        seed_id: u32,
        vector: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Signature, AttentionError> {
        if vector.is_empty() {
            return Err(AttentionError::EmptySignature);
        }
        let mut sum = 0.0f64;
        for (index, &value) in vector.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(AttentionError::SignatureNegativeEntry { index, value });
            }
            sum += value;
        }
        if !(sum - 1.0).abs().le(&SIGNATURE_SUM_TOLERANCE) {
            return Err(AttentionError::SignatureSum(sum));
        }
        Ok(Signature {
            seed_id,
            vector,
            provenance,
        })
    }

    pub fn seed_id(&self) -> u32 {
        self.seed_id
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Maps a binary frame mask to the slice-0 tokens whose cell coverage meets
/// `coverage_threshold`.
///
/// Coverage of a cell is the fraction of its (edge-clipped) pixel area that
/// is masked; `InverseForeground` uses the unmasked fraction instead. The
/// comparison is `>=` on both sides, so a cell at exactly the threshold
/// appears in both the foreground and inverse-foreground sets.
pub fn mask_to_tokens(
    mask: &BinaryMask,
    grid: &TokenGrid,
    region: RegionKind,
    coverage_threshold: f64,
) -> Result<TokenSet, AttentionError> {
    if !(coverage_threshold > 0.0 && coverage_threshold <= 1.0) {
        return Err(AttentionError::InvalidThreshold(coverage_threshold));
    }
    if mask.width() != grid.frame_width() || mask.height() != grid.frame_height() {
        return Err(AttentionError::MaskDimensionMismatch {
            mask_width: mask.width(),
            mask_height: mask.height(),
            frame_width: grid.frame_width(),
            frame_height: grid.frame_height(),
        });
    }
    let mut indices = Vec::new();
    for h in 0..grid.height_tokens() {
        for w in 0..grid.width_tokens() {
            let y0 = h * grid.patch_h();
            let y1 = (y0 + grid.patch_h()).min(grid.frame_height());
            let x0 = w * grid.patch_w();
            let x1 = (x0 + grid.patch_w()).min(grid.frame_width());
            let area = (y1 - y0) * (x1 - x0);
            let mut masked = 0usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    if mask.get(x, y) {
                        masked += 1;
                    }
                }
            }
            let covered = match region {
                RegionKind::Foreground | RegionKind::PlacementMask => masked,
                RegionKind::InverseForeground => area - masked,
            };
            if covered as f64 >= coverage_threshold * area as f64 {
                indices.push(grid.cell_to_token(0, h, w)?);
            }
        }
    }
    TokenSet::new(indices, region, grid)
}

/// Aggregates one seed's records over `layer_min..=layer_max` into a
/// signature: per layer, the mean of the attention rows indexed by `tokens`;
/// then the mean across layers, renormalized to sum exactly toward 1.
///
/// Summation order is fixed (ascending layer, ascending token, ascending
/// key), so any permutation of `records` produces a bitwise-identical
/// signature.
pub fn aggregate_signature(
    records: &[AttentionRecord],
    layer_min: u16,
    layer_max: u16,
    tokens: &TokenSet,
) -> Result<Signature, AttentionError> {
    if records.is_empty() {
        return Err(AttentionError::NoRecords);
    }
    if layer_min > layer_max {
        return Err(AttentionError::InvalidLayerRange {
            min: layer_min,
            max: layer_max,
        });
    }
    let first = &records[0];
    for rec in records {
        if rec.grid != first.grid {
            return Err(AttentionError::GridMismatch);
        }
        if rec.seed_id != first.seed_id {
            return Err(AttentionError::SeedMismatch {
                first: first.seed_id,
                other: rec.seed_id,
            });
        }
        if rec.step_index != first.step_index {
            return Err(AttentionError::StepMismatch {
                first: first.step_index,
                other: rec.step_index,
            });
        }
    }
    let total = first.grid.total_tokens();
    let last_token = *tokens.indices().last().expect("token set is non-empty");
    if last_token >= total {
        return Err(GridError::TokenOutOfRange {
            index: last_token,
            total,
        }
        .into());
    }

    let mut acc = vec![0.0f64; total];
    for layer in layer_min..=layer_max {
        let mut found: Option<&AttentionRecord> = None;
        for rec in records {
            if rec.layer_index == layer {
                if found.is_some() {
                    return Err(AttentionError::DuplicateLayer(layer));
                }
                found = Some(rec);
            }
        }
        let rec = found.ok_or(AttentionError::MissingLayer(layer))?;
        for &q in tokens.indices() {
            let row = &rec.matrix[q * total..(q + 1) * total];
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v as f64;
            }
        }
    }

    let layers = (layer_max - layer_min + 1) as f64;
    let scale = layers * tokens.len() as f64;
    for a in acc.iter_mut() {
        *a /= scale;
    }
    // f32 rows sum to 1 only within ROW_SUM_TOLERANCE; renormalize so the
    // signature meets its tighter sum invariant.
    let sum: f64 = acc.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(AttentionError::DegenerateAggregate(sum));
    }
    for a in acc.iter_mut() {
        *a /= sum;
    }
    Signature::new(
        first.seed_id,
        acc,
        Provenance {
            step_index: first.step_index,
            layer_min,
            layer_max,
            region_kind: tokens.region_kind(),
        },
    )
}
