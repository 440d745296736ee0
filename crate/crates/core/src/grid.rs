//! Spatiotemporal token lattice underlying attention records and transport costs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from grid construction and index arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("frame geometry must be non-zero, got {frame_height}x{frame_width} over {frame_count} frames")]
    EmptyFrames {
        frame_height: usize,
        frame_width: usize,
        frame_count: usize,
    },
    #[error("patch sizes must be non-zero, got ({patch_t}, {patch_h}, {patch_w})")]
    EmptyPatch {
        patch_t: usize,
        patch_h: usize,
        patch_w: usize,
    },
    #[error("token index {index} out of range, grid has {total} tokens")]
    TokenOutOfRange { index: usize, total: usize },
    #[error("cell ({t}, {h}, {w}) outside grid {frames_latent}x{height_tokens}x{width_tokens}")]
    CellOutOfRange {
        t: usize,
        h: usize,
        w: usize,
        frames_latent: usize,
        height_tokens: usize,
        width_tokens: usize,
    },
}

/// Pixel-space description of a grid; the serialized form of [`TokenGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub frame_height: usize,
    pub frame_width: usize,
    pub frame_count: usize,
    pub patch_t: usize,
    pub patch_h: usize,
    pub patch_w: usize,
}

impl GridSpec {
    /// Spec whose latent lattice is exactly `frames_latent` x `height_tokens`
    /// x `width_tokens` (unit patches).
    pub fn cells(frames_latent: usize, height_tokens: usize, width_tokens: usize) -> GridSpec {
        GridSpec {
            frame_height: height_tokens,
            frame_width: width_tokens,
            frame_count: frames_latent,
            patch_t: 1,
            patch_h: 1,
            patch_w: 1,
        }
    }
}

/// Token lattice of a patchified video latent.
///
/// Latent extents are ceiling divisions of the pixel extents by the patch
/// sizes, so edge cells may cover a clipped pixel region. Tokens are laid
/// out row-major over (t, h, w): `index = t*H*W + h*W + w` with `H =
/// height_tokens`, `W = width_tokens`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct TokenGrid {
    frame_height: usize,
    frame_width: usize,
    frame_count: usize,
    patch_t: usize,
    patch_h: usize,
    patch_w: usize,
    frames_latent: usize,
    height_tokens: usize,
    width_tokens: usize,
}

fn ceil_div(a: usize, b: usize) -> usize {
    (a + b - 1) / b
}

impl TokenGrid {
    pub fn new(spec: GridSpec) -> Result<TokenGrid, GridError> {
        if spec.frame_height == 0 || spec.frame_width == 0 || spec.frame_count == 0 {
            return Err(GridError::EmptyFrames {
                frame_height: spec.frame_height,
                frame_width: spec.frame_width,
                frame_count: spec.frame_count,
            });
        }
        if spec.patch_t == 0 || spec.patch_h == 0 || spec.patch_w == 0 {
            return Err(GridError::EmptyPatch {
                patch_t: spec.patch_t,
                patch_h: spec.patch_h,
                patch_w: spec.patch_w,
            });
        }
        Ok(TokenGrid {
            frame_height: spec.frame_height,
            frame_width: spec.frame_width,
            frame_count: spec.frame_count,
            patch_t: spec.patch_t,
            patch_h: spec.patch_h,
            patch_w: spec.patch_w,
            frames_latent: ceil_div(spec.frame_count, spec.patch_t),
            height_tokens: ceil_div(spec.frame_height, spec.patch_h),
            width_tokens: ceil_div(spec.frame_width, spec.patch_w),
        })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            frame_height: self.frame_height,
            frame_width: self.frame_width,
            frame_count: self.frame_count,
            patch_t: self.patch_t,
            patch_h: self.patch_h,
            patch_w: self.patch_w,
        }
    }

    pub fn frame_height(&self) -> usize {
        self.frame_height
    }

    pub fn frame_width(&self) -> usize {
        self.frame_width
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn patch_t(&self) -> usize {
        self.patch_t
    }

    pub fn patch_h(&self) -> usize {
        self.patch_h
    }

    pub fn patch_w(&self) -> usize {
        self.patch_w
    }

    pub fn frames_latent(&self) -> usize {
        self.frames_latent
    }

    pub fn height_tokens(&self) -> usize {
        self.height_tokens
    }

    pub fn width_tokens(&self) -> usize {
        self.width_tokens
    }

    /// Tokens in one temporal slice.
    pub fn spatial_tokens(&self) -> usize {
        self.height_tokens * self.width_tokens
    }

    pub fn total_tokens(&self) -> usize {
        self.frames_latent * self.spatial_tokens()
    }

    pub fn cell_to_token(&self, t: usize, h: usize, w: usize) -> Result<usize, GridError> {
        if t >= self.frames_latent || h >= self.height_tokens || w >= self.width_tokens {
            return Err(GridError::CellOutOfRange {
                t,
                h,
                w,
                frames_latent: self.frames_latent,
                height_tokens: self.height_tokens,
                width_tokens: self.width_tokens,
            });
        }
        Ok(t * self.spatial_tokens() + h * self.width_tokens + w)
    }

    pub fn token_to_cell(&self, index: usize) -> Result<(usize, usize, usize), GridError> {
        let total = self.total_tokens();
        if index >= total {
            return Err(GridError::TokenOutOfRange { index, total });
        }
        let spatial = self.spatial_tokens();
        let t = index / spatial;
        let rem = index % spatial;
        Ok((t, rem / self.width_tokens, rem % self.width_tokens))
    }

    /// Cell coordinates (t, h, w) of a token, in cell units.
    pub fn cell_coords(&self, index: usize) -> Result<[f64; 3], GridError> {
        let (t, h, w) = self.token_to_cell(index)?;
        Ok([t as f64, h as f64, w as f64])
    }

    /// Length of the lattice's corner-to-corner diagonal in cell units;
    /// zero for a single-token grid.
    pub fn diagonal(&self) -> f64 {
        let dt = (self.frames_latent - 1) as f64;
        let dh = (self.height_tokens - 1) as f64;
        let dw = (self.width_tokens - 1) as f64;
        (dt * dt + dh * dh + dw * dw).sqrt()
    }
}

impl TryFrom<GridSpec> for TokenGrid {
    type Error = GridError;

    fn try_from(spec: GridSpec) -> Result<TokenGrid, GridError> {
        TokenGrid::new(spec)
    }
}

impl From<TokenGrid> for GridSpec {
    fn from(grid: TokenGrid) -> GridSpec {
        grid.spec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_dims_are_ceiling_divisions() {
        let g = TokenGrid::new(GridSpec {
            frame_height: 480,
            frame_width: 720,
            frame_count: 81,
            patch_t: 1,
            patch_h: 8,
            patch_w: 8,
        })
        .unwrap();
        assert_eq!(g.height_tokens(), 60);
        assert_eq!(g.width_tokens(), 90);
        assert_eq!(g.frames_latent(), 81);
        assert_eq!(g.total_tokens(), 437_400);

        let g = TokenGrid::new(GridSpec {
            frame_height: 28,
            frame_width: 28,
            frame_count: 1,
            patch_t: 1,
            patch_h: 8,
            patch_w: 8,
        })
        .unwrap();
        assert_eq!(g.spatial_tokens(), 16);
    }

    #[test]
    fn token_layout_is_row_major_over_t_h_w() {
        let g = TokenGrid::new(GridSpec::cells(2, 3, 4)).unwrap();
        assert_eq!(g.cell_to_token(1, 2, 3).unwrap(), 23);
        assert_eq!(g.token_to_cell(23).unwrap(), (1, 2, 3));
        assert_eq!(g.cell_to_token(0, 0, 0).unwrap(), 0);
    }

    #[test]
    fn token_round_trip_is_identity() {
        let g = TokenGrid::new(GridSpec {
            frame_height: 17,
            frame_width: 13,
            frame_count: 9,
            patch_t: 4,
            patch_h: 8,
            patch_w: 4,
        })
        .unwrap();
        for index in 0..g.total_tokens() {
            let (t, h, w) = g.token_to_cell(index).unwrap();
            assert_eq!(g.cell_to_token(t, h, w).unwrap(), index);
        }
    }

    #[test]
    fn out_of_range_indices_are_rejected() {
        let g = TokenGrid::new(GridSpec::cells(1, 2, 2)).unwrap();
        assert_eq!(
            g.token_to_cell(4),
            Err(GridError::TokenOutOfRange { index: 4, total: 4 })
        );
        assert!(matches!(
            g.cell_to_token(0, 2, 0),
            Err(GridError::CellOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_dims_are_rejected() {
        assert!(matches!(
            TokenGrid::new(GridSpec {
                frame_height: 0,
                frame_width: 8,
                frame_count: 1,
                patch_t: 1,
                patch_h: 1,
                patch_w: 1,
            }),
            Err(GridError::EmptyFrames { .. })
        ));
        assert!(matches!(
            TokenGrid::new(GridSpec {
                frame_height: 8,
                frame_width: 8,
                frame_count: 1,
                patch_t: 0,
                patch_h: 1,
                patch_w: 1,
            }),
            Err(GridError::EmptyPatch { .. })
        ));
    }

    #[test]
    fn diagonal_matches_lattice_extent() {
        let g = TokenGrid::new(GridSpec::cells(1, 2, 2)).unwrap();
        assert_eq!(g.diagonal(), 2f64.sqrt());
        let g = TokenGrid::new(GridSpec::cells(1, 1, 1)).unwrap();
        assert_eq!(g.diagonal(), 0.0);
    }

    #[test]
    fn serde_round_trip_preserves_grid() {
        let g = TokenGrid::new(GridSpec {
            frame_height: 48,
            frame_width: 64,
            frame_count: 8,
            patch_t: 2,
            patch_h: 8,
            patch_w: 8,
        })
        .unwrap();
        let json = serde_json::to_string(&g).unwrap();
        let back: TokenGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }
}
