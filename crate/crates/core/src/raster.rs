//! Interleaved 8-bit images and per-pixel boolean masks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("dimensions must be non-zero, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("channel count {0} unsupported, expected 3 or 4")]
    Channels(usize),
    #[error("data length {actual} does not match {width}x{height}x{channels}")]
    DataLength {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("mask data length {actual} does not match {width}x{height}")]
    MaskDataLength {
        width: usize,
        height: usize,
        actual: usize,
    },
}

/// Row-major interleaved 8-bit image, RGB or RGBA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Image, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        if channels != 3 && channels != 4 {
            return Err(RasterError::Channels(channels));
        }
        if data.len() != width * height * channels {
            return Err(RasterError::DataLength {
                width,
                height,
                channels,
                actual: data.len(),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image with every pixel set to `fill` (one value per channel).
    pub fn filled(width: usize, height: usize, fill: &[u8]) -> Result<Image, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        if fill.len() != 3 && fill.len() != 4 {
            return Err(RasterError::Channels(fill.len()));
        }
        let mut data = Vec::with_capacity(width * height * fill.len());
        for _ in 0..width * height {
            data.extend_from_slice(fill);
        }
        Ok(Image {
            width,
            height,
            channels: fill.len(),
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Channel values of pixel (x, y). Panics if out of bounds.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        let o = (y * self.width + x) * self.channels;
        &self.data[o..o + self.channels]
    }

    /// Overwrites pixel (x, y). Panics if out of bounds or `px` has the
    /// wrong channel count.
    pub fn set_pixel(&mut self, x: usize, y: usize, px: &[u8]) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        assert_eq!(px.len(), self.channels, "channel count mismatch");
        let o = (y * self.width + x) * self.channels;
        self.data[o..o + self.channels].copy_from_slice(px);
    }
}

/// Axis-aligned pixel rectangle; `x`/`y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// One boolean per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<BinaryMask, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(RasterError::MaskDataLength {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<BinaryMask, RasterError> {
        BinaryMask::new(width, height, vec![value; width * height])
    }

    /// Mask where pixel (x, y) is `f(x, y)`.
    pub fn from_fn<F: FnMut(usize, usize) -> bool>(
        width: usize,
        height: usize,
        mut f: F,
    ) -> Result<BinaryMask, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        BinaryMask::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Value at (x, y). Panics if out of bounds.
    pub fn get(&self, x: usize, y: usize) -> bool {
        assert!(x < self.width && y < self.height, "mask pixel ({x}, {y}) out of bounds");
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        assert!(x < self.width && y < self.height, "mask pixel ({x}, {y}) out of bounds");
        self.data[y * self.width + x] = value;
    }

    /// Number of set pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Mean of set-pixel integer coordinates, as (x, y); None when empty.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let mut sx = 0u64;
        let mut sy = 0u64;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.data[y * self.width + x] {
                    n += 1;
                    sx += x as u64;
                    sy += y as u64;
                }
            }
        }
        if n == 0 {
            None
        } else {
            Some((sx as f64 / n as f64, sy as f64 / n as f64))
        }
    }

    /// Tight bounding box of set pixels; None when empty.
    pub fn bbox(&self) -> Option<Rect> {
        let mut min_x = usize::MAX;
        let mut min_y = usize::MAX;
        let mut max_x = 0usize;
        let mut max_y = 0usize;
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.data[y * self.width + x] {
                    any = true;
                    min_x = min_x.min(x);
                    min_y = min_y.min(y);
                    max_x = max_x.max(x);
                    max_y = max_y.max(y);
                }
            }
        }
        any.then(|| Rect {
            x: min_x,
            y: min_y,
            width: max_x - min_x + 1,
            height: max_y - min_y + 1,
        })
    }

    /// Mask shifted by (dx, dy) on the same canvas; pixels leaving the
    /// canvas are dropped.
    pub fn translated(&self, dx: i64, dy: i64) -> BinaryMask {
        let mut out = vec![false; self.width * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                if self.data[y * self.width + x] {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                        out[ny as usize * self.width + nx as usize] = true;
                    }
                }
            }
        }
        BinaryMask {
            width: self.width,
            height: self.height,
            data: out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_shapes() {
        assert!(matches!(
            Image::new(0, 4, 3, vec![]),
            Err(RasterError::EmptyDimensions { .. })
        ));
        assert!(matches!(
            Image::new(2, 2, 5, vec![0; 20]),
            Err(RasterError::Channels(5))
        ));
        assert!(matches!(
            Image::new(2, 2, 3, vec![0; 11]),
            Err(RasterError::DataLength { .. })
        ));
    }

    #[test]
    fn pixel_accessors_round_trip() {
        let mut img = Image::filled(3, 2, &[1, 2, 3]).unwrap();
        img.set_pixel(2, 1, &[9, 8, 7]);
        assert_eq!(img.pixel(2, 1), &[9, 8, 7]);
        assert_eq!(img.pixel(0, 0), &[1, 2, 3]);
    }

    #[test]
    fn centroid_is_mean_of_integer_coords() {
        let m = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y < 2).unwrap();
        assert_eq!(m.centroid(), Some((0.5, 0.5)));
        let l = BinaryMask::from_fn(3, 3, |x, y| (x, y) == (0, 0) || (x, y) == (0, 1) || (x, y) == (1, 0)).unwrap();
        let (cx, cy) = l.centroid().unwrap();
        assert!((cx - 1.0 / 3.0).abs() < 1e-15);
        assert!((cy - 1.0 / 3.0).abs() < 1e-15);
        assert!(BinaryMask::filled(2, 2, false).unwrap().centroid().is_none());
    }

    #[test]
    fn bbox_is_tight() {
        let m = BinaryMask::from_fn(5, 4, |x, y| (1..3).contains(&x) && (2..4).contains(&y)).unwrap();
        assert_eq!(
            m.bbox(),
            Some(Rect {
                x: 1,
                y: 2,
                width: 2,
                height: 2
            })
        );
        assert_eq!(BinaryMask::filled(3, 3, false).unwrap().bbox(), None);
    }

    #[test]
    fn translated_clips_at_canvas_edges() {
        let m = BinaryMask::from_fn(4, 4, |x, y| x == 3 && y == 3).unwrap();
        assert_eq!(m.translated(1, 0).count(), 0);
        let shifted = m.translated(-1, -2);
        assert!(shifted.get(2, 1));
        assert_eq!(shifted.count(), 1);
    }
}
