//! PNG adapters between disk and the in-memory raster types.

use crate::error::CliError;
use s2m_core::raster::{BinaryMask, Image};
use std::path::Path;

fn open(path: &Path) -> Result<image::DynamicImage, CliError> {
    if !path.exists() {
        return Err(CliError::missing_file(path));
    }
    image::open(path)
        .map_err(|e| CliError::data("image", format!("{}: {e}", path.display())))
}

/// Loads any PNG as 3-channel RGB (alpha dropped, grayscale promoted).
pub fn load_rgb(path: &Path) -> Result<Image, CliError> {
    let img = open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Image::new(w, h, 3, img.into_raw())?)
}

/// Loads a PNG as a mask: a pixel is inside when any color channel is
/// nonzero. Alpha is ignored, so opaque black stays outside.
pub fn load_mask(path: &Path) -> Result<BinaryMask, CliError> {
    let img = open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| p.0.iter().any(|&c| c != 0)).collect();
    Ok(BinaryMask::new(w, h, data)?)
}

pub fn save_rgb(path: &Path, img: &Image) -> Result<(), CliError> {
    if img.channels() != 3 {
        return Err(CliError::data(
            "image",
            format!("expected a 3-channel image, got {}", img.channels()),
        ));
    }
    image::save_buffer(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        image::ColorType::Rgb8,
    )?;
    Ok(())
}

/// Writes a mask as 8-bit grayscale, 255 inside and 0 outside.
pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<(), CliError> {
    let data: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    image::save_buffer(
        path,
        &data,
        mask.width() as u32,
        mask.height() as u32,
        image::ColorType::L8,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_and_mask_round_trip_through_png() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::new(3, 2, 3, vec![
            0, 0, 0, 255, 0, 0, 0, 255, 0,
            0, 0, 255, 128, 128, 128, 255, 255, 255,
        ])
        .unwrap();
        let path = dir.path().join("f.png");
        save_rgb(&path, &img).unwrap();
        assert_eq!(load_rgb(&path).unwrap(), img);

        let mask = BinaryMask::new(3, 2, vec![true, false, true, false, true, false]).unwrap();
        let mpath = dir.path().join("m.png");
        save_mask(&mpath, &mask).unwrap();
        assert_eq!(load_mask(&mpath).unwrap(), mask);
    }

    #[test]
    fn missing_file_reports_the_path() {
        let err = load_rgb(Path::new("/nonexistent/frame.png")).unwrap_err();
        assert_eq!(err.kind, "missing_file");
        assert!(err.message.contains("/nonexistent/frame.png"));
    }
}
