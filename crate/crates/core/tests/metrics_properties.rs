//! Property tests for the evaluation metrics: objmc is a metric on
//! centroids, centroid-aligned IoU is translation-blind, and crops are
//! invariant to where the object sits in the frame.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use s2m_core::metrics::{ca_iou, crop_object, objmc};
use s2m_core::raster::{BinaryMask, Image};

const FRAME: usize = 24;

fn seeded_mask(seed: u64, x: usize, y: usize, w: usize, h: usize) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = BinaryMask::filled(FRAME, FRAME, false).unwrap();
    for py in y..y + h {
        for px in x..x + w {
            if rng.random_range(0..3) != 0 {
                mask.set(px, py, true);
            }
        }
    }
    mask.set(x, y, true);
    mask
}

fn box_params() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..12, 1usize..12, 2usize..8, 2usize..8)
}

proptest! {
    #[test]
    fn prop_objmc_is_symmetric_and_triangular(
        a in box_params(),
        b in box_params(),
        c in box_params(),
        seed in 0u64..1000,
    ) {
        let ma = seeded_mask(seed, a.0, a.1, a.2, a.3);
        let mb = seeded_mask(seed + 1, b.0, b.1, b.2, b.3);
        let mc = seeded_mask(seed + 2, c.0, c.1, c.2, c.3);
        let ab = objmc(&ma, &mb).unwrap();
        let ba = objmc(&mb, &ma).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        let ac = objmc(&ma, &mc).unwrap();
        let bc = objmc(&mb, &mc).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn prop_ca_iou_is_one_for_any_integer_translation(
        (x, y, w, h) in box_params(),
        shift_x in -8i64..9,
        shift_y in -8i64..9,
        seed in 0u64..1000,
    ) {
        let mask = seeded_mask(seed, x, y, w, h);
        let bbox = mask.bbox().unwrap();
        // keep every pixel in frame so translated() does not clip
        let dx = shift_x
            .clamp(-(bbox.x as i64), (FRAME - bbox.x - bbox.width) as i64);
        let dy = shift_y
            .clamp(-(bbox.y as i64), (FRAME - bbox.y - bbox.height) as i64);
        let moved = mask.translated(dx, dy);
        prop_assert_eq!(moved.count(), mask.count());
        prop_assert_eq!(ca_iou(&moved, &mask).unwrap(), 1.0);
        // objmc sees exactly the translation length
        let expected = ((dx * dx + dy * dy) as f64).sqrt();
        prop_assert!((objmc(&moved, &mask).unwrap() - expected).abs() <= 1e-9);
    }

    #[test]
    fn prop_crops_ignore_object_position(
        (x, y, w, h) in (1usize..10, 1usize..10, 2usize..8, 2usize..8),
        shift_x in 0i64..8,
        shift_y in 0i64..8,
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frame = Image::filled(FRAME, FRAME, &[0, 0, 0]).unwrap();
        let mut mask = BinaryMask::filled(FRAME, FRAME, false).unwrap();
        for py in y..y + h {
            for px in x..x + w {
                let color = [rng.random_range(0..=255u8); 3];
                frame.set_pixel(px, py, &color);
                mask.set(px, py, true);
            }
        }
        let dx = shift_x.min((FRAME - x - w) as i64);
        let dy = shift_y.min((FRAME - y - h) as i64);
        let mut moved_frame = Image::filled(FRAME, FRAME, &[0, 0, 0]).unwrap();
        for py in y..y + h {
            for px in x..x + w {
                let color = frame.pixel(px, py).to_vec();
                moved_frame.set_pixel(
                    (px as i64 + dx) as usize,
                    (py as i64 + dy) as usize,
                    &color,
                );
            }
        }
        let moved_mask = mask.translated(dx, dy);
        let base = crop_object(&frame, &mask, 0).unwrap();
        let moved = crop_object(&moved_frame, &moved_mask, 1).unwrap();
        prop_assert!(!base.empty && !moved.empty);
        prop_assert_eq!(base.image.data(), moved.image.data());
    }
}
