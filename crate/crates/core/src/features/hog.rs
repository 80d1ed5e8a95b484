//! Histogram of oriented gradients over a resized hand crop.
//!
//! The crop is resized to 48×128 (h×w), split into 8×8 cells and each cell
//! gets a 10-bin histogram of unsigned gradient orientation weighted by
//! magnitude: 6 × 16 cells × 10 bins = 960 values.

use crate::imaging::{to_gray, GrayImage};
use crate::types::{BoundingBox, FrameImage};

pub const HOG_HEIGHT: usize = 48;
pub const HOG_WIDTH: usize = 128;
pub const HOG_CELL: usize = 8;
pub const HOG_BINS: usize = 10;
pub const HOG_DIM: usize = (HOG_HEIGHT / HOG_CELL) * (HOG_WIDTH / HOG_CELL) * HOG_BINS;

/// Smallest box side, after clamping, that still yields a feature.
pub const HOG_MIN_SIDE: usize = 8;

const EPS: f64 = 1e-6;

/// Bilinear resize that maps pixel centres onto pixel centres.
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    GrayImage::from_fn(width, height, |x, y| {
        let u = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
        let v = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        img.sample(u, v).expect("clamped inside")
    })
}

/// HOG descriptor of an already-resized 48×128 image.
pub fn hog_descriptor(img: &GrayImage) -> Vec<f64> {
    assert_eq!((img.width(), img.height()), (HOG_WIDTH, HOG_HEIGHT), "HOG input size");
    let cells_x = HOG_WIDTH / HOG_CELL;
    let cells_y = HOG_HEIGHT / HOG_CELL;
    let bin_width = 180.0 / HOG_BINS as f64;
    let mut out = vec![0.0; HOG_DIM];
    for y in 0..HOG_HEIGHT as isize {
        for x in 0..HOG_WIDTH as isize {
            let gx = (img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y)) / 2.0;
            let gy = (img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1)) / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let deg = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let bin = ((deg / bin_width) as usize).min(HOG_BINS - 1);
            let cell = (y as usize / HOG_CELL) * cells_x + x as usize / HOG_CELL;
            out[cell * HOG_BINS + bin] += mag;
        }
    }
    for cell in out.chunks_exact_mut(HOG_BINS).take(cells_x * cells_y) {
        let norm = (cell.iter().map(|v| v * v).sum::<f64>() + EPS * EPS).sqrt();
        cell.iter_mut().for_each(|v| *v /= norm);
    }
    out
}

/// 960-value HOG of the gray crop under `bbox`, or `None` when the box,
/// clamped to the image, is narrower or shorter than [`HOG_MIN_SIDE`].
pub fn hog_raw_gray(gray: &GrayImage, bbox: &BoundingBox) -> Option<Vec<f64>> {
    let b = bbox.clamp_to(gray.width(), gray.height())?;
    if b.w < HOG_MIN_SIDE || b.h < HOG_MIN_SIDE {
        return None;
    }
    let crop = gray.crop(&b);
    Some(hog_descriptor(&resize_bilinear(&crop, HOG_WIDTH, HOG_HEIGHT)))
}

/// [`hog_raw_gray`] on a colour frame.
pub fn hog_raw(frame: &FrameImage, bbox: &BoundingBox) -> Option<Vec<f64>> {
    let b = bbox.clamp_to(frame.width(), frame.height())?;
    if b.w < HOG_MIN_SIDE || b.h < HOG_MIN_SIDE {
        return None;
    }
    let gray = to_gray(&frame.crop(&b));
    hog_raw_gray(&gray, &BoundingBox::new(0, 0, b.w, b.h))
}
