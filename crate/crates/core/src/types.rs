//! Domain types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BinaryMask;

/// One decoded RGB frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameImage {
    pub index: usize,
    pub timestamp_s: f64,
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl FrameImage {
    /// Builds a frame from a row-major RGB buffer. The timestamp is `index / fps`.
    pub fn new(index: usize, fps: f64, width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation("frame", "width and height must be positive"));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::dims(width * height * 3, pixels.len()));
        }
        Ok(Self {
            index,
            timestamp_s: index as f64 / fps,
            width,
            height,
            pixels,
        })
    }

    /// A frame filled with a single colour.
    pub fn filled(index: usize, fps: f64, width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(index, fps, width, height, pixels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_rgb(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn bounds(&self) -> BoundingBox {
        BoundingBox::new(0, 0, self.width, self.height)
    }

    /// Copy of a sub-rectangle with the same index and timestamp. The box
    /// must lie inside the frame.
    pub fn crop(&self, b: &BoundingBox) -> FrameImage {
        let mut pixels = Vec::with_capacity(b.w * b.h * 3);
        for y in b.y..b.y + b.h {
            let row = (y * self.width + b.x) * 3;
            pixels.extend_from_slice(&self.pixels[row..row + b.w * 3]);
        }
        FrameImage {
            index: self.index,
            timestamp_s: self.timestamp_s,
            width: b.w,
            height: b.h,
            pixels,
        }
    }

    /// Frame diagonal in pixels.
    pub fn diagonal(&self) -> f64 {
        ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }
}

/// Axis-aligned box in pixel coordinates; `(x, y)` is the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.w + self.h) as f64
    }

    /// Geometric centre, in continuous pixel coordinates.
    pub fn centre(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn is_within(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.right() <= width && self.bottom() <= height
    }

    /// A box of the given size centred (as nearly as integer pixels allow) on
    /// `(cx, cy)`, shifted so that it lies inside a `width` x `height` frame.
    /// The size shrinks only when the frame itself is smaller.
    pub fn centred_at(cx: f64, cy: f64, w: usize, h: usize, width: usize, height: usize) -> Self {
        let w = w.min(width).max(1);
        let h = h.min(height).max(1);
        let place = |c: f64, len: usize, limit: usize| -> usize {
            let start = (c - len as f64 / 2.0).round();
            start.clamp(0.0, (limit - len) as f64) as usize
        };
        Self::new(place(cx, w, width), place(cy, h, height), w, h)
    }

    /// Intersection with the frame, or `None` when nothing of the box is visible.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<Self> {
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        if self.x >= x1 || self.y >= y1 {
            return None;
        }
        Some(Self::new(self.x, self.y, x1 - self.x, y1 - self.y))
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> usize {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Which person a hand belongs to, as seen from the wearer's viewpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laterality {
    Left,
    Right,
    Other,
}

impl Laterality {
    pub const ALL: [Laterality; 3] = [Laterality::Left, Laterality::Right, Laterality::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Laterality::Left => "left",
            Laterality::Right => "right",
            Laterality::Other => "other",
        }
    }

    /// Left and right swap under a horizontal mirror; other stays other.
    pub fn mirrored(&self) -> Self {
        match self {
            Laterality::Left => Laterality::Right,
            Laterality::Right => Laterality::Left,
            Laterality::Other => Laterality::Other,
        }
    }
}

impl std::fmt::Display for Laterality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Laterality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Laterality::Left),
            "right" => Ok(Laterality::Right),
            "other" => Ok(Laterality::Other),
            _ => Err(Error::validation("laterality", format!("unknown value `{s}`"))),
        }
    }
}

/// A verified, segmented hand in one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct HandObservation {
    pub frame_index: usize,
    /// Box as supplied by the detector.
    pub bbox: BoundingBox,
    pub recentred_box: BoundingBox,
    pub laterality: Laterality,
    /// Hand pixels, local to `recentred_box`.
    pub mask: BinaryMask,
    pub detector_confidence: f64,
}

/// The single angle convention used throughout the crate.
///
/// Angles are in degrees. 0° points toward the left image edge and angles
/// increase through the top: 90° is up, 180° is right, 270° is down. This is
/// the only convention under which "0-180° = top", "180-270° = bottom right"
/// and "270-360° = bottom left" all hold at once.
pub mod angle {
    /// Unit step in image coordinates (y grows downward) for an angle.
    #[inline]
    pub fn direction(deg: f64) -> (f64, f64) {
        let r = deg.to_radians();
        (-r.cos(), -r.sin())
    }

    /// Angle of an image-space vector in `[0, 360)`. The zero vector maps to 0.
    #[inline]
    pub fn of_vector(dx: f64, dy: f64) -> f64 {
        if dx == 0.0 && dy == 0.0 {
            return 0.0;
        }
        let deg = (-dy).atan2(-dx).to_degrees();
        let deg = deg.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative inputs
        if deg >= 360.0 {
            0.0
        } else {
            deg
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_convention_cardinals() {
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12;
        assert!(close(angle::direction(0.0), (-1.0, 0.0)));
        assert!(close(angle::direction(90.0), (0.0, -1.0)));
        assert!(close(angle::direction(180.0), (1.0, 0.0)));
        assert!(close(angle::direction(270.0), (0.0, 1.0)));
        // bottom-left diagonal
        let (dx, dy) = angle::direction(315.0);
        assert!(dx < 0.0 && dy > 0.0);
    }

    #[test]
    fn angle_round_trip() {
        for d in 0..360 {
            let (dx, dy) = angle::direction(d as f64);
            assert!((angle::of_vector(dx, dy) - d as f64).abs() < 1e-9, "{d}");
        }
        assert_eq!(angle::of_vector(0.0, 0.0), 0.0);
    }

    #[test]
    fn frame_rejects_bad_buffer() {
        assert!(FrameImage::new(0, 30.0, 2, 2, vec![0; 11]).is_err());
        assert!(FrameImage::new(0, 30.0, 0, 2, vec![]).is_err());
        let f = FrameImage::new(60, 30.0, 2, 2, vec![0; 12]).unwrap();
        assert_eq!(f.timestamp_s, 2.0);
    }

    #[test]
    fn centred_box_is_clamped() {
        let b = BoundingBox::centred_at(2.0, 2.0, 10, 10, 100, 50);
        assert_eq!(b, BoundingBox::new(0, 0, 10, 10));
        let b = BoundingBox::centred_at(99.0, 49.0, 10, 10, 100, 50);
        assert_eq!(b, BoundingBox::new(90, 40, 10, 10));
        let b = BoundingBox::centred_at(50.0, 25.0, 10, 10, 100, 50);
        assert_eq!(b, BoundingBox::new(45, 20, 10, 10));
    }

    #[test]
    fn iou_basics() {
        let a = BoundingBox::new(0, 0, 10, 10);
        assert_eq!(a.iou(&a), 1.0);
        let b = BoundingBox::new(5, 0, 10, 10);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(a.iou(&BoundingBox::new(20, 20, 5, 5)), 0.0);
    }
}
