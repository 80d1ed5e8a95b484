use crate::types::{BoundingBox, FrameImage};

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    /// Panics if the buffer length does not match the dimensions.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "gray buffer size");
        Self { width, height, values }
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self::from_values(width, height, vec![v; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::from_values(width, height, values)
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
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    /// Value with coordinates clamped to the image.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Bilinear sample at continuous pixel-centre coordinates, or `None`
    /// outside `[0, w-1] x [0, h-1]`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y) {
            return None;
        }
        Some(self.sample_inside(x, y))
    }

    /// Bilinear sample of a point already known to lie in
    /// `[0, width-1] × [0, height-1]`.
    #[inline]
    pub fn sample_inside(&self, x: f64, y: f64) -> f64 {
        debug_assert!(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64);
        // non-negative here, so truncation is floor (and avoids a libm call)
        let x0 = x as usize;
        let y0 = y as usize;
        let dx = usize::from(x0 + 1 < self.width);
        let dy = if y0 + 1 < self.height { self.width } else { 0 };
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let i = y0 * self.width + x0;
        let v = &self.values;
        let top = v[i] * (1.0 - fx) + v[i + dx] * fx;
        let bottom = v[i + dy] * (1.0 - fx) + v[i + dy + dx] * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Copy of a sub-rectangle. The box must lie inside the image.
    pub fn crop(&self, b: &BoundingBox) -> GrayImage {
        GrayImage::from_fn(b.w, b.h, |x, y| self.get(b.x + x, b.y + y))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage::from_values(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Luma conversion: `(0.299 R + 0.587 G + 0.114 B) / 255`.
pub fn to_gray(frame: &FrameImage) -> GrayImage {
    let values = frame
        .pixels()
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]))
        .collect();
    GrayImage::from_values(frame.width(), frame.height(), values)
}

#[inline]
pub(crate) fn luma(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Hexcone HSV. Hue is stored as 0 for achromatic pixels.
pub fn hsv_pixel(rgb: [u8; 3]) -> Hsv {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return Hsv { h: 0.0, s, v };
    }
    let h = if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let h = h.rem_euclid(360.0);
    Hsv {
        h: if h >= 360.0 { 0.0 } else { h },
        s,
        v,
    }
}

pub fn rgb_to_hsv(frame: &FrameImage) -> Vec<Hsv> {
    frame
        .pixels()
        .chunks_exact(3)
        .map(|p| hsv_pixel([p[0], p[1], p[2]]))
        .collect()
}
