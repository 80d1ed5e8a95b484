use crate::types::BoundingBox;

/// A binary bitmap.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask buffer size");
        Self { width, height, bits }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
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
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Pixel-wise `self AND NOT other`.
    pub fn subtract(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && !b).collect();
        BinaryMask::from_bits(self.width, self.height, bits)
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.bits.iter().zip(&other.bits).filter(|(&a, &b)| a && b).count()
    }

    pub fn crop(&self, b: &BoundingBox) -> BinaryMask {
        BinaryMask::from_fn(b.w, b.h, |x, y| self.get(b.x + x, b.y + y))
    }
}

// Square structuring element applied separably. Pixels outside the image are
// neutral: they never set a pixel under dilation and never clear one under
// erosion, so shapes touching the border are not eaten away.
fn sweep(mask: &BinaryMask, radius: usize, dilate: bool) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    // dilation looks for any set pixel, erosion for any clear one
    let probe = dilate;
    let mut rows = vec![false; w * h];
    for y in 0..h {
        let row = &mask.bits[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            let found = row[lo..=hi].contains(&probe);
            rows[y * w + x] = found == dilate;
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for x in 0..w {
            let found = (lo..=hi).any(|yy| rows[yy * w + x] == probe);
            out[y * w + x] = found == dilate;
        }
    }
    BinaryMask::from_bits(w, h, out)
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 || mask.bits.is_empty() {
        return mask.clone();
    }
    sweep(mask, radius, true)
}

pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 || mask.bits.is_empty() {
        return mask.clone();
    }
    sweep(mask, radius, false)
}

/// Morphological closing with a `(2 radius + 1)` square: `iterations`
/// dilations followed by the same number of erosions.
pub fn morph_close(mask: &BinaryMask, radius: usize, iterations: usize) -> BinaryMask {
    let mut out = mask.clone();
    for _ in 0..iterations {
        out = dilate(&out, radius);
    }
    for _ in 0..iterations {
        out = erode(&out, radius);
    }
    out
}
