use crate::imaging::BinaryMask;
use crate::types::BoundingBox;

/// Which part of the frame a pixel belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Region {
    Hand = 0,
    /// Inside the re-centred box but not hand.
    Neighbourhood = 1,
    /// Outside the re-centred box.
    Background = 2,
}

/// Partition of a frame into hand, boxed neighbourhood and background.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionTriple {
    width: usize,
    height: usize,
    labels: Vec<Region>,
    counts: [usize; 3],
}

impl RegionTriple {
    /// `hand` is local to `recentred_box`, which must lie inside the frame.
    pub fn new(width: usize, height: usize, recentred_box: &BoundingBox, hand: &BinaryMask) -> Self {
        assert_eq!(
            (hand.width(), hand.height()),
            (recentred_box.w, recentred_box.h),
            "hand mask must match the box"
        );
        let mut labels = vec![Region::Background; width * height];
        let mut counts = [0, 0, width * height];
        for ly in 0..recentred_box.h {
            for lx in 0..recentred_box.w {
                let r = if hand.get(lx, ly) { Region::Hand } else { Region::Neighbourhood };
                labels[(recentred_box.y + ly) * width + recentred_box.x + lx] = r;
                counts[r as usize] += 1;
                counts[Region::Background as usize] -= 1;
            }
        }
        Self {
            width,
            height,
            labels,
            counts,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn region(&self, x: usize, y: usize) -> Region {
        self.labels[y * self.width + x]
    }

    /// Row-major labels.
    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    pub fn count(&self, r: Region) -> usize {
        self.counts[r as usize]
    }

    /// True when none of the three regions is empty.
    pub fn all_nonempty(&self) -> bool {
        self.counts.iter().all(|&c| c > 0)
    }
}
