//! Outer contours of 8-connected foreground components.

use std::collections::VecDeque;

use crate::imaging::BinaryMask;
use crate::types::BoundingBox;

/// Outer boundary of one 8-connected component.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    /// Boundary pixels in tracing order (clockwise on screen), starting at the
    /// top-most, left-most pixel. The chain is closed implicitly.
    pub boundary: Vec<(usize, usize)>,
    /// Every pixel enclosed by the boundary (component plus holes), row-major.
    pub filled: Vec<(usize, usize)>,
    /// Enclosed pixel count, equal to `filled.len()`.
    pub area: usize,
    /// Length of the closed polygon through the boundary pixel centres.
    pub arc_length: f64,
    /// Tight box around the component.
    pub bbox: BoundingBox,
}

impl Contour {
    /// Mean position of the enclosed pixels.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.filled.len() as f64;
        let (sx, sy) = self
            .filled
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        (sx / n, sy / n)
    }

    /// The enclosed pixel with the smallest y; ties go to the smallest x.
    pub fn top_pixel(&self) -> (usize, usize) {
        // filled is row-major, so the first entry is the answer
        self.filled[0]
    }

    /// Filled region rasterized into a mask of the given size.
    pub fn to_mask(&self, width: usize, height: usize) -> BinaryMask {
        let mut m = BinaryMask::new(width, height);
        for &(x, y) in &self.filled {
            if x < width && y < height {
                m.set(x, y, true);
            }
        }
        m
    }

    /// Translates every coordinate by `(dx, dy)`.
    pub fn offset(mut self, dx: usize, dy: usize) -> Contour {
        for p in self.boundary.iter_mut().chain(self.filled.iter_mut()) {
            p.0 += dx;
            p.1 += dy;
        }
        self.bbox.x += dx;
        self.bbox.y += dy;
        self
    }
}

// Clockwise on screen (y grows downward), starting west.
const DIRS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_index(d: (isize, isize)) -> usize {
    DIRS.iter().position(|&v| v == d).expect("unit neighbour offset")
}

/// Component labels (0 = background, k = k-th component in raster order of
/// first pixel) and the pixels of each component.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<Vec<(usize, usize)>>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels[y * w + x] != 0 {
                continue;
            }
            let id = comps.len() as u32 + 1;
            let mut pixels = Vec::new();
            labels[y * w + x] = id;
            queue.push_back((x, y));
            while let Some((px, py)) = queue.pop_front() {
                pixels.push((px, py));
                for (dx, dy) in DIRS {
                    let nx = px as isize + dx;
                    let ny = py as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.get(nx, ny) && labels[ny * w + nx] == 0 {
                        labels[ny * w + nx] = id;
                        queue.push_back((nx, ny));
                    }
                }
            }
            pixels.sort_by_key(|&(x, y)| (y, x));
            comps.push(pixels);
        }
    }
    (labels, comps)
}

fn trace_boundary(labels: &[u32], w: usize, h: usize, id: u32, start: (usize, usize)) -> Vec<(usize, usize)> {
    let is_fg = |x: isize, y: isize| {
        x >= 0 && y >= 0 && x < w as isize && y < h as isize && labels[y as usize * w + x as usize] == id
    };
    let mut boundary = vec![start];
    let (mut px, mut py) = (start.0 as isize, start.1 as isize);
    // the start pixel is the first of its component in raster order, so its
    // west neighbour is background
    let mut back = 0usize;
    let mut first_move: Option<usize> = None;
    loop {
        let mut found = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            if is_fg(px + DIRS[d].0, py + DIRS[d].1) {
                found = Some(d);
                break;
            }
        }
        let Some(d) = found else {
            break; // isolated pixel
        };
        if (px, py) == (start.0 as isize, start.1 as isize) {
            match first_move {
                None => first_move = Some(d),
                Some(f) if f == d => break,
                Some(_) => {}
            }
        }
        // the neighbour examined just before `d` is background; it becomes the
        // backtrack point relative to the new position
        let prev = DIRS[(d + 7) % 8];
        let (nx, ny) = (px + DIRS[d].0, py + DIRS[d].1);
        let rel = (px + prev.0 - nx, py + prev.1 - ny);
        back = dir_index(rel);
        px = nx;
        py = ny;
        boundary.push((px as usize, py as usize));
    }
    // the loop re-appends the start pixel when it closes the chain
    if boundary.len() > 1 && boundary.last() == boundary.first() {
        boundary.pop();
    }
    boundary
}

fn closed_length(chain: &[(usize, usize)]) -> f64 {
    if chain.len() < 2 {
        return 0.0;
    }
    let step = |a: (usize, usize), b: (usize, usize)| {
        let dx = a.0 as f64 - b.0 as f64;
        let dy = a.1 as f64 - b.1 as f64;
        (dx * dx + dy * dy).sqrt()
    };
    let open: f64 = chain.windows(2).map(|p| step(p[0], p[1])).sum();
    open + step(chain[chain.len() - 1], chain[0])
}

fn fill_holes(labels: &[u32], w: usize, id: u32, bbox: &BoundingBox) -> Vec<(usize, usize)> {
    // flood the padded bounding box from outside; whatever is not reached
    // is the component or enclosed by it
    let pw = bbox.w + 2;
    let ph = bbox.h + 2;
    let member = |lx: usize, ly: usize| -> bool {
        if lx == 0 || ly == 0 || lx > bbox.w || ly > bbox.h {
            return false;
        }
        labels[(bbox.y + ly - 1) * w + bbox.x + lx - 1] == id
    };
    let mut outside = vec![false; pw * ph];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    outside[0] = true;
    while let Some((x, y)) = queue.pop_front() {
        // background connectivity is 4-connected, the dual of 8-connected
        // foreground
        let nbrs = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
        for (nx, ny) in nbrs {
            if nx >= pw || ny >= ph || outside[ny * pw + nx] || member(nx, ny) {
                continue;
            }
            outside[ny * pw + nx] = true;
            queue.push_back((nx, ny));
        }
    }
    let mut filled = Vec::new();
    for ly in 1..=bbox.h {
        for lx in 1..=bbox.w {
            if !outside[ly * pw + lx] {
                filled.push((bbox.x + lx - 1, bbox.y + ly - 1));
            }
        }
    }
    filled
}

/// One contour per 8-connected component, ordered by each component's first
/// pixel in raster order. Only outer boundaries are reported; holes count
/// toward the enclosed area.
pub fn find_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (w, h) = (mask.width(), mask.height());
    let (labels, comps) = label_components(mask);
    comps
        .iter()
        .enumerate()
        .map(|(i, pixels)| {
            let id = i as u32 + 1;
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            for &(x, y) in pixels {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
            let bbox = BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
            let boundary = trace_boundary(&labels, w, h, id, pixels[0]);
            let filled = fill_holes(&labels, w, id, &bbox);
            Contour {
                arc_length: closed_length(&boundary),
                area: filled.len(),
                boundary,
                filled,
                bbox,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x0 + side && y >= y0 && y < y0 + side)
    }

    #[test]
    fn filled_square_area_and_perimeter() {
        let cs = find_contours(&square(20, 20, 4, 5, 10));
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].area, 100);
        // polygon through pixel centres of a 10x10 block is a 9x9 square
        assert!((cs[0].arc_length - 36.0).abs() < 1e-12);
        assert_eq!(cs[0].boundary.len(), 36);
        assert_eq!(cs[0].bbox, BoundingBox::new(4, 5, 10, 10));
        assert_eq!(cs[0].top_pixel(), (4, 5));
    }

    #[test]
    fn two_disjoint_squares() {
        let a = square(30, 30, 1, 1, 5);
        let b = square(30, 30, 15, 15, 6);
        let m = BinaryMask::from_fn(30, 30, |x, y| a.get(x, y) || b.get(x, y));
        let cs = find_contours(&m);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].area, 25);
        assert_eq!(cs[1].area, 36);
    }

    #[test]
    fn diagonal_pixels_are_one_component() {
        let m = BinaryMask::from_fn(5, 5, |x, y| x == y);
        let cs = find_contours(&m);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].area, 5);
        // traced out and back along the diagonal
        assert!((cs[0].arc_length - 8.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_no_contours() {
        assert!(find_contours(&BinaryMask::new(8, 8)).is_empty());
    }

    #[test]
    fn single_pixel() {
        let mut m = BinaryMask::new(3, 3);
        m.set(1, 1, true);
        let cs = find_contours(&m);
        assert_eq!(cs[0].area, 1);
        assert_eq!(cs[0].arc_length, 0.0);
        assert_eq!(cs[0].boundary, vec![(1, 1)]);
    }

    #[test]
    fn ring_encloses_its_hole() {
        let m = BinaryMask::from_fn(12, 12, |x, y| {
            (2..10).contains(&x) && (2..10).contains(&y) && !((4..8).contains(&x) && (4..8).contains(&y))
        });
        let cs = find_contours(&m);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].area, 64);
        assert!((cs[0].arc_length - 28.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_pixels_touch_background() {
        let m = BinaryMask::from_fn(20, 16, |x, y| {
            let dx = x as f64 - 9.5;
            let dy = y as f64 - 7.5;
            dx * dx / 49.0 + dy * dy / 25.0 <= 1.0
        });
        let c = &find_contours(&m)[0];
        for &(x, y) in &c.boundary {
            let touches = [(0isize, 1isize), (1, 0), (0, -1), (-1, 0)].iter().any(|(dx, dy)| {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                nx < 0 || ny < 0 || nx >= 20 || ny >= 16 || !m.get(nx as usize, ny as usize)
            });
            assert!(touches, "({x},{y}) is interior");
        }
        // consecutive chain pixels are 8-neighbours
        for p in c.boundary.windows(2) {
            let dx = p[0].0.abs_diff(p[1].0);
            let dy = p[0].1.abs_diff(p[1].1);
            assert!(dx <= 1 && dy <= 1 && dx + dy > 0);
        }
        assert_eq!(c.area, m.count());
    }
}
