//! Hand segmentation inside a verified box.
//!
//! Skin pixels are found by back-projecting the skin model over the box and
//! keeping those within `skin_threshold` of the box maximum. Edges (relative
//! to the strongest edge in the box) are gap-closed and removed from the skin
//! mask, which splits skin blobs that touch along a visible boundary. The
//! remaining components are the candidate contours.
//!
//! Candidates that are too small, too large, or whose arc length is close to
//! the box perimeter (box-shaped artefacts) are dropped. The survivor whose
//! filled area overlaps most with the dilated edge map wins, and the box is
//! re-centred halfway between the contour centroid and its top-most pixel,
//! which pulls the box toward the fingers and away from the forearm.

use crate::config::PipelineConfig;
use crate::imaging::{
    back_project_region, dilate, edge_map_region, find_contours, morph_close, to_gray, BinaryMask, Contour,
    EdgeOperator, GradientMagnitude, GrayImage, SkinModel,
};
use crate::types::{BoundingBox, FrameImage, HandObservation, Laterality};

/// Candidate hand contours for one box.
#[derive(Clone, Debug)]
pub struct Candidates {
    /// The box actually searched (the input box clamped to the frame).
    pub region: BoundingBox,
    /// Contours in frame coordinates.
    pub contours: Vec<Contour>,
    /// Gap-closed edge mask local to `region`.
    pub edges: BinaryMask,
}

#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub recentred_box: BoundingBox,
    /// Hand pixels local to `recentred_box`.
    pub mask: BinaryMask,
    pub selected_contour: Contour,
    pub candidates_considered: usize,
}

/// Candidate contours with the default gradient edge operator.
pub fn candidate_contours(frame: &FrameImage, bbox: &BoundingBox, skin: &SkinModel, cfg: &PipelineConfig) -> Candidates {
    candidate_contours_with(frame, &to_gray(frame), bbox, skin, &GradientMagnitude, cfg)
}

/// Candidate contours with a caller-supplied edge operator. `gray` must be
/// the grayscale version of `frame`.
pub fn candidate_contours_with(
    frame: &FrameImage,
    gray: &GrayImage,
    bbox: &BoundingBox,
    skin: &SkinModel,
    edge_op: &dyn EdgeOperator,
    cfg: &PipelineConfig,
) -> Candidates {
    let Some(region) = bbox.clamp_to(frame.width(), frame.height()) else {
        return Candidates {
            region: BoundingBox::new(0, 0, 1, 1),
            contours: Vec::new(),
            edges: BinaryMask::new(1, 1),
        };
    };
    let skin_mask = back_project_region(frame, &region, skin, cfg.skin_threshold);
    let edges = edge_map_region(edge_op, gray, &region, cfg.edge_threshold);
    let edges = morph_close(&edges, cfg.morph_radius, cfg.morph_iterations);
    let contours = if skin_mask.is_empty() {
        Vec::new()
    } else {
        find_contours(&skin_mask.subtract(&edges))
            .into_iter()
            .map(|c| c.offset(region.x, region.y))
            .collect()
    };
    Candidates {
        region,
        contours,
        edges,
    }
}

/// Area within `[min, max] × box area` and arc length outside
/// `[min, max] × box perimeter`.
pub fn passes_filters(contour: &Contour, bbox: &BoundingBox, cfg: &PipelineConfig) -> bool {
    let area = bbox.area() as f64;
    let perimeter = bbox.perimeter();
    let a = contour.area as f64;
    let area_ok = a >= cfg.contour_area_min_frac * area && a <= cfg.contour_area_max_frac * area;
    let l = contour.arc_length;
    let box_like = l >= cfg.contour_arc_min_frac * perimeter && l <= cfg.contour_arc_max_frac * perimeter;
    area_ok && !box_like
}

/// Fraction of the contour's filled pixels that fall on the dilated edge mask.
fn edge_overlap(contour: &Contour, region: &BoundingBox, dilated: &BinaryMask) -> f64 {
    let shared = contour
        .filled
        .iter()
        .filter(|&&(x, y)| region.contains(x, y) && dilated.get(x - region.x, y - region.y))
        .count();
    shared as f64 / contour.area as f64
}

/// Picks the hand contour among the candidates of `region` and re-centres
/// the box on it. Returns `None` when every candidate is filtered out.
///
/// `edges` is the gap-closed edge mask local to `region`.
pub fn select_hand_contour(
    candidates: &[Contour],
    region: &BoundingBox,
    edges: &BinaryMask,
    frame_width: usize,
    frame_height: usize,
    cfg: &PipelineConfig,
) -> Option<SegmentationResult> {
    let dilated = dilate(edges, cfg.fill_dilation_radius);
    let mut best: Option<(f64, &Contour)> = None;
    for c in candidates.iter().filter(|c| passes_filters(c, region, cfg)) {
        let overlap = edge_overlap(c, region, &dilated);
        let better = match best {
            None => true,
            Some((o, b)) => overlap > o || (overlap == o && c.area > b.area),
        };
        if better {
            best = Some((overlap, c));
        }
    }
    let (_, chosen) = best?;
    let recentred_box = recentre(chosen, region, frame_width, frame_height);
    let mut mask = BinaryMask::new(recentred_box.w, recentred_box.h);
    for &(x, y) in &chosen.filled {
        if recentred_box.contains(x, y) {
            mask.set(x - recentred_box.x, y - recentred_box.y, true);
        }
    }
    if mask.is_empty() {
        return None;
    }
    Some(SegmentationResult {
        recentred_box,
        mask,
        selected_contour: chosen.clone(),
        candidates_considered: candidates.len(),
    })
}

/// Box of the original size centred midway between the contour centroid and
/// its top-most pixel, clamped to the frame.
pub fn recentre(contour: &Contour, bbox: &BoundingBox, frame_width: usize, frame_height: usize) -> BoundingBox {
    let (cx, cy) = contour.centroid();
    let (tx, ty) = contour.top_pixel();
    // pixel (x, y) covers [x, x+1); work with pixel centres
    let mx = (cx + tx as f64) / 2.0 + 0.5;
    let my = (cy + ty as f64) / 2.0 + 0.5;
    BoundingBox::centred_at(mx, my, bbox.w, bbox.h, frame_width, frame_height)
}

/// Full segmentation of one box: candidates, selection and re-centring.
pub fn segment(
    frame: &FrameImage,
    gray: &GrayImage,
    bbox: &BoundingBox,
    skin: &SkinModel,
    edge_op: &dyn EdgeOperator,
    cfg: &PipelineConfig,
) -> Option<SegmentationResult> {
    let cands = candidate_contours_with(frame, gray, bbox, skin, edge_op, cfg);
    if cands.contours.is_empty() {
        return None;
    }
    select_hand_contour(&cands.contours, &cands.region, &cands.edges, frame.width(), frame.height(), cfg)
}

/// Packs a segmentation into a [`HandObservation`].
pub fn observation(
    frame_index: usize,
    bbox: BoundingBox,
    laterality: Laterality,
    detector_confidence: f64,
    seg: SegmentationResult,
) -> HandObservation {
    HandObservation {
        frame_index,
        bbox,
        recentred_box: seg.recentred_box,
        laterality,
        mask: seg.mask,
        detector_confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SKIN: [u8; 3] = [224, 172, 140];
    const BLUE: [u8; 3] = [40, 60, 200];

    fn in_ellipse(x: usize, y: usize, cx: f64, cy: f64, a: f64, b: f64) -> bool {
        let dx = (x as f64 - cx) / a;
        let dy = (y as f64 - cy) / b;
        dx * dx + dy * dy <= 1.0
    }

    fn ellipse_scene(cx: f64, cy: f64, a: f64, b: f64) -> FrameImage {
        let mut f = FrameImage::filled(0, 30.0, 160, 120, BLUE).unwrap();
        for y in 0..120 {
            for x in 0..160 {
                if in_ellipse(x, y, cx, cy, a, b) {
                    f.set_rgb(x, y, SKIN);
                }
            }
        }
        f
    }

    #[test]
    fn single_ellipse_is_one_candidate() {
        let frame = ellipse_scene(80.0, 60.0, 20.0, 28.0);
        let bbox = BoundingBox::new(50, 20, 60, 80);
        let cands = candidate_contours(&frame, &bbox, SkinModel::generic(), &PipelineConfig::default());
        assert_eq!(cands.contours.len(), 1);
        let truth: Vec<(usize, usize)> = (0..120)
            .flat_map(|y| (0..160).map(move |x| (x, y)))
            .filter(|&(x, y)| in_ellipse(x, y, 80.0, 60.0, 20.0, 28.0))
            .collect();
        let got = &cands.contours[0].filled;
        let inter = got.iter().filter(|p| truth.contains(p)).count() as f64;
        let iou = inter / (got.len() as f64 + truth.len() as f64 - inter);
        assert!(iou >= 0.8, "{iou}");
    }

    #[test]
    fn edge_cuts_touching_skin_regions() {
        // a darker skin-toned rectangle touching the ellipse on its right
        let tan = [176, 120, 92];
        let m = SkinModel::generic();
        assert!(m.probability(tan) >= 0.75 * m.probability(SKIN).max(m.probability(tan)));
        let mut frame = ellipse_scene(70.0, 60.0, 18.0, 26.0);
        for y in 40..80 {
            for x in 88..110 {
                frame.set_rgb(x, y, tan);
            }
        }
        let bbox = BoundingBox::new(40, 20, 80, 80);
        let cfg = PipelineConfig::default();
        let cands = candidate_contours(&frame, &bbox, m, &cfg);
        let big: Vec<_> = cands.contours.iter().filter(|c| c.area > 50).collect();
        assert_eq!(big.len(), 2);
        // the skin mask alone is one blob
        let skin = back_project_region(&frame, &bbox, m, cfg.skin_threshold);
        assert_eq!(find_contours(&skin).len(), 1);
    }

    #[test]
    fn blue_box_has_no_candidates() {
        let frame = FrameImage::filled(0, 30.0, 60, 60, BLUE).unwrap();
        let cands = candidate_contours(&frame, &BoundingBox::new(10, 10, 30, 30), SkinModel::generic(), &PipelineConfig::default());
        assert!(cands.contours.is_empty());
    }

    fn contour_of(mask: &BinaryMask) -> Contour {
        let mut cs = find_contours(mask);
        assert_eq!(cs.len(), 1);
        cs.remove(0)
    }

    fn blob(w: usize, h: usize, x0: usize, y0: usize, bw: usize, bh: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x0 + bw && y >= y0 && y < y0 + bh)
    }

    #[test]
    fn single_valid_contour_selected() {
        let cfg = PipelineConfig::default();
        let region = BoundingBox::new(0, 0, 40, 40);
        // 160 px = 10% of the box
        let c = contour_of(&blob(40, 40, 10, 10, 16, 10));
        assert!(passes_filters(&c, &region, &cfg));
        let edges = BinaryMask::new(40, 40);
        let r = select_hand_contour(&[c.clone()], &region, &edges, 40, 40, &cfg).unwrap();
        assert_eq!(r.selected_contour, c);
        assert_eq!(r.candidates_considered, 1);
        assert_eq!((r.recentred_box.w, r.recentred_box.h), (40, 40));
    }

    #[test]
    fn box_perimeter_contour_removed() {
        let cfg = PipelineConfig::default();
        let region = BoundingBox::new(0, 0, 40, 40);
        // arc length exactly the box perimeter, area a valid 10%
        let mut c = contour_of(&blob(40, 40, 10, 10, 16, 10));
        c.arc_length = region.perimeter();
        assert!(!passes_filters(&c, &region, &cfg));
        assert!(select_hand_contour(&[c], &region, &BinaryMask::new(40, 40), 40, 40, &cfg).is_none());
        // a one-pixel L along two box sides traces out and back: about 2 × 78
        let l_shape = BinaryMask::from_fn(40, 40, |x, y| x == 0 || y == 39);
        let c = contour_of(&l_shape);
        assert!((0.9 * 160.0..=1.1 * 160.0).contains(&c.arc_length), "{}", c.arc_length);
        assert_eq!(c.area, 79);
        assert!(!passes_filters(&c, &region, &cfg));
    }

    #[test]
    fn small_contour_loses_to_valid_one() {
        let cfg = PipelineConfig::default();
        let region = BoundingBox::new(0, 0, 50, 50);
        let tiny = contour_of(&blob(50, 50, 2, 2, 5, 5)); // 1%
        let good = contour_of(&blob(50, 50, 20, 20, 25, 20)); // 20%
        assert!(!passes_filters(&tiny, &region, &cfg));
        // give the tiny one perfect edge overlap; it must still lose
        let edges = blob(50, 50, 0, 0, 10, 10);
        let r = select_hand_contour(&[tiny, good.clone()], &region, &edges, 50, 50, &cfg).unwrap();
        assert_eq!(r.selected_contour, good);
    }

    #[test]
    fn overlap_then_area_decides() {
        let cfg = PipelineConfig::default();
        let region = BoundingBox::new(0, 0, 60, 60);
        let a = contour_of(&blob(60, 60, 5, 5, 10, 10));
        let b = contour_of(&blob(60, 60, 30, 30, 20, 20));
        // no edges: equal overlap (0), larger area wins
        let r = select_hand_contour(&[a.clone(), b.clone()], &region, &BinaryMask::new(60, 60), 60, 60, &cfg).unwrap();
        assert_eq!(r.selected_contour, b);
        // edges around the small blob only
        let edges = blob(60, 60, 4, 4, 12, 12);
        let r = select_hand_contour(&[a.clone(), b], &region, &edges, 60, 60, &cfg).unwrap();
        assert_eq!(r.selected_contour, a);
    }

    #[test]
    fn recentre_moves_toward_top_and_clamps() {
        let c = contour_of(&blob(100, 100, 40, 40, 20, 40));
        // centroid (49.5, 59.5), top pixel (40, 40): midpoint (44.75, 49.75)
        let b = recentre(&c, &BoundingBox::new(30, 30, 40, 60), 100, 100);
        assert_eq!((b.w, b.h), (40, 60));
        let (cx, cy) = b.centre();
        assert!((cx - 45.25).abs() <= 0.5 && (cy - 50.25).abs() <= 0.5, "{cx} {cy}");
        let edge = contour_of(&blob(100, 100, 0, 0, 10, 10));
        let b = recentre(&edge, &BoundingBox::new(0, 0, 40, 60), 100, 100);
        assert_eq!(b, BoundingBox::new(0, 0, 40, 60));
    }

    proptest! {
        #[test]
        fn output_box_keeps_size_and_contour_passes(
            bx in 0usize..60, by in 0usize..60, bw in 30usize..60, bh in 30usize..60,
            ox in 2usize..10, oy in 2usize..10, ew in 8usize..20, eh in 8usize..20,
        ) {
            let cfg = PipelineConfig::default();
            let (w, h) = (120, 120);
            let region = BoundingBox::new(bx, by, bw, bh);
            let m = blob(w, h, bx + ox, by + oy, ew.min(bw - ox - 1), eh.min(bh - oy - 1));
            let c = contour_of(&m);
            if let Some(r) = select_hand_contour(&[c], &region, &BinaryMask::new(bw, bh), w, h, &cfg) {
                prop_assert_eq!((r.recentred_box.w, r.recentred_box.h), (bw, bh));
                prop_assert!(r.recentred_box.is_within(w, h));
                prop_assert!(passes_filters(&r.selected_contour, &region, &cfg));
                prop_assert!(!r.mask.is_empty());
            }
        }

        #[test]
        fn recentring_is_stable(cx in 40.0f64..80.0, cy in 40.0f64..80.0) {
            // re-segmenting from the re-centred box finds the same contour
            let frame = {
                let mut f = FrameImage::filled(0, 30.0, 120, 120, BLUE).unwrap();
                for y in 0..120 {
                    for x in 0..120 {
                        if in_ellipse(x, y, cx, cy, 12.0, 12.0) {
                            f.set_rgb(x, y, SKIN);
                        }
                    }
                }
                f
            };
            let cfg = PipelineConfig::default();
            let gray = to_gray(&frame);
            let start = BoundingBox::centred_at(cx + 0.5, cy + 0.5, 40, 40, 120, 120);
            let first = segment(&frame, &gray, &start, SkinModel::generic(), &GradientMagnitude, &cfg).unwrap();
            let second = segment(&frame, &gray, &first.recentred_box, SkinModel::generic(), &GradientMagnitude, &cfg).unwrap();
            prop_assert_eq!(&first.selected_contour.filled, &second.selected_contour.filled);
            prop_assert_eq!(first.recentred_box, second.recentred_box);
        }
    }
}
