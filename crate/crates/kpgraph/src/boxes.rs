//! Box retrieval, NMS, IoU and ROI geometry.
//!
//! A full keypoint group over-determines its box, so reconstruction averages
//! all available evidence per edge: for the left edge that is `TL.x`, `BL.x`
//! and the reflections `2*C.x - TR.x`, `2*C.x - BR.x` (analogously for the
//! other three edges), restricted to filled slots. A group can produce a box
//! iff every edge has at least one piece of evidence, which works out to:
//! any three of the five keypoint types, a diagonal corner pair, or the
//! center plus any one corner. Adjacent corner pairs and single keypoints
//! are insufficient.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::encode::{keypoints_of_box, KeypointSet, KeypointType};
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, GridShape, Point2};
use crate::group::KeypointGroup;

/// An axis-aligned box with a confidence score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, score: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "box coordinates",
            });
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::DegenerateBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
            return Err(Error::BoxScore(score));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
            score,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }
}

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Total order used to rank boxes everywhere (NMS, evaluation): score
/// descending, ties by smaller `x_min`, then smaller `y_min`.
pub fn score_rank(a: &BBox, b: &BBox) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.x_min.total_cmp(&b.x_min))
        .then(a.y_min.total_cmp(&b.y_min))
}

/// Greedy non-maximum suppression: walk boxes in rank order and keep a box
/// iff its IoU with every already-kept box is below `iou_threshold`.
pub fn nms(boxes: &[BBox], iou_threshold: f64) -> Vec<BBox> {
    debug_assert!(
        iou_threshold > 0.0 && iou_threshold <= 1.0,
        "nms threshold must be in (0, 1]"
    );
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| score_rank(&boxes[a], &boxes[b]));
    let mut kept: Vec<BBox> = Vec::new();
    for i in order {
        let candidate = boxes[i];
        if kept.iter().all(|k| iou(k, &candidate) < iou_threshold) {
            kept.push(candidate);
        }
    }
    kept
}

/// Downsampling factor per detection scale, mapping feature-map coordinates
/// back to image pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleConfig {
    pub strides: Vec<u32>,
}

impl ScaleConfig {
    pub fn new(strides: Vec<u32>) -> Result<Self> {
        if strides.is_empty() {
            return Err(Error::Config("at least one scale stride is required"));
        }
        if strides[0] == 0 || !strides.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "scale strides must be strictly increasing positive integers",
            ));
        }
        Ok(Self { strides })
    }

    pub fn len(&self) -> usize {
        self.strides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strides.is_empty()
    }
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            strides: alloc::vec![4, 8, 16, 32],
        }
    }
}

/// Scales all four coordinates by `stride`, keeping the score.
pub fn lift_to_image(bbox: &BBox, stride: u32) -> BBox {
    let s = stride as f64;
    BBox {
        x_min: bbox.x_min * s,
        y_min: bbox.y_min * s,
        x_max: bbox.x_max * s,
        y_max: bbox.y_max * s,
        score: bbox.score,
    }
}

/// Lifts every per-scale box list to image coordinates by its stride,
/// concatenates them and removes duplicates with NMS.
pub fn aggregate_scales(
    per_scale: &[Vec<BBox>],
    scales: &ScaleConfig,
    nms_iou: f64,
) -> Result<Vec<BBox>> {
    if per_scale.len() != scales.len() {
        return Err(Error::ScaleCount {
            expected: scales.len(),
            got: per_scale.len(),
        });
    }
    let mut lifted: Vec<BBox> = Vec::new();
    for (boxes, &stride) in per_scale.iter().zip(&scales.strides) {
        lifted.extend(boxes.iter().map(|b| lift_to_image(b, stride)));
    }
    Ok(nms(&lifted, nms_iou))
}

/// True if the filled keypoint types suffice to reconstruct a box: any
/// three or more, a diagonal corner pair, or the center plus one corner.
pub fn is_valid_minimal_set(filled: KeypointSet) -> bool {
    use KeypointType::*;
    match filled.len() {
        0 | 1 => false,
        2 => {
            filled.contains(Center)
                || filled == KeypointSet::from_types(&[TopLeft, BottomRight])
                || filled == KeypointSet::from_types(&[TopRight, BottomLeft])
        }
        _ => true,
    }
}

#[derive(Default)]
struct EdgeEvidence {
    sum: f64,
    count: usize,
}

impl EdgeEvidence {
    fn push(&mut self, value: f64) {
        self.sum += value;
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        debug_assert!(self.count > 0, "valid minimal sets cover every edge");
        self.sum / self.count as f64
    }
}

/// Reconstructs the box of a keypoint group, or `None` if the filled slots
/// are insufficient (or the evidence is degenerate under noise).
///
/// The box score is the mean of the member keypoint scores, clamped to
/// `[0, 1]`; voted keypoint scores can slightly exceed 1 on a full disc
/// because the 81-cell lattice disc holds more mass than its continuous
/// area.
pub fn box_from_group(group: &KeypointGroup) -> Option<BBox> {
    use KeypointType::*;
    let filled = group.filled_types();
    if !is_valid_minimal_set(filled) {
        return None;
    }

    let mut x_min = EdgeEvidence::default();
    let mut x_max = EdgeEvidence::default();
    let mut y_min = EdgeEvidence::default();
    let mut y_max = EdgeEvidence::default();
    let mut score_sum = 0.0;
    let mut members = 0usize;

    let center = group.get(Center).map(|d| d.position);
    for t in KeypointType::ALL {
        let Some(det) = group.get(t) else { continue };
        let p = det.position;
        score_sum += det.score;
        members += 1;
        match t {
            TopLeft => {
                x_min.push(p.x);
                y_min.push(p.y);
            }
            TopRight => {
                x_max.push(p.x);
                y_min.push(p.y);
            }
            BottomLeft => {
                x_min.push(p.x);
                y_max.push(p.y);
            }
            BottomRight => {
                x_max.push(p.x);
                y_max.push(p.y);
            }
            Center => {}
        }
        // A corner reflected through the center is evidence for the
        // opposite corner's edges.
        if t.is_corner() {
            if let Some(c) = center {
                let rx = 2.0 * c.x - p.x;
                let ry = 2.0 * c.y - p.y;
                match t {
                    TopLeft => {
                        x_max.push(rx);
                        y_max.push(ry);
                    }
                    TopRight => {
                        x_min.push(rx);
                        y_max.push(ry);
                    }
                    BottomLeft => {
                        x_max.push(rx);
                        y_min.push(ry);
                    }
                    BottomRight => {
                        x_min.push(rx);
                        y_min.push(ry);
                    }
                    Center => unreachable!(),
                }
            }
        }
    }

    let score = (score_sum / members as f64).clamp(0.0, 1.0);
    BBox::new(x_min.mean(), y_min.mean(), x_max.mean(), y_max.mean(), score).ok()
}

/// A sub-grid cut out of a larger grid, with the origin of the cut region.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiCrop {
    pub grid: ChannelGrid,
    /// Column of the source grid that became column 0 of the crop.
    pub x0: usize,
    /// Row of the source grid that became row 0 of the crop.
    pub y0: usize,
}

/// Cuts the sub-grid covering `bbox` padded by `pad` pixels, clamped to the
/// grid. The integer cover is inclusive: cells `floor(min)..=ceil(max)`.
pub fn crop_roi(grid: &ChannelGrid, bbox: &BBox, pad: f64) -> Result<RoiCrop> {
    if !(pad >= 0.0 && pad.is_finite()) {
        return Err(Error::Config("crop padding must be non-negative"));
    }
    let shape = grid.shape();
    let x_lo = bbox.x_min - pad;
    let x_hi = bbox.x_max + pad;
    let y_lo = bbox.y_min - pad;
    let y_hi = bbox.y_max + pad;
    if x_hi < 0.0 || y_hi < 0.0 || x_lo > (shape.width - 1) as f64 || y_lo > (shape.height - 1) as f64
    {
        return Err(Error::BoxOutsideGrid { shape });
    }
    let x0 = libm::floor(x_lo).max(0.0) as usize;
    let y0 = libm::floor(y_lo).max(0.0) as usize;
    let x1 = libm::ceil(x_hi).min((shape.width - 1) as f64) as usize;
    let y1 = libm::ceil(y_hi).min((shape.height - 1) as f64) as usize;
    let out_shape = GridShape::new(y1 - y0 + 1, x1 - x0 + 1);
    let mut out = ChannelGrid::zeros(grid.channels(), out_shape);
    for c in 0..grid.channels() {
        for y in y0..=y1 {
            for x in x0..=x1 {
                out.set(c, y - y0, x - x0, grid.get(c, y, x));
            }
        }
    }
    Ok(RoiCrop { grid: out, x0, y0 })
}

/// Rasterizes a box into a binary 1-channel mask using half-open cell
/// semantics: cell `(y, x)` is 1 iff `x_min <= x < x_max` and
/// `y_min <= y < y_max`. For integer boxes the mask area equals the box
/// area, so mask IoU agrees with box IoU.
pub fn filled_mask(bbox: &BBox, shape: GridShape) -> ChannelGrid {
    let mut mask = ChannelGrid::zeros(1, shape);
    let x0 = libm::ceil(bbox.x_min).max(0.0) as usize;
    let y0 = libm::ceil(bbox.y_min).max(0.0) as usize;
    if bbox.x_max <= 0.0 || bbox.y_max <= 0.0 {
        return mask;
    }
    for y in y0..shape.height {
        if (y as f64) >= bbox.y_max {
            break;
        }
        for x in x0..shape.width {
            if (x as f64) >= bbox.x_max {
                break;
            }
            mask.set(0, y, x, 1.0);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vote::Detection;
    use alloc::vec;

    fn bx(x_min: f64, y_min: f64, x_max: f64, y_max: f64, score: f64) -> BBox {
        BBox::new(x_min, y_min, x_max, y_max, score).unwrap()
    }

    fn group_of(slots: &[(KeypointType, f64, f64)]) -> KeypointGroup {
        let mut group = KeypointGroup::empty(0);
        for &(t, x, y) in slots {
            group.slots[t.index()] = Some(Detection {
                kind: t,
                position: Point2::new(x, y),
                score: 1.0,
            });
        }
        group
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let a = bx(0.0, 0.0, 10.0, 10.0, 1.0);
        assert_eq!(iou(&a, &a), 1.0);
        let b = bx(20.0, 20.0, 30.0, 30.0, 1.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_unit_shift_fixture() {
        // Overlap 9x9 = 81 over union 200 - 81 = 119.
        let a = bx(0.0, 0.0, 10.0, 10.0, 1.0);
        let b = bx(1.0, 1.0, 11.0, 11.0, 1.0);
        assert!((iou(&a, &b) - 81.0 / 119.0).abs() < 1e-12);
        assert_eq!(iou(&a, &b), iou(&b, &a));
    }

    #[test]
    fn nms_keeps_single_and_disjoint_boxes() {
        let a = bx(0.0, 0.0, 10.0, 10.0, 0.9);
        assert_eq!(nms(&[a], 0.5), vec![a]);
        let b = bx(20.0, 20.0, 30.0, 30.0, 0.8);
        assert_eq!(nms(&[a, b], 0.5), vec![a, b]);
    }

    #[test]
    fn nms_suppresses_overlapping_lower_score() {
        // IoU 81/119 ~ 0.681 > 0.5, so only the 0.9 box survives.
        let hi = bx(0.0, 0.0, 10.0, 10.0, 0.9);
        let lo = bx(1.0, 1.0, 11.0, 11.0, 0.8);
        assert_eq!(nms(&[lo, hi], 0.5), vec![hi]);
    }

    #[test]
    fn lift_scales_coordinates_only() {
        let b = bx(1.0, 2.0, 3.0, 4.0, 0.7);
        assert_eq!(lift_to_image(&b, 1), b);
        let lifted = lift_to_image(&b, 4);
        assert_eq!(
            (lifted.x_min, lifted.y_min, lifted.x_max, lifted.y_max),
            (4.0, 8.0, 12.0, 16.0)
        );
        assert_eq!(lifted.score, 0.7);
    }

    #[test]
    fn iou_is_scale_invariant() {
        let a = bx(0.0, 0.0, 10.0, 10.0, 1.0);
        let b = bx(1.0, 1.0, 11.0, 11.0, 1.0);
        let before = iou(&a, &b);
        let after = iou(&lift_to_image(&a, 8), &lift_to_image(&b, 8));
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn box_from_diagonal_pair() {
        use KeypointType::*;
        let g = group_of(&[(TopLeft, 10.0, 20.0), (BottomRight, 50.0, 60.0)]);
        let b = box_from_group(&g).unwrap();
        assert_eq!((b.x_min, b.y_min, b.x_max, b.y_max), (10.0, 20.0, 50.0, 60.0));
    }

    #[test]
    fn box_from_center_plus_corner() {
        use KeypointType::*;
        let g = group_of(&[(Center, 30.0, 40.0), (TopLeft, 10.0, 20.0)]);
        let b = box_from_group(&g).unwrap();
        assert_eq!((b.x_min, b.y_min, b.x_max, b.y_max), (10.0, 20.0, 50.0, 60.0));
    }

    #[test]
    fn box_from_three_corners_averages_edges() {
        use KeypointType::*;
        let g = group_of(&[
            (TopLeft, 10.0, 20.0),
            (TopRight, 50.0, 22.0),
            (BottomLeft, 12.0, 60.0),
        ]);
        let b = box_from_group(&g).unwrap();
        assert_eq!((b.x_min, b.y_min, b.x_max, b.y_max), (11.0, 21.0, 50.0, 60.0));
    }

    #[test]
    fn insufficient_groups_produce_no_box() {
        use KeypointType::*;
        assert!(box_from_group(&group_of(&[(TopLeft, 1.0, 1.0)])).is_none());
        assert!(box_from_group(&group_of(&[(Center, 5.0, 5.0)])).is_none());
        // Adjacent corner pair: no bottom-edge evidence.
        let adjacent = group_of(&[(TopLeft, 1.0, 1.0), (TopRight, 9.0, 1.0)]);
        assert!(box_from_group(&adjacent).is_none());
    }

    #[test]
    fn valid_minimal_sets_match_declared_rule() {
        use KeypointType::*;
        let valid_pairs = [
            [TopLeft, BottomRight],
            [TopRight, BottomLeft],
            [Center, TopLeft],
            [Center, TopRight],
            [Center, BottomLeft],
            [Center, BottomRight],
        ];
        for mask in 0u8..32 {
            let set = KeypointSet::from_types(
                &KeypointType::ALL
                    .into_iter()
                    .filter(|t| mask & (1 << t.index()) != 0)
                    .collect::<Vec<_>>(),
            );
            let expected = set.len() >= 3
                || valid_pairs
                    .iter()
                    .any(|p| set == KeypointSet::from_types(p));
            assert_eq!(is_valid_minimal_set(set), expected, "set {set:?}");
        }
    }

    #[test]
    fn full_group_roundtrips_box_exactly() {
        let original = bx(7.25, 3.5, 41.75, 28.125, 1.0);
        let kps = keypoints_of_box(&original);
        let mut group = KeypointGroup::empty(0);
        for t in KeypointType::ALL {
            group.slots[t.index()] = Some(Detection {
                kind: t,
                position: kps[t.index()],
                score: 1.0,
            });
        }
        let recovered = box_from_group(&group).unwrap();
        assert_eq!(recovered, original);
    }

    #[test]
    fn aggregate_requires_one_list_per_scale() {
        let scales = ScaleConfig::default();
        let err = aggregate_scales(&[vec![]], &scales, 0.5).unwrap_err();
        assert_eq!(
            err,
            Error::ScaleCount {
                expected: 4,
                got: 1
            }
        );
    }

    #[test]
    fn aggregate_lifts_and_merges_duplicates() {
        let scales = ScaleConfig::new(vec![4, 8]).unwrap();
        // The same image-space box seen at both scales: (40, 40, 80, 80).
        let s0 = vec![bx(10.0, 10.0, 20.0, 20.0, 0.9)];
        let s1 = vec![bx(5.0, 5.0, 10.0, 10.0, 0.8)];
        let merged = aggregate_scales(&[s0, s1], &scales, 0.5).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(
            (merged[0].x_min, merged[0].y_min, merged[0].x_max, merged[0].y_max),
            (40.0, 40.0, 80.0, 80.0)
        );
        assert_eq!(merged[0].score, 0.9);

        // Boxes only at one scale pass through lifted.
        let only = aggregate_scales(&[vec![bx(1.0, 1.0, 2.0, 2.0, 0.5)], vec![]], &scales, 0.5)
            .unwrap();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].x_min, 4.0);

        // All scales empty stays empty.
        assert!(aggregate_scales(&[vec![], vec![]], &scales, 0.5)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn scale_config_rejects_non_increasing_strides() {
        assert!(ScaleConfig::new(vec![4, 4]).is_err());
        assert!(ScaleConfig::new(vec![8, 4]).is_err());
        assert!(ScaleConfig::new(vec![0, 4]).is_err());
        assert!(ScaleConfig::new(vec![]).is_err());
        assert!(ScaleConfig::new(vec![1]).is_ok());
    }

    #[test]
    fn crop_covers_whole_grid() {
        let mut grid = ChannelGrid::zeros(2, GridShape::new(4, 5));
        for c in 0..2 {
            for y in 0..4 {
                for x in 0..5 {
                    grid.set(c, y, x, (c * 100 + y * 10 + x) as f64);
                }
            }
        }
        let crop = crop_roi(&grid, &bx(0.0, 0.0, 4.0, 3.0, 1.0), 0.0).unwrap();
        assert_eq!(crop.grid, grid);
        assert_eq!((crop.x0, crop.y0), (0, 0));
    }

    #[test]
    fn crop_inclusive_integer_cover() {
        let grid = ChannelGrid::zeros(1, GridShape::new(8, 8));
        let crop = crop_roi(&grid, &bx(1.0, 1.0, 3.0, 3.0, 1.0), 0.0).unwrap();
        assert_eq!(crop.grid.shape(), GridShape::new(3, 3));
        assert_eq!((crop.x0, crop.y0), (1, 1));
    }

    #[test]
    fn crop_clamps_padded_region_to_bounds() {
        let grid = ChannelGrid::zeros(1, GridShape::new(8, 8));
        let crop = crop_roi(&grid, &bx(0.0, 5.0, 2.0, 7.0, 1.0), 2.0).unwrap();
        assert_eq!((crop.x0, crop.y0), (0, 3));
        assert_eq!(crop.grid.shape(), GridShape::new(5, 5));
    }

    #[test]
    fn crop_rejects_box_outside_grid() {
        let grid = ChannelGrid::zeros(1, GridShape::new(8, 8));
        let err = crop_roi(&grid, &bx(20.0, 20.0, 30.0, 30.0, 1.0), 0.0).unwrap_err();
        assert!(matches!(err, Error::BoxOutsideGrid { .. }));
    }

    #[test]
    fn filled_mask_uses_half_open_cells() {
        let mask = filled_mask(&bx(1.0, 0.0, 3.0, 2.0, 1.0), GridShape::new(4, 4));
        let expected = [
            0.0, 1.0, 1.0, 0.0, //
            0.0, 1.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        ];
        assert_eq!(mask.channel(0), &expected);
    }
}
