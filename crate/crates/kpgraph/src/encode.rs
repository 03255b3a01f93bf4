//! Ground-truth target encoding.
//!
//! Each instance contributes five typed keypoints (corners and center). The
//! encoder produces three aligned grids:
//!
//! * a 5-channel heatmap that is 1 inside a disc of radius `r` around every
//!   keypoint of the channel's type and 0 elsewhere,
//! * a 10-channel single-offset map holding, inside each disc, the vector
//!   from the cell to its keypoint (two channels per type: dx, dy),
//! * a 40-channel group-offset map holding, inside the disc of keypoint `k`
//!   of an instance, the vector from the cell to every other keypoint `l` of
//!   the same instance (two channels per ordered pair, both directions
//!   encoded).
//!
//! Disc membership is Euclidean distance to the (possibly fractional)
//! keypoint position, evaluated at integer cell centers. Where same-type
//! discs of different instances overlap, the nearest keypoint owns the cell;
//! ties go to the lower instance index, so targets are deterministic and
//! independent of instance ordering whenever no same-type discs overlap.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::boxes::BBox;
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, GridShape, Point2};

/// The five keypoint types of one instance. The discriminant is the heatmap
/// channel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeypointType {
    TopLeft = 0,
    TopRight = 1,
    BottomLeft = 2,
    BottomRight = 3,
    Center = 4,
}

impl KeypointType {
    pub const COUNT: usize = 5;

    pub const ALL: [KeypointType; 5] = [
        KeypointType::TopLeft,
        KeypointType::TopRight,
        KeypointType::BottomLeft,
        KeypointType::BottomRight,
        KeypointType::Center,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn is_corner(self) -> bool {
        !matches!(self, KeypointType::Center)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            KeypointType::TopLeft => "TL",
            KeypointType::TopRight => "TR",
            KeypointType::BottomLeft => "BL",
            KeypointType::BottomRight => "BR",
            KeypointType::Center => "C",
        }
    }
}

impl fmt::Display for KeypointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// A set of keypoint types, packed into five bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct KeypointSet(u8);

impl KeypointSet {
    pub const EMPTY: KeypointSet = KeypointSet(0);
    pub const ALL: KeypointSet = KeypointSet(0b11111);

    pub fn from_types(types: &[KeypointType]) -> Self {
        let mut set = Self::EMPTY;
        for &t in types {
            set.insert(t);
        }
        set
    }

    pub fn insert(&mut self, t: KeypointType) {
        self.0 |= 1 << t.index();
    }

    pub fn remove(&mut self, t: KeypointType) {
        self.0 &= !(1 << t.index());
    }

    pub fn contains(self, t: KeypointType) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self) -> Self {
        KeypointSet(!self.0 & 0b11111)
    }

    pub fn iter(self) -> impl Iterator<Item = KeypointType> {
        KeypointType::ALL.into_iter().filter(move |t| self.contains(*t))
    }
}

impl FromIterator<KeypointType> for KeypointSet {
    fn from_iter<I: IntoIterator<Item = KeypointType>>(iter: I) -> Self {
        let mut set = Self::EMPTY;
        for t in iter {
            set.insert(t);
        }
        set
    }
}

impl fmt::Debug for KeypointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

/// Radius of the heatmap disc placed around every keypoint, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscSpec {
    pub radius: f64,
}

impl DiscSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config("disc radius must be positive and finite"));
        }
        Ok(Self { radius })
    }

    /// Continuous disc area, the normalization mass of one full disc of votes.
    pub fn area(&self) -> f64 {
        core::f64::consts::PI * self.radius * self.radius
    }
}

impl Default for DiscSpec {
    fn default() -> Self {
        Self { radius: 5.0 }
    }
}

/// One ground-truth instance: a box and an optional binary mask on the
/// scene grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GtInstance {
    pub bbox: BBox,
    pub mask: Option<ChannelGrid>,
}

impl GtInstance {
    pub fn new(bbox: BBox) -> Self {
        Self { bbox, mask: None }
    }
}

pub const HEATMAP_CHANNELS: usize = 5;
pub const SINGLE_OFFSET_CHANNELS: usize = 10;
pub const GROUP_OFFSET_CHANNELS: usize = 40;

/// (dx, dy) channel pair of the single-offset map for one keypoint type.
#[inline]
pub fn single_offset_channels(t: KeypointType) -> (usize, usize) {
    (2 * t.index(), 2 * t.index() + 1)
}

/// (dx, dy) channel pair of the group-offset map for the ordered keypoint
/// pair `(from, to)`.
///
/// Ordered pairs are enumerated lexicographically, `(k, l)` for `k = 0..4`,
/// `l = 0..4`, `l != k`; pair `p` occupies channels `(2p, 2p + 1)`. Both
/// directions of every pair are present (20 pairs, 40 channels).
#[inline]
pub fn group_offset_channels(from: KeypointType, to: KeypointType) -> (usize, usize) {
    assert!(from != to, "group offsets connect distinct keypoint types");
    let k = from.index();
    let l = to.index();
    let pair = k * 4 + if l < k { l } else { l - 1 };
    (2 * pair, 2 * pair + 1)
}

/// The three encoded target grids for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub heatmap: ChannelGrid,
    pub single_offsets: ChannelGrid,
    pub group_offsets: ChannelGrid,
}

impl TargetSet {
    pub fn new(
        heatmap: ChannelGrid,
        single_offsets: ChannelGrid,
        group_offsets: ChannelGrid,
    ) -> Result<Self> {
        let set = Self {
            heatmap,
            single_offsets,
            group_offsets,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn shape(&self) -> GridShape {
        self.heatmap.shape()
    }

    pub fn validate(&self) -> Result<()> {
        expect_channels(&self.heatmap, HEATMAP_CHANNELS)?;
        expect_channels(&self.single_offsets, SINGLE_OFFSET_CHANNELS)?;
        expect_channels(&self.group_offsets, GROUP_OFFSET_CHANNELS)?;
        expect_shape(&self.single_offsets, self.heatmap.shape())?;
        expect_shape(&self.group_offsets, self.heatmap.shape())?;
        Ok(())
    }
}

pub(crate) fn expect_channels(grid: &ChannelGrid, expected: usize) -> Result<()> {
    if grid.channels() != expected {
        return Err(Error::ChannelCount {
            expected,
            got: grid.channels(),
        });
    }
    Ok(())
}

pub(crate) fn expect_shape(grid: &ChannelGrid, expected: GridShape) -> Result<()> {
    if grid.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            got: grid.shape(),
        });
    }
    Ok(())
}

/// The five typed keypoints of a box, indexed by [`KeypointType`].
pub fn keypoints_of_box(bbox: &BBox) -> [Point2; 5] {
    [
        Point2::new(bbox.x_min, bbox.y_min),
        Point2::new(bbox.x_max, bbox.y_min),
        Point2::new(bbox.x_min, bbox.y_max),
        Point2::new(bbox.x_max, bbox.y_max),
        Point2::new(
            (bbox.x_min + bbox.x_max) / 2.0,
            (bbox.y_min + bbox.y_max) / 2.0,
        ),
    ]
}

fn validate_instances(instances: &[GtInstance], shape: GridShape) -> Result<Vec<[Point2; 5]>> {
    let mut keypoints = Vec::with_capacity(instances.len());
    for inst in instances {
        if let Some(mask) = &inst.mask {
            expect_shape(mask, shape)?;
        }
        let kps = keypoints_of_box(&inst.bbox);
        for (i, kp) in kps.iter().enumerate() {
            if !shape.contains(*kp) {
                return Err(Error::KeypointOutsideGrid {
                    kind: KeypointType::ALL[i],
                    x: kp.x,
                    y: kp.y,
                    shape,
                });
            }
        }
        keypoints.push(kps);
    }
    Ok(keypoints)
}

/// Visits every integer cell within Euclidean distance `radius` of `center`,
/// clipped to the grid.
fn for_each_disc_cell(
    shape: GridShape,
    center: Point2,
    radius: f64,
    mut visit: impl FnMut(usize, usize, f64),
) {
    let x_lo = libm::ceil(center.x - radius).max(0.0) as usize;
    let y_lo = libm::ceil(center.y - radius).max(0.0) as usize;
    let x_hi = libm::floor(center.x + radius).min((shape.width - 1) as f64);
    let y_hi = libm::floor(center.y + radius).min((shape.height - 1) as f64);
    if x_hi < 0.0 || y_hi < 0.0 {
        return;
    }
    let r_sq = radius * radius;
    for y in y_lo..=y_hi as usize {
        for x in x_lo..=x_hi as usize {
            let d_sq = Point2::new(x as f64, y as f64).distance_sq(center);
            if d_sq <= r_sq {
                visit(y, x, d_sq);
            }
        }
    }
}

/// Per-cell owner of the type-`t` disc space: the index of the instance
/// whose type-`t` keypoint is nearest, or `usize::MAX` outside all discs.
fn disc_owners(
    keypoints: &[[Point2; 5]],
    shape: GridShape,
    radius: f64,
    t: KeypointType,
) -> Vec<usize> {
    let mut owner = vec![usize::MAX; shape.num_pixels()];
    let mut best = vec![f64::INFINITY; shape.num_pixels()];
    for (i, kps) in keypoints.iter().enumerate() {
        for_each_disc_cell(shape, kps[t.index()], radius, |y, x, d_sq| {
            let idx = shape.index(y, x);
            // Strict comparison keeps the lower instance index on ties.
            if d_sq < best[idx] {
                best[idx] = d_sq;
                owner[idx] = i;
            }
        });
    }
    owner
}

/// Encodes the 5-channel keypoint heatmap: channel `t` is 1 at integer cells
/// within `disc.radius` of any type-`t` keypoint, else 0.
pub fn encode_heatmap(
    instances: &[GtInstance],
    shape: GridShape,
    disc: DiscSpec,
) -> Result<ChannelGrid> {
    let keypoints = validate_instances(instances, shape)?;
    let mut heatmap = ChannelGrid::zeros(HEATMAP_CHANNELS, shape);
    for t in KeypointType::ALL {
        let channel = heatmap.channel_mut(t.index());
        for kps in &keypoints {
            for_each_disc_cell(shape, kps[t.index()], disc.radius, |y, x, _| {
                channel[shape.index(y, x)] = 1.0;
            });
        }
    }
    Ok(heatmap)
}

/// Encodes the 10-channel single-offset map: inside the disc of a type-`t`
/// keypoint `y`, channels `(2t, 2t+1)` hold `y - x`; zero elsewhere.
/// Overlapping same-type discs resolve to the nearest keypoint.
pub fn encode_single_offsets(
    instances: &[GtInstance],
    shape: GridShape,
    disc: DiscSpec,
) -> Result<ChannelGrid> {
    let keypoints = validate_instances(instances, shape)?;
    let mut offsets = ChannelGrid::zeros(SINGLE_OFFSET_CHANNELS, shape);
    for t in KeypointType::ALL {
        let (dx_ch, dy_ch) = single_offset_channels(t);
        let owner = disc_owners(&keypoints, shape, disc.radius, t);
        for y in 0..shape.height {
            for x in 0..shape.width {
                let i = owner[shape.index(y, x)];
                if i == usize::MAX {
                    continue;
                }
                let kp = keypoints[i][t.index()];
                offsets.set(dx_ch, y, x, kp.x - x as f64);
                offsets.set(dy_ch, y, x, kp.y - y as f64);
            }
        }
    }
    Ok(offsets)
}

/// Encodes the 40-channel group-offset map: inside the disc of keypoint `k`
/// of an instance, the pair channels of `(k, l)` hold the vector from the
/// cell to keypoint `l` of the same instance, for every `l != k`.
pub fn encode_group_offsets(
    instances: &[GtInstance],
    shape: GridShape,
    disc: DiscSpec,
) -> Result<ChannelGrid> {
    let keypoints = validate_instances(instances, shape)?;
    let mut offsets = ChannelGrid::zeros(GROUP_OFFSET_CHANNELS, shape);
    for k in KeypointType::ALL {
        let owner = disc_owners(&keypoints, shape, disc.radius, k);
        for y in 0..shape.height {
            for x in 0..shape.width {
                let i = owner[shape.index(y, x)];
                if i == usize::MAX {
                    continue;
                }
                for l in KeypointType::ALL {
                    if l == k {
                        continue;
                    }
                    let (dx_ch, dy_ch) = group_offset_channels(k, l);
                    let partner = keypoints[i][l.index()];
                    offsets.set(dx_ch, y, x, partner.x - x as f64);
                    offsets.set(dy_ch, y, x, partner.y - y as f64);
                }
            }
        }
    }
    Ok(offsets)
}

/// Encodes all three target grids in one pass.
pub fn encode_targets(
    instances: &[GtInstance],
    shape: GridShape,
    disc: DiscSpec,
) -> Result<TargetSet> {
    Ok(TargetSet {
        heatmap: encode_heatmap(instances, shape, disc)?,
        single_offsets: encode_single_offsets(instances, shape, disc)?,
        group_offsets: encode_group_offsets(instances, shape, disc)?,
    })
}
