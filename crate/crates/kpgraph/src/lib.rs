//! Keypoint-graph bounding-box pipeline.
//!
//! A cell instance is represented by five typed keypoints: the four corners
//! of its bounding rectangle plus the center. This crate implements the full
//! geometric pipeline around that representation, with no network attached:
//!
//! * [`encode`] turns ground-truth boxes into dense training targets — a
//!   per-type heatmap of unit discs, a single-offset field pointing each disc
//!   pixel at its keypoint, and a group-offset field connecting every ordered
//!   keypoint pair of an instance.
//! * [`vote`] fuses heatmap and single offsets into a keypoint score map by
//!   Hough voting and extracts sub-pixel keypoint candidates with a maximum
//!   filter and a peak threshold.
//! * [`group`] partitions candidates into per-instance groups by walking the
//!   group-offset graph greedily in score order.
//! * [`boxes`] reconstructs a box from any sufficient subset of a group
//!   (any three keypoints, a diagonal corner pair, or center plus a corner),
//!   lifts per-scale boxes to image coordinates and merges them with NMS.
//! * [`eval`] scores predictions against ground truth: VOC-style matching,
//!   average precision, mean matched IoU and mask IoU.
//! * [`synth`] generates seeded synthetic scenes and perturbations (keypoint
//!   dropout, offset noise, heatmap flips) so the decoder can be exercised
//!   end to end without any learned model.
//!
//! Everything is deterministic: randomness comes exclusively from
//! [`rng::SplitRng`], a counter-based splittable stream, and all tie-breaks
//! use explicit total orders.
//!
//! The crate is `no_std` (it allocates, but performs no I/O); tensor file
//! formats, JSON serialization and the command-line interface live in the
//! companion `kpgraph-cli` crate.

#![no_std]

extern crate alloc;

pub mod boxes;
pub mod encode;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod grid;
pub mod group;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod vote;

pub use boxes::{BBox, ScaleConfig};
pub use encode::{DiscSpec, GtInstance, KeypointSet, KeypointType, TargetSet};
pub use error::{Error, Result};
pub use grid::{ChannelGrid, GridShape, Point2};
pub use group::{GroupConfig, KeypointGroup};
pub use vote::{Detection, PeakConfig, ScoreMap};
