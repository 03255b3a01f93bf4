//! Crate-wide error type.

use thiserror::Error;

use crate::encode::KeypointType;
use crate::grid::GridShape;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },

    #[error("channel {channel} out of range for grid with {channels} channels")]
    ChannelOutOfRange { channel: usize, channels: usize },

    #[error("data length {got} does not match channels*height*width = {expected}")]
    DataLength { expected: usize, got: usize },

    #[error("grid shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: GridShape, got: GridShape },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid configuration: {0}")]
    Config(&'static str),

    #[error("degenerate box ({x_min}, {y_min}, {x_max}, {y_max})")]
    DegenerateBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },

    #[error("box score {0} outside [0, 1]")]
    BoxScore(f64),

    #[error("{kind} keypoint ({x}, {y}) outside grid {shape}")]
    KeypointOutsideGrid {
        kind: KeypointType,
        x: f64,
        y: f64,
        shape: GridShape,
    },

    #[error("box does not intersect grid {shape}")]
    BoxOutsideGrid { shape: GridShape },

    #[error("expected one box list per scale: {expected} scales, got {got}")]
    ScaleCount { expected: usize, got: usize },

    #[error(
        "scene generation failed: could not place instance {instance} with \
         min keypoint separation {min_separation} after {attempts} attempts"
    )]
    SeparationConstraint {
        instance: usize,
        attempts: usize,
        min_separation: f64,
    },
}
