//! Multi-channel float grids and the shared coordinate conventions.
//!
//! Coordinates are continuous, with the origin at the center of the top-left
//! pixel; `x` grows rightwards along columns and `y` grows downwards along
//! rows. A grid cell `(y, x)` therefore sits at the continuous position
//! `Point2 { x, y }`. Channels are stored channel-major (then row, then
//! column) so a single channel is one contiguous slice.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Height and width of a grid, in pixels. Both are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height >= 1 && width >= 1, "grid must be at least 1x1");
        Self { height, width }
    }

    /// Number of 2-D positions in the grid.
    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize) -> usize {
        debug_assert!(y < self.height && x < self.width);
        y * self.width + x
    }

    /// True if `p` lies within the grid extent `[0, w-1] x [0, h-1]`.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= (self.width - 1) as f64
            && p.y <= (self.height - 1) as f64
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// A continuous 2-D position (`x` = column, `y` = row).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Point2) -> f64 {
        libm::sqrt(self.distance_sq(other))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A dense `channels x height x width` grid of finite floats.
///
/// Values are treated as immutable once a grid has been fully constructed;
/// the mutating accessors exist for builders (encoders, accumulators,
/// perturbations) that own the grid exclusively.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrid {
    channels: usize,
    shape: GridShape,
    data: Vec<f64>,
}

impl ChannelGrid {
    pub fn zeros(channels: usize, shape: GridShape) -> Self {
        assert!(channels >= 1, "grid must have at least one channel");
        Self {
            channels,
            shape,
            data: vec![0.0; channels * shape.num_pixels()],
        }
    }

    /// Builds a grid from channel-major, row-major data, rejecting length
    /// mismatches and non-finite values.
    pub fn from_data(channels: usize, shape: GridShape, data: Vec<f64>) -> Result<Self> {
        assert!(channels >= 1, "grid must have at least one channel");
        let expected = channels * shape.num_pixels();
        if data.len() != expected {
            return Err(Error::DataLength {
                expected,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "grid data",
            });
        }
        Ok(Self {
            channels,
            shape,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn offset(&self, channel: usize, y: usize, x: usize) -> usize {
        debug_assert!(channel < self.channels);
        channel * self.shape.num_pixels() + self.shape.index(y, x)
    }

    #[inline]
    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.data[self.offset(channel, y, x)]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, y: usize, x: usize, value: f64) {
        debug_assert!(value.is_finite(), "grids hold finite values only");
        let i = self.offset(channel, y, x);
        self.data[i] = value;
    }

    /// One channel as a contiguous row-major slice.
    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = self.shape.num_pixels();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn channel_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.shape.num_pixels();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    /// Bilinear interpolation of one channel at a continuous position.
    ///
    /// Positions outside the grid extent are clamped to the border, so the
    /// sample is defined everywhere.
    pub fn bilinear_sample(&self, channel: usize, p: Point2) -> Result<f64> {
        if channel >= self.channels {
            return Err(Error::ChannelOutOfRange {
                channel,
                channels: self.channels,
            });
        }
        let w = self.shape.width;
        let h = self.shape.height;
        let x = p.x.clamp(0.0, (w - 1) as f64);
        let y = p.y.clamp(0.0, (h - 1) as f64);
        let x0 = libm::floor(x) as usize;
        let y0 = libm::floor(y) as usize;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.get(channel, y0, x0);
        let v01 = self.get(channel, y0, x1);
        let v10 = self.get(channel, y1, x0);
        let v11 = self.get(channel, y1, x1);
        Ok(v00 * (1.0 - fx) * (1.0 - fy)
            + v01 * fx * (1.0 - fy)
            + v10 * (1.0 - fx) * fy
            + v11 * fx * fy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1ch(shape: GridShape, data: Vec<f64>) -> ChannelGrid {
        ChannelGrid::from_data(1, shape, data).unwrap()
    }

    #[test]
    fn from_data_rejects_length_mismatch() {
        let err = ChannelGrid::from_data(1, GridShape::new(2, 2), vec![0.0; 3]).unwrap_err();
        assert_eq!(
            err,
            Error::DataLength {
                expected: 4,
                got: 3
            }
        );
    }

    #[test]
    fn from_data_rejects_non_finite() {
        let err =
            ChannelGrid::from_data(1, GridShape::new(1, 2), vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn bilinear_reproduces_node_values() {
        let g = grid_1ch(
            GridShape::new(5, 6),
            (0..30).map(|i| i as f64 * 0.37 - 2.0).collect(),
        );
        for y in 0..5 {
            for x in 0..6 {
                let s = g
                    .bilinear_sample(0, Point2::new(x as f64, y as f64))
                    .unwrap();
                assert_eq!(s, g.get(0, y, x));
            }
        }
    }

    #[test]
    fn bilinear_midpoint_of_2x2() {
        let g = grid_1ch(GridShape::new(2, 2), vec![0.0, 1.0, 0.0, 1.0]);
        let s = g.bilinear_sample(0, Point2::new(0.5, 0.5)).unwrap();
        assert_eq!(s, 0.5);
    }

    #[test]
    fn bilinear_quarter_point_on_row() {
        // Row [0, 4, 0, 0]: weights 0.75/0.25 at x = 0.25.
        let g = grid_1ch(GridShape::new(1, 4), vec![0.0, 4.0, 0.0, 0.0]);
        let s = g.bilinear_sample(0, Point2::new(0.25, 0.0)).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn bilinear_clamps_out_of_range_positions() {
        let g = grid_1ch(GridShape::new(2, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let low = g.bilinear_sample(0, Point2::new(-3.0, -1.0)).unwrap();
        assert_eq!(low, g.get(0, 0, 0));
        let high = g.bilinear_sample(0, Point2::new(10.0, 10.0)).unwrap();
        assert_eq!(high, g.get(0, 1, 2));
    }

    #[test]
    fn bilinear_rejects_bad_channel() {
        let g = ChannelGrid::zeros(2, GridShape::new(2, 2));
        let err = g.bilinear_sample(2, Point2::new(0.0, 0.0)).unwrap_err();
        assert_eq!(
            err,
            Error::ChannelOutOfRange {
                channel: 2,
                channels: 2
            }
        );
    }
}
