//! Bird's-eye-view rasterisation, footprint IoU and RoI crops.
//!
//! Grid rows run along LiDAR `x` (forward) and columns along LiDAR `y`
//! (lateral); channel `k < height_slices` holds the normalised max height of
//! slice `k`, the last channel holds log-normalised point density.

mod bev;
mod crop;
mod iou;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bev::{bev_project, camera_proxy_project, BevGrid, CameraModel};
pub use crop::{crop_and_resize, fuse_mean};
pub use iou::{bev_corners, iou_axis_aligned, iou_bev, polygon_area, MIN_SIDE};

use crate::dataset_io::Box3D;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate box: side {0} below minimum")]
    DegenerateBox(f64),
    #[error("box footprint does not intersect the grid extent")]
    EmptyIntersection,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("bad grid encoding: {0}")]
    Format(String),
}

/// Ground-plane footprint of a box: `center` is LiDAR `(x, y)`, `size` is
/// `(length, width)` with length along `yaw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevBox {
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub yaw: f64,
}

impl BevBox {
    pub fn new(center: [f64; 2], size: [f64; 2], yaw: f64) -> Self {
        Self { center, size, yaw }
    }

    pub fn area(&self) -> f64 {
        self.size[0] * self.size[1]
    }

    /// Axis-aligned bounds `[x_min, x_max, y_min, y_max]` of the rotated footprint.
    pub fn aabb(&self) -> [f64; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hx = 0.5 * (self.size[0] * c.abs() + self.size[1] * s.abs());
        let hy = 0.5 * (self.size[0] * s.abs() + self.size[1] * c.abs());
        [
            self.center[0] - hx,
            self.center[0] + hx,
            self.center[1] - hy,
            self.center[1] + hy,
        ]
    }
}

/// Vertical projection of a 3D box; yaw is carried, not folded into `size`.
pub fn box3d_to_bev(b: &Box3D) -> BevBox {
    BevBox {
        center: [b.centroid[0], b.centroid[1]],
        size: [b.dims[0], b.dims[1]],
        yaw: b.yaw,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BevGridSpec {
    /// LiDAR `x` range, meters.
    pub forward: [f64; 2],
    /// LiDAR `y` range, meters.
    pub lateral: [f64; 2],
    /// LiDAR `z` range split into `height_slices` equal slices.
    pub height: [f64; 2],
    pub cell_size: f64,
    pub height_slices: u32,
}

impl Default for BevGridSpec {
    fn default() -> Self {
        Self {
            forward: [0.0, 70.0],
            lateral: [-40.0, 40.0],
            height: [-2.5, 1.0],
            cell_size: 0.1,
            height_slices: 5,
        }
    }
}

fn cells(span: f64, cell: f64) -> Option<usize> {
    let n = span / cell;
    let r = n.round();
    ((n - r).abs() <= 1e-6 * r.max(1.0) && r >= 1.0).then_some(r as usize)
}

impl BevGridSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidSpec(m.to_string()));
        let all = [
            self.forward[0],
            self.forward[1],
            self.lateral[0],
            self.lateral[1],
            self.height[0],
            self.height[1],
            self.cell_size,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite field");
        }
        if !(self.cell_size > 0.0) {
            return bad("cell_size must be positive");
        }
        if self.forward[1] <= self.forward[0] || self.lateral[1] <= self.lateral[0] {
            return bad("empty extent");
        }
        if self.height[1] <= self.height[0] {
            return bad("empty height range");
        }
        if self.height_slices == 0 {
            return bad("height_slices must be positive");
        }
        if cells(self.forward[1] - self.forward[0], self.cell_size).is_none()
            || cells(self.lateral[1] - self.lateral[0], self.cell_size).is_none()
        {
            return bad("extent span is not a whole number of cells");
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        cells(self.forward[1] - self.forward[0], self.cell_size).unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        cells(self.lateral[1] - self.lateral[0], self.cell_size).unwrap_or(0)
    }

    pub fn channels(&self) -> usize {
        self.height_slices as usize + 1
    }

    pub fn slice_height(&self) -> f64 {
        (self.height[1] - self.height[0]) / self.height_slices as f64
    }

    /// Cell `(row, col)` holding ground point `(x, y)`, if inside the extent.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if x < self.forward[0] || x >= self.forward[1] || y < self.lateral[0] || y >= self.lateral[1] {
            return None;
        }
        let r = ((x - self.forward[0]) / self.cell_size).floor() as usize;
        let c = ((y - self.lateral[0]) / self.cell_size).floor() as usize;
        (r < self.rows() && c < self.cols()).then_some((r, c))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.forward[0] + (row as f64 + 0.5) * self.cell_size,
            self.lateral[0] + (col as f64 + 0.5) * self.cell_size,
        )
    }
}
