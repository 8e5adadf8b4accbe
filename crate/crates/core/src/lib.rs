//! Algorithmic skeleton of a two-stage LiDAR/camera object detector evaluated on
//! bird's-eye-view footprints, together with the sensor data-rate model used to
//! judge which inputs a vehicular channel can carry.
//!
//! All geometry downstream of [`dataset_io`] lives in the LiDAR frame:
//! `x` forward, `y` left, `z` up. The bird's-eye-view plane is `(x, y)` and
//! yaw is measured about `z`.
//!
//! The crate is organised by stage:
//!
//! * [`dataset_io`] reads and writes Velodyne binaries, Kitti label and
//!   calibration text, AP tables, and generates synthetic scenes.
//! * [`geometry`] rasterises clouds to BEV grids and computes exact rotated IoU.
//! * [`detector`] holds anchors, offset coding, NMS and the pluggable-scorer
//!   pipeline.
//! * [`evaluator`] turns detections into precision-recall curves, AP and mAP.
//! * [`netfeas`] is the sensor-rate versus channel-capacity analysis.
//! * [`cli`] wires everything into reproducible batch commands.

pub mod cli;
pub mod dataset_io;
pub mod detector;
pub mod evaluator;
pub mod geometry;
pub mod netfeas;

pub use dataset_io::{Box3D, Calibration, ClassLabel, Point3, PointCloud, Scene};
pub use geometry::{BevBox, BevGrid, BevGridSpec};

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}
