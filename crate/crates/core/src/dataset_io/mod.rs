//! On-disk formats and synthetic scenes.
//!
//! Velodyne clouds are kept in the sensor frame they were recorded in. Kitti
//! labels are stored in the rectified camera frame; [`kitti::KittiObject`]
//! keeps them verbatim and [`Calibration`] moves them into the LiDAR frame.

mod ap_table;
mod calib;
mod kitti;
mod synth;
mod velodyne;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ap_table::{parse_ap_table, write_ap_table, ApTable, Variant};
pub use calib::{parse_kitti_calib, write_kitti_calib, Calibration};
pub use kitti::{
    parse_kitti_label, read_label_boxes, write_kitti_label, write_label_boxes, KittiObject,
    LabelParse,
};
pub use synth::{synth_scene, ClassPrior, SceneSpec};
pub use velodyne::{parse_velodyne, write_velodyne};

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("velodyne buffer length {0} is not a multiple of 16")]
    TruncatedRecord(usize),
    #[error("non-finite value in point record {0}")]
    NonFiniteValue(usize),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("calibration key `{0}` is missing")]
    MissingKey(&'static str),
    #[error("calibration key `{key}` expects {expected} values, found {found}")]
    BadDimension {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("calibration rotation `{0}` is not orthonormal")]
    NotOrthonormal(&'static str),
    #[error("cannot place {0} boxes without overlap")]
    InfeasibleSpec(usize),
    #[error("duplicate AP table entry ({class}, {variant})")]
    DuplicateKey { class: String, variant: String },
    #[error("AP value {value} on line {line} is outside [0, 1]")]
    ApOutOfRange { line: usize, value: f64 },
    #[error("AP table: {0}")]
    Csv(String),
}

/// A single LiDAR return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub reflectance: f32,
}

impl Point3 {
    pub fn new(x: f32, y: f32, z: f32, reflectance: f32) -> Self {
        Self {
            x,
            y,
            z,
            reflectance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame_id: u64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame_id: u64) -> Self {
        Self { points, frame_id }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum ClassLabel {
    Car,
    Pedestrian,
    Cyclist,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Car, ClassLabel::Pedestrian, ClassLabel::Cyclist];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Car => "Car",
            ClassLabel::Pedestrian => "Pedestrian",
            ClassLabel::Cyclist => "Cyclist",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Car" => Ok(ClassLabel::Car),
            "Pedestrian" => Ok(ClassLabel::Pedestrian),
            "Cyclist" => Ok(ClassLabel::Cyclist),
            other => Err(format!("unknown class `{other}`")),
        }
    }
}

/// Oriented 3D box in the LiDAR frame. `centroid` is the geometric center,
/// `dims` is `[length, width, height]`, length runs along the heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub class_label: ClassLabel,
    pub centroid: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
    pub truncated: f64,
    pub occluded: u8,
}

impl Box3D {
    pub fn new(class_label: ClassLabel, centroid: [f64; 3], dims: [f64; 3], yaw: f64) -> Self {
        Self {
            class_label,
            centroid,
            dims,
            yaw: crate::wrap_angle(yaw),
            truncated: 0.0,
            occluded: 0,
        }
    }

    pub fn length(&self) -> f64 {
        self.dims[0]
    }

    pub fn width(&self) -> f64 {
        self.dims[1]
    }

    pub fn height(&self) -> f64 {
        self.dims[2]
    }

    /// The eight corners, bottom face first, counter-clockwise seen from above.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (s, c) = self.yaw.sin_cos();
        let [l, w, h] = self.dims;
        let local = [
            (l / 2.0, w / 2.0),
            (-l / 2.0, w / 2.0),
            (-l / 2.0, -w / 2.0),
            (l / 2.0, -w / 2.0),
        ];
        let [cx, cy, cz] = self.centroid;
        let mut out = [[0.0; 3]; 8];
        for (i, &(dx, dy)) in local.iter().enumerate() {
            let x = cx + dx * c - dy * s;
            let y = cy + dx * s + dy * c;
            out[i] = [x, y, cz - h / 2.0];
            out[i + 4] = [x, y, cz + h / 2.0];
        }
        out
    }

    /// Closed point-in-box test in 3D.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.centroid[0];
        let dy = p[1] - self.centroid[1];
        let dz = p[2] - self.centroid[2];
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        u.abs() <= self.dims[0] / 2.0 && v.abs() <= self.dims[1] / 2.0 && dz.abs() <= self.dims[2] / 2.0
    }

    pub fn is_valid(&self) -> bool {
        self.dims.iter().all(|d| d.is_finite() && *d > 0.0)
            && self.centroid.iter().all(|c| c.is_finite())
            && self.yaw > -std::f64::consts::PI
            && self.yaw <= std::f64::consts::PI
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cloud: PointCloud,
    pub ground_truth: Vec<Box3D>,
    pub calibration: Option<Calibration>,
}

impl Scene {
    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty() && self.ground_truth.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_containment() {
        let b = Box3D::new(ClassLabel::Car, [1.0, 2.0, 0.5], [4.0, 2.0, 1.0], 0.3);
        for c in b.corners() {
            assert!(b.contains([c[0] * 0.999 + 1.0 * 0.001, c[1] * 0.999 + 2.0 * 0.001, c[2] * 0.999 + 0.5 * 0.001]));
        }
        assert!(b.contains(b.centroid));
        assert!(!b.contains([10.0, 2.0, 0.5]));
    }

    #[test]
    fn class_label_parse() {
        assert_eq!("Cyclist".parse::<ClassLabel>(), Ok(ClassLabel::Cyclist));
        assert!("Van".parse::<ClassLabel>().is_err());
    }
}
