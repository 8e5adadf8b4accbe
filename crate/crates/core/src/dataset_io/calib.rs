use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use super::DatasetError;

const ORTHO_TOL: f64 = 1e-6;

/// Kitti-style sensor calibration.
///
/// `velo_to_cam` is the rigid LiDAR-to-camera transform and `rect_rotation`
/// the stereo rectification; labels live in the rectified camera frame, so the
/// full LiDAR-to-label map is `rect_rotation * velo_to_cam`.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    projections: [[f64; 12]; 4],
    rect_rotation: [f64; 9],
    velo_to_cam: [f64; 12],
    rect_from_velo: Matrix4<f64>,
    velo_from_rect: Matrix4<f64>,
}

impl Calibration {
    pub fn new(
        projections: [[f64; 12]; 4],
        rect_rotation: [f64; 9],
        velo_to_cam: [f64; 12],
    ) -> Result<Self, DatasetError> {
        let r0 = Matrix3::from_row_slice(&rect_rotation);
        check_orthonormal(&r0, "R0_rect")?;
        let tr = Matrix3::from_fn(|r, c| velo_to_cam[r * 4 + c]);
        check_orthonormal(&tr, "Tr_velo_to_cam")?;

        let mut rect = Matrix4::identity();
        rect.fixed_view_mut::<3, 3>(0, 0).copy_from(&r0);
        let mut rigid = Matrix4::identity();
        for r in 0..3 {
            for c in 0..4 {
                rigid[(r, c)] = velo_to_cam[r * 4 + c];
            }
        }
        let rect_from_velo = rect * rigid;
        let velo_from_rect = rect_from_velo
            .try_inverse()
            .ok_or(DatasetError::NotOrthonormal("Tr_velo_to_cam"))?;
        Ok(Self {
            projections,
            rect_rotation,
            velo_to_cam,
            rect_from_velo,
            velo_from_rect,
        })
    }

    /// Pinhole projections resembling a Kitti color rig: rectified camera
    /// looking along LiDAR `x`, mounted just behind and below the scanner.
    pub fn kitti_like() -> Self {
        let f = 721.5377;
        let cx = 609.5593;
        let cy = 172.854;
        let offsets = [0.0, -386.1448, 44.85728, -339.5242];
        let mut projections = [[0.0; 12]; 4];
        for (p, off) in projections.iter_mut().zip(offsets) {
            *p = [f, 0.0, cx, off, 0.0, f, cy, 0.0, 0.0, 0.0, 1.0, 0.0];
        }
        let rect = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let tr = [
            0.0, -1.0, 0.0, 0.0, //
            0.0, 0.0, -1.0, -0.08, //
            1.0, 0.0, 0.0, -0.27,
        ];
        Self::new(projections, rect, tr).expect("preset calibration is orthonormal")
    }

    pub fn identity() -> Self {
        let p = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let r = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        Self::new([p; 4], r, p).expect("identity is orthonormal")
    }

    pub fn projection(&self, camera: usize) -> &[f64; 12] {
        &self.projections[camera]
    }

    pub fn rect_rotation(&self) -> &[f64; 9] {
        &self.rect_rotation
    }

    pub fn velo_to_cam_matrix(&self) -> &[f64; 12] {
        &self.velo_to_cam
    }

    /// LiDAR point to rectified camera frame.
    pub fn velo_to_cam(&self, p: [f64; 3]) -> [f64; 3] {
        apply(&self.rect_from_velo, p)
    }

    /// Rectified camera point back to the LiDAR frame.
    pub fn cam_to_velo(&self, p: [f64; 3]) -> [f64; 3] {
        apply(&self.velo_from_rect, p)
    }

    pub fn velo_dir_to_cam(&self, d: [f64; 3]) -> [f64; 3] {
        rotate(&self.rect_from_velo, d)
    }

    pub fn cam_dir_to_velo(&self, d: [f64; 3]) -> [f64; 3] {
        rotate(&self.velo_from_rect, d)
    }

    /// Project a rectified camera point to pixel coordinates of `camera`.
    /// `None` when the point is behind the image plane.
    pub fn project_to_image(&self, camera: usize, p: [f64; 3]) -> Option<(f64, f64)> {
        let m = &self.projections[camera];
        let u = m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3];
        let v = m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7];
        let w = m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11];
        (w > 1e-6).then(|| (u / w, v / w))
    }
}

fn apply(m: &Matrix4<f64>, p: [f64; 3]) -> [f64; 3] {
    let v = m * Vector4::new(p[0], p[1], p[2], 1.0);
    [v.x, v.y, v.z]
}

fn rotate(m: &Matrix4<f64>, d: [f64; 3]) -> [f64; 3] {
    let r = m.fixed_view::<3, 3>(0, 0) * Vector3::new(d[0], d[1], d[2]);
    [r.x, r.y, r.z]
}

fn check_orthonormal(m: &Matrix3<f64>, key: &'static str) -> Result<(), DatasetError> {
    let err = (m * m.transpose() - Matrix3::identity()).abs().max();
    if err > ORTHO_TOL {
        return Err(DatasetError::NotOrthonormal(key));
    }
    Ok(())
}

fn take<const N: usize>(
    map: &HashMap<&str, Vec<f64>>,
    key: &'static str,
) -> Result<[f64; N], DatasetError> {
    let v = map.get(key).ok_or(DatasetError::MissingKey(key))?;
    v.as_slice().try_into().map_err(|_| DatasetError::BadDimension {
        key: key.to_string(),
        expected: N,
        found: v.len(),
    })
}

/// Parse `KEY: v1 v2 ...` lines. Unknown keys are ignored.
pub fn parse_kitti_calib(text: &str) -> Result<Calibration, DatasetError> {
    let mut map: HashMap<&str, Vec<f64>> = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let values = rest
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DatasetError::MalformedLine {
                line: n + 1,
                reason: e.to_string(),
            })?;
        map.insert(key.trim(), values);
    }
    let projections = [
        take::<12>(&map, "P0")?,
        take::<12>(&map, "P1")?,
        take::<12>(&map, "P2")?,
        take::<12>(&map, "P3")?,
    ];
    let rect = take::<9>(&map, "R0_rect")?;
    let tr = take::<12>(&map, "Tr_velo_to_cam")?;
    Calibration::new(projections, rect, tr)
}

pub fn write_kitti_calib(calib: &Calibration) -> String {
    let mut out = String::new();
    let mut line = |key: &str, vals: &[f64]| {
        let joined: Vec<String> = vals.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{key}: {}", joined.join(" ")).unwrap();
    };
    for (i, p) in calib.projections.iter().enumerate() {
        line(&format!("P{i}"), p);
    }
    line("R0_rect", &calib.rect_rotation);
    line("Tr_velo_to_cam", &calib.velo_to_cam);
    out
}
