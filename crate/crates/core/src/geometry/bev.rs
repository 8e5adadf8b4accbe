use ndarray::{Array2, Array3};

use super::{BevGridSpec, GeometryError};
use crate::dataset_io::{Calibration, PointCloud};

const MAGIC: &[u8; 4] = b"BEVG";
const DENSITY_NORM: f64 = 64.0;

/// Multi-channel BEV raster of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub spec: BevGridSpec,
    /// `(channels, rows, cols)`.
    pub channels: Array3<f64>,
    /// Raw per-cell point counts; absent for grids read back from bytes.
    pub counts: Option<Array2<u32>>,
    /// Points that fell outside the extent or the height range.
    pub dropped: usize,
}

impl BevGrid {
    pub fn zeros(spec: BevGridSpec) -> Self {
        Self {
            channels: Array3::zeros((spec.channels(), spec.rows(), spec.cols())),
            counts: Some(Array2::zeros((spec.rows(), spec.cols()))),
            spec,
            dropped: 0,
        }
    }

    pub fn density_channel(&self) -> usize {
        self.spec.height_slices as usize
    }

    /// `BEVG` magic, spec as little-endian `f64` x7 and `u32`, channels as
    /// row-major `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.spec;
        let mut out = Vec::with_capacity(4 + 7 * 8 + 4 + self.channels.len() * 4);
        out.extend_from_slice(MAGIC);
        for v in [
            s.forward[0],
            s.forward[1],
            s.lateral[0],
            s.lateral[1],
            s.height[0],
            s.height[1],
            s.cell_size,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.height_slices.to_le_bytes());
        for v in self.channels.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GeometryError> {
        let header = 4 + 7 * 8 + 4;
        if bytes.len() < header || &bytes[..4] != MAGIC {
            return Err(GeometryError::Format("missing BEVG header".into()));
        }
        let f = |i: usize| f64::from_le_bytes(bytes[4 + i * 8..12 + i * 8].try_into().unwrap());
        let spec = BevGridSpec {
            forward: [f(0), f(1)],
            lateral: [f(2), f(3)],
            height: [f(4), f(5)],
            cell_size: f(6),
            height_slices: u32::from_le_bytes(bytes[60..64].try_into().unwrap()),
        };
        spec.validate()?;
        let shape = (spec.channels(), spec.rows(), spec.cols());
        let n = shape.0 * shape.1 * shape.2;
        if bytes.len() != header + n * 4 {
            return Err(GeometryError::Format(format!(
                "expected {} payload bytes, found {}",
                n * 4,
                bytes.len() - header
            )));
        }
        let data: Vec<f64> = bytes[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let channels = Array3::from_shape_vec(shape, data)
            .map_err(|e| GeometryError::Format(e.to_string()))?;
        Ok(Self {
            spec,
            channels,
            counts: None,
            dropped: 0,
        })
    }
}

fn density(n: u32) -> f64 {
    ((n as f64 + 1.0).ln() / DENSITY_NORM.ln()).min(1.0)
}

/// Rasterise a cloud: per height slice the max point height normalised to the
/// slice, plus `min(1, ln(N+1)/ln 64)` density. Points outside the extent or
/// the height range are dropped and counted.
pub fn bev_project(cloud: &PointCloud, spec: &BevGridSpec) -> Result<BevGrid, GeometryError> {
    rasterise(cloud, spec, |_| Some(()), |z_norm, _| z_norm)
}

/// Which points a camera sees: rectified-frame projection into an image.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub calibration: Calibration,
    pub camera: usize,
    pub image_size: (f64, f64),
    pub min_depth: f64,
}

impl CameraModel {
    pub fn kitti_default() -> Self {
        Self::with_calibration(Calibration::kitti_like())
    }

    pub fn with_calibration(calibration: Calibration) -> Self {
        Self {
            calibration,
            camera: 2,
            image_size: (1242.0, 375.0),
            min_depth: 0.5,
        }
    }

    pub fn sees(&self, p: [f64; 3]) -> bool {
        let cam = self.calibration.velo_to_cam(p);
        if cam[2] < self.min_depth {
            return false;
        }
        match self.calibration.project_to_image(self.camera, cam) {
            Some((u, v)) => u >= 0.0 && u < self.image_size.0 && v >= 0.0 && v < self.image_size.1,
            None => false,
        }
    }
}

/// Camera-side stand-in raster aligned with the BEV grid: the points the
/// camera sees, with per-slice max reflectance in place of height, and the
/// density of visible points in the last channel.
pub fn camera_proxy_project(
    cloud: &PointCloud,
    spec: &BevGridSpec,
    camera: &CameraModel,
) -> Result<BevGrid, GeometryError> {
    rasterise(
        cloud,
        spec,
        |p| camera.sees(p).then_some(()),
        |_, reflectance| reflectance,
    )
}

fn rasterise(
    cloud: &PointCloud,
    spec: &BevGridSpec,
    keep: impl Fn([f64; 3]) -> Option<()>,
    value: impl Fn(f64, f64) -> f64,
) -> Result<BevGrid, GeometryError> {
    spec.validate()?;
    let mut grid = BevGrid::zeros(*spec);
    let slices = spec.height_slices as usize;
    let slice_h = spec.slice_height();
    let mut counts = Array2::<u32>::zeros((spec.rows(), spec.cols()));
    for p in &cloud.points {
        let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
        let cell = spec.cell_of(x, y);
        let in_height = z >= spec.height[0] && z < spec.height[1];
        let (Some((r, c)), true) = (cell, in_height) else {
            grid.dropped += 1;
            continue;
        };
        if keep([x, y, z]).is_none() {
            grid.dropped += 1;
            continue;
        }
        let k = (((z - spec.height[0]) / slice_h).floor() as usize).min(slices - 1);
        let z_norm = ((z - (spec.height[0] + k as f64 * slice_h)) / slice_h).clamp(0.0, 1.0);
        let v = value(z_norm, p.reflectance as f64);
        let slot = &mut grid.channels[[k, r, c]];
        if v > *slot {
            *slot = v;
        }
        counts[[r, c]] += 1;
    }
    for ((r, c), n) in counts.indexed_iter() {
        if *n > 0 {
            grid.channels[[slices, r, c]] = density(*n);
        }
    }
    grid.counts = Some(counts);
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset_io::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_spec() -> BevGridSpec {
        BevGridSpec {
            forward: [0.0, 4.0],
            lateral: [-2.0, 2.0],
            height: [-2.5, 1.0],
            cell_size: 0.5,
            height_slices: 5,
        }
    }

    #[test]
    fn empty_cloud() {
        let g = bev_project(&PointCloud::default(), &small_spec()).unwrap();
        assert!(g.channels.iter().all(|v| *v == 0.0));
        assert_eq!(g.dropped, 0);
    }

    #[test]
    fn single_point_at_cell_center() {
        let spec = small_spec();
        let (x, y) = spec.cell_center(3, 2);
        let cloud = PointCloud::new(vec![Point3::new(x as f32, y as f32, -0.5, 0.3)], 0);
        let g = bev_project(&cloud, &spec).unwrap();
        let nonzero_heights = g
            .channels
            .slice(ndarray::s![..5, .., ..])
            .iter()
            .filter(|v| **v != 0.0)
            .count();
        assert_eq!(nonzero_heights, 1);
        assert!((g.channels[[5, 3, 2]] - 2f64.ln() / 64f64.ln()).abs() < 1e-15);
        // z = -0.5 sits in slice 2 (-1.1 .. -0.4), 6/7 of the way up
        assert!((g.channels[[2, 3, 2]] - 0.6 / 0.7).abs() < 1e-6);
    }

    #[test]
    fn random_cloud_matches_brute_force_binning() {
        let spec = small_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Point3> = (0..5000)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0f32..5.0),
                    rng.random_range(-3.0f32..3.0),
                    rng.random_range(-3.0f32..1.5),
                    rng.random_range(0.0f32..1.0),
                )
            })
            .collect();
        let cloud = PointCloud::new(points, 0);
        let g = bev_project(&cloud, &spec).unwrap();
        let mut binned = 0usize;
        for r in 0..spec.rows() {
            for c in 0..spec.cols() {
                let x0 = spec.forward[0] + r as f64 * spec.cell_size;
                let y0 = spec.lateral[0] + c as f64 * spec.cell_size;
                let n = cloud
                    .points
                    .iter()
                    .filter(|p| {
                        let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
                        x >= x0
                            && x < x0 + spec.cell_size
                            && y >= y0
                            && y < y0 + spec.cell_size
                            && z >= spec.height[0]
                            && z < spec.height[1]
                    })
                    .count();
                binned += n;
                let expected = ((n as f64 + 1.0).ln() / 64f64.ln()).min(1.0);
                let expected = if n == 0 { 0.0 } else { expected };
                assert!((g.channels[[5, r, c]] - expected).abs() < 1e-9);
            }
        }
        let counted: u32 = g.counts.as_ref().unwrap().iter().sum();
        assert_eq!(counted as usize, binned);
        assert_eq!(binned + g.dropped, cloud.len());
    }

    #[test]
    fn density_saturates() {
        assert_eq!(density(63), 1.0);
        assert_eq!(density(1000), 1.0);
        assert!(density(62) < 1.0);
    }

    #[test]
    fn bytes_roundtrip() {
        let spec = small_spec();
        let cloud = PointCloud::new(vec![Point3::new(1.2, 0.3, 0.2, 0.5)], 0);
        let g = bev_project(&cloud, &spec).unwrap();
        let bytes = g.to_bytes();
        assert_eq!(&bytes[..4], b"BEVG");
        let back = BevGrid::from_bytes(&bytes).unwrap();
        assert_eq!(back.spec, spec);
        for (a, b) in back.channels.iter().zip(g.channels.iter()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert!(BevGrid::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(BevGrid::from_bytes(b"NOPE").is_err());
    }

    #[test]
    fn camera_proxy_hides_points_behind() {
        let spec = BevGridSpec {
            forward: [-10.0, 10.0],
            lateral: [-10.0, 10.0],
            cell_size: 0.5,
            ..BevGridSpec::default()
        };
        let cloud = PointCloud::new(
            vec![Point3::new(8.0, 0.0, -1.0, 0.7), Point3::new(-8.0, 0.0, -1.0, 0.7)],
            0,
        );
        let g = camera_proxy_project(&cloud, &spec, &CameraModel::kitti_default()).unwrap();
        assert_eq!(g.dropped, 1);
        assert_eq!(g.channels.shape(), &[6, 40, 40]);
        let (r, c) = spec.cell_of(8.0, 0.0).unwrap();
        assert!(g.channels.slice(ndarray::s![..5, r, c]).iter().any(|v| (*v - 0.7).abs() < 1e-6));
    }
}
