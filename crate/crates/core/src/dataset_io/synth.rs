use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Box3D, Calibration, ClassLabel, DatasetError, Point3, PointCloud, Scene};
use crate::geometry::{box3d_to_bev, iou_bev, BevBox};

/// Mean box size for a class and the uniform relative jitter applied per box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    pub dims: [f64; 3],
    pub jitter: f64,
}

impl ClassPrior {
    pub fn default_for(class: ClassLabel) -> Self {
        let dims = match class {
            ClassLabel::Car => [3.88, 1.63, 1.53],
            ClassLabel::Pedestrian => [0.84, 0.66, 1.76],
            ClassLabel::Cyclist => [1.76, 0.60, 1.74],
        };
        Self { dims, jitter: 0.1 }
    }
}

/// Recipe for one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub cars: usize,
    pub pedestrians: usize,
    pub cyclists: usize,
    /// LiDAR `x` range boxes are placed in.
    pub forward_range: [f64; 2],
    /// LiDAR `y` range boxes are placed in.
    pub lateral_range: [f64; 2],
    pub ground_z: f64,
    /// Points per square meter on each visible box face.
    pub surface_density: f64,
    pub min_points_per_box: usize,
    pub clutter_points: usize,
    /// Clearance kept between box footprints.
    pub min_gap: f64,
    pub max_retries: usize,
    pub frame_id: u64,
    pub priors: Option<[ClassPrior; 3]>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            cars: 3,
            pedestrians: 0,
            cyclists: 0,
            forward_range: [5.0, 55.0],
            lateral_range: [-25.0, 25.0],
            ground_z: -1.73,
            surface_density: 10.0,
            min_points_per_box: 40,
            clutter_points: 1000,
            min_gap: 0.3,
            max_retries: 500,
            frame_id: 0,
            priors: None,
        }
    }
}

impl SceneSpec {
    pub fn empty() -> Self {
        Self {
            cars: 0,
            clutter_points: 0,
            ..Self::default()
        }
    }

    fn prior(&self, class: ClassLabel) -> ClassPrior {
        match &self.priors {
            Some(p) => p[class as usize],
            None => ClassPrior::default_for(class),
        }
    }

    fn box_count(&self) -> usize {
        self.cars + self.pedestrians + self.cyclists
    }
}

fn inflate(b: &BevBox, gap: f64) -> BevBox {
    BevBox {
        size: [b.size[0] + gap, b.size[1] + gap],
        ..*b
    }
}

/// Generate a scene deterministically from `seed`.
///
/// Each box gets points on its four sides and roof; clutter points are drawn
/// over the placement area and rejected when they fall inside any box.
pub fn synth_scene(spec: &SceneSpec, seed: u64) -> Result<Scene, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = std::iter::repeat_n(ClassLabel::Car, spec.cars)
        .chain(std::iter::repeat_n(ClassLabel::Pedestrian, spec.pedestrians))
        .chain(std::iter::repeat_n(ClassLabel::Cyclist, spec.cyclists));

    let mut boxes: Vec<Box3D> = Vec::with_capacity(spec.box_count());
    let mut footprints: Vec<BevBox> = Vec::new();
    for class in classes {
        let prior = spec.prior(class);
        let mut placed = false;
        for _ in 0..spec.max_retries.max(1) {
            let dims: [f64; 3] = std::array::from_fn(|k| {
                prior.dims[k] * (1.0 + rng.random_range(-prior.jitter..=prior.jitter))
            });
            let yaw = std::f64::consts::PI - rng.random_range(0.0..std::f64::consts::TAU);
            let reach = 0.5 * dims[0].hypot(dims[1]);
            let (f0, f1) = (spec.forward_range[0] + reach, spec.forward_range[1] - reach);
            let (l0, l1) = (spec.lateral_range[0] + reach, spec.lateral_range[1] - reach);
            if f0 >= f1 || l0 >= l1 {
                break;
            }
            let centroid = [
                rng.random_range(f0..f1),
                rng.random_range(l0..l1),
                spec.ground_z + dims[2] / 2.0,
            ];
            let candidate = Box3D::new(class, centroid, dims, yaw);
            let fp = inflate(&box3d_to_bev(&candidate), spec.min_gap);
            let clear = footprints
                .iter()
                .all(|other| iou_bev(&fp, other).map(|i| i == 0.0).unwrap_or(false));
            if clear {
                boxes.push(candidate);
                footprints.push(fp);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(DatasetError::InfeasibleSpec(spec.box_count()));
        }
    }

    let mut points = Vec::new();
    for b in &boxes {
        sample_surface(b, spec, &mut rng, &mut points);
    }
    sample_clutter(&boxes, spec, &mut rng, &mut points);

    Ok(Scene {
        cloud: PointCloud::new(points, spec.frame_id),
        ground_truth: boxes,
        calibration: Some(Calibration::kitti_like()),
    })
}

fn sample_surface(b: &Box3D, spec: &SceneSpec, rng: &mut ChaCha8Rng, out: &mut Vec<Point3>) {
    let [l, w, h] = b.dims;
    // +x, -x, +y, -y sides, then roof
    let areas = [w * h, w * h, l * h, l * h, l * w];
    let total: f64 = areas.iter().sum();
    let n = ((total * spec.surface_density).round() as usize).max(spec.min_points_per_box);
    let (s, c) = b.yaw.sin_cos();
    // stay a hair inside so f32 storage keeps points within the box
    let (hl, hw, hh) = (0.995 * l / 2.0, 0.995 * w / 2.0, 0.995 * h / 2.0);
    for _ in 0..n {
        let mut pick = rng.random_range(0.0..total);
        let mut face = 0;
        while face < 4 && pick >= areas[face] {
            pick -= areas[face];
            face += 1;
        }
        let u = rng.random_range(-1.0..=1.0);
        let v = rng.random_range(-1.0..=1.0);
        let (lx, ly, lz) = match face {
            0 => (hl, u * hw, v * hh),
            1 => (-hl, u * hw, v * hh),
            2 => (u * hl, hw, v * hh),
            3 => (u * hl, -hw, v * hh),
            _ => (u * hl, v * hw, hh),
        };
        out.push(Point3::new(
            (b.centroid[0] + lx * c - ly * s) as f32,
            (b.centroid[1] + lx * s + ly * c) as f32,
            (b.centroid[2] + lz) as f32,
            rng.random_range(0.2f32..=0.9),
        ));
    }
}

fn sample_clutter(boxes: &[Box3D], spec: &SceneSpec, rng: &mut ChaCha8Rng, out: &mut Vec<Point3>) {
    let grown: Vec<Box3D> = boxes
        .iter()
        .map(|b| Box3D {
            dims: [b.dims[0] + 0.1, b.dims[1] + 0.1, b.dims[2] + 0.1],
            ..*b
        })
        .collect();
    let mut dropped = 0usize;
    for i in 0..spec.clutter_points {
        let mut accepted = None;
        for _ in 0..100 {
            let x = rng.random_range(spec.forward_range[0]..spec.forward_range[1]);
            let y = rng.random_range(spec.lateral_range[0]..spec.lateral_range[1]);
            let z = if i % 10 < 7 {
                spec.ground_z + rng.random_range(0.0..0.05)
            } else {
                spec.ground_z + rng.random_range(0.0..2.5)
            };
            let p = [x as f32 as f64, y as f32 as f64, z as f32 as f64];
            if grown.iter().all(|b| !b.contains(p)) {
                accepted = Some(p);
                break;
            }
        }
        match accepted {
            Some(p) => out.push(Point3::new(
                p[0] as f32,
                p[1] as f32,
                p[2] as f32,
                rng.random_range(0.0f32..=0.4),
            )),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} clutter points that kept landing inside boxes");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset_io::write_velodyne;

    #[test]
    fn empty_spec() {
        let s = synth_scene(&SceneSpec::empty(), 1).unwrap();
        assert!(s.cloud.is_empty());
        assert!(s.ground_truth.is_empty());
    }

    #[test]
    fn deterministic() {
        let spec = SceneSpec {
            pedestrians: 2,
            cyclists: 1,
            ..SceneSpec::default()
        };
        let a = synth_scene(&spec, 42).unwrap();
        let b = synth_scene(&spec, 42).unwrap();
        assert_eq!(write_velodyne(&a.cloud), write_velodyne(&b.cloud));
        assert_eq!(a, b);
        let c = synth_scene(&spec, 43).unwrap();
        assert_ne!(a.ground_truth, c.ground_truth);
    }

    #[test]
    fn boxes_supported_by_points() {
        let spec = SceneSpec::default();
        let s = synth_scene(&spec, 3).unwrap();
        assert_eq!(s.ground_truth.len(), 3);
        for b in &s.ground_truth {
            let inside = s
                .cloud
                .points
                .iter()
                .filter(|p| b.contains([p.x as f64, p.y as f64, p.z as f64]))
                .count();
            assert!(inside >= spec.min_points_per_box, "{inside} points");
        }
    }

    #[test]
    fn clutter_avoids_boxes() {
        let spec = SceneSpec {
            cars: 4,
            clutter_points: 3000,
            min_points_per_box: 10,
            surface_density: 0.0,
            ..SceneSpec::default()
        };
        let s = synth_scene(&spec, 9).unwrap();
        let inside: usize = s
            .ground_truth
            .iter()
            .map(|b| {
                s.cloud
                    .points
                    .iter()
                    .filter(|p| b.contains([p.x as f64, p.y as f64, p.z as f64]))
                    .count()
            })
            .sum();
        assert_eq!(inside, 4 * 10);
    }

    #[test]
    fn no_overlap() {
        let spec = SceneSpec {
            cars: 8,
            pedestrians: 4,
            cyclists: 4,
            ..SceneSpec::default()
        };
        let s = synth_scene(&spec, 11).unwrap();
        for (i, a) in s.ground_truth.iter().enumerate() {
            for b in &s.ground_truth[i + 1..] {
                assert_eq!(iou_bev(&box3d_to_bev(a), &box3d_to_bev(b)).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn infeasible() {
        let spec = SceneSpec {
            cars: 50,
            forward_range: [0.0, 10.0],
            lateral_range: [0.0, 10.0],
            max_retries: 50,
            ..SceneSpec::default()
        };
        assert_eq!(synth_scene(&spec, 0), Err(DatasetError::InfeasibleSpec(50)));
    }
}
