use super::{DatasetError, Point3, PointCloud};

const RECORD: usize = 16;

/// Decode a headerless Velodyne `.bin` buffer: little-endian `f32` quadruples
/// `x, y, z, reflectance`.
///
/// Reflectance outside `[0, 1]` is clamped and logged.
pub fn parse_velodyne(bytes: &[u8]) -> Result<PointCloud, DatasetError> {
    if !bytes.len().is_multiple_of(RECORD) {
        return Err(DatasetError::TruncatedRecord(bytes.len()));
    }
    let mut points = Vec::with_capacity(bytes.len() / RECORD);
    let mut clamped = 0usize;
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        let mut f = [0f32; 4];
        for (k, v) in f.iter_mut().enumerate() {
            *v = f32::from_le_bytes(rec[k * 4..k * 4 + 4].try_into().unwrap());
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(DatasetError::NonFiniteValue(i));
        }
        let mut reflectance = f[3];
        if !(0.0..=1.0).contains(&reflectance) {
            reflectance = reflectance.clamp(0.0, 1.0);
            clamped += 1;
        }
        points.push(Point3::new(f[0], f[1], f[2], reflectance));
    }
    if clamped > 0 {
        log::warn!("clamped reflectance of {clamped} points into [0, 1]");
    }
    Ok(PointCloud::new(points, 0))
}

pub fn write_velodyne(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.points.len() * RECORD);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.reflectance] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_buffer() {
        assert!(parse_velodyne(&[]).unwrap().is_empty());
    }

    #[test]
    fn single_record() {
        let mut b = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let c = parse_velodyne(&b).unwrap();
        assert_eq!(c.points, vec![Point3::new(1.0, 2.0, 3.0, 0.5)]);
    }

    #[test]
    fn truncated() {
        assert_eq!(parse_velodyne(&[0u8; 17]), Err(DatasetError::TruncatedRecord(17)));
    }

    #[test]
    fn non_finite() {
        let mut b = vec![0u8; 32];
        b[16 + 4..16 + 8].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(parse_velodyne(&b), Err(DatasetError::NonFiniteValue(1)));
    }

    #[test]
    fn reflectance_clamped() {
        let mut b = Vec::new();
        for v in [0.0f32, 0.0, 0.0, 1.7] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(parse_velodyne(&b).unwrap().points[0].reflectance, 1.0);
    }

    fn finite() -> impl Strategy<Value = f32> {
        prop::num::f32::NORMAL | prop::num::f32::ZERO | prop::num::f32::SUBNORMAL
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn roundtrip_bytes(pts in prop::collection::vec((finite(), finite(), finite(), 0.0f32..=1.0), 0..64)) {
            let mut bytes = Vec::new();
            for (x, y, z, r) in &pts {
                for v in [*x, *y, *z, *r] {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            let cloud = parse_velodyne(&bytes).unwrap();
            prop_assert_eq!(cloud.len(), bytes.len() / 16);
            prop_assert_eq!(write_velodyne(&cloud), bytes);
        }
    }
}
