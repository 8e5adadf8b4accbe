use std::fmt::Write as _;

use super::{Box3D, Calibration, ClassLabel, DatasetError};
use crate::wrap_angle;

/// Image size used to clip projected 2D boxes when writing labels.
const IMAGE_SIZE: (f64, f64) = (1242.0, 375.0);

/// One Kitti label line, kept in the rectified camera frame exactly as written.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiObject {
    pub class_label: ClassLabel,
    pub truncated: f64,
    pub occluded: u8,
    pub alpha: f64,
    /// left, top, right, bottom in pixels.
    pub bbox: [f64; 4],
    /// height, width, length in meters.
    pub dimensions: [f64; 3],
    /// Bottom-center of the box in the rectified camera frame.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelParse {
    pub objects: Vec<KittiObject>,
    pub dont_care: usize,
    pub unknown: usize,
}

fn field(tok: &str, line: usize, name: &str) -> Result<f64, DatasetError> {
    let v: f64 = tok.parse().map_err(|_| DatasetError::MalformedLine {
        line,
        reason: format!("cannot parse {name} `{tok}`"),
    })?;
    if !v.is_finite() {
        return Err(DatasetError::MalformedLine {
            line,
            reason: format!("non-finite {name}"),
        });
    }
    Ok(v)
}

/// Parse label text. `DontCare` and classes other than Car, Pedestrian and
/// Cyclist are skipped and counted.
pub fn parse_kitti_label(text: &str) -> Result<LabelParse, DatasetError> {
    let mut out = LabelParse::default();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 15 && toks.len() != 16 {
            return Err(DatasetError::MalformedLine {
                line,
                reason: format!("expected 15 or 16 fields, found {}", toks.len()),
            });
        }
        let class_label = match toks[0] {
            "DontCare" => {
                out.dont_care += 1;
                continue;
            }
            name => match name.parse::<ClassLabel>() {
                Ok(c) => c,
                Err(_) => {
                    log::warn!("line {line}: skipping unsupported class `{name}`");
                    out.unknown += 1;
                    continue;
                }
            },
        };
        let f = |i: usize, name: &str| field(toks[i], line, name);
        let occluded: u8 = toks[2]
            .parse()
            .ok()
            .filter(|o| *o <= 3)
            .ok_or_else(|| DatasetError::MalformedLine {
                line,
                reason: format!("occluded must be 0-3, found `{}`", toks[2]),
            })?;
        let score = if toks.len() == 16 {
            Some(f(15, "score")?)
        } else {
            None
        };
        out.objects.push(KittiObject {
            class_label,
            truncated: f(1, "truncated")?,
            occluded,
            alpha: f(3, "alpha")?,
            bbox: [f(4, "bbox")?, f(5, "bbox")?, f(6, "bbox")?, f(7, "bbox")?],
            dimensions: [f(8, "height")?, f(9, "width")?, f(10, "length")?],
            location: [f(11, "x")?, f(12, "y")?, f(13, "z")?],
            rotation_y: f(14, "rotation_y")?,
            score,
        });
    }
    Ok(out)
}

pub fn write_kitti_label(objects: &[KittiObject]) -> String {
    let mut out = String::new();
    for o in objects {
        write!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            o.class_label,
            o.truncated,
            o.occluded,
            o.alpha,
            o.bbox[0],
            o.bbox[1],
            o.bbox[2],
            o.bbox[3],
            o.dimensions[0],
            o.dimensions[1],
            o.dimensions[2],
            o.location[0],
            o.location[1],
            o.location[2],
            o.rotation_y
        )
        .unwrap();
        if let Some(s) = o.score {
            write!(out, " {s}").unwrap();
        }
        out.push('\n');
    }
    out
}

impl KittiObject {
    /// Move the label into the LiDAR frame.
    pub fn to_box3d(&self, calib: &Calibration) -> Box3D {
        let [h, w, l] = self.dimensions;
        let [x, y, z] = self.location;
        // camera y points down: the centroid sits half a height above the bottom
        let centroid = calib.cam_to_velo([x, y - h / 2.0, z]);
        let (s, c) = self.rotation_y.sin_cos();
        let heading = calib.cam_dir_to_velo([c, 0.0, -s]);
        Box3D {
            class_label: self.class_label,
            centroid,
            dims: [l, w, h],
            yaw: wrap_angle(heading[1].atan2(heading[0])),
            truncated: self.truncated,
            occluded: self.occluded,
        }
    }

    /// Express a LiDAR-frame box as a label line; `alpha` and the 2D box are
    /// derived from the camera-2 projection.
    pub fn from_box3d(b: &Box3D, score: Option<f64>, calib: &Calibration) -> Self {
        let [l, w, h] = b.dims;
        let center = calib.velo_to_cam(b.centroid);
        let location = [center[0], center[1] + h / 2.0, center[2]];
        let (s, c) = b.yaw.sin_cos();
        let heading = calib.velo_dir_to_cam([c, s, 0.0]);
        let rotation_y = wrap_angle((-heading[2]).atan2(heading[0]));
        let alpha = wrap_angle(rotation_y - center[0].atan2(center[2]));
        KittiObject {
            class_label: b.class_label,
            truncated: b.truncated,
            occluded: b.occluded,
            alpha,
            bbox: image_bbox(b, calib),
            dimensions: [h, w, l],
            location,
            rotation_y,
            score,
        }
    }
}

fn image_bbox(b: &Box3D, calib: &Calibration) -> [f64; 4] {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for corner in b.corners() {
        let Some((u, v)) = calib.project_to_image(2, calib.velo_to_cam(corner)) else {
            return [-1.0; 4];
        };
        lo = (lo.0.min(u), lo.1.min(v));
        hi = (hi.0.max(u), hi.1.max(v));
    }
    let clip = |v: f64, max: f64| (v.clamp(0.0, max - 1.0) * 100.0).round() / 100.0;
    [
        clip(lo.0, IMAGE_SIZE.0),
        clip(lo.1, IMAGE_SIZE.1),
        clip(hi.0, IMAGE_SIZE.0),
        clip(hi.1, IMAGE_SIZE.1),
    ]
}

/// Parse label text straight into LiDAR-frame boxes.
pub fn read_label_boxes(
    text: &str,
    calib: &Calibration,
) -> Result<Vec<(Box3D, Option<f64>)>, DatasetError> {
    Ok(parse_kitti_label(text)?
        .objects
        .iter()
        .map(|o| (o.to_box3d(calib), o.score))
        .collect())
}

pub fn write_label_boxes(boxes: &[(Box3D, Option<f64>)], calib: &Calibration) -> String {
    let objects: Vec<KittiObject> = boxes
        .iter()
        .map(|(b, s)| KittiObject::from_box3d(b, *s, calib))
        .collect();
    write_kitti_label(&objects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CAR: &str =
        "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59\n";

    #[test]
    fn empty_text() {
        assert_eq!(parse_kitti_label("").unwrap(), LabelParse::default());
        assert!(parse_kitti_label("\n  \n").unwrap().objects.is_empty());
    }

    #[test]
    fn dont_care_skipped() {
        let p = parse_kitti_label(
            "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\n",
        )
        .unwrap();
        assert!(p.objects.is_empty());
        assert_eq!(p.dont_care, 1);
    }

    #[test]
    fn unknown_class_skipped() {
        let p = parse_kitti_label(&CAR.replacen("Car", "Van", 1)).unwrap();
        assert!(p.objects.is_empty());
        assert_eq!(p.unknown, 1);
    }

    #[test]
    fn real_line_fields() {
        let p = parse_kitti_label(CAR).unwrap();
        let o = &p.objects[0];
        assert_eq!(o.class_label, ClassLabel::Car);
        assert_eq!(o.dimensions, [1.65, 1.67, 3.64]);
        assert_eq!(o.location, [-0.65, 1.71, 46.70]);
        assert_eq!(o.score, None);
    }

    #[test]
    fn malformed_lines() {
        let err = parse_kitti_label(&format!("{CAR}Car 0 0 0\n")).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedLine { line: 2, .. }));
        let err = parse_kitti_label(&CAR.replace("46.70", "4x")).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn score_field() {
        let p = parse_kitti_label(&CAR.replace("-1.59\n", "-1.59 0.875\n")).unwrap();
        assert_eq!(p.objects[0].score, Some(0.875));
    }

    #[test]
    fn lidar_frame_conversion_roundtrip() {
        let calib = Calibration::kitti_like();
        let b = Box3D::new(ClassLabel::Car, [20.0, -3.0, -0.9], [4.0, 1.7, 1.5], 0.7);
        let o = KittiObject::from_box3d(&b, Some(0.5), &calib);
        let back = o.to_box3d(&calib);
        for k in 0..3 {
            assert!((back.centroid[k] - b.centroid[k]).abs() < 1e-9);
            assert!((back.dims[k] - b.dims[k]).abs() < 1e-12);
        }
        assert!((back.yaw - b.yaw).abs() < 1e-9);
        // standard Kitti relation between camera heading and LiDAR yaw
        assert!((wrap_angle(-o.rotation_y - std::f64::consts::FRAC_PI_2) - b.yaw).abs() < 1e-9);
    }

    fn object() -> impl Strategy<Value = KittiObject> {
        (
            prop::sample::select(ClassLabel::ALL.to_vec()),
            0.0f64..1.0,
            0u8..=3,
            -std::f64::consts::PI..std::f64::consts::PI,
            prop::array::uniform4(0.0f64..1242.0),
            prop::array::uniform3(0.1f64..10.0),
            prop::array::uniform3(-80.0f64..80.0),
            -std::f64::consts::PI..std::f64::consts::PI,
            prop::option::of(0.0f64..=1.0),
        )
            .prop_map(|(class_label, truncated, occluded, alpha, bbox, dimensions, location, rotation_y, score)| {
                KittiObject {
                    class_label,
                    truncated,
                    occluded,
                    alpha,
                    bbox,
                    dimensions,
                    location,
                    rotation_y,
                    score,
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn label_roundtrip(objs in prop::collection::vec(object(), 0..12)) {
            let text = write_kitti_label(&objs);
            let parsed = parse_kitti_label(&text).unwrap();
            prop_assert_eq!(&parsed.objects, &objs);
            prop_assert_eq!(write_kitti_label(&parsed.objects), text);
        }
    }
}
