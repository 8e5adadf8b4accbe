use super::Detection;
use crate::geometry::{box3d_to_bev, iou_axis_aligned, iou_bev, BevBox, GeometryError};

/// Greedy non-maximum suppression on rotated BEV footprints.
///
/// Detections are visited by descending score (ties by input order); one is
/// dropped when its IoU with an already kept same-class detection exceeds
/// `iou_thresh`. At most `max_keep` survive, in visiting order.
pub fn nms(detections: &[Detection], iou_thresh: f64, max_keep: usize) -> Vec<Detection> {
    greedy(detections, iou_thresh, max_keep, iou_bev)
}

/// Same as [`nms`] with yaw ignored, for non-oriented proposals.
pub fn nms_axis_aligned(detections: &[Detection], iou_thresh: f64, max_keep: usize) -> Vec<Detection> {
    greedy(detections, iou_thresh, max_keep, iou_axis_aligned)
}

fn greedy(
    detections: &[Detection],
    iou_thresh: f64,
    max_keep: usize,
    iou: fn(&BevBox, &BevBox) -> Result<f64, GeometryError>,
) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score).then(a.cmp(&b)));
    let footprints: Vec<BevBox> = detections.iter().map(|d| box3d_to_bev(&d.bbox)).collect();
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.len() >= max_keep {
            break;
        }
        let class = detections[i].class_label();
        let suppressed = kept.iter().any(|&k| {
            detections[k].class_label() == class
                && iou(&footprints[k], &footprints[i]).unwrap_or(0.0) > iou_thresh
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| detections[i]).collect()
}
