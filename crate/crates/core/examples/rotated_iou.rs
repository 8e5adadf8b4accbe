//! Exact rotated-footprint IoU and greedy NMS.

use std::f64::consts::FRAC_PI_4;

use avodkit::dataset_io::{Box3D, ClassLabel};
use avodkit::detector::{nms, Detection};
use avodkit::geometry::{iou_axis_aligned, iou_bev, BevBox};

fn main() {
    let a = BevBox::new([0.0, 0.0], [2.0, 2.0], 0.0);
    let cases = [
        ("half shift", BevBox::new([1.0, 0.0], [2.0, 2.0], 0.0)),
        ("rotated 45 deg", BevBox::new([0.0, 0.0], [2.0, 2.0], FRAC_PI_4)),
        ("disjoint", BevBox::new([5.0, 0.0], [2.0, 2.0], 0.3)),
    ];
    for (name, b) in cases {
        println!(
            "{name:<15} rotated {:.6}  axis-aligned {:.6}",
            iou_bev(&a, &b).unwrap(),
            iou_axis_aligned(&a, &b).unwrap()
        );
    }

    let car = |x: f64, yaw: f64, score: f64| {
        Detection::new(Box3D::new(ClassLabel::Car, [x, 0.0, -1.0], [4.0, 1.8, 1.5], yaw), score)
    };
    let dets = vec![car(10.0, 0.0, 0.9), car(10.3, 0.05, 0.8), car(14.5, 0.0, 0.7), car(10.1, 1.2, 0.6)];
    for d in nms(&dets, 0.5, 100) {
        println!("kept x={:.1} yaw={:.2} score={:.1}", d.bbox.centroid[0], d.bbox.yaw, d.score);
    }
}
