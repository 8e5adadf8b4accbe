//! Matching, precision-recall and interpolated AP on a small example, and the
//! class mean on published per-class numbers.

use avodkit::dataset_io::{Box3D, ClassLabel};
use avodkit::detector::Detection;
use avodkit::evaluator::{interpolated_ap, map_over_classes, match_detections, pr_curve};

fn main() {
    let car = |x: f64| Box3D::new(ClassLabel::Car, [x, 0.0, -1.0], [4.0, 1.8, 1.5], 0.0);
    let gts = [car(10.0), car(20.0)];
    let dets = [
        Detection::new(car(10.1), 0.9),
        Detection::new(car(40.0), 0.8),
        Detection::new(car(19.8), 0.7),
    ];
    let m = match_detections(&dets, &gts, 0.5);
    let curve = pr_curve(&m).unwrap();
    for p in &curve.points {
        println!("score {:.1}: recall {:.3} precision {:.3}", p.score, p.recall, p.precision);
    }
    println!("AP = {:.6}", interpolated_ap(&curve));

    for (name, aps) in [("SF", [0.77, 0.34, 0.46]), ("SIC", [0.58, 0.14, 0.30]), ("SIL", [0.74, 0.29, 0.29])] {
        println!("{name:<3} mAP {:.4}", map_over_classes(&aps).unwrap());
    }
}
