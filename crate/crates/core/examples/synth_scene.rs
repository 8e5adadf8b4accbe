//! Generate a synthetic scene, write it in Kitti layout and read it back.

use avodkit::dataset_io::{
    parse_kitti_calib, parse_velodyne, read_label_boxes, synth_scene, write_kitti_calib, write_label_boxes,
    write_velodyne, SceneSpec,
};

fn main() {
    let spec = SceneSpec {
        cars: 5,
        pedestrians: 2,
        cyclists: 1,
        ..SceneSpec::default()
    };
    let scene = synth_scene(&spec, 42).expect("spec is feasible");
    let calib = scene.calibration.clone().unwrap();
    println!("{} points, {} boxes", scene.cloud.points.len(), scene.ground_truth.len());

    let bin = write_velodyne(&scene.cloud);
    let labels: Vec<_> = scene.ground_truth.iter().map(|b| (*b, None)).collect();
    let label_text = write_label_boxes(&labels, &calib);
    let calib_text = write_kitti_calib(&calib);
    println!("velodyne: {} bytes\nlabel_2:\n{label_text}", bin.len());

    let cloud = parse_velodyne(&bin).unwrap();
    let calib = parse_kitti_calib(&calib_text).unwrap();
    let boxes = read_label_boxes(&label_text, &calib).unwrap();
    assert_eq!(cloud, scene.cloud);
    for ((b, _), gt) in boxes.iter().zip(&scene.ground_truth) {
        let drift = (0..3).map(|k| (b.centroid[k] - gt.centroid[k]).abs()).fold(0.0, f64::max);
        println!(
            "{:<10} at ({:6.2}, {:6.2}, {:5.2}) yaw {:+.3}  roundtrip drift {drift:.1e} m",
            b.class_label.to_string(), b.centroid[0], b.centroid[1], b.centroid[2], b.yaw
        );
    }
}
