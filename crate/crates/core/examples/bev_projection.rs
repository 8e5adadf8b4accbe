//! Rasterise a scene into the LiDAR BEV grid and the camera proxy grid, then
//! pool and fuse the crops around one object.

use avodkit::dataset_io::{synth_scene, SceneSpec};
use avodkit::geometry::{
    bev_project, box3d_to_bev, camera_proxy_project, crop_and_resize, fuse_mean, BevGridSpec, CameraModel,
};

fn main() {
    let scene = synth_scene(&SceneSpec::default(), 7).unwrap();
    let spec = BevGridSpec::default();
    let lidar = bev_project(&scene.cloud, &spec).unwrap();
    let camera = camera_proxy_project(&scene.cloud, &spec, &CameraModel::kitti_default()).unwrap();
    println!(
        "grid {} x {} x {} channels, cell {} m",
        spec.rows(),
        spec.cols(),
        spec.channels(),
        spec.cell_size
    );
    for (name, g) in [("lidar", &lidar), ("camera", &camera)] {
        let occupied = g.counts.as_ref().unwrap().iter().filter(|n| **n > 0).count();
        println!("{name:>6}: {occupied} occupied cells, {} points dropped", g.dropped);
    }

    let target = box3d_to_bev(&scene.ground_truth[0]);
    let a = crop_and_resize(&lidar, &target, (7, 7)).unwrap();
    let b = crop_and_resize(&camera, &target, (7, 7)).unwrap();
    let fused = fuse_mean(&a, &b).unwrap();
    let density = lidar.density_channel();
    println!("density channel of the 7x7 crop around the first box:");
    for row in fused.index_axis(ndarray::Axis(0), density).rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
        println!("  {}", cells.join(" "));
    }
}
