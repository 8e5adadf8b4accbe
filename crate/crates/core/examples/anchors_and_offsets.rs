//! Anchor templates from labelled boxes, the anchor lattice, training-time
//! assignment and the offset encoding.

use avodkit::dataset_io::{synth_scene, ClassLabel, SceneSpec};
use avodkit::detector::{
    assign_anchors, class_anchor_stats, decode_offsets, encode_offsets, generate_anchors, AnchorLabel,
    PipelineConfig,
};

fn main() {
    let scene = synth_scene(
        &SceneSpec {
            cars: 8,
            ..SceneSpec::default()
        },
        1,
    )
    .unwrap();
    let templates = class_anchor_stats(&scene.ground_truth, ClassLabel::Car).unwrap();
    for t in &templates {
        println!("template l={:.3} w={:.3} h={:.3} z={:.3}", t.length, t.width, t.height, t.z_center);
    }

    let cfg = PipelineConfig::default();
    let anchors = generate_anchors(&cfg.grid, &cfg, ClassLabel::Car, &templates);
    let labels = assign_anchors(&anchors, &scene.ground_truth, cfg.rpn_pos_iou, cfg.rpn_neg_iou);
    let positive = labels.iter().filter(|l| matches!(l, AnchorLabel::Object { .. })).count();
    let ignored = labels.iter().filter(|l| matches!(l, AnchorLabel::Ignore)).count();
    println!("{} anchors: {positive} object, {ignored} ignored", anchors.len());

    let (i, gt_index) = labels
        .iter()
        .enumerate()
        .find_map(|(i, l)| match l {
            AnchorLabel::Object { gt_index, .. } => Some((i, *gt_index)),
            _ => None,
        })
        .expect("some anchor matches");
    let gt = &scene.ground_truth[gt_index];
    let off = encode_offsets(&anchors[i], gt).unwrap();
    println!("offsets {off:?}");
    let back = decode_offsets(&anchors[i], &off).unwrap();
    println!("decoded centroid {:?} vs {:?}", back.centroid, gt.centroid);
}
