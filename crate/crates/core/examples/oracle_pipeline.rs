//! Run the two-stage pipeline with a perfect and a noisy oracle on a handful
//! of scenes, in LiDAR-only and fused mode, and report AP.

use avodkit::dataset_io::{synth_scene, SceneSpec, Variant};
use avodkit::detector::{oracle_scorer, run_pipeline, NoiseSpec, PipelineConfig};
use avodkit::evaluator::evaluate;

fn main() {
    let scenes: Vec<_> = (0..5)
        .map(|i| {
            let spec = SceneSpec {
                cars: 4,
                pedestrians: 2,
                cyclists: 2,
                ..SceneSpec::default()
            };
            synth_scene(&spec, i).unwrap()
        })
        .collect();
    let noisy = NoiseSpec {
        score_sigma: 0.3,
        offset_sigma_m: 0.2,
    };
    for mode in [Variant::SIL, Variant::SF] {
        for (label, noise) in [("perfect", NoiseSpec::none()), ("noisy", noisy)] {
            let cfg = PipelineConfig::with_mode(mode);
            let dets: Vec<_> = scenes
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let scorer = oracle_scorer(&s.ground_truth, noise, i as u64);
                    run_pipeline(s, &scorer, &cfg).unwrap()
                })
                .collect();
            let eval = evaluate(
                dets.iter().zip(&scenes).map(|(d, s)| (&d.detections[..], &s.ground_truth[..])),
                0.5,
            );
            let per_class: Vec<String> = eval
                .report
                .classes
                .iter()
                .map(|(c, r)| format!("{c} {:.3}", r.ap.unwrap_or(f64::NAN)))
                .collect();
            let fused: usize = dets.iter().map(|d| d.trace.fuse_calls).sum();
            println!(
                "{:<3} {label:<7} mAP {:.3}  [{}]  fuse calls {fused}",
                mode.to_string(),
                eval.report.map.unwrap(),
                per_class.join(", ")
            );
        }
    }
}
