use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    decode_offsets, generate_anchors, nms, nms_axis_aligned, Anchor, AnchorLabel, CropBatch,
    Detection, DetectorError, PipelineConfig, ScoreRequest, ScoredItem, Scorer, Stage,
};
use crate::dataset_io::{ClassLabel, Scene, Variant};
use crate::geometry::{
    bev_project, camera_proxy_project, crop_and_resize, fuse_mean, BevGrid, CameraModel, GeometryError,
};

/// One scorer invocation as seen by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerCall {
    pub stage: Stage,
    pub class_label: ClassLabel,
    pub items: usize,
    pub streams: usize,
    pub fused: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub calls: Vec<ScorerCall>,
    /// Number of `fuse_mean` invocations.
    pub fuse_calls: usize,
    /// Anchors the scorer labelled as objects, when it reports assignments.
    pub positive_anchors: usize,
    pub proposals: usize,
    /// Proposals whose crop fell entirely outside the grid.
    pub dropped_crops: usize,
    pub background_rejected: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOutput {
    /// Sorted by descending score.
    pub detections: Vec<Detection>,
    pub trace: PipelineTrace,
}

struct Streams {
    grids: Vec<BevGrid>,
}

impl Streams {
    fn build(scene: &Scene, cfg: &PipelineConfig) -> Result<Self, GeometryError> {
        let camera = || {
            scene
                .calibration
                .clone()
                .map_or_else(CameraModel::kitti_default, CameraModel::with_calibration)
        };
        let grids = match cfg.mode {
            Variant::SIL => vec![bev_project(&scene.cloud, &cfg.grid)?],
            Variant::SIC => vec![camera_proxy_project(&scene.cloud, &cfg.grid, &camera())?],
            Variant::SF => vec![
                bev_project(&scene.cloud, &cfg.grid)?,
                camera_proxy_project(&scene.cloud, &cfg.grid, &camera())?,
            ],
        };
        Ok(Self { grids })
    }

    /// Crop every stream for one box, fusing when there are two.
    fn crop(&self, anchor: &Anchor, size: [usize; 2]) -> Result<Array3<f64>, GeometryError> {
        let bev = anchor.bev();
        let mut crops = self
            .grids
            .iter()
            .map(|g| crop_and_resize(g, &bev, (size[0], size[1])));
        let first = crops.next().expect("at least one stream")?;
        match crops.next() {
            Some(second) => fuse_mean(&first, &second?),
            None => Ok(first),
        }
    }

    fn fused(&self) -> bool {
        self.grids.len() > 1
    }
}

fn call_scorer(
    scorer: &dyn Scorer,
    stage: Stage,
    class_label: ClassLabel,
    boxes: &[Anchor],
    features: &CropBatch,
    trace: &mut PipelineTrace,
) -> Result<Vec<ScoredItem>, DetectorError> {
    trace.calls.push(ScorerCall {
        stage,
        class_label,
        items: boxes.len(),
        streams: features.streams,
        fused: features.fused,
    });
    let items = scorer.score(&ScoreRequest {
        stage,
        class_label,
        boxes,
        features,
    })?;
    if items.len() != boxes.len() {
        return Err(DetectorError::LengthMismatch {
            expected: boxes.len(),
            found: items.len(),
        });
    }
    if let Some(bad) = items.iter().find(|s| !(0.0..=1.0).contains(&s.score)) {
        return Err(DetectorError::InvalidScore(bad.score));
    }
    Ok(items)
}

/// Run both detection stages over every configured class.
///
/// An empty point cloud yields no detections.
pub fn run_pipeline(
    scene: &Scene,
    scorer: &dyn Scorer,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, DetectorError> {
    cfg.validate()?;
    let mut out = PipelineOutput::default();
    if scene.cloud.is_empty() {
        return Ok(out);
    }
    let streams = Streams::build(scene, cfg)?;
    let n_streams = streams.grids.len();
    let trace = &mut out.trace;
    trace.fuse_calls = 0;

    for &class in &cfg.classes {
        let templates = &cfg.anchor_templates[&class];
        let anchors = generate_anchors(&cfg.grid, cfg, class, templates);

        let crops = anchors
            .par_iter()
            .map(|a| streams.crop(a, cfg.first_stage_crop))
            .collect::<Result<Vec<_>, _>>()?;
        if streams.fused() {
            trace.fuse_calls += crops.len();
        }
        let batch = CropBatch {
            crops,
            streams: n_streams,
            fused: streams.fused(),
        };
        let scored = call_scorer(scorer, Stage::Proposal, class, &anchors, &batch, trace)?;
        drop(batch);
        trace.positive_anchors += scored
            .iter()
            .filter(|s| matches!(s.assignment, Some(AnchorLabel::Object { .. })))
            .count();

        // Proposals stay non-oriented.
        let raw = anchors
            .iter()
            .zip(&scored)
            .map(|(a, s)| {
                let offsets = super::BoxOffsets { theta: 0.0, ..s.offsets };
                decode_offsets(a, &offsets).map(|b| Detection::new(b, s.score))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let proposals = nms_axis_aligned(&raw, cfg.rpn_nms_iou, cfg.top_k_proposals);
        trace.proposals += proposals.len();

        let mut boxes = Vec::with_capacity(proposals.len());
        let mut crops = Vec::with_capacity(proposals.len());
        for (anchor, crop) in proposals
            .par_iter()
            .map(|p| {
                let a = Anchor::from_box(&p.bbox);
                (a, streams.crop(&a, cfg.second_stage_crop))
            })
            .collect::<Vec<_>>()
        {
            match crop {
                Ok(c) => {
                    boxes.push(anchor);
                    crops.push(c);
                }
                Err(GeometryError::EmptyIntersection) => trace.dropped_crops += 1,
                Err(e) => return Err(e.into()),
            }
        }
        if boxes.is_empty() {
            continue;
        }
        if streams.fused() {
            trace.fuse_calls += crops.len();
        }
        let batch = CropBatch {
            crops,
            streams: n_streams,
            fused: streams.fused(),
        };
        let refined = call_scorer(scorer, Stage::Refinement, class, &boxes, &batch, trace)?;
        let threshold = cfg.background_iou[&class];
        let mut candidates = Vec::new();
        for (a, s) in boxes.iter().zip(&refined) {
            if s.score < threshold {
                trace.background_rejected += 1;
                continue;
            }
            candidates.push(Detection::new(decode_offsets(a, &s.offsets)?, s.score));
        }
        out.detections
            .extend(nms(&candidates, cfg.nms_iou, cfg.max_detections));
    }
    out.detections
        .sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}
