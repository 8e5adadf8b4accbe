//! Two-stage detection skeleton with a pluggable scorer.
//!
//! Stage one scores non-oriented anchors on small pooled crops and keeps the
//! top proposals after NMS; stage two pools larger crops around each proposal,
//! drops background proposals by class threshold, decodes oriented boxes and
//! runs a final NMS. In [`Variant::SF`] mode every crop is the element-wise
//! mean of a LiDAR BEV crop and a camera proxy crop.

mod anchors;
mod nms;
mod offsets;
mod pipeline;
mod scorer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset_io::{Box3D, ClassLabel, Variant};
use crate::geometry::{BevBox, BevGridSpec, GeometryError};

pub use anchors::{assign_anchors, class_anchor_stats, generate_anchors, AnchorLabel, AnchorTemplate};
pub use nms::{nms, nms_axis_aligned};
pub use offsets::{decode_offsets, encode_offsets};
pub use pipeline::{run_pipeline, PipelineOutput, PipelineTrace, ScorerCall};
pub use scorer::{
    oracle_scorer, CropBatch, DetectionScorer, NoiseSpec, OracleScorer, ScoreRequest, ScoredItem,
    Scorer, Stage,
};

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("no ground-truth boxes of class {0}")]
    EmptyClass(ClassLabel),
    #[error("box dimensions must be strictly positive")]
    NonPositiveDims,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("scorer failed: {0}")]
    Scorer(String),
    #[error("scorer returned {found} items for {expected} boxes")]
    LengthMismatch { expected: usize, found: usize },
    #[error("scorer returned score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("invalid pipeline config: {0}")]
    Config(String),
}

/// Non-oriented anchor box; yaw is implicitly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub class_label: ClassLabel,
    /// LiDAR `(x, y)`.
    pub center: [f64; 2],
    /// `(length, width)` along LiDAR `x` and `y`.
    pub size: [f64; 2],
    pub z_center: f64,
    pub height: f64,
}

impl Anchor {
    pub fn bev(&self) -> BevBox {
        BevBox::new(self.center, self.size, 0.0)
    }

    /// Ground-plane diagonal used to normalise centroid offsets.
    pub fn diagonal(&self) -> f64 {
        self.size[0].hypot(self.size[1])
    }

    /// Drop the orientation of a box to get an anchor-like proposal.
    pub fn from_box(b: &Box3D) -> Self {
        Self {
            class_label: b.class_label,
            center: [b.centroid[0], b.centroid[1]],
            size: [b.dims[0], b.dims[1]],
            z_center: b.centroid[2],
            height: b.dims[2],
        }
    }

    pub fn to_box(&self) -> Box3D {
        Box3D::new(
            self.class_label,
            [self.center[0], self.center[1], self.z_center],
            [self.size[0], self.size[1], self.height],
            0.0,
        )
    }
}

/// Regression target of a box relative to an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxOffsets {
    /// Centroid deltas divided by the anchor's ground-plane diagonal.
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    /// Log-ratios of length, width and height.
    pub dl: f64,
    pub dw: f64,
    pub dh: f64,
    /// Absolute yaw, radians.
    pub theta: f64,
}

impl BoxOffsets {
    pub fn is_finite(&self) -> bool {
        [self.dx, self.dy, self.dz, self.dl, self.dw, self.dh, self.theta]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: Box3D,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: Box3D, score: f64) -> Self {
        Self { bbox, score }
    }

    pub fn class_label(&self) -> ClassLabel {
        self.bbox.class_label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Variant,
    pub grid: BevGridSpec,
    pub classes: Vec<ClassLabel>,
    /// Training-time anchor assignment thresholds.
    pub rpn_pos_iou: f64,
    pub rpn_neg_iou: f64,
    /// Second-stage proposals scoring below this are background.
    pub background_iou: BTreeMap<ClassLabel, f64>,
    pub first_stage_crop: [usize; 2],
    pub second_stage_crop: [usize; 2],
    pub top_k_proposals: usize,
    pub rpn_nms_iou: f64,
    pub nms_iou: f64,
    pub max_detections: usize,
    /// Feature-map downsampling relative to the BEV grid.
    pub anchor_stride: u32,
    pub area_scales: Vec<f64>,
    pub anchor_templates: BTreeMap<ClassLabel, [AnchorTemplate; 3]>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let classes = ClassLabel::ALL.to_vec();
        Self {
            mode: Variant::SIL,
            grid: BevGridSpec::default(),
            rpn_pos_iou: 0.7,
            rpn_neg_iou: 0.3,
            background_iou: BTreeMap::from([
                (ClassLabel::Car, 0.55),
                (ClassLabel::Pedestrian, 0.45),
                (ClassLabel::Cyclist, 0.45),
            ]),
            first_stage_crop: [3, 3],
            second_stage_crop: [7, 7],
            top_k_proposals: 1024,
            rpn_nms_iou: 0.8,
            nms_iou: 0.5,
            max_detections: 100,
            anchor_stride: 8,
            area_scales: vec![0.8, 1.0, 1.25],
            anchor_templates: classes
                .iter()
                .map(|c| (*c, AnchorTemplate::defaults_for(*c)))
                .collect(),
            classes,
        }
    }
}

impl PipelineConfig {
    pub fn with_mode(mode: Variant) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |m: String| Err(DetectorError::Config(m));
        self.grid.validate()?;
        let unit = |v: f64| v > 0.0 && v < 1.0;
        for (name, v) in [
            ("rpn_pos_iou", self.rpn_pos_iou),
            ("rpn_neg_iou", self.rpn_neg_iou),
            ("rpn_nms_iou", self.rpn_nms_iou),
            ("nms_iou", self.nms_iou),
        ] {
            if !unit(v) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.rpn_neg_iou > self.rpn_pos_iou {
            return bad("rpn_neg_iou exceeds rpn_pos_iou".into());
        }
        for c in &self.classes {
            match self.background_iou.get(c) {
                Some(v) if unit(*v) => {}
                _ => return bad(format!("background_iou for {c} missing or outside (0, 1)")),
            }
            if !self.anchor_templates.contains_key(c) {
                return bad(format!("no anchor templates for {c}"));
            }
        }
        if self.first_stage_crop.contains(&0) || self.second_stage_crop.contains(&0) {
            return bad("crop sizes must be positive".into());
        }
        if self.top_k_proposals == 0 || self.anchor_stride == 0 || self.area_scales.is_empty() {
            return bad("top_k_proposals, anchor_stride and area_scales must be nonempty".into());
        }
        if self.area_scales.iter().any(|s| !(*s > 0.0)) {
            return bad("area scales must be positive".into());
        }
        Ok(())
    }
}
