use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{assign_anchors, encode_offsets, Anchor, AnchorLabel, BoxOffsets, Detection, DetectorError};
use crate::dataset_io::{Box3D, ClassLabel};
use crate::geometry::{box3d_to_bev, iou_axis_aligned, BevBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Proposal,
    Refinement,
}

/// Pooled features handed to a scorer, one `(channels, rows, cols)` stack per box.
#[derive(Debug, Clone, PartialEq)]
pub struct CropBatch {
    pub crops: Vec<Array3<f64>>,
    /// Number of sensor streams that contributed to each crop.
    pub streams: usize,
    /// Whether the crops are element-wise means of per-stream crops.
    pub fused: bool,
}

pub struct ScoreRequest<'a> {
    pub stage: Stage,
    pub class_label: ClassLabel,
    pub boxes: &'a [Anchor],
    pub features: &'a CropBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    /// Confidence for the request's class, in `[0, 1]`.
    pub score: f64,
    pub offsets: BoxOffsets,
    /// Training-time assignment, when the scorer knows the ground truth.
    pub assignment: Option<AnchorLabel>,
}

/// Stand-in for the learned heads: turns boxes plus pooled features into
/// class confidences and regression offsets.
pub trait Scorer: Sync {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<Vec<ScoredItem>, DetectorError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub score_sigma: f64,
    pub offset_sigma_m: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Scores each box by its best axis-aligned IoU against same-class ground
/// truth and regresses it onto that box.
///
/// Noise is drawn independently per sensor stream and averaged, so fused
/// requests see `1/sqrt(streams)` of the single-stream deviation. Draws are
/// keyed by `(seed, stage, class, box index, stream)`, which keeps results
/// independent of thread scheduling.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    ground_truth: Vec<Box3D>,
    footprints: Vec<BevBox>,
    noise: NoiseSpec,
    seed: u64,
    pos_iou: f64,
    neg_iou: f64,
}

pub fn oracle_scorer(ground_truth: &[Box3D], noise: NoiseSpec, seed: u64) -> OracleScorer {
    OracleScorer::new(ground_truth.to_vec(), noise, seed)
}

impl OracleScorer {
    pub fn new(ground_truth: Vec<Box3D>, noise: NoiseSpec, seed: u64) -> Self {
        Self {
            footprints: ground_truth.iter().map(box3d_to_bev).collect(),
            ground_truth,
            noise: NoiseSpec {
                score_sigma: noise.score_sigma.max(0.0),
                offset_sigma_m: noise.offset_sigma_m.max(0.0),
            },
            seed,
            pos_iou: 0.7,
            neg_iou: 0.3,
        }
    }

    /// Anchor assignment thresholds reported alongside proposal scores.
    pub fn with_assignment_thresholds(mut self, pos_iou: f64, neg_iou: f64) -> Self {
        self.pos_iou = pos_iou;
        self.neg_iou = neg_iou;
        self
    }

    fn best_match(&self, anchor: &Anchor) -> Option<(usize, f64)> {
        best_match(&self.ground_truth, &self.footprints, anchor)
    }
}

fn best_match(boxes: &[Box3D], footprints: &[BevBox], anchor: &Anchor) -> Option<(usize, f64)> {
    let bev = anchor.bev();
    let mut best: Option<(usize, f64)> = None;
    for (i, (b, fp)) in boxes.iter().zip(footprints).enumerate() {
        if b.class_label != anchor.class_label {
            continue;
        }
        let iou = iou_axis_aligned(&bev, fp).unwrap_or(0.0);
        if iou > 0.0 && best.is_none_or(|(_, v)| iou > v) {
            best = Some((i, iou));
        }
    }
    best
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn item_rng(seed: u64, tags: [u64; 4]) -> ChaCha8Rng {
    let h = tags.iter().fold(splitmix(seed), |h, t| splitmix(h ^ t));
    ChaCha8Rng::seed_from_u64(h)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

/// Mean of `streams` independent draws per component.
fn averaged_normals<const N: usize>(
    seed: u64,
    stage: Stage,
    class: ClassLabel,
    index: usize,
    streams: usize,
) -> [f64; N] {
    let mut acc = [0.0; N];
    let streams = streams.max(1);
    for s in 0..streams {
        let mut rng = item_rng(seed, [stage as u64 + 1, class as u64 + 1, index as u64, s as u64]);
        for v in acc.iter_mut() {
            *v += standard_normal(&mut rng);
        }
    }
    acc.map(|v| v / streams as f64)
}

fn perturb(target: &Box3D, eps: &[f64], sigma: f64) -> Box3D {
    let mut b = *target;
    for k in 0..3 {
        b.centroid[k] += sigma * eps[1 + k];
        b.dims[k] = (b.dims[k] + sigma * eps[4 + k]).max(0.05);
    }
    b
}

impl Scorer for OracleScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<Vec<ScoredItem>, DetectorError> {
        let assignments = (request.stage == Stage::Proposal)
            .then(|| assign_anchors(request.boxes, &self.ground_truth, self.pos_iou, self.neg_iou));
        request
            .boxes
            .iter()
            .enumerate()
            .map(|(i, anchor)| {
                let matched = self.best_match(anchor);
                let noisy = self.noise.score_sigma > 0.0 || self.noise.offset_sigma_m > 0.0;
                let eps: [f64; 7] = if noisy {
                    averaged_normals(self.seed, request.stage, request.class_label, i, request.features.streams)
                } else {
                    [0.0; 7]
                };
                let clean = matched.map_or(0.0, |(_, iou)| iou);
                let score = (clean + self.noise.score_sigma * eps[0]).clamp(0.0, 1.0);
                let target = match matched {
                    Some((g, _)) => self.ground_truth[g],
                    None => anchor.to_box(),
                };
                let offsets = encode_offsets(anchor, &perturb(&target, &eps, self.noise.offset_sigma_m))?;
                Ok(ScoredItem {
                    score,
                    offsets,
                    assignment: assignments.as_ref().map(|a| a[i]),
                })
            })
            .collect()
    }
}

/// Replays an external detector's boxes: a box scores the detection it
/// overlaps best, weighted by that IoU, and regresses onto it.
#[derive(Debug, Clone)]
pub struct DetectionScorer {
    boxes: Vec<Box3D>,
    footprints: Vec<BevBox>,
    scores: Vec<f64>,
}

impl DetectionScorer {
    pub fn new(detections: &[Detection]) -> Self {
        let boxes: Vec<Box3D> = detections.iter().map(|d| d.bbox).collect();
        Self {
            footprints: boxes.iter().map(box3d_to_bev).collect(),
            scores: detections.iter().map(|d| d.score.clamp(0.0, 1.0)).collect(),
            boxes,
        }
    }
}

impl Scorer for DetectionScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<Vec<ScoredItem>, DetectorError> {
        request
            .boxes
            .iter()
            .map(|anchor| {
                let (score, target) = match best_match(&self.boxes, &self.footprints, anchor) {
                    Some((i, iou)) => (iou * self.scores[i], self.boxes[i]),
                    None => (0.0, anchor.to_box()),
                };
                Ok(ScoredItem {
                    score,
                    offsets: encode_offsets(anchor, &target)?,
                    assignment: None,
                })
            })
            .collect()
    }
}
