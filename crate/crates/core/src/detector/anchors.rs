use serde::{Deserialize, Serialize};

use super::{Anchor, DetectorError, PipelineConfig};
use crate::dataset_io::{Box3D, ClassLabel, ClassPrior};
use crate::geometry::{box3d_to_bev, iou_axis_aligned, BevGridSpec};

const MIN_TEMPLATE_DIM: f64 = 0.01;
const DEFAULT_GROUND_Z: f64 = -1.73;

/// One anchor shape: dimensions plus the vertical placement of its centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorTemplate {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub z_center: f64,
}

impl AnchorTemplate {
    /// Mean and mean ± one standard deviation of the synthetic class prior.
    pub fn defaults_for(class: ClassLabel) -> [AnchorTemplate; 3] {
        let prior = ClassPrior::default_for(class);
        // std of a uniform relative jitter in [-j, j]
        let rel = prior.jitter / 3f64.sqrt();
        let [l, w, h] = prior.dims;
        let z_center = DEFAULT_GROUND_Z + h / 2.0;
        [-1.0, 0.0, 1.0].map(|k| AnchorTemplate {
            length: l * (1.0 + k * rel),
            width: w * (1.0 + k * rel),
            height: h * (1.0 + k * rel),
            z_center,
        })
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Size templates from labelled boxes of one class: mean − σ, mean, mean + σ
/// per dimension (population σ, clamped positive). The vertical placement is
/// the mean centroid height.
pub fn class_anchor_stats(
    ground_truth: &[Box3D],
    class: ClassLabel,
) -> Result<[AnchorTemplate; 3], DetectorError> {
    let boxes: Vec<&Box3D> = ground_truth.iter().filter(|b| b.class_label == class).collect();
    if boxes.is_empty() {
        return Err(DetectorError::EmptyClass(class));
    }
    let stats: [(f64, f64); 3] = std::array::from_fn(|k| mean_std(boxes.iter().map(move |b| b.dims[k])));
    let (z_center, _) = mean_std(boxes.iter().map(|b| b.centroid[2]));
    Ok([-1.0, 0.0, 1.0].map(|k| {
        let d = |i: usize| (stats[i].0 + k * stats[i].1).max(MIN_TEMPLATE_DIM);
        AnchorTemplate {
            length: d(0),
            width: d(1),
            height: d(2),
            z_center,
        }
    }))
}

/// Lay anchors on the feature-map lattice: spacing `anchor_stride * cell_size`,
/// `floor(span / spacing)` centers per axis, one anchor per template and area
/// scale at every center.
pub fn generate_anchors(
    spec: &BevGridSpec,
    cfg: &PipelineConfig,
    class: ClassLabel,
    templates: &[AnchorTemplate],
) -> Vec<Anchor> {
    let spacing = cfg.anchor_stride as f64 * spec.cell_size;
    let count = |span: f64| (span / spacing + 1e-9).floor() as usize;
    let nx = count(spec.forward[1] - spec.forward[0]);
    let ny = count(spec.lateral[1] - spec.lateral[0]);
    let mut out = Vec::with_capacity(nx * ny * templates.len() * cfg.area_scales.len());
    for i in 0..nx {
        let x = spec.forward[0] + (i as f64 + 0.5) * spacing;
        for j in 0..ny {
            let y = spec.lateral[0] + (j as f64 + 0.5) * spacing;
            for t in templates {
                for s in &cfg.area_scales {
                    let k = s.sqrt();
                    out.push(Anchor {
                        class_label: class,
                        center: [x, y],
                        size: [t.length * k, t.width * k],
                        z_center: t.z_center,
                        height: t.height,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnchorLabel {
    Object { gt_index: usize, iou: f64 },
    Background,
    Ignore,
}

/// Training-time label per anchor from its best axis-aligned IoU against
/// same-class ground truth: object at `>= pos_iou`, background below
/// `neg_iou`, ignored in between. Ties go to the lowest ground-truth index.
pub fn assign_anchors(
    anchors: &[Anchor],
    ground_truth: &[Box3D],
    pos_iou: f64,
    neg_iou: f64,
) -> Vec<AnchorLabel> {
    let gt_bev: Vec<_> = ground_truth.iter().map(box3d_to_bev).collect();
    anchors
        .iter()
        .map(|a| {
            let bev = a.bev();
            let mut best: Option<(usize, f64)> = None;
            for (i, g) in ground_truth.iter().enumerate() {
                if g.class_label != a.class_label {
                    continue;
                }
                let iou = iou_axis_aligned(&bev, &gt_bev[i]).unwrap_or(0.0);
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((i, iou));
                }
            }
            match best {
                Some((gt_index, iou)) if iou >= pos_iou => AnchorLabel::Object { gt_index, iou },
                Some((_, iou)) if iou >= neg_iou => AnchorLabel::Ignore,
                _ => AnchorLabel::Background,
            }
        })
        .collect()
}
