//! BEV average precision: greedy score-ordered matching, cumulative
//! precision/recall, all-point interpolated AP and the class mean.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset_io::{Box3D, ClassLabel};
use crate::detector::Detection;
use crate::geometry::{box3d_to_bev, iou_bev, BevBox};

pub const DEFAULT_IOU_MIN: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("precision-recall curve needs at least one ground-truth box")]
    NoGroundTruth,
    #[error("mean over an empty set of classes")]
    NoClasses,
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MatchOutcome {
    TruePositive { gt_index: usize, iou: f64 },
    FalsePositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMatch {
    pub class_label: ClassLabel,
    pub score: f64,
    pub outcome: MatchOutcome,
}

impl DetectionMatch {
    pub fn is_tp(&self) -> bool {
        matches!(self.outcome, MatchOutcome::TruePositive { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// In input order.
    pub detections: Vec<DetectionMatch>,
    /// Per ground-truth box: its class and the detection index that claimed it.
    pub ground_truth: Vec<(ClassLabel, Option<usize>)>,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.detections.iter().filter(|d| d.is_tp()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.detections.len() - self.true_positives()
    }

    pub fn missed(&self) -> usize {
        self.ground_truth.iter().filter(|(_, m)| m.is_none()).count()
    }

    /// Restrict to one class. Indices are no longer meaningful afterwards.
    pub fn for_class(&self, class: ClassLabel) -> MatchResult {
        MatchResult {
            detections: self.detections.iter().copied().filter(|d| d.class_label == class).collect(),
            ground_truth: self.ground_truth.iter().copied().filter(|(c, _)| *c == class).collect(),
        }
    }

    /// Concatenate per-scene results; later ties in score rank after earlier ones.
    pub fn concat(parts: impl IntoIterator<Item = MatchResult>) -> MatchResult {
        let mut out = MatchResult::default();
        for p in parts {
            out.detections.extend(p.detections);
            out.ground_truth.extend(p.ground_truth);
        }
        out
    }
}

/// Indices sorted by descending score, ties by input position.
fn score_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Visit detections by descending score; each takes the unmatched same-class
/// ground-truth box it overlaps most and is a true positive when that IoU is
/// at least `iou_min`.
pub fn match_detections(detections: &[Detection], ground_truth: &[Box3D], iou_min: f64) -> MatchResult {
    let gt_bev: Vec<BevBox> = ground_truth.iter().map(box3d_to_bev).collect();
    let mut claimed: Vec<Option<usize>> = vec![None; ground_truth.len()];
    let mut outcomes = vec![MatchOutcome::FalsePositive; detections.len()];
    for i in score_order(detections.iter().map(|d| d.score)) {
        let det = &detections[i];
        let bev = box3d_to_bev(&det.bbox);
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in ground_truth.iter().enumerate() {
            if gt.class_label != det.class_label() || claimed[g].is_some() {
                continue;
            }
            let iou = iou_bev(&bev, &gt_bev[g]).unwrap_or(0.0);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best.filter(|&(_, iou)| iou >= iou_min) {
            claimed[g] = Some(i);
            outcomes[i] = MatchOutcome::TruePositive { gt_index: g, iou };
        }
    }
    MatchResult {
        detections: detections
            .iter()
            .zip(outcomes)
            .map(|(d, outcome)| DetectionMatch {
                class_label: d.class_label(),
                score: d.score,
                outcome,
            })
            .collect(),
        ground_truth: ground_truth.iter().map(|b| b.class_label).zip(claimed).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub total_gt: usize,
}

/// One point per detection in descending score order.
pub fn pr_curve(matches: &MatchResult) -> Result<PrCurve, EvalError> {
    let total_gt = matches.ground_truth.len();
    if total_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let mut tp = 0usize;
    let points = score_order(matches.detections.iter().map(|d| d.score))
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let d = &matches.detections[i];
            tp += d.is_tp() as usize;
            PrPoint {
                recall: tp as f64 / total_gt as f64,
                precision: tp as f64 / (k + 1) as f64,
                score: d.score,
            }
        })
        .collect();
    Ok(PrCurve { points, total_gt })
}

/// Area under the right-to-left running maximum of precision, starting from
/// recall 0.
pub fn interpolated_ap(curve: &PrCurve) -> f64 {
    let mut envelope: Vec<f64> = curve.points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, env) in curve.points.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    ap.clamp(0.0, 1.0)
}

pub fn map_over_classes(per_class_ap: &[f64]) -> Result<f64, EvalError> {
    if per_class_ap.is_empty() {
        return Err(EvalError::NoClasses);
    }
    Ok(per_class_ap.iter().sum::<f64>() / per_class_ap.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// `None` when the class has no ground truth.
    pub ap: Option<f64>,
    pub ground_truth: usize,
    pub detections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub iou_min: f64,
    pub scenes: usize,
    pub classes: BTreeMap<ClassLabel, ClassReport>,
    /// Mean over classes with ground truth.
    pub map: Option<f64>,
    pub excluded_classes: Vec<ClassLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: ApReport,
    pub curves: BTreeMap<ClassLabel, PrCurve>,
}

/// Dataset-level AP: match inside each scene, then pool all detections of a
/// class into one score-sorted curve.
pub fn evaluate<'a>(
    scenes: impl IntoIterator<Item = (&'a [Detection], &'a [Box3D])>,
    iou_min: f64,
) -> Evaluation {
    let mut n_scenes = 0;
    let pooled = MatchResult::concat(scenes.into_iter().map(|(d, g)| {
        n_scenes += 1;
        match_detections(d, g, iou_min)
    }));
    let mut classes = BTreeMap::new();
    let mut curves = BTreeMap::new();
    let mut excluded = Vec::new();
    for class in ClassLabel::ALL {
        let m = pooled.for_class(class);
        let ap = match pr_curve(&m) {
            Ok(curve) => {
                let ap = interpolated_ap(&curve);
                curves.insert(class, curve);
                Some(ap)
            }
            Err(_) => {
                excluded.push(class);
                None
            }
        };
        classes.insert(
            class,
            ClassReport {
                ap,
                ground_truth: m.ground_truth.len(),
                detections: m.detections.len(),
                true_positives: m.true_positives(),
                false_positives: m.false_positives(),
            },
        );
    }
    let aps: Vec<f64> = classes.values().filter_map(|c| c.ap).collect();
    Evaluation {
        report: ApReport {
            iou_min,
            scenes: n_scenes,
            map: map_over_classes(&aps).ok(),
            classes,
            excluded_classes: excluded,
        },
        curves,
    }
}

/// `class,recall,precision`, one row per curve point.
pub fn write_pr_csv(curves: &BTreeMap<ClassLabel, PrCurve>) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| EvalError::Csv(e.to_string());
    w.write_record(["class", "recall", "precision"]).map_err(err)?;
    for (class, curve) in curves {
        for p in &curve.points {
            w.write_record([class.as_str().to_string(), p.recall.to_string(), p.precision.to_string()])
                .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn car(x: f64) -> Box3D {
        Box3D::new(ClassLabel::Car, [x, 0.0, -1.0], [4.0, 2.0, 1.5], 0.0)
    }

    fn synthetic(flags: &[bool], total_gt: usize) -> MatchResult {
        let n = flags.len();
        MatchResult {
            detections: flags
                .iter()
                .enumerate()
                .map(|(i, &tp)| DetectionMatch {
                    class_label: ClassLabel::Car,
                    score: 1.0 - i as f64 / (n + 1) as f64,
                    outcome: if tp {
                        MatchOutcome::TruePositive { gt_index: i, iou: 1.0 }
                    } else {
                        MatchOutcome::FalsePositive
                    },
                })
                .collect(),
            ground_truth: vec![(ClassLabel::Car, None); total_gt],
        }
    }

    /// For each distinct recall level, the best precision at that recall or beyond.
    fn brute_force_ap(curve: &PrCurve) -> f64 {
        let mut levels: Vec<f64> = curve.points.iter().map(|p| p.recall).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut ap = 0.0;
        let mut prev = 0.0;
        for r in levels {
            let best = curve
                .points
                .iter()
                .filter(|p| p.recall >= r)
                .map(|p| p.precision)
                .fold(0.0, f64::max);
            ap += (r - prev) * best;
            prev = r;
        }
        ap
    }

    #[test]
    fn identity_and_empty_gt() {
        let m = match_detections(&[Detection::new(car(10.0), 0.9)], &[car(10.0)], 0.5);
        assert_eq!(m.true_positives(), 1);
        assert_eq!(m.false_positives(), 0);
        let m = match_detections(&[Detection::new(car(10.0), 0.9)], &[], 0.5);
        assert_eq!(m.false_positives(), 1);
        assert_eq!(pr_curve(&m), Err(EvalError::NoGroundTruth));
    }

    #[test]
    fn boundary_iou_counts() {
        // 3x2 boxes one metre apart along x: overlap 4, union 8.
        let b = |x: f64| Box3D::new(ClassLabel::Car, [x, 0.0, -1.0], [3.0, 2.0, 1.5], 0.0);
        let m = match_detections(&[Detection::new(b(11.0), 0.9)], &[b(10.0)], 0.5);
        assert_eq!(m.detections[0].outcome, MatchOutcome::TruePositive { gt_index: 0, iou: 0.5 });
        let m = match_detections(&[Detection::new(b(11.0 + 1e-6), 0.9)], &[b(10.0)], 0.5);
        assert_eq!(m.true_positives(), 0);
    }

    #[test]
    fn each_gt_matched_once() {
        let dets = [Detection::new(car(10.0), 0.9), Detection::new(car(10.1), 0.95)];
        let m = match_detections(&dets, &[car(10.0)], 0.5);
        assert_eq!(m.true_positives(), 1);
        assert!(m.detections[1].is_tp());
        assert_eq!(m.ground_truth[0].1, Some(1));
    }

    #[test]
    fn hand_computed_curve() {
        let curve = pr_curve(&synthetic(&[true, false, true], 2)).unwrap();
        let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.recall, p.precision)).collect();
        assert_eq!(pts[0], (0.5, 1.0));
        assert_eq!(pts[1], (0.5, 0.5));
        assert_eq!(pts[2].0, 1.0);
        assert!((pts[2].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((interpolated_ap(&curve) - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_useless() {
        let perfect = pr_curve(&synthetic(&[true; 4], 4)).unwrap();
        assert!(perfect.points.iter().all(|p| p.precision == 1.0));
        assert_eq!(interpolated_ap(&perfect), 1.0);
        let useless = pr_curve(&synthetic(&[false; 4], 4)).unwrap();
        assert!(useless.points.iter().all(|p| p.precision == 0.0 && p.recall == 0.0));
        assert_eq!(interpolated_ap(&useless), 0.0);
    }

    #[test]
    fn class_means() {
        assert!((map_over_classes(&[0.77, 0.34, 0.46]).unwrap() - 0.5233).abs() < 1e-4);
        assert_eq!(map_over_classes(&[0.74]).unwrap(), 0.74);
        assert_eq!(map_over_classes(&[]), Err(EvalError::NoClasses));
    }

    #[test]
    fn matching_agrees_with_pairwise_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let random_box = |rng: &mut ChaCha8Rng| {
                let class = ClassLabel::ALL[rng.random_range(0..2)];
                Box3D::new(
                    class,
                    [rng.random_range(0.0..12.0), rng.random_range(-4.0..4.0), 0.0],
                    [rng.random_range(1.0..4.5), rng.random_range(0.6..2.0), 1.5],
                    rng.random_range(-3.0..3.0),
                )
            };
            let gts: Vec<Box3D> = (0..rng.random_range(0..6)).map(|_| random_box(&mut rng)).collect();
            let dets: Vec<Detection> = (0..rng.random_range(0..10))
                .map(|_| Detection::new(random_box(&mut rng), (rng.random_range(0..5) as f64) / 4.0))
                .collect();
            let m = match_detections(&dets, &gts, 0.3);

            let iou: Vec<Vec<f64>> = dets
                .iter()
                .map(|d| {
                    gts.iter()
                        .map(|g| {
                            if g.class_label == d.class_label() {
                                iou_bev(&box3d_to_bev(&d.bbox), &box3d_to_bev(g)).unwrap()
                            } else {
                                f64::NEG_INFINITY
                            }
                        })
                        .collect()
                })
                .collect();
            let mut remaining: Vec<usize> = (0..dets.len()).collect();
            let mut taken = vec![false; gts.len()];
            let mut expect = vec![None; dets.len()];
            while !remaining.is_empty() {
                let pos = (0..remaining.len())
                    .max_by(|&a, &b| {
                        dets[remaining[a]]
                            .score
                            .total_cmp(&dets[remaining[b]].score)
                            .then(remaining[b].cmp(&remaining[a]))
                    })
                    .unwrap();
                let i = remaining.remove(pos);
                let cand = (0..gts.len())
                    .filter(|&g| !taken[g] && iou[i][g] >= 0.3)
                    .max_by(|&a, &b| iou[i][a].total_cmp(&iou[i][b]).then(b.cmp(&a)));
                let best_any = (0..gts.len())
                    .filter(|&g| !taken[g])
                    .map(|g| iou[i][g])
                    .fold(f64::NEG_INFINITY, f64::max);
                if let Some(g) = cand.filter(|&g| iou[i][g] == best_any) {
                    taken[g] = true;
                    expect[i] = Some(g);
                }
            }
            for (d, e) in m.detections.iter().zip(&expect) {
                match (d.outcome, e) {
                    (MatchOutcome::TruePositive { gt_index, .. }, Some(g)) => assert_eq!(gt_index, *g),
                    (MatchOutcome::FalsePositive, None) => {}
                    other => panic!("mismatch {other:?}"),
                }
            }
        }
    }

    #[test]
    fn pooled_evaluation_is_global() {
        // Scene A: one confident TP. Scene B: a confident FP and a weak TP.
        let a_gt = [car(10.0)];
        let a_det = [Detection::new(car(10.0), 0.9)];
        let b_gt = [car(20.0)];
        let b_det = [Detection::new(car(40.0), 0.8), Detection::new(car(20.0), 0.1)];
        let eval = evaluate([(&a_det[..], &a_gt[..]), (&b_det[..], &b_gt[..])], 0.5);
        let car_ap = eval.report.classes[&ClassLabel::Car].ap.unwrap();
        // points (0.5, 1), (0.5, 0.5), (1, 2/3)
        assert!((car_ap - 5.0 / 6.0).abs() < 1e-12);
        // averaging per-scene APs would give (1 + 0.5) / 2 instead
        assert_eq!(eval.report.excluded_classes, vec![ClassLabel::Pedestrian, ClassLabel::Cyclist]);
        assert_eq!(eval.report.map, Some(car_ap));
        let csv = write_pr_csv(&eval.curves).unwrap();
        assert!(csv.starts_with("class,recall,precision\nCar,0.5,1\n"));
    }

    proptest! {
        #[test]
        fn ap_matches_brute_force(flags in proptest::collection::vec(any::<bool>(), 0..40), extra in 0usize..5) {
            let tps = flags.iter().filter(|f| **f).count();
            let m = synthetic(&flags, tps + extra + usize::from(tps + extra == 0));
            let curve = pr_curve(&m).unwrap();
            let ap = interpolated_ap(&curve);
            prop_assert!((ap - brute_force_ap(&curve)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ap));
            for w in curve.points.windows(2) {
                prop_assert!(w[0].recall <= w[1].recall);
            }
        }

        #[test]
        fn monotone_score_transform(flags in proptest::collection::vec(any::<bool>(), 1..30)) {
            let m = synthetic(&flags, flags.len());
            let mut t = m.clone();
            for d in &mut t.detections {
                d.score = d.score.powi(3) * 0.5;
            }
            prop_assert_eq!(interpolated_ap(&pr_curve(&m).unwrap()), interpolated_ap(&pr_curve(&t).unwrap()));
        }

        #[test]
        fn trailing_fp_never_helps(flags in proptest::collection::vec(any::<bool>(), 0..30)) {
            let gt = flags.len() + 1;
            let base = interpolated_ap(&pr_curve(&synthetic(&flags, gt)).unwrap());
            let mut more = flags.clone();
            more.push(false);
            let worse = interpolated_ap(&pr_curve(&synthetic(&more, gt)).unwrap());
            prop_assert!(worse <= base);
        }
    }
}
