//! Batch commands behind the `avodkit` binary. Each writes its outputs and a
//! [`RunManifest`] into an output directory and is deterministic in its
//! inputs and seed, whatever the worker count.
//!
//! Scene directories use the Kitti layout: `velodyne/<id>.bin`,
//! `label_2/<id>.txt` and `calib/<id>.txt`.

mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{sha256_hex, unix_now, RunManifest, MANIFEST_FILE};

use crate::dataset_io::{
    parse_ap_table, parse_kitti_calib, parse_velodyne, read_label_boxes, synth_scene, write_kitti_calib,
    write_label_boxes, write_velodyne, ApTable, Box3D, Calibration, ClassLabel, DatasetError, Scene,
    SceneSpec, Variant,
};
use crate::detector::{
    oracle_scorer, run_pipeline, Detection, DetectionScorer, DetectorError, NoiseSpec, PipelineConfig,
    Scorer,
};
use crate::evaluator::{evaluate, write_pr_csv, ApReport, EvalError};
use crate::netfeas::{analyze, plot_csv, variant_deltas, ClassDelta, FeasibilityAnalysis, FeasibilityConfig, NetfeasError};

pub const KITTI_AP_TABLE: &str = include_str!("../../data/kitti_ap.csv");
pub const LYFT_AP_TABLE: &str = include_str!("../../data/lyft_ap.csv");

const VELODYNE_DIR: &str = "velodyne";
const LABEL_DIR: &str = "label_2";
const CALIB_DIR: &str = "calib";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Dataset {
        context: String,
        #[source]
        source: DatasetError,
    },
    #[error("{context}: {source}")]
    Detector {
        context: String,
        #[source]
        source: DetectorError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Netfeas(#[from] NetfeasError),
    #[error("detections for scene {0} have no ground truth")]
    SceneIdMismatch(String),
    #[error("invalid config: {0}")]
    Config(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::Dataset { source, .. } => match source {
                DatasetError::InfeasibleSpec(_) => "InfeasibleSpec",
                _ => "DatasetError",
            },
            CliError::Detector { .. } => "DetectorError",
            CliError::Eval(_) => "EvalError",
            CliError::Netfeas(NetfeasError::MissingApEntry { .. }) => "MissingApEntry",
            CliError::Netfeas(_) => "NetfeasError",
            CliError::SceneIdMismatch(_) => "SceneIdMismatch",
            CliError::Config(_) => "ConfigError",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Parse a JSON config file, or take the type's default without one.
pub fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        None => Ok(T::default()),
    }
}

fn dataset(context: &str) -> impl FnOnce(DatasetError) -> CliError + '_ {
    move |source| CliError::Dataset {
        context: context.to_string(),
        source,
    }
}

/// Writes files under one directory and records their digests.
struct OutDir<'a> {
    root: &'a Path,
    manifest: RunManifest,
}

impl<'a> OutDir<'a> {
    fn create(root: &'a Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self { root, manifest })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.manifest.output(rel, bytes);
        Ok(())
    }

    fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    fn finish(mut self) -> Result<RunManifest> {
        self.manifest.finished_unix = unix_now();
        let path = self.root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(self.manifest)
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

/// Independent per-scene seed.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn scene_id(index: usize) -> String {
    format!("{index:06}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scenes: usize,
    pub scene: SceneSpec,
    /// Inclusive per-scene count ranges; when set they replace the fixed
    /// counts in `scene`.
    pub cars: Option<[usize; 2]>,
    pub pedestrians: Option<[usize; 2]>,
    pub cyclists: Option<[usize; 2]>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scenes: 10,
            scene: SceneSpec::default(),
            cars: None,
            pedestrians: None,
            cyclists: None,
        }
    }
}

impl SynthConfig {
    /// The recipe for scene `index`.
    pub fn scene_spec(&self, seed: u64, index: usize) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(scene_seed(seed, index) ^ 0x5EED);
        let mut spec = self.scene.clone();
        let mut draw = |range: Option<[usize; 2]>, fixed: usize| match range {
            Some([lo, hi]) => rng.random_range(lo..=hi.max(lo)),
            None => fixed,
        };
        spec.cars = draw(self.cars, spec.cars);
        spec.pedestrians = draw(self.pedestrians, spec.pedestrians);
        spec.cyclists = draw(self.cyclists, spec.cyclists);
        spec.frame_id = index as u64;
        spec
    }
}

/// Generate `config.scenes` scenes into a Kitti-layout directory.
pub fn cmd_synth(config: &SynthConfig, seed: u64, out: &Path, jobs: usize) -> Result<RunManifest> {
    let mut dir = OutDir::create(out, RunManifest::new("synth", config, Some(seed), jobs))?;
    let pool = thread_pool(jobs)?;
    let files: Vec<(String, Vec<u8>, String, String)> = pool.install(|| {
        (0..config.scenes)
            .into_par_iter()
            .map(|i| {
                let id = scene_id(i);
                let scene = synth_scene(&config.scene_spec(seed, i), scene_seed(seed, i))
                    .map_err(dataset(&format!("scene {id}")))?;
                let calib = scene.calibration.clone().unwrap_or_else(Calibration::kitti_like);
                let boxes: Vec<(Box3D, Option<f64>)> = scene.ground_truth.iter().map(|b| (*b, None)).collect();
                Ok((
                    id,
                    write_velodyne(&scene.cloud),
                    write_label_boxes(&boxes, &calib),
                    write_kitti_calib(&calib),
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for (id, bin, label, calib) in files {
        dir.write(&format!("{VELODYNE_DIR}/{id}.bin"), &bin)?;
        dir.write(&format!("{LABEL_DIR}/{id}.txt"), label.as_bytes())?;
        dir.write(&format!("{CALIB_DIR}/{id}.txt"), calib.as_bytes())?;
    }
    dir.finish()
}

/// File stems with the given extension, sorted; a missing directory is empty.
fn list_ids(dir: &Path, ext: &str) -> Result<Vec<String>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn load_calib(root: &Path, id: &str, manifest: &mut BTreeMap<String, Vec<u8>>) -> Result<Calibration> {
    let rel = format!("{CALIB_DIR}/{id}.txt");
    let path = root.join(&rel);
    if !path.exists() {
        return Ok(Calibration::kitti_like());
    }
    let bytes = read(&path)?;
    let text = String::from_utf8_lossy(&bytes).into_owned();
    manifest.insert(rel, bytes);
    parse_kitti_calib(&text).map_err(dataset(&format!("calib {id}")))
}

fn load_labels(
    path: &Path,
    rel: String,
    calib: &Calibration,
    manifest: &mut BTreeMap<String, Vec<u8>>,
) -> Result<Vec<(Box3D, Option<f64>)>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes).into_owned();
    manifest.insert(rel.clone(), bytes);
    read_label_boxes(&text, calib).map_err(dataset(&rel))
}

struct LoadedScene {
    id: String,
    scene: Scene,
    files: BTreeMap<String, Vec<u8>>,
}

fn load_scene(root: &Path, id: &str) -> Result<LoadedScene> {
    let mut files = BTreeMap::new();
    let calib = load_calib(root, id, &mut files)?;
    let rel = format!("{VELODYNE_DIR}/{id}.bin");
    let bytes = read(&root.join(&rel))?;
    let mut cloud = parse_velodyne(&bytes).map_err(dataset(&rel))?;
    files.insert(rel, bytes);
    cloud.frame_id = id.parse().unwrap_or(0);
    let rel = format!("{LABEL_DIR}/{id}.txt");
    let ground_truth = load_labels(&root.join(&rel), rel, &calib, &mut files)?
        .into_iter()
        .map(|(b, _)| b)
        .collect();
    Ok(LoadedScene {
        id: id.to_string(),
        scene: Scene {
            cloud,
            ground_truth,
            calibration: Some(calib),
        },
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ScorerConfig {
    /// Ground-truth oracle, optionally noisy. Each scene gets its own seed.
    Oracle {
        #[serde(default)]
        noise: NoiseSpec,
    },
    /// Replays detection files (`<id>.txt`, Kitti format with scores).
    Detections { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub pipeline: PipelineConfig,
    pub scorer: ScorerConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            scorer: ScorerConfig::Oracle {
                noise: NoiseSpec::none(),
            },
        }
    }
}

/// Summary written next to the detection files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectSummary {
    pub mode: Variant,
    pub scenes: Vec<SceneSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub id: String,
    pub ground_truth: usize,
    pub detections: usize,
    pub proposals: usize,
    pub fuse_calls: usize,
}

/// Run the pipeline over every scene and write one Kitti detection file per
/// scene into `out`.
pub fn cmd_detect(
    scene_dir: &Path,
    config: &DetectConfig,
    seed: u64,
    out: &Path,
    jobs: usize,
) -> Result<RunManifest> {
    config.pipeline.validate().map_err(|source| CliError::Detector {
        context: "pipeline config".into(),
        source,
    })?;
    let mut dir = OutDir::create(out, RunManifest::new("detect", config, Some(seed), jobs))?;
    let ids = list_ids(&scene_dir.join(VELODYNE_DIR), "bin")?;
    let pool = thread_pool(jobs)?;
    type SceneOut = (LoadedScene, Vec<Detection>, SceneSummary, BTreeMap<String, Vec<u8>>);
    let results: Vec<SceneOut> = pool.install(|| {
        ids.par_iter()
            .enumerate()
            .map(|(i, id)| -> Result<SceneOut> {
                let loaded = load_scene(scene_dir, id)?;
                let mut extra = BTreeMap::new();
                let scorer: Box<dyn Scorer> = match &config.scorer {
                    ScorerConfig::Oracle { noise } => Box::new(oracle_scorer(
                        &loaded.scene.ground_truth,
                        *noise,
                        scene_seed(seed, i),
                    )),
                    ScorerConfig::Detections { dir } => {
                        let calib = loaded.scene.calibration.clone().unwrap_or_else(Calibration::kitti_like);
                        let dets = load_labels(&dir.join(format!("{id}.txt")), format!("replay/{id}.txt"), &calib, &mut extra)?
                            .into_iter()
                            .map(|(b, s)| Detection::new(b, s.unwrap_or(1.0)))
                            .collect::<Vec<_>>();
                        Box::new(DetectionScorer::new(&dets))
                    }
                };
                let output = run_pipeline(&loaded.scene, scorer.as_ref(), &config.pipeline).map_err(|source| {
                    CliError::Detector {
                        context: format!("scene {id}"),
                        source,
                    }
                })?;
                let summary = SceneSummary {
                    id: id.clone(),
                    ground_truth: loaded.scene.ground_truth.len(),
                    detections: output.detections.len(),
                    proposals: output.trace.proposals,
                    fuse_calls: output.trace.fuse_calls,
                };
                Ok((loaded, output.detections, summary, extra))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut summaries = Vec::new();
    for (loaded, detections, summary, extra) in results {
        for (rel, bytes) in loaded.files.iter().chain(&extra) {
            dir.manifest.input(rel.clone(), bytes);
        }
        let calib = loaded.scene.calibration.unwrap_or_else(Calibration::kitti_like);
        let boxes: Vec<(Box3D, Option<f64>)> = detections.iter().map(|d| (d.bbox, Some(d.score))).collect();
        dir.write(&format!("{}.txt", loaded.id), write_label_boxes(&boxes, &calib).as_bytes())?;
        summaries.push(summary);
    }
    dir.write_json(
        "summary.json",
        &DetectSummary {
            mode: config.pipeline.mode,
            scenes: summaries,
        },
    )?;
    dir.finish()
}

/// AP over all scenes of `gt_dir`, with detections read from `det_dir`.
/// A scene without a detection file counts as having no detections.
pub fn cmd_eval(det_dir: &Path, gt_dir: &Path, iou_min: f64, out: &Path, jobs: usize) -> Result<(ApReport, RunManifest)> {
    if !(iou_min > 0.0 && iou_min <= 1.0) {
        return Err(CliError::Config(format!("iou_min must lie in (0, 1], got {iou_min}")));
    }
    let mut dir = OutDir::create(out, RunManifest::new("eval", &iou_min, None, jobs))?;
    let gt_ids = list_ids(&gt_dir.join(LABEL_DIR), "txt")?;
    let known: BTreeSet<&String> = gt_ids.iter().collect();
    for id in list_ids(det_dir, "txt")? {
        if !known.contains(&id) {
            return Err(CliError::SceneIdMismatch(id));
        }
    }
    let pool = thread_pool(jobs)?;
    type Loaded = (Vec<Detection>, Vec<Box3D>, BTreeMap<String, Vec<u8>>);
    let scenes: Vec<Loaded> = pool.install(|| {
        gt_ids
            .par_iter()
            .map(|id| -> Result<Loaded> {
                let mut files = BTreeMap::new();
                let calib = load_calib(gt_dir, id, &mut files)?;
                let rel = format!("{LABEL_DIR}/{id}.txt");
                let gts = load_labels(&gt_dir.join(&rel), rel, &calib, &mut files)?
                    .into_iter()
                    .map(|(b, _)| b)
                    .collect();
                let dets = load_labels(
                    &det_dir.join(format!("{id}.txt")),
                    format!("detections/{id}.txt"),
                    &calib,
                    &mut files,
                )?
                .into_iter()
                .map(|(b, s)| Detection::new(b, s.unwrap_or(1.0).clamp(0.0, 1.0)))
                .collect();
                Ok((dets, gts, files))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for (_, _, files) in &scenes {
        for (rel, bytes) in files {
            dir.manifest.input(rel.clone(), bytes);
        }
    }
    let eval = evaluate(scenes.iter().map(|(d, g, _)| (&d[..], &g[..])), iou_min);
    dir.write_json("report.json", &eval.report)?;
    dir.write("pr_curve.csv", write_pr_csv(&eval.curves)?.as_bytes())?;
    let manifest = dir.finish()?;
    Ok((eval.report, manifest))
}

fn load_ap_table(path: Option<&Path>, default: &str) -> Result<(ApTable, Vec<u8>)> {
    let bytes = match path {
        Some(p) => read(p)?,
        None => default.as_bytes().to_vec(),
    };
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let table = parse_ap_table(&text).map_err(dataset("AP table"))?;
    Ok((table, bytes))
}

/// Rates, channel feasibility, recommendation and plot data. Without an AP
/// table the bundled Kitti figures are used.
pub fn cmd_feasibility(
    config: &FeasibilityConfig,
    ap_table: Option<&Path>,
    out: &Path,
) -> Result<(FeasibilityAnalysis, RunManifest)> {
    let mut dir = OutDir::create(out, RunManifest::new("feasibility", config, None, 1))?;
    let (table, bytes) = load_ap_table(ap_table, KITTI_AP_TABLE)?;
    dir.manifest.input("ap_table.csv", &bytes);
    let analysis = analyze(config, &table)?;
    dir.write_json("feasibility.json", &analysis)?;
    dir.write("plot.csv", plot_csv(&table, &config.modality_rates()?)?.as_bytes())?;
    let manifest = dir.finish()?;
    Ok((analysis, manifest))
}

/// Class mean of a variant next to the mAP bar the table reports for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    pub variant: Variant,
    pub class_mean: Option<f64>,
    pub reported_map: Option<f64>,
    /// Reported bar and class mean differ by more than the table's rounding.
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetComparison {
    pub name: String,
    pub ap: BTreeMap<ClassLabel, BTreeMap<Variant, f64>>,
    pub means: Vec<MeanCheck>,
    pub deltas: Vec<ClassDelta>,
}

/// Two-decimal tables: a bar within half a unit of the last digit agrees.
const ROUNDING: f64 = 0.005;

pub fn compare_variants(name: &str, table: &ApTable) -> DatasetComparison {
    let mut ap: BTreeMap<ClassLabel, BTreeMap<Variant, f64>> = BTreeMap::new();
    for (c, v, x) in table.entries() {
        ap.entry(c).or_default().insert(v, x);
    }
    let means = Variant::ALL
        .iter()
        .map(|&v| {
            let per_class: Vec<f64> = ClassLabel::ALL.iter().filter_map(|c| table.get(*c, v)).collect();
            let class_mean = crate::evaluator::map_over_classes(&per_class).ok();
            let reported_map = table.reported_map(v);
            let divergent = matches!((class_mean, reported_map), (Some(m), Some(r)) if (m - r).abs() > ROUNDING + 1e-12);
            MeanCheck {
                variant: v,
                class_mean,
                reported_map,
                divergent,
            }
        })
        .collect();
    let deltas = [(Variant::SIL, Variant::SF), (Variant::SIC, Variant::SF), (Variant::SIC, Variant::SIL)]
        .iter()
        .flat_map(|&(a, b)| variant_deltas(table, a, b))
        .collect();
    DatasetComparison {
        name: name.to_string(),
        ap,
        means,
        deltas,
    }
}

/// SF / SIC / SIL comparison for each named table; the bundled Kitti and Lyft
/// tables when none are given.
pub fn cmd_report(tables: &[(String, PathBuf)], out: &Path) -> Result<(Vec<DatasetComparison>, RunManifest)> {
    let names: Vec<&String> = tables.iter().map(|(n, _)| n).collect();
    let mut dir = OutDir::create(out, RunManifest::new("report", &names, None, 1))?;
    let mut loaded = Vec::new();
    if tables.is_empty() {
        for (name, text) in [("kitti", KITTI_AP_TABLE), ("lyft", LYFT_AP_TABLE)] {
            loaded.push((name.to_string(), load_ap_table(None, text)?));
        }
    } else {
        for (name, path) in tables {
            loaded.push((name.clone(), load_ap_table(Some(path), "")?));
        }
    }
    let mut out = Vec::new();
    for (name, (table, bytes)) in &loaded {
        dir.manifest.input(format!("{name}.csv"), bytes);
        out.push(compare_variants(name, table));
    }
    dir.write_json("report.json", &out)?;
    let manifest = dir.finish()?;
    Ok((out, manifest))
}

pub fn print_comparison(c: &DatasetComparison) -> String {
    let mut s = format!("{}\n", c.name);
    for m in &c.means {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        s.push_str(&format!(
            "  {:<4} class mean {}  reported mAP {}{}\n",
            m.variant.as_str(),
            fmt(m.class_mean),
            fmt(m.reported_map),
            if m.divergent { "  (differs)" } else { "" }
        ));
    }
    for d in &c.deltas {
        let rel = d.relative.map_or("-".to_string(), |r| format!("{:+.1}%", 100.0 * r));
        s.push_str(&format!(
            "  {:<10} {} -> {}: {:+.3} ({rel})\n",
            d.class_label, d.from, d.to, d.absolute
        ));
    }
    s
}
