//! Sensor data rates against V2V channel capacity, and which sensing
//! modality to share per object class given its accuracy.
//!
//! Rates are in decimal Mbps (10^6 bit/s).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset_io::{ApTable, ClassLabel, Variant};

/// Slack on AP comparisons so that a drop of exactly the tolerance, computed
/// from two-decimal table values, still qualifies.
const AP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum NetfeasError {
    #[error("no AP entry for {class} / {variant}")]
    MissingApEntry { class: ClassLabel, variant: Variant },
    #[error("invalid sensor {name}: {reason}")]
    InvalidSensor { name: String, reason: String },
    #[error("invalid channel {0}: capacity must be positive")]
    InvalidChannel(String),
    #[error("unknown sensor {0}")]
    UnknownSensor(String),
    #[error("policy tolerance must be non-negative, got {0}")]
    InvalidPolicy(f64),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SensorKind {
    LidarBytesPerMicrosecond { bytes_per_us: f64 },
    LidarPointRate { points_per_s: f64, bits_per_point: f64 },
    CameraRaw { width: f64, height: f64, bit_depth: f64, fps: f64 },
    CameraCompressed { mbps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    #[serde(flatten)]
    pub kind: SensorKind,
    #[serde(default = "one")]
    pub count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn one() -> u32 {
    1
}

impl SensorSpec {
    pub fn new(kind: SensorKind, count: u32) -> Self {
        Self { kind, count, note: None }
    }

    pub fn validate(&self, name: &str) -> Result<(), NetfeasError> {
        let values: &[f64] = match &self.kind {
            SensorKind::LidarBytesPerMicrosecond { bytes_per_us } => &[*bytes_per_us],
            SensorKind::LidarPointRate { points_per_s, bits_per_point } => &[*points_per_s, *bits_per_point],
            SensorKind::CameraRaw { width, height, bit_depth, fps } => &[*width, *height, *bit_depth, *fps],
            SensorKind::CameraCompressed { mbps } => &[*mbps],
        };
        let fail = |reason: &str| {
            Err(NetfeasError::InvalidSensor {
                name: name.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.count == 0 {
            return fail("count must be positive");
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return fail("all magnitudes must be positive and finite");
        }
        Ok(())
    }
}

pub fn sensor_rate(spec: &SensorSpec) -> f64 {
    let single = match spec.kind {
        SensorKind::LidarBytesPerMicrosecond { bytes_per_us } => bytes_per_us * 8.0,
        SensorKind::LidarPointRate { points_per_s, bits_per_point } => points_per_s * bits_per_point / 1e6,
        SensorKind::CameraRaw { width, height, bit_depth, fps } => width * height * bit_depth * fps / 1e6,
        SensorKind::CameraCompressed { mbps } => mbps,
    };
    single * spec.count as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    LidarOnly,
    CameraOnly,
    Fusion,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::LidarOnly, Modality::CameraOnly, Modality::Fusion];

    /// Detector variant evaluated for this modality.
    pub fn variant(self) -> Variant {
        match self {
            Modality::LidarOnly => Variant::SIL,
            Modality::CameraOnly => Variant::SIC,
            Modality::Fusion => Variant::SF,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::LidarOnly => "LidarOnly",
            Modality::CameraOnly => "CameraOnly",
            Modality::Fusion => "Fusion",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn modality_rate(modality: Modality, lidar: &SensorSpec, camera: &SensorSpec) -> f64 {
    match modality {
        Modality::LidarOnly => sensor_rate(lidar),
        Modality::CameraOnly => sensor_rate(camera),
        Modality::Fusion => sensor_rate(lidar) + sensor_rate(camera),
    }
}

pub fn modality_rates(lidar: &SensorSpec, camera: &SensorSpec) -> BTreeMap<Modality, f64> {
    Modality::ALL
        .iter()
        .map(|m| (*m, modality_rate(*m, lidar, camera)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub capacity_mbps: f64,
}

impl ChannelSpec {
    pub fn new(name: &str, capacity_mbps: f64) -> Self {
        Self {
            name: name.to_string(),
            capacity_mbps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub stream: String,
    pub channel: String,
    pub rate_mbps: f64,
    pub capacity_mbps: f64,
    pub feasible: bool,
    pub max_streams: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub rates_mbps: BTreeMap<String, f64>,
    pub rows: Vec<FeasibilityRow>,
}

impl FeasibilityReport {
    pub fn row(&self, stream: &str, channel: &str) -> Option<&FeasibilityRow> {
        self.rows.iter().find(|r| r.stream == stream && r.channel == channel)
    }
}

/// Every (stream, channel) pair, channel-major in input order.
pub fn feasibility(
    rates: &BTreeMap<String, f64>,
    channels: &[ChannelSpec],
) -> Result<FeasibilityReport, NetfeasError> {
    let mut rows = Vec::with_capacity(rates.len() * channels.len());
    for ch in channels {
        if !(ch.capacity_mbps.is_finite() && ch.capacity_mbps > 0.0) {
            return Err(NetfeasError::InvalidChannel(ch.name.clone()));
        }
        for (stream, &rate) in rates {
            rows.push(FeasibilityRow {
                stream: stream.clone(),
                channel: ch.name.clone(),
                rate_mbps: rate,
                capacity_mbps: ch.capacity_mbps,
                feasible: rate <= ch.capacity_mbps,
                max_streams: (ch.capacity_mbps / rate).floor() as u64,
                utilization: rate / ch.capacity_mbps,
            });
        }
    }
    Ok(FeasibilityReport {
        rates_mbps: rates.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommendationPolicy {
    /// Classes that can report their own state over the network, so some
    /// accuracy may be traded for rate.
    pub connected_classes: BTreeSet<ClassLabel>,
    pub ap_drop_tolerance: f64,
    pub vulnerable_classes: BTreeSet<ClassLabel>,
}

impl Default for RecommendationPolicy {
    fn default() -> Self {
        Self {
            connected_classes: BTreeSet::from([ClassLabel::Car]),
            ap_drop_tolerance: 0.03,
            vulnerable_classes: BTreeSet::from([ClassLabel::Pedestrian, ClassLabel::Cyclist]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassGroup {
    Connected,
    Vulnerable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassChoice {
    pub class_label: ClassLabel,
    pub group: ClassGroup,
    pub modality: Modality,
    pub ap: f64,
    pub rate_mbps: f64,
    pub best_modality: Modality,
    pub best_ap: f64,
    pub best_rate_mbps: f64,
    /// `best_ap - ap`.
    pub delta_ap: f64,
    /// `1 - rate / best_rate`.
    pub rate_saving: f64,
    pub rationale: String,
}

fn lookup(table: &ApTable, class: ClassLabel, m: Modality) -> Result<f64, NetfeasError> {
    table.get(class, m.variant()).ok_or(NetfeasError::MissingApEntry {
        class,
        variant: m.variant(),
    })
}

/// Connected classes take the cheapest modality within `ap_drop_tolerance` of
/// the best AP; vulnerable classes take the best AP, ties to the lower rate.
pub fn recommend(
    table: &ApTable,
    rates: &BTreeMap<Modality, f64>,
    policy: &RecommendationPolicy,
) -> Result<Vec<ClassChoice>, NetfeasError> {
    if !(policy.ap_drop_tolerance >= 0.0) {
        return Err(NetfeasError::InvalidPolicy(policy.ap_drop_tolerance));
    }
    let mut out = Vec::new();
    for class in ClassLabel::ALL {
        let group = if policy.connected_classes.contains(&class) {
            ClassGroup::Connected
        } else if policy.vulnerable_classes.contains(&class) {
            ClassGroup::Vulnerable
        } else {
            continue;
        };
        let options = Modality::ALL
            .iter()
            .filter_map(|m| rates.get(m).map(|r| (*m, *r)))
            .map(|(m, rate)| lookup(table, class, m).map(|ap| (m, ap, rate)))
            .collect::<Result<Vec<_>, _>>()?;
        let Some(&best) = options
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.total_cmp(&a.2)))
        else {
            continue;
        };
        let chosen = match group {
            ClassGroup::Vulnerable => best,
            ClassGroup::Connected => *options
                .iter()
                .filter(|o| o.1 >= best.1 - policy.ap_drop_tolerance - AP_SLACK)
                .min_by(|a, b| a.2.total_cmp(&b.2).then(b.1.total_cmp(&a.1)))
                .expect("best option always qualifies"),
        };
        let delta_ap = best.1 - chosen.1;
        let rate_saving = 1.0 - chosen.2 / best.2;
        let rationale = match group {
            ClassGroup::Connected if chosen.0 != best.0 => format!(
                "{} keeps AP within {:.2} of {} ({:.2} vs {:.2}) at {:.1}% less channel load",
                chosen.0,
                delta_ap,
                best.0,
                chosen.1,
                best.1,
                100.0 * rate_saving
            ),
            ClassGroup::Connected => format!(
                "no cheaper modality within {:.2} AP of {} ({:.2})",
                policy.ap_drop_tolerance, best.0, best.1
            ),
            ClassGroup::Vulnerable => format!("highest AP {:.2} at {:.2} Mbps", best.1, best.2),
        };
        out.push(ClassChoice {
            class_label: class,
            group,
            modality: chosen.0,
            ap: chosen.1,
            rate_mbps: chosen.2,
            best_modality: best.0,
            best_ap: best.1,
            best_rate_mbps: best.2,
            delta_ap,
            rate_saving,
            rationale,
        });
    }
    Ok(out)
}

/// Points not dominated by any other (lower-or-equal rate and
/// higher-or-equal AP, one strictly), sorted by rate.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let dominates = |a: &(f64, f64), b: &(f64, f64)| a.0 <= b.0 && a.1 >= b.1 && (a.0 < b.0 || a.1 > b.1);
    let mut out: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(q, p)))
        .copied()
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub class_label: String,
    pub from: Variant,
    pub to: Variant,
    pub absolute: f64,
    /// Relative to `from`; absent when `from` is zero.
    pub relative: Option<f64>,
}

/// AP change from one variant to another for every class and the class mean.
pub fn variant_deltas(table: &ApTable, from: Variant, to: Variant) -> Vec<ClassDelta> {
    let mut out = Vec::new();
    let mut push = |label: String, a: f64, b: f64| {
        out.push(ClassDelta {
            class_label: label,
            from,
            to,
            absolute: b - a,
            relative: (a != 0.0).then(|| (b - a) / a),
        })
    };
    let mut means = (0.0, 0.0, 0usize);
    for class in ClassLabel::ALL {
        if let (Some(a), Some(b)) = (table.get(class, from), table.get(class, to)) {
            push(class.to_string(), a, b);
            means = (means.0 + a, means.1 + b, means.2 + 1);
        }
    }
    if means.2 > 0 {
        let n = means.2 as f64;
        push("mean".into(), means.0 / n, means.1 / n);
    }
    out
}

/// Sensor and channel setup for a feasibility run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityConfig {
    pub sensors: BTreeMap<String, SensorSpec>,
    /// Sensor names backing the LiDAR and camera modalities.
    pub lidar: String,
    pub camera: String,
    /// Additional sensors checked as standalone streams.
    #[serde(default)]
    pub single_streams: Vec<String>,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub policy: RecommendationPolicy,
    /// Free-form notes carried into the report untouched.
    #[serde(default)]
    pub annotations: BTreeMap<String, String>,
}

const KITTI_PRESETS: &str = include_str!("../data/presets_kitti.json");

impl FeasibilityConfig {
    pub fn kitti_presets() -> Self {
        serde_json::from_str(KITTI_PRESETS).expect("bundled presets are valid")
    }

    fn sensor(&self, name: &str) -> Result<&SensorSpec, NetfeasError> {
        let s = self
            .sensors
            .get(name)
            .ok_or_else(|| NetfeasError::UnknownSensor(name.to_string()))?;
        s.validate(name)?;
        Ok(s)
    }

    pub fn modality_rates(&self) -> Result<BTreeMap<Modality, f64>, NetfeasError> {
        Ok(modality_rates(self.sensor(&self.lidar)?, self.sensor(&self.camera)?))
    }

    /// Modality rates keyed by name plus the standalone streams.
    pub fn stream_rates(&self) -> Result<BTreeMap<String, f64>, NetfeasError> {
        let mut out: BTreeMap<String, f64> = self
            .modality_rates()?
            .into_iter()
            .map(|(m, r)| (m.to_string(), r))
            .collect();
        for name in &self.single_streams {
            out.insert(name.clone(), sensor_rate(self.sensor(name)?));
        }
        Ok(out)
    }
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self::kitti_presets()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityAnalysis {
    pub feasibility: FeasibilityReport,
    pub recommendation: Vec<ClassChoice>,
    /// Per class, non-dominated `(rate, AP)` modality points.
    pub frontiers: BTreeMap<ClassLabel, Vec<(f64, f64)>>,
    pub annotations: BTreeMap<String, String>,
}

pub fn analyze(config: &FeasibilityConfig, table: &ApTable) -> Result<FeasibilityAnalysis, NetfeasError> {
    let rates = config.modality_rates()?;
    let feasibility = feasibility(&config.stream_rates()?, &config.channels)?;
    let recommendation = recommend(table, &rates, &config.policy)?;
    let mut frontiers = BTreeMap::new();
    for class in ClassLabel::ALL {
        let points: Vec<(f64, f64)> = rates
            .iter()
            .filter_map(|(m, r)| table.get(class, m.variant()).map(|ap| (*r, ap)))
            .collect();
        if !points.is_empty() {
            frontiers.insert(class, pareto_frontier(&points));
        }
    }
    Ok(FeasibilityAnalysis {
        feasibility,
        recommendation,
        frontiers,
        annotations: config.annotations.clone(),
    })
}

/// `modality,rate_mbps,class,ap` rows for a rate-vs-accuracy plot, plus a
/// `People` row averaging pedestrians and cyclists when both are present.
pub fn plot_csv(table: &ApTable, rates: &BTreeMap<Modality, f64>) -> Result<String, NetfeasError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| NetfeasError::Csv(e.to_string());
    w.write_record(["modality", "rate_mbps", "class", "ap"]).map_err(err)?;
    for (m, rate) in rates {
        let v = m.variant();
        for class in ClassLabel::ALL {
            if let Some(ap) = table.get(class, v) {
                w.write_record([m.as_str(), &rate.to_string(), class.as_str(), &ap.to_string()])
                    .map_err(err)?;
            }
        }
        if let (Some(p), Some(c)) = (table.get(ClassLabel::Pedestrian, v), table.get(ClassLabel::Cyclist, v)) {
            w.write_record([m.as_str(), &rate.to_string(), "People", &((p + c) / 2.0).to_string()])
                .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| NetfeasError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset_io::parse_ap_table;
    use proptest::prelude::*;

    fn kitti_table() -> ApTable {
        parse_ap_table(include_str!("../data/kitti_ap.csv")).unwrap()
    }

    fn lidar() -> SensorSpec {
        SensorSpec::new(SensorKind::LidarBytesPerMicrosecond { bytes_per_us: 12.48 }, 1)
    }

    fn png(count: u32) -> SensorSpec {
        SensorSpec::new(SensorKind::CameraCompressed { mbps: 12.24 }, count)
    }

    #[test]
    fn bundled_rates() {
        assert!((sensor_rate(&lidar()) - 99.84).abs() < 1e-9);
        let raw = SensorSpec::new(
            SensorKind::CameraRaw {
                width: 1384.0,
                height: 1032.0,
                bit_depth: 24.0,
                fps: 10.0,
            },
            1,
        );
        assert!((sensor_rate(&raw) - 342.789_12).abs() < 1e-9);
        assert!((sensor_rate(&png(4)) - 48.96).abs() < 1e-9);
        assert!((modality_rate(Modality::Fusion, &lidar(), &png(4)) - 148.8).abs() < 1e-9);
        assert_eq!(modality_rate(Modality::CameraOnly, &lidar(), &png(1)), 12.24);
    }

    #[test]
    fn presets_parse() {
        let cfg = FeasibilityConfig::kitti_presets();
        let rates = cfg.stream_rates().unwrap();
        assert!((rates["Fusion"] - 148.8).abs() < 1e-9);
        assert!(rates.values().all(|r| *r > 0.0));
        assert_eq!(cfg.channels.len(), 2);
    }

    #[test]
    fn channel_limits() {
        let rates = BTreeMap::from([("lidar".to_string(), 99.84), ("png".to_string(), 12.24)]);
        let rep = feasibility(&rates, &[ChannelSpec::new("802.11p", 27.0)]).unwrap();
        assert!(!rep.row("lidar", "802.11p").unwrap().feasible);
        assert_eq!(rep.row("png", "802.11p").unwrap().max_streams, 2);
        let eq = feasibility(&BTreeMap::from([("x".to_string(), 27.0)]), &[ChannelSpec::new("c", 27.0)]).unwrap();
        let row = &eq.rows[0];
        assert!(row.feasible);
        assert_eq!(row.max_streams, 1);
        assert_eq!(row.utilization, 1.0);
        assert!(feasibility(&rates, &[]).unwrap().rows.is_empty());
        assert!(feasibility(&rates, &[ChannelSpec::new("bad", 0.0)]).is_err());
    }

    #[test]
    fn kitti_table_choices() {
        let rates = modality_rates(&lidar(), &png(4));
        let out = recommend(&kitti_table(), &rates, &RecommendationPolicy::default()).unwrap();
        let car = &out[0];
        assert_eq!(car.class_label, ClassLabel::Car);
        assert_eq!(car.modality, Modality::LidarOnly);
        assert!((car.delta_ap - 0.03).abs() < 1e-9);
        assert!((car.rate_saving - (1.0 - 99.84 / 148.8)).abs() < 1e-12);
        for c in &out[1..] {
            assert_eq!(c.modality, Modality::Fusion);
        }
        let strict = RecommendationPolicy {
            ap_drop_tolerance: 0.0,
            ..RecommendationPolicy::default()
        };
        let out = recommend(&kitti_table(), &rates, &strict).unwrap();
        assert_eq!(out[0].modality, Modality::Fusion);
    }

    #[test]
    fn missing_entry() {
        let mut table = ApTable::default();
        table.insert(ClassLabel::Car, Variant::SF, 0.7);
        let rates = modality_rates(&lidar(), &png(4));
        let err = recommend(&table, &rates, &RecommendationPolicy::default()).unwrap_err();
        assert!(matches!(err, NetfeasError::MissingApEntry { class: ClassLabel::Car, .. }));
    }

    #[test]
    fn car_points_are_all_efficient() {
        let pts = [(48.96, 0.58), (99.84, 0.74), (148.8, 0.77)];
        assert_eq!(pareto_frontier(&pts), pts.to_vec());
        assert_eq!(pareto_frontier(&[(1.0, 0.5)]), vec![(1.0, 0.5)]);
        assert_eq!(pareto_frontier(&[(1.0, 0.5), (2.0, 0.4)]), vec![(1.0, 0.5)]);
    }

    #[test]
    fn deltas_report_both_forms() {
        let d = variant_deltas(&kitti_table(), Variant::SIC, Variant::SIL);
        let car = d.iter().find(|d| d.class_label == "Car").unwrap();
        assert!((car.absolute - 0.16).abs() < 1e-9);
        assert!((car.relative.unwrap() - 0.16 / 0.58).abs() < 1e-12);
    }

    #[test]
    fn plot_rows() {
        let csv = plot_csv(&kitti_table(), &modality_rates(&lidar(), &png(4))).unwrap();
        assert!(csv.starts_with("modality,rate_mbps,class,ap\n"));
        assert!(csv.contains("LidarOnly,99.84,Car,0.74\n"));
        let people: f64 = csv
            .lines()
            .find(|l| l.starts_with("Fusion,") && l.contains(",People,"))
            .and_then(|l| l.rsplit(',').next())
            .unwrap()
            .parse()
            .unwrap();
        assert!((people - 0.40).abs() < 1e-9);
    }

    fn point() -> impl Strategy<Value = (f64, f64)> {
        (1.0f64..500.0, 0.0f64..1.0)
    }

    proptest! {
        #[test]
        fn linear_in_count_and_fps(count in 1u32..16, fps in 1.0f64..60.0) {
            let cam = |count, fps| SensorSpec::new(
                SensorKind::CameraRaw { width: 640.0, height: 480.0, bit_depth: 8.0, fps },
                count,
            );
            let base = sensor_rate(&cam(1, 1.0));
            prop_assert!((sensor_rate(&cam(count, fps)) - base * count as f64 * fps).abs() < 1e-9 * base * count as f64 * fps);
        }

        #[test]
        fn more_capacity_never_hurts(rate in 0.1f64..500.0, c in 0.1f64..500.0, extra in 0.0f64..500.0) {
            let rates = BTreeMap::from([("s".to_string(), rate)]);
            let lo = feasibility(&rates, &[ChannelSpec::new("a", c)]).unwrap();
            let hi = feasibility(&rates, &[ChannelSpec::new("a", c + extra)]).unwrap();
            prop_assert!(!lo.rows[0].feasible || hi.rows[0].feasible);
            prop_assert!(lo.rows[0].max_streams <= hi.rows[0].max_streams);
            prop_assert_eq!(lo.rows[0].feasible, rate <= c);
        }

        #[test]
        fn frontier_is_antichain(points in proptest::collection::vec(point(), 1..20)) {
            let f = pareto_frontier(&points);
            prop_assert!(!f.is_empty());
            for a in &f {
                for b in &f {
                    prop_assert!(!(a.0 <= b.0 && a.1 >= b.1 && (a.0 < b.0 || a.1 > b.1)));
                }
            }
            for p in &points {
                let kept = f.contains(p);
                let dominated = points.iter().any(|q| q.0 <= p.0 && q.1 >= p.1 && (q.0 < p.0 || q.1 > p.1));
                prop_assert_eq!(kept, !dominated);
            }
        }

        #[test]
        fn zero_tolerance_is_argmax(aps in proptest::collection::vec(0.0f64..1.0, 9)) {
            let mut table = ApTable::default();
            for (i, class) in ClassLabel::ALL.iter().enumerate() {
                for (j, v) in Variant::ALL.iter().enumerate() {
                    table.insert(*class, *v, aps[3 * i + j]);
                }
            }
            let policy = RecommendationPolicy {
                ap_drop_tolerance: 0.0,
                ..RecommendationPolicy::default()
            };
            let rates = modality_rates(&lidar(), &png(4));
            for c in recommend(&table, &rates, &policy).unwrap() {
                let best = Modality::ALL.iter().map(|m| table.get(c.class_label, m.variant()).unwrap()).fold(0.0, f64::max);
                prop_assert!(c.ap >= best - AP_SLACK);
            }
        }
    }
}
