use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ClassLabel, DatasetError};

/// Detector input variant: sensor fusion, single-input camera, single-input LiDAR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    SF,
    SIC,
    SIL,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::SF, Variant::SIC, Variant::SIL];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SF => "SF",
            Variant::SIC => "SIC",
            Variant::SIL => "SIL",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SF" => Ok(Variant::SF),
            "SIC" => Ok(Variant::SIC),
            "SIL" => Ok(Variant::SIL),
            other => Err(format!("unknown variant `{other}` (expected SF, SIC or SIL)")),
        }
    }
}

/// Per-class AP keyed by `(class, variant)`.
///
/// Rows whose class is `mAP` are kept separately as the figure an external
/// source reported for that variant; they are never used as a class AP.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ApTable {
    entries: BTreeMap<(ClassLabel, Variant), f64>,
    reported_map: BTreeMap<Variant, f64>,
}

impl ApTable {
    pub fn get(&self, class: ClassLabel, variant: Variant) -> Option<f64> {
        self.entries.get(&(class, variant)).copied()
    }

    pub fn reported_map(&self, variant: Variant) -> Option<f64> {
        self.reported_map.get(&variant).copied()
    }

    pub fn insert(&mut self, class: ClassLabel, variant: Variant, ap: f64) -> Option<f64> {
        self.entries.insert((class, variant), ap)
    }

    pub fn entries(&self) -> impl Iterator<Item = (ClassLabel, Variant, f64)> + '_ {
        self.entries.iter().map(|(&(c, v), &ap)| (c, v, ap))
    }

    pub fn classes(&self) -> Vec<ClassLabel> {
        let mut c: Vec<_> = self.entries.keys().map(|k| k.0).collect();
        c.dedup();
        c
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    class: String,
    variant: String,
    ap: f64,
}

pub fn parse_ap_table(csv_text: &str) -> Result<ApTable, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Csv(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["class", "variant", "ap"] {
        return Err(DatasetError::Csv(format!(
            "expected header `class,variant,ap`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut table = ApTable::default();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| DatasetError::Csv(format!("line {line}: {e}")))?;
        if !(0.0..=1.0).contains(&row.ap) {
            return Err(DatasetError::ApOutOfRange { line, value: row.ap });
        }
        let variant: Variant = row
            .variant
            .parse()
            .map_err(|e| DatasetError::Csv(format!("line {line}: {e}")))?;
        let dup = || DatasetError::DuplicateKey {
            class: row.class.clone(),
            variant: row.variant.clone(),
        };
        if row.class == "mAP" {
            if table.reported_map.insert(variant, row.ap).is_some() {
                return Err(dup());
            }
            continue;
        }
        let class: ClassLabel = row
            .class
            .parse()
            .map_err(|e| DatasetError::Csv(format!("line {line}: {e}")))?;
        if table.entries.insert((class, variant), row.ap).is_some() {
            return Err(dup());
        }
    }
    Ok(table)
}

pub fn write_ap_table(table: &ApTable) -> String {
    let mut out = String::from("class,variant,ap\n");
    for (v, ap) in &table.reported_map {
        out.push_str(&format!("mAP,{v},{ap}\n"));
    }
    for ((c, v), ap) in &table.entries {
        out.push_str(&format!("{c},{v},{ap}\n"));
    }
    out
}
