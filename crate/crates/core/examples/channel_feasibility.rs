//! Sensor rates against 802.11p and mmWave capacity, and the per-class
//! modality choice for the bundled Kitti AP table.

use avodkit::cli::KITTI_AP_TABLE;
use avodkit::dataset_io::parse_ap_table;
use avodkit::netfeas::{analyze, FeasibilityConfig};

fn main() {
    let cfg = FeasibilityConfig::kitti_presets();
    let table = parse_ap_table(KITTI_AP_TABLE).unwrap();
    let report = analyze(&cfg, &table).unwrap();

    for (stream, rate) in &report.feasibility.rates_mbps {
        println!("{stream:<16} {rate:9.3} Mbps");
    }
    for row in &report.feasibility.rows {
        println!(
            "{:<8} {:<16} feasible {:<5} streams {:>3} utilisation {:6.3}",
            row.channel, row.stream, row.feasible, row.max_streams, row.utilization
        );
    }
    for c in &report.recommendation {
        println!("{:<10} -> {:<10} {}", c.class_label.to_string(), c.modality.to_string(), c.rationale);
    }
    for (class, frontier) in &report.frontiers {
        println!("{class} frontier: {frontier:?}");
    }
}
