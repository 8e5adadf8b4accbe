use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use avodkit::cli::{self, CliError, DetectConfig, SynthConfig};
use avodkit::dataset_io::Variant;
use avodkit::netfeas::FeasibilityConfig;

#[derive(Parser)]
#[command(name = "avodkit", version, about = "BEV detection skeleton, AP evaluation and V2V rate feasibility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config for the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes in Kitti layout.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Overrides the scene count from the config.
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Run the two-stage pipeline over a scene directory.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenes: PathBuf,
        /// SF, SIC or SIL; overrides the config.
        #[arg(long)]
        mode: Option<Variant>,
    },
    /// AP_BEV and mAP of detection files against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou_min: f64,
    },
    /// Sensor rates, channel feasibility and per-class modality choice.
    Feasibility {
        #[command(flatten)]
        common: Common,
        /// CSV "class,variant,ap"; defaults to the bundled Kitti table.
        #[arg(long)]
        ap_table: Option<PathBuf>,
    },
    /// Compare SF, SIC and SIL across AP tables.
    Report {
        #[command(flatten)]
        common: Common,
        /// NAME=PATH, repeatable; defaults to the bundled tables.
        #[arg(long = "table", value_parser = parse_named)]
        tables: Vec<(String, PathBuf)>,
    },
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected NAME=PATH")?;
    Ok((name.to_string(), PathBuf::from(path)))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { common, scenes } => {
            let mut cfg: SynthConfig = cli::load_config(common.config.as_deref())?;
            if let Some(n) = scenes {
                cfg.scenes = n;
            }
            cli::cmd_synth(&cfg, common.seed, &common.out, common.jobs)?;
        }
        Command::Detect { common, scenes, mode } => {
            let mut cfg: DetectConfig = cli::load_config(common.config.as_deref())?;
            if let Some(m) = mode {
                cfg.pipeline.mode = m;
            }
            cli::cmd_detect(&scenes, &cfg, common.seed, &common.out, common.jobs)?;
        }
        Command::Eval {
            common,
            detections,
            ground_truth,
            iou_min,
        } => {
            let (report, _) = cli::cmd_eval(&detections, &ground_truth, iou_min, &common.out, common.jobs)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
        }
        Command::Feasibility { common, ap_table } => {
            let cfg: FeasibilityConfig = cli::load_config(common.config.as_deref())?;
            let (analysis, _) = cli::cmd_feasibility(&cfg, ap_table.as_deref(), &common.out)?;
            for c in &analysis.recommendation {
                println!("{}: {} ({})", c.class_label, c.modality, c.rationale);
            }
        }
        Command::Report { common, tables } => {
            let (comparisons, _) = cli::cmd_report(&tables, &common.out)?;
            for c in &comparisons {
                print!("{}", cli::print_comparison(c));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
