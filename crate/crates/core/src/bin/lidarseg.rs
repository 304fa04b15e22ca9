use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lidarseg::bench::{cmd_augment_preview, cmd_bench_dataflows, cmd_eval, cmd_train, RunConfig};
use lidarseg::sparse::ExecMode;
use lidarseg::tta::TtaConfig;

/// Sparse convolution benchmarks and a desk-scale LiDAR segmentor.
#[derive(Parser)]
#[command(name = "lidarseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// 1 runs single-threaded and deterministic; 0 uses every core; N > 1
    /// uses N worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for reports, checkpoints and previews.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check and time the four convolution dataflows on a voxelized scan.
    BenchDataflows(Common),
    /// Train the segmentor and write a checkpoint.
    Train(Common),
    /// Evaluate a checkpoint on the held-out scans.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Progressive test-time augmentation: 0 = off, 1 = flips (4x),
        /// 2 = +rotations (12x), 3 = +scales (36x), 4 = +translations (108x).
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=4))]
        tta_level: Option<u8>,
    },
    /// Mix two training scans and write them out for inspection.
    AugmentPreview(Common),
}

fn load(common: &Common) -> lidarseg::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    match common.threads {
        Some(1) => cfg.threads = ExecMode::Serial,
        Some(n) => {
            cfg.threads = ExecMode::Parallel;
            if n > 1 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| lidarseg::Error::Config(e.to_string()))?;
            }
        }
        None => {}
    }
    Ok(cfg)
}

fn run(cli: Cli) -> lidarseg::Result<()> {
    match cli.command {
        Command::BenchDataflows(common) => {
            let cfg = load(&common)?;
            let r = cmd_bench_dataflows(&cfg)?;
            println!(
                "{} voxels, {} pairs, occupancy {:.4}%",
                r.workload.voxels,
                r.workload.map_pairs,
                100.0 * r.workload.occupancy
            );
            for row in &r.rows {
                println!(
                    "{:<20} median {:>10.3} ms  {:>8.1} scans/s  padded MACs {:>12}{}",
                    row.dataflow,
                    row.median_s * 1e3,
                    row.scans_per_s,
                    row.padded_macs,
                    if row.fallback { "  (fallback)" } else { "" }
                );
            }
            if let Some(choice) = &r.autotune_choice {
                println!("autotuner chose {choice}");
            }
        }
        Command::Train(common) => {
            let cfg = load(&common)?;
            let r = cmd_train(&cfg)?;
            println!(
                "{} steps, loss {} -> {}, {:.2} it/s, held-out mIoU {}",
                r.steps,
                r.initial_loss.map_or("-".into(), |v| format!("{v:.4}")),
                r.final_loss.map_or("-".into(), |v| format!("{v:.4}")),
                r.iter_per_s.unwrap_or(0.0),
                r.train.final_miou.map_or("undefined".into(), |v| format!("{v:.4}")),
            );
            println!("checkpoint: {}", r.checkpoint.display());
        }
        Command::Eval { common, tta_level } => {
            let mut cfg = load(&common)?;
            if let Some(level) = tta_level {
                cfg.eval.use_tta = level > 0;
                let sets = TtaConfig::progressive(level as usize);
                cfg.tta.flip = sets.flip;
                cfg.tta.rotate = sets.rotate;
                cfg.tta.scale = sets.scale;
                cfg.tta.translate = sets.translate;
            }
            let r = cmd_eval(&cfg)?;
            let show = |v: Option<f64>| v.map_or("undefined".into(), |v| format!("{v:.4}"));
            println!(
                "{} scans, {} variants, mIoU {}, mAcc {}, {:.2} scans/s",
                r.scans,
                r.variants,
                show(r.miou),
                show(r.macc),
                r.scans_per_s
            );
            for c in &r.per_class {
                println!(
                    "  {:>2} {:<16} IoU {:>9} Acc {:>9}",
                    c.class,
                    c.name,
                    show(c.iou),
                    show(c.acc)
                );
            }
        }
        Command::AugmentPreview(common) => {
            let cfg = load(&common)?;
            let r = cmd_augment_preview(&cfg)?;
            for c in &r.clouds {
                println!("{:<8} {:>6} points -> {}", c.name, c.points, c.scan.display());
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
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
