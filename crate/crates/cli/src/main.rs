//! `seqrisk`: generate synthetic cohorts, preprocess, extract radiomics,
//! train, finetune on asymmetry-filtered pseudo-labels and evaluate.
//!
//! Exit codes: 0 on success, 1 on invalid input or configuration, 2 on
//! runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seqrisk::evaluation::HorizonMode;
use seqrisk::synth::ImageFormat;

/// A validation failure; maps to exit code 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser, Debug)]
#[command(name = "seqrisk", version, about = "Sequential mammogram risk pipeline on synthetic or prepared cohorts")]
struct Cli {
    /// Worker threads [default: number of logical cores]
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Config file and run directory shared by most commands.
#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// JSON run configuration; missing fields take their defaults
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Run directory for every output and the resolved config
    #[arg(long)]
    pub out: PathBuf,
}

/// Prepared images plus their radiomics table.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Manifest of preprocessed images (written by `preprocess`)
    #[arg(long)]
    pub data: PathBuf,

    /// Radiomics CSV (written by `extract-features`)
    #[arg(long)]
    pub features: PathBuf,
}

/// Overrides applied on top of the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Frames per view video
    #[arg(long)]
    pub frames: Option<usize>,

    /// Epochs (split evenly between the two finetuning stages)
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,

    /// Patients per minibatch
    #[arg(long)]
    pub batch: Option<usize>,

    /// Training shuffle seed
    #[arg(long)]
    pub train_seed: Option<u64>,

    /// Weight initialization seed
    #[arg(long)]
    pub model_seed: Option<u64>,

    /// Seed of the test/fold split
    #[arg(long)]
    pub split_seed: Option<u64>,

    /// Initial effective scale of each view group
    #[arg(long)]
    pub gate_init: Option<f64>,

    /// Frozen part of each view-group scale
    #[arg(long)]
    pub gate_fixed: Option<f64>,

    /// Use the small two-layer backbone
    #[arg(long)]
    pub tiny: bool,

    /// Insert the linear additive attention block after this layer
    #[arg(long)]
    pub shift_layer: Option<usize>,

    /// Insert the non-local block after this layer
    #[arg(long)]
    pub nonlocal_layer: Option<usize>,

    /// Save a checkpoint every N epochs (0 disables)
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic cohort (manifest plus images)
    GenSynthetic {
        #[command(flatten)]
        run: RunArgs,
        /// Cohort seed
        #[arg(long)]
        seed: Option<u64>,
        /// Number of patients [default: 400]
        #[arg(long)]
        n_patients: Option<usize>,
        /// Image side in pixels [default: 64]
        #[arg(long)]
        size: Option<usize>,
        /// Lesion amplitude multiplier; 0 removes the signal [default: 1]
        #[arg(long)]
        signal: Option<f64>,
        /// Image file format [default: rdf]
        #[arg(long, value_parser = parse_format)]
        format: Option<ImageFormat>,
    },
    /// Segment, clean and resize every view of a raw cohort
    Preprocess {
        #[command(flatten)]
        run: RunArgs,
        /// Raw cohort manifest
        #[arg(long)]
        data: PathBuf,
        /// Network input side in pixels [default: 64]
        #[arg(long)]
        size: Option<usize>,
    },
    /// Compute the radiomics table of a preprocessed cohort
    ExtractFeatures {
        #[command(flatten)]
        run: RunArgs,
        /// Preprocessed cohort manifest
        #[arg(long)]
        data: PathBuf,
    },
    /// Train on the development split and score the test split
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Pseudo-label with a trained model, drop high-asymmetry controls and
    /// retrain in two stages
    FinetuneBaf {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model_args: ModelArgs,
        /// Directory of the model that produces the pseudo-labels
        #[arg(long)]
        model: PathBuf,
        /// Control asymmetry percentile above which controls are dropped [default: 90]
        #[arg(long)]
        percentile: Option<f64>,
        /// Fit the true labels instead of the pseudo-labels
        #[arg(long)]
        hard_labels: bool,
        /// Start from the labelling model instead of a fresh one
        #[arg(long)]
        warm_start: bool,
    },
    /// Horizon AUCs with bootstrap intervals, ROC curves and an optional
    /// DeLong comparison
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Predictions CSV (patient_id, score, label, category)
        #[arg(long)]
        predictions: PathBuf,
        /// Second predictions CSV to compare against
        #[arg(long)]
        compare: Option<PathBuf>,
        /// cumulative or exclusive [default: cumulative]
        #[arg(long, value_parser = parse_horizon)]
        horizon_mode: Option<HorizonMode>,
        /// Bootstrap resamples [default: 1000]
        #[arg(long)]
        n_boot: Option<usize>,
        /// Bootstrap seed [default: 0]
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parameters, multiply-accumulates and wall time of both attention blocks
    BenchAttention {
        /// Comma-separated position counts
        #[arg(long, value_delimiter = ',', default_value = "1024,2048,4096")]
        n: Vec<usize>,
        /// Input channels
        #[arg(long, default_value_t = 64)]
        c: usize,
        /// Bottleneck channels
        #[arg(long, default_value_t = 32)]
        cb: usize,
        /// Forward passes timed per entry
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Also write bench.csv here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top attention points and per-frame heatmaps for one patient
    ExportAttention {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Trained model directory; its backbone must carry the linear attention block
        #[arg(long)]
        model: PathBuf,
        /// Patient id [default: first patient]
        #[arg(long)]
        patient: Option<String>,
        /// Points per view
        #[arg(long, default_value_t = 20)]
        k: usize,
        /// Which position weights to export: alpha or beta
        #[arg(long, default_value = "alpha")]
        weights: String,
        /// Seed of the split used to fit the normalization statistics [default: config]
        #[arg(long)]
        split_seed: Option<u64>,
    },
    /// Finite-difference gradient checks of every operation and block
    GradCheck {
        /// Seed of the random inputs
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check the whole backbone and model chains
        #[arg(long)]
        end_to_end: bool,
        /// Also write grad_check.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Counts by label, category, screenings and age of a cohort manifest
    Describe {
        /// Cohort manifest
        #[arg(long)]
        data: PathBuf,
        /// Also write summary.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_format(s: &str) -> Result<ImageFormat, String> {
    match s {
        "rdf" => Ok(ImageFormat::Rdf),
        "pgm" => Ok(ImageFormat::Pgm),
        _ => Err(format!("unknown format {s:?} (rdf or pgm)")),
    }
}

fn parse_horizon(s: &str) -> Result<HorizonMode, String> {
    s.parse().map_err(|e: seqrisk::Error| e.to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<seqrisk::Error>() {
            return match e {
                seqrisk::Error::Io { .. } | seqrisk::Error::NonFinite(_) | seqrisk::Error::MemoryCap { .. } => 2,
                _ => 1,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::GenSynthetic {
            run,
            seed,
            n_patients,
            size,
            signal,
            format,
        } => commands::gen_synthetic(&run, seed, n_patients, size, signal, format),
        Command::Preprocess { run, data, size } => commands::preprocess(&run, &data, size),
        Command::ExtractFeatures { run, data } => commands::extract_features(&run, &data),
        Command::Train { run, data, model } => commands::train(&run, &data, &model),
        Command::FinetuneBaf {
            run,
            data,
            model_args,
            model,
            percentile,
            hard_labels,
            warm_start,
        } => commands::finetune_baf(&run, &data, &model_args, &model, percentile, hard_labels, warm_start),
        Command::Eval {
            run,
            predictions,
            compare,
            horizon_mode,
            n_boot,
            seed,
        } => commands::eval(&run, &predictions, compare.as_deref(), horizon_mode, n_boot, seed),
        Command::BenchAttention { n, c, cb, repeats, out } => commands::bench_attention(&n, c, cb, repeats, out.as_deref()),
        Command::ExportAttention {
            run,
            data,
            model,
            patient,
            k,
            weights,
            split_seed,
        } => commands::export_attention(&run, &data, &model, patient.as_deref(), k, &weights, split_seed),
        Command::GradCheck { seed, end_to_end, out } => commands::grad_check(seed, end_to_end, out.as_deref()),
        Command::Describe { data, out } => commands::describe(&data, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg += if msg.is_empty() { "" } else { ": " };
                    msg += &cause;
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
