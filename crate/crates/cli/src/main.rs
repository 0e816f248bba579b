//! `labelfuse` command-line tool.
//!
//! Exit status: 0 on success, 1 for validation or shape errors, 2 for I/O or
//! file-format errors. Machine-readable output (JSON, CSV) goes to stdout,
//! diagnostics to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use labelfuse::ema::DEFAULT_DECAY;
use labelfuse::losses::DEFAULT_DICE_EPS;
use labelfuse::postprocess::{DEFAULT_COCHLEA_LABEL, DEFAULT_VS_LABEL, DEFAULT_Z_MAX};
use labelfuse::volume::DEFAULT_CLASSES;

#[derive(Parser, Debug)]
#[command(
    name = "labelfuse",
    version,
    about = "Fuse, clean up and score volumetric segmentations"
)]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Class-label mapping and clean-up parameters.
#[derive(Args, Debug, Clone)]
pub struct LabelArgs {
    /// Number of classes, including background.
    #[arg(short = 'k', long = "classes", default_value_t = DEFAULT_CLASSES)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_VS_LABEL)]
    pub vs_label: u8,
    #[arg(long, default_value_t = DEFAULT_COCHLEA_LABEL)]
    pub cochlea_label: u8,
    /// Largest allowed z distance (voxels) between tumour and cochlea centroids.
    #[arg(long, default_value_t = DEFAULT_Z_MAX)]
    pub z_max: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fuse two or more softmax volumes, in order, into one label map.
    Fuse {
        /// Probability volumes (4D NIfTI); the first supplies the initial labels.
        #[arg(required = true, num_args = 2..)]
        probs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Apply the tumour/cochlea clean-up to the fused labels.
        #[arg(long)]
        postprocess: bool,
        /// Write the confident joint of every correction step as JSON.
        #[arg(long)]
        joint_json: Option<PathBuf>,
        #[command(flatten)]
        labels: LabelArgs,
    },
    /// Score predictions against ground truth (files or directories).
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Case name for single-file mode; defaults to the prediction file stem.
        #[arg(long)]
        case: Option<String>,
        /// Classes to score.
        #[arg(long = "eval-classes", value_delimiter = ',', default_values_t = [1u8, 2])]
        eval_classes: Vec<u8>,
        #[arg(short = 'k', long = "classes", default_value_t = DEFAULT_CLASSES)]
        k: usize,
        /// CSV destination; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Remove far tumour components and keep the largest component per structure.
    Postprocess {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Print removed components as JSON.
        #[arg(long)]
        stats: bool,
        #[command(flatten)]
        labels: LabelArgs,
    },
    /// List the 26-connected components of one class as JSON.
    Cc {
        input: PathBuf,
        #[arg(long = "class")]
        class_label: u8,
        #[arg(short = 'k', long = "classes", default_value_t = DEFAULT_CLASSES)]
        k: usize,
        /// Also write the per-voxel component id map (int32 NIfTI).
        #[arg(long)]
        ids: Option<PathBuf>,
    },
    /// Evaluate the segmentation or consistency losses.
    Losses {
        #[arg(long, requires = "label")]
        prob: Option<PathBuf>,
        #[arg(long, requires = "prob")]
        label: Option<PathBuf>,
        #[arg(long, requires = "student", conflicts_with_all = ["prob", "label"])]
        teacher: Option<PathBuf>,
        #[arg(long, requires = "teacher")]
        student: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DICE_EPS)]
        eps: f64,
        /// Run the finite-difference gradient check instead.
        #[arg(long)]
        grad_check: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random volumes for the gradient check.
        #[arg(long, default_value_t = 100)]
        volumes: usize,
    },
    /// Exponential-moving-average teacher update.
    Ema {
        #[arg(long)]
        teacher: PathBuf,
        /// Student parameter files, applied in order.
        #[arg(long, required = true, num_args = 1..)]
        student: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DECAY)]
        decay: f64,
    },
}

fn main() -> ExitCode {
    // Usage errors are validation errors (1); exit 2 is kept for I/O.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("labelfuse: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Fuse {
            probs,
            output,
            postprocess,
            joint_json,
            labels,
        } => commands::fuse(&probs, &output, postprocess, joint_json.as_deref(), &labels),
        Command::Eval {
            pred,
            gt,
            case,
            eval_classes,
            k,
            output,
        } => commands::eval(
            &pred,
            &gt,
            case.as_deref(),
            &eval_classes,
            k,
            output.as_deref(),
        ),
        Command::Postprocess {
            input,
            output,
            stats,
            labels,
        } => commands::postprocess(&input, &output, stats, &labels),
        Command::Cc {
            input,
            class_label,
            k,
            ids,
        } => commands::cc(&input, class_label, k, ids.as_deref()),
        Command::Losses {
            prob,
            label,
            teacher,
            student,
            eps,
            grad_check,
            seed,
            volumes,
        } => commands::losses(commands::LossInputs {
            prob,
            label,
            teacher,
            student,
            eps,
            grad_check,
            seed,
            volumes,
        }),
        Command::Ema {
            teacher,
            student,
            output,
            decay,
        } => commands::ema(&teacher, &student, &output, decay),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("labelfuse: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
