//! Command-line front end: `generate`, `train`, `recover`, `modal` and
//! `gradcheck`. Every subcommand reads an optional JSON configuration,
//! applies flag overrides on top, and echoes the effective configuration
//! to `manifest.json` in its output directory.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_generate, cmd_gradcheck, cmd_modal, cmd_recover, cmd_train, cmd_train_with, load_checkpoint, read_records,
    GenerateOutcome, GradcheckOutcome, Manifest, ModelMetadata, RecoverOutcome, TrainOutcome, WindowError,
    CHECKPOINT_FILE, CONVERGENCE_FILE, GRADCHECK_FILE, GROUND_TRUTH_FILE, MANIFEST_FILE, MODAL_REPORT_FILE,
    RECORDS_FILE, RECOVERED_RECORDS_FILE, RECOVERED_WINDOWS_FILE, SINGULAR_VALUES_FILE, WINDOW_ERRORS_FILE,
};
pub use config::{load_config, GenerateRun, GradcheckRun, ModalRun, RecoverRun, TrainRun};

use crate::error::{Error, ErrorClass, Result};
use crate::recovery::ModelKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Io => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "shm-recover", version, about = "Recover lost sensor channels and check them by modal analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multi-sensor record and its ground truth.
    Generate(GenerateArgs),
    /// Train a recovery model on a record with some sensors masked.
    Train(TrainArgs),
    /// Predict masked sensors with a trained checkpoint.
    Recover(RecoverArgs),
    /// Compare natural frequencies and mode shapes of two records.
    Modal(ModalArgs),
    /// Check backpropagated gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON file with the run configuration; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub sensors: Option<usize>,
    /// Record length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Noise RMS as a fraction of each channel's clean RMS.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<ModelKind>,
    /// Faulted sensor indices, 0-based, e.g. `5` or `5,12`.
    #[arg(long, value_delimiter = ',')]
    pub mask: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Window stride in samples.
    #[arg(long)]
    pub ws: Option<usize>,
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub mask: Option<Vec<usize>>,
    /// Window indices to report, e.g. `3,40,120,300`.
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ModalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub recovered: Option<PathBuf>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub segment_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<ModelKind>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

fn parse_variant(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl GenerateArgs {
    pub fn resolve(self) -> Result<GenerateRun> {
        let mut run: GenerateRun = load_config(self.common.config.as_deref())?;
        set(&mut run.seed, self.common.seed);
        set(&mut run.out, self.common.out);
        set(&mut run.n_sensors, self.sensors);
        set(&mut run.duration_s, self.duration);
        set(&mut run.noise_rms_fraction, self.noise);
        Ok(run)
    }
}

impl TrainArgs {
    pub fn resolve(self) -> Result<TrainRun> {
        let mut run: TrainRun = load_config(self.common.config.as_deref())?;
        set(&mut run.seed, self.common.seed);
        set(&mut run.out, self.common.out);
        set(&mut run.records, self.records);
        set(&mut run.variant, self.variant);
        set(&mut run.mask, self.mask);
        set(&mut run.epochs, self.epochs);
        set(&mut run.activation, self.activation);
        set(&mut run.learning_rate, self.learning_rate);
        if self.ws.is_some() {
            run.ws = self.ws;
        }
        Ok(run)
    }
}

impl RecoverArgs {
    pub fn resolve(self) -> Result<RecoverRun> {
        let mut run: RecoverRun = load_config(self.common.config.as_deref())?;
        set(&mut run.seed, self.common.seed);
        set(&mut run.out, self.common.out);
        set(&mut run.records, self.records);
        set(&mut run.checkpoint, self.checkpoint);
        set(&mut run.windows, self.windows);
        if self.mask.is_some() {
            run.mask = self.mask;
        }
        Ok(run)
    }
}

impl ModalArgs {
    pub fn resolve(self) -> Result<ModalRun> {
        let mut run: ModalRun = load_config(self.common.config.as_deref())?;
        set(&mut run.out, self.common.out);
        set(&mut run.reference, self.reference);
        set(&mut run.recovered, self.recovered);
        set(&mut run.n_modes, self.modes);
        set(&mut run.segment_len, self.segment_len);
        Ok(run)
    }
}

impl GradcheckArgs {
    pub fn resolve(self) -> Result<GradcheckRun> {
        let mut run: GradcheckRun = load_config(self.common.config.as_deref())?;
        set(&mut run.seed, self.common.seed);
        set(&mut run.variant, self.variant);
        set(&mut run.eps, self.eps);
        set(&mut run.threshold, self.threshold);
        if self.common.out.is_some() {
            run.out = self.common.out;
        }
        Ok(run)
    }
}

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Generate(args) => {
            let run = args.resolve()?;
            let out = cmd_generate(&run)?;
            say!(
                "wrote {} samples x {} channels to {}",
                out.records.n_samples(),
                out.records.n_channels(),
                run.out.join(RECORDS_FILE).display()
            );
        }
        Command::Train(args) => {
            let run = args.resolve()?;
            let out = cmd_train_with(&run, |epoch, m| {
                if epoch == 1 || epoch % 50 == 0 || epoch == run.epochs {
                    eprintln!(
                        "epoch {epoch:>5}  train rmse {:.5}  val rmse {:.5}",
                        m.train_rmse, m.val_rmse
                    );
                }
            })?;
            say!(
                "validation rmse {:.5} (mean predictor {:.5}); checkpoint in {}",
                out.final_val_rmse(),
                out.mean_predictor_rmse,
                run.out.join(CHECKPOINT_FILE).display()
            );
        }
        Command::Recover(args) => {
            let run = args.resolve()?;
            let out = cmd_recover(&run)?;
            for e in &out.errors {
                let set = if e.validation { "validation" } else { "train" };
                say!(
                    "window {:>4} ({set}) sensor {}: max error {:.3}%",
                    e.window, e.sensor, e.max_error_pct
                );
            }
        }
        Command::Modal(args) => {
            let run = args.resolve()?;
            let report = cmd_modal(&run)?;
            say!("{}", report.to_csv().trim_end());
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Gradcheck(args) => {
            let run = args.resolve()?;
            let out = cmd_gradcheck(&run)?;
            for l in &out.report.layers {
                say!(
                    "layer {:>2} {:<7} checked {:>4}  skipped {:>3}  max relative error {:.3e}",
                    l.layer, l.kind, l.checked, l.skipped, l.max_relative_error
                );
            }
            let verdict = if out.passed { "PASS" } else { "FAIL" };
            say!(
                "{verdict}: max relative error {:.3e} (threshold {:.1e})",
                out.report.max_relative_error, run.threshold
            );
            if !out.passed {
                return Ok(EXIT_NUMERICAL);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.class())
        }
    }
}
