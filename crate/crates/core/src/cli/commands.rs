use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{GenerateRun, GradcheckRun, ModalRun, RecoverRun, TrainRun};
use crate::error::{Error, Result};
use crate::modal::{compare_identified, identify, ModalOptions, ModalReport, WelchConfig};
use crate::nn::{gradient_check, Activation, AdamConfig, Checkpoint, DropoutHandling, GradCheckOptions, GradCheckReport, Tensor};
use crate::recovery::{
    build_model, mean_predictor_rmse, predict_window, prepare_dataset, recover_record, train_with, ConvergenceLog,
    ModelKind, ModelOptions, TrainConfig,
};
use crate::seed::derive_seed;
use crate::signal::{
    denormalize, extract_windows, load_records, normalize_with, split_train_validation, MaskSpec, RecordMatrix,
    ScaleParams, WindowingConfig,
};
use crate::synth::{generate, GroundTruth, StructureSpec};

pub const RECORDS_FILE: &str = "records.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const RECOVERED_WINDOWS_FILE: &str = "recovered_windows.csv";
pub const WINDOW_ERRORS_FILE: &str = "window_errors.csv";
pub const RECOVERED_RECORDS_FILE: &str = "recovered_records.csv";
pub const MODAL_REPORT_FILE: &str = "modal_report.csv";
pub const SINGULAR_VALUES_FILE: &str = "singular_values.csv";
pub const GRADCHECK_FILE: &str = "gradcheck.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Effective configuration of a run plus the files it wrote.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub command: String,
    pub version: String,
    pub config: C,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

/// Training context stored alongside the weights so recovery can rebuild
/// the windows and undo the scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub variant: ModelKind,
    pub mask: Vec<usize>,
    pub stride: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub scale: ScaleParams,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<RecordMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_records(BufReader::new(file))
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    outputs: &[&str],
    summary: Option<serde_json::Value>,
) -> Result<PathBuf> {
    let manifest = Manifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        summary,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&path, &(text + "\n"))?;
    Ok(path)
}

pub struct GenerateOutcome {
    pub records: RecordMatrix,
    pub truth: GroundTruth,
}

pub fn cmd_generate(run: &GenerateRun) -> Result<GenerateOutcome> {
    let spec = StructureSpec {
        noise_rms_fraction: run.noise_rms_fraction,
        seed: run.seed,
        ..StructureSpec::beam(run.n_sensors, &run.frequencies, run.damping_ratio)?
    };
    let (records, truth) = generate(&spec, run.duration_s, run.fs)?;
    create_dir(&run.out)?;
    write_file(&run.out.join(RECORDS_FILE), &records.to_csv_string())?;
    write_file(&run.out.join(GROUND_TRUTH_FILE), &truth.to_json())?;
    write_manifest(&run.out, "generate", run, &[RECORDS_FILE, GROUND_TRUTH_FILE], None)?;
    Ok(GenerateOutcome { records, truth })
}

pub struct TrainOutcome {
    pub log: ConvergenceLog,
    pub checkpoint: Checkpoint,
    pub mean_predictor_rmse: f64,
}

impl TrainOutcome {
    pub fn final_val_rmse(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |m| m.val_rmse)
    }
}

pub fn cmd_train(run: &TrainRun) -> Result<TrainOutcome> {
    cmd_train_with(run, |_, _| {})
}

/// [`cmd_train`] with a per-epoch callback receiving the 1-based epoch.
pub fn cmd_train_with<F>(run: &TrainRun, mut on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(usize, &crate::recovery::EpochMetrics),
{
    let mask = MaskSpec::new(run.mask.clone())?;
    if mask.len() != run.variant.n_faulted() {
        return Err(Error::Config(format!(
            "variant {} predicts {} sensor(s) but the mask names {}",
            run.variant.name(),
            run.variant.n_faulted(),
            mask.len()
        )));
    }
    let opts = ModelOptions {
        activation: Activation::from_name(&run.activation)?,
        dropout_rate: run.dropout_rate,
        ..ModelOptions::default()
    };
    let cfg = TrainConfig {
        epochs: run.epochs,
        validation_fraction: run.validation_fraction,
        seed: run.seed,
        optimizer: AdamConfig {
            learning_rate: run.learning_rate,
            ..AdamConfig::default()
        },
    };
    cfg.validate()?;
    let records = read_records(&run.records)?;
    mask.check_channels(records.n_channels())?;
    let data = prepare_dataset(&records, &mask, run.stride(), run.validation_fraction, run.seed)?;
    let baseline = mean_predictor_rmse(&data.train, &data.validation, mask.len())?;
    let model = build_model(run.variant, records.n_channels(), &opts, derive_seed(run.seed, "init"))?;
    let (model, log) = train_with(model, &data.train, &data.validation, &cfg, &mut on_epoch)?;

    let mut checkpoint = Checkpoint::capture(&model, None);
    let metadata = ModelMetadata {
        variant: run.variant,
        mask: run.mask.clone(),
        stride: run.stride(),
        seed: run.seed,
        validation_fraction: run.validation_fraction,
        scale: data.normalized.scale().clone(),
    };
    checkpoint.metadata = Some(serde_json::to_value(&metadata).expect("metadata serializes"));

    create_dir(&run.out)?;
    write_file(&run.out.join(CHECKPOINT_FILE), &checkpoint.to_json())?;
    write_file(&run.out.join(CONVERGENCE_FILE), &log.to_csv())?;
    let mut effective = run.clone();
    effective.ws = Some(run.stride());
    let last = log.last().copied();
    let summary = serde_json::json!({
        "train_windows": data.train.len(),
        "validation_windows": data.validation.len(),
        "final": last,
        "mean_predictor_val_rmse": baseline,
    });
    write_manifest(&run.out, "train", &effective, &[CHECKPOINT_FILE, CONVERGENCE_FILE], Some(summary))?;
    Ok(TrainOutcome {
        log,
        checkpoint,
        mean_predictor_rmse: baseline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowError {
    pub window: usize,
    pub validation: bool,
    pub start: usize,
    pub sensor: usize,
    pub max_error_pct: f64,
}

pub struct RecoverOutcome {
    pub errors: Vec<WindowError>,
    pub recovered: RecordMatrix,
}

pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, ModelMetadata)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let checkpoint = Checkpoint::from_json(&text)?;
    let metadata = checkpoint
        .metadata
        .clone()
        .ok_or_else(|| Error::Checkpoint(format!("{} carries no recovery metadata", path.display())))?;
    let metadata: ModelMetadata =
        serde_json::from_value(metadata).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    Ok((checkpoint, metadata))
}

pub fn cmd_recover(run: &RecoverRun) -> Result<RecoverOutcome> {
    let (checkpoint, meta) = load_checkpoint(&run.checkpoint)?;
    let mask = MaskSpec::new(run.mask.clone().unwrap_or_else(|| meta.mask.clone()))?;
    let (model, _) = checkpoint.restore()?;
    let records = read_records(&run.records)?;
    mask.check_channels(records.n_channels())?;
    let norm = normalize_with(&records, &meta.scale)?;
    let windows = extract_windows(&norm, WindowingConfig::new(records.n_channels(), meta.stride)?, &mask)?;
    let (_, validation) =
        split_train_validation(&windows, 1.0 - meta.validation_fraction, derive_seed(meta.seed, "split"))?;

    let picks: Vec<usize> = if run.windows.is_empty() {
        let n = run.random_windows.min(windows.len());
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, "windows"));
        let mut v = sample(&mut rng, windows.len(), n).into_vec();
        v.sort_unstable();
        v
    } else {
        run.windows.clone()
    };

    let length = windows.length;
    let ns = records.n_channels();
    let mut errors = Vec::new();
    let mut series = String::from("window,set,sample,time_s,sensor,reference,recovered\n");
    for &w in &picks {
        if w >= windows.len() {
            return Err(Error::Index {
                index: w,
                limit: windows.len(),
            });
        }
        let start = windows.starts[w];
        let in_validation = validation.starts.contains(&start);
        let set = if in_validation { "validation" } else { "train" };
        let block = &norm.data()[start * ns..(start + length) * ns];
        let predicted = predict_window(&model, block, &mask)?;
        for (k, (pred, &j)) in predicted.iter().zip(mask.faulted()).enumerate() {
            let truth = &windows.targets[w][k * length..(k + 1) * length];
            errors.push(WindowError {
                window: w,
                validation: in_validation,
                start,
                sensor: j,
                max_error_pct: crate::recovery::max_window_error(pred, truth)?,
            });
            let physical = denormalize(pred, j, &meta.scale)?;
            for (t, value) in physical.iter().enumerate() {
                let sample = start + t;
                let _ = writeln!(
                    series,
                    "{w},{set},{sample},{},{j},{},{value}",
                    sample as f64 * records.dt(),
                    records.get(sample, j)
                );
            }
        }
    }
    let mut table = String::from("window,set,start,sensor,max_error_pct\n");
    for e in &errors {
        let set = if e.validation { "validation" } else { "train" };
        let _ = writeln!(table, "{},{set},{},{},{}", e.window, e.start, e.sensor, e.max_error_pct);
    }
    let recovered = recover_record(&model, &records, &meta.scale, &mask)?;

    create_dir(&run.out)?;
    write_file(&run.out.join(RECOVERED_WINDOWS_FILE), &series)?;
    write_file(&run.out.join(WINDOW_ERRORS_FILE), &table)?;
    write_file(&run.out.join(RECOVERED_RECORDS_FILE), &recovered.to_csv_string())?;
    let mut effective = run.clone();
    effective.mask = Some(mask.faulted().to_vec());
    effective.windows = picks;
    write_manifest(
        &run.out,
        "recover",
        &effective,
        &[RECOVERED_WINDOWS_FILE, WINDOW_ERRORS_FILE, RECOVERED_RECORDS_FILE],
        None,
    )?;
    Ok(RecoverOutcome { errors, recovered })
}

pub fn cmd_modal(run: &ModalRun) -> Result<ModalReport> {
    let reference = read_records(&run.reference)?;
    let recovered = read_records(&run.recovered)?;
    if reference.n_channels() != recovered.n_channels() {
        return Err(Error::Config(format!(
            "{} has {} channels but {} has {}",
            run.reference.display(),
            reference.n_channels(),
            run.recovered.display(),
            recovered.n_channels()
        )));
    }
    if reference.dt() != recovered.dt() {
        return Err(Error::Config(format!(
            "sampling intervals differ: {} vs {}",
            reference.dt(),
            recovered.dt()
        )));
    }
    let opts = ModalOptions {
        welch: WelchConfig {
            segment_len: run.segment_len,
            overlap_fraction: run.overlap_fraction,
        },
        n_modes: run.n_modes,
        min_prominence_db: run.min_prominence_db,
    };
    let r = identify(&reference, &opts)?;
    let c = identify(&recovered, &opts)?;
    let report = compare_identified(&r, &c)?;

    let mut curves = String::from("frequency_hz,sv1_reference,sv1_recovered\n");
    for ((f, a), b) in r.fdd.frequencies.iter().zip(r.fdd.first_curve()).zip(c.fdd.first_curve()) {
        let _ = writeln!(curves, "{f},{a},{b}");
    }
    create_dir(&run.out)?;
    write_file(&run.out.join(MODAL_REPORT_FILE), &report.to_csv())?;
    write_file(&run.out.join(SINGULAR_VALUES_FILE), &curves)?;
    let summary = (!report.warnings.is_empty()).then(|| serde_json::json!({ "warnings": report.warnings }));
    write_manifest(&run.out, "modal", run, &[MODAL_REPORT_FILE, SINGULAR_VALUES_FILE], summary)?;
    Ok(report)
}

pub struct GradcheckOutcome {
    pub report: GradCheckReport,
    pub passed: bool,
}

/// Checks a freshly built variant on a random window and target with
/// dropout masks frozen.
pub fn cmd_gradcheck(run: &GradcheckRun) -> Result<GradcheckOutcome> {
    let n = run.n_sensors;
    let mut net = build_model(run.variant, n, &ModelOptions::default(), derive_seed(run.seed, "init"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, "gradcheck"));
    let input = Tensor::new(vec![n, n, 1], (0..n * n).map(|_| rng.gen::<f64>()).collect())?;
    let target = Tensor::from_vec((0..net.output_len()).map(|_| rng.gen::<f64>()).collect());
    let report = gradient_check(
        &mut net,
        &input,
        &target,
        GradCheckOptions {
            eps: run.eps,
            samples_per_tensor: run.samples_per_tensor,
            seed: derive_seed(run.seed, "dropout"),
            dropout: DropoutHandling::FrozenMask,
            skip_kinks: run.skip_kinks,
        },
    )?;
    let passed = report.max_relative_error < run.threshold;
    if let Some(out) = &run.out {
        let mut table = String::from("layer,kind,checked,skipped,max_relative_error\n");
        for l in &report.layers {
            let _ = writeln!(table, "{},{},{},{},{}", l.layer, l.kind, l.checked, l.skipped, l.max_relative_error);
        }
        create_dir(out)?;
        write_file(&out.join(GRADCHECK_FILE), &table)?;
        let summary = serde_json::json!({ "max_relative_error": report.max_relative_error, "passed": passed });
        write_manifest(out, "gradcheck", run, &[GRADCHECK_FILE], Some(summary))?;
    }
    Ok(GradcheckOutcome { report, passed })
}
