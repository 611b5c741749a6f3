//! The `hsifusion` commands. Each returns a [`CmdError`] carrying the
//! process exit code: 2 for usage and configuration problems, 3 for data
//! and shape problems, 4 for numerical divergence.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hsifusion_core::baseline::bicubic_upsample;
use hsifusion_core::trainer::{run_fusion_with, HistoryRecord};
use hsifusion_core::{evaluate, simulate_pair, Error as CoreError, HsiCube, PsfKernel, SrfMatrix};
use log::info;
use serde_json::json;

use crate::checkpoint::save_checkpoint;
use crate::config::{parse_config, ExperimentConfig, RunMode};
use crate::csv_io::{load_psf_csv, load_srf_csv, save_psf_csv, save_srf_csv};
use crate::cube_io::{load_cube, save_cube};
use crate::error::Error;
use crate::history::write_history_csv;
use crate::manifest::RunManifest;
use crate::report::{metrics_table, plot_rmse, read_report, report_labels, rmse_table, summary_line, write_report};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

pub const LR_HSI: &str = "lr_hsi";
pub const HR_MSI: &str = "hr_msi";
pub const FUSED: &str = "fused";
pub const CHECKPOINT_FILE: &str = "checkpoint.hsfc";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "hsifusion", version, about = "Unsupervised hyperspectral/multispectral image fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Degrade a ground-truth cube into an LrHSI/HrMSI pair.
    Simulate(SimulateArgs),
    /// Fuse an observed pair as described by a config file.
    Run(RunArgs),
    /// Compare an estimate against ground truth.
    Evaluate(EvaluateArgs),
    /// Tabulate and plot one or more metrics reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub srf: PathBuf,
    #[arg(long)]
    pub scale: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Kernel table; defaults to block averaging.
    #[arg(long)]
    pub psf: Option<PathBuf>,
    #[arg(long = "noise-snr")]
    pub noise_snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub mode: Option<RunMode>,
    #[arg(long = "no-cycle")]
    pub no_cycle: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub psf: Option<PathBuf>,
    #[arg(long)]
    pub srf: Option<PathBuf>,
    /// Log every this many iterations (0 disables progress logging).
    #[arg(long, default_value_t = 500)]
    pub log_every: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long)]
    pub scale: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmdError {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (exit {})", self.message, self.code)
    }
}

impl std::error::Error for CmdError {}

pub type CmdResult<T = ()> = std::result::Result<T, CmdError>;

/// Exit code for an error; `shape_code` decides how shape mismatches are
/// classified by the calling command.
pub fn exit_code(err: &Error, shape_code: u8) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Core(c) => match c {
            CoreError::Config(_) | CoreError::Mode(_) | CoreError::Argument(_) => EXIT_CONFIG,
            CoreError::Divergence { .. } => EXIT_DIVERGENCE,
            CoreError::Shape(_) => shape_code,
            _ => EXIT_DATA,
        },
        Error::Io { .. } | Error::Format { .. } | Error::Integrity { .. } => EXIT_DATA,
    }
}

fn fail(shape_code: u8) -> impl Fn(Error) -> CmdError {
    move |e| {
        let message = match &e {
            Error::Core(CoreError::Divergence { phase, last_finite, .. }) => match last_finite {
                Some(last) => format!("{e}; last finite {phase} iteration was {last}"),
                None => format!("{e}; no {phase} iteration was finite"),
            },
            _ => e.to_string(),
        };
        CmdError { code: exit_code(&e, shape_code), message }
    }
}

fn config_error(message: impl Into<String>) -> CmdError {
    CmdError { code: EXIT_CONFIG, message: message.into() }
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| config_error(format!("output directory {} is not writable: {e}", dir.display())))
}

pub fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Run(a) => cmd_run(a).map(|_| ()),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| ()),
        Command::Report(a) => cmd_report(a),
    }
}

fn check_scale(scale: usize) -> CmdResult {
    if scale == 0 || !scale.is_power_of_two() {
        return Err(config_error(format!("scale {scale} is not a power of two")));
    }
    Ok(())
}

fn kernel_for(psf: Option<&Path>, scale: usize) -> Result<PsfKernel, Error> {
    let k = match psf {
        Some(p) => load_psf_csv(p)?,
        None => PsfKernel::block_average(scale)?,
    };
    if k.scale() != scale {
        return Err(Error::Config(format!("kernel is {0}x{0} but scale is {scale}", k.scale())));
    }
    Ok(k)
}

pub fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let f = fail(EXIT_CONFIG);
    check_scale(a.scale)?;
    let mut manifest = RunManifest::begin(
        "simulate",
        a.seed,
        json!({
            "gt": a.gt, "srf": a.srf, "psf": a.psf, "scale": a.scale,
            "noise_snr_db": a.noise_snr, "seed": a.seed,
        }),
    );
    let x = load_cube(&a.gt).map_err(&f)?;
    let r = load_srf_csv(&a.srf).map_err(&f)?;
    let k = kernel_for(a.psf.as_deref(), a.scale).map_err(&f)?;
    let (y, z) = simulate_pair(&x, &k, &r, a.noise_snr, a.seed).map_err(|e| f(e.into()))?;
    create_dir(&a.out)?;
    save_cube(&y.with_name(LR_HSI), &a.out.join(LR_HSI)).map_err(&f)?;
    save_cube(&z.with_name(HR_MSI), &a.out.join(HR_MSI)).map_err(&f)?;
    save_psf_csv(&k, &a.out.join("psf.csv")).map_err(&f)?;
    save_srf_csv(&r, &a.out.join("srf.csv")).map_err(&f)?;
    manifest.artifacts = ["lr_hsi.hsc.json", "lr_hsi.hsc.bin", "hr_msi.hsc.json", "hr_msi.hsc.bin", "psf.csv", "srf.csv"]
        .map(String::from)
        .to_vec();
    manifest.finish(&a.out).map_err(&f)
}

/// Observed pair plus whatever is known about its degradation.
struct Inputs {
    y: HsiCube,
    z: HsiCube,
    gt: Option<HsiCube>,
    psf: Option<PsfKernel>,
    srf: Option<SrfMatrix>,
}

fn load_inputs(cfg: &ExperimentConfig) -> Result<Inputs, Error> {
    let p = &cfg.paths;
    if let Some(gt_path) = &p.gt {
        let x = load_cube(gt_path)?;
        let srf_path = p.srf.as_ref().ok_or_else(|| Error::Config("paths.srf is required with paths.gt".into()))?;
        let r = load_srf_csv(srf_path)?;
        let k = kernel_for(p.psf.as_deref(), cfg.scale)?;
        let (y, z) = simulate_pair(&x, &k, &r, cfg.noise_snr_db, cfg.seed)?;
        return Ok(Inputs { y, z, gt: Some(x), psf: Some(k), srf: Some(r) });
    }
    let (yp, zp) = match (&p.lr_hsi, &p.hr_msi) {
        (Some(y), Some(z)) => (y, z),
        _ => return Err(Error::Config("paths.lr_hsi and paths.hr_msi are required".into())),
    };
    let psf = p.psf.as_deref().map(|k| kernel_for(Some(k), cfg.scale)).transpose()?;
    let srf = p.srf.as_deref().map(load_srf_csv).transpose()?;
    Ok(Inputs { y: load_cube(yp)?, z: load_cube(zp)?, gt: None, psf, srf })
}

/// Runs fusion and returns the output directory.
pub fn cmd_run(a: &RunArgs) -> CmdResult<PathBuf> {
    let f = fail(EXIT_DATA);
    let mut cfg = parse_config(&a.config).map_err(&f)?;
    if let Some(mode) = a.mode {
        cfg.mode = mode;
    }
    if a.no_cycle {
        cfg.train.use_cycle = false;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(psf) = &a.psf {
        cfg.paths.psf = Some(psf.clone());
    }
    if let Some(srf) = &a.srf {
        cfg.paths.srf = Some(srf.clone());
    }
    cfg.validate().map_err(&f)?;
    let config_json: serde_json::Value = serde_json::from_str(&cfg.to_json()).expect("config round-trips");
    let mut manifest = RunManifest::begin("run", cfg.seed, config_json);
    let inputs = load_inputs(&cfg).map_err(&f)?;
    let out = cfg.paths.output_dir.clone();
    create_dir(&out)?;
    let mut artifacts: Vec<&str> = vec!["fused.hsc.json", "fused.hsc.bin"];

    let fused = if cfg.mode == RunMode::Baseline {
        bicubic_upsample(&inputs.y, cfg.scale).map_err(|e| f(e.into()))?.with_name(FUSED)
    } else {
        let arch = cfg.architecture(inputs.y.bands(), inputs.z.bands()).map_err(&f)?;
        let train = cfg.train_config();
        let known = match (&inputs.psf, &inputs.srf) {
            (Some(k), Some(r)) => Some((k, r)),
            _ => None,
        };
        if cfg.mode == RunMode::Noblind && known.is_none() {
            return Err(config_error("noblind mode needs both a PSF and an SRF (config paths or --psf/--srf)"));
        }
        let every = a.log_every;
        let mut progress = |r: &HistoryRecord| {
            if every > 0 && r.iter.is_multiple_of(every) {
                info!("{} iter {:>6}  lr {:.3e}  loss {:.6}", r.phase.as_str(), r.iter, r.lr, r.total);
            }
        };
        let result = run_fusion_with(&inputs.y, &inputs.z, &train, &arch, known, &mut progress);
        let output = result.map_err(|e| f(e.into()))?;
        save_checkpoint(&output.params, cfg.seed, cfg.mode.as_str(), &out.join(CHECKPOINT_FILE)).map_err(&f)?;
        write_history_csv(&output.history, &out.join(HISTORY_FILE)).map_err(&f)?;
        artifacts.extend([CHECKPOINT_FILE, HISTORY_FILE]);
        output.fused
    };
    save_cube(&fused, &out.join(FUSED)).map_err(&f)?;
    if let Some(gt) = &inputs.gt {
        let report = evaluate(gt, &fused, cfg.scale).map_err(|e| f(e.into()))?;
        write_report(&report, gt.wavelengths_nm(), &out.join(REPORT_FILE)).map_err(&f)?;
        info!("{}", summary_line(&report));
        artifacts.push(REPORT_FILE);
    }
    manifest.artifacts = artifacts.into_iter().map(String::from).collect();
    manifest.finish(&out).map_err(&f)?;
    Ok(out)
}

/// Writes the report and returns its summary line, which is also printed.
pub fn cmd_evaluate(a: &EvaluateArgs) -> CmdResult<String> {
    let f = fail(EXIT_CONFIG);
    if a.scale == 0 {
        return Err(config_error("scale must be positive"));
    }
    let gt = load_cube(&a.gt).map_err(&f)?;
    let est = load_cube(&a.est).map_err(&f)?;
    let report = evaluate(&gt, &est, a.scale).map_err(|e| f(e.into()))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_report(&report, gt.wavelengths_nm(), &a.out).map_err(&f)?;
    let line = summary_line(&report);
    println!("{line}");
    Ok(line)
}

pub fn cmd_report(a: &ReportArgs) -> CmdResult {
    let f = fail(EXIT_CONFIG);
    let reports = a.reports.iter().map(|p| read_report(p)).collect::<Result<Vec<_>, _>>().map_err(&f)?;
    let labels = report_labels(&a.reports);
    let table = rmse_table(&labels, &reports).map_err(&f)?;
    create_dir(&a.out)?;
    let write = |name: &str, text: String| {
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| f(Error::Io { path, source: e }))
    };
    write("rmse_per_band.csv", table)?;
    write("metrics.csv", metrics_table(&labels, &reports))?;
    plot_rmse(&reports, &a.out.join("rmse_per_band.png")).map_err(&f)?;
    let mut manifest = RunManifest::begin("report", 0, json!({ "reports": a.reports }));
    manifest.artifacts = ["rmse_per_band.csv", "metrics.csv", "rmse_per_band.png"].map(String::from).to_vec();
    manifest.finish(&a.out).map_err(&f)
}
