//! Experiment configuration: a strict JSON document naming the input data,
//! the architecture and the training schedule.

use std::fs;
use std::path::{Path, PathBuf};

use hsifusion_core::optim::AdamConfig;
use hsifusion_core::{Architecture, LogitInit, Mode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable that replaces `paths.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "HSIFUSION_OUTPUT_DIR";

pub const DEFAULT_SCALE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Blind,
    Noblind,
    /// Band-wise bicubic upsampling of the LrHSI, no training.
    Baseline,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Blind => "blind",
            RunMode::Noblind => "noblind",
            RunMode::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "blind" => Ok(RunMode::Blind),
            "noblind" => Ok(RunMode::Noblind),
            "baseline" => Ok(RunMode::Baseline),
            _ => Err(format!("unknown mode {s:?} (expected blind, noblind or baseline)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogitInitName {
    #[default]
    Kaiming,
    Uniform,
}

impl From<LogitInitName> for LogitInit {
    fn from(v: LogitInitName) -> Self {
        match v {
            LogitInitName::Kaiming => LogitInit::Kaiming,
            LogitInitName::Uniform => LogitInit::Uniform,
        }
    }
}

/// Input and output locations. Either `gt` (simulated from ground truth,
/// needs `srf`) or the observed pair `lr_hsi` + `hr_msi` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_hsi: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hr_msi: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub srf: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psf: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamSection {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSection {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self { beta1: a.beta1, beta2: a.beta2, eps: a.eps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub pretrain_iters: usize,
    pub pretrain_lr: f64,
    pub warmup_iters: usize,
    pub anneal_iters: usize,
    pub max_lr: f64,
    pub use_cycle: bool,
    pub logit_init: LogitInitName,
    pub adam: AdamSection,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            pretrain_iters: t.pretrain_iters,
            pretrain_lr: t.pretrain_lr,
            warmup_iters: t.warmup_iters,
            anneal_iters: t.anneal_iters,
            max_lr: t.max_lr,
            use_cycle: t.use_cycle,
            logit_init: LogitInitName::Kaiming,
            adam: AdamSection::default(),
        }
    }
}

fn default_scale() -> usize {
    DEFAULT_SCALE
}

fn default_widths() -> Vec<usize> {
    Architecture::DEFAULT_WIDTHS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    #[serde(default = "default_scale")]
    pub scale: usize,
    /// Expected band counts; checked against the data when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hsi_bands: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msi_bands: Option<usize>,
    #[serde(default = "default_widths")]
    pub widths: Vec<usize>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.scale == 0 || !self.scale.is_power_of_two() {
            return bad(format!("scale {} is not a power of two", self.scale));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return bad("widths must be non-empty and all at least 1".into());
        }
        if let (Some(l), Some(big_l)) = (self.msi_bands, self.hsi_bands) {
            if l >= big_l {
                return bad(format!("msi_bands ({l}) must be below hsi_bands ({big_l})"));
            }
        }
        if self.msi_bands == Some(0) || self.hsi_bands == Some(0) {
            return bad("band counts must be positive".into());
        }
        if let Some(snr) = self.noise_snr_db {
            if !snr.is_finite() {
                return bad("noise_snr_db must be finite".into());
            }
        }
        let p = &self.paths;
        match (&p.gt, &p.lr_hsi, &p.hr_msi) {
            (Some(_), None, None) => {
                if p.srf.is_none() {
                    return bad("paths.srf is required to simulate from paths.gt".into());
                }
            }
            (_, Some(_), Some(_)) => {
                if self.noise_snr_db.is_some() {
                    return bad("noise_snr_db only applies when simulating from paths.gt".into());
                }
            }
            _ => return bad("give either paths.gt or both paths.lr_hsi and paths.hr_msi".into()),
        }
        self.train_config().validate().map_err(|e| match e {
            hsifusion_core::Error::Config(m) => Error::Config(m),
            other => other.into(),
        })
    }

    /// Core training settings for the configured mode and seed.
    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            pretrain_iters: t.pretrain_iters,
            pretrain_lr: t.pretrain_lr,
            warmup_iters: t.warmup_iters,
            anneal_iters: t.anneal_iters,
            max_lr: t.max_lr,
            seed: self.seed,
            mode: if self.mode == RunMode::Noblind { Mode::NonBlind } else { Mode::Blind },
            use_cycle: t.use_cycle,
            adam: AdamConfig { beta1: t.adam.beta1, beta2: t.adam.beta2, eps: t.adam.eps },
            logit_init: t.logit_init.into(),
        }
    }

    pub fn architecture(&self, hsi_bands: usize, msi_bands: usize) -> Result<Architecture> {
        if let Some(want) = self.hsi_bands.filter(|&b| b != hsi_bands) {
            return Err(Error::Config(format!("config expects {want} HSI bands, data has {hsi_bands}")));
        }
        if let Some(want) = self.msi_bands.filter(|&b| b != msi_bands) {
            return Err(Error::Config(format!("config expects {want} MSI bands, data has {msi_bands}")));
        }
        if msi_bands >= hsi_bands {
            return Err(Error::Config(format!("msi_bands ({msi_bands}) must be below hsi_bands ({hsi_bands})")));
        }
        Ok(Architecture::new(hsi_bands, msi_bands, self.scale, self.widths.clone())?)
    }

    /// Joins relative paths onto `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [&mut p.gt, &mut p.lr_hsi, &mut p.hr_msi, &mut p.srf, &mut p.psf].into_iter().flatten() {
            if slot.is_relative() {
                *slot = base.join(&*slot);
            }
        }
        if p.output_dir.is_relative() {
            p.output_dir = base.join(&p.output_dir);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Parses and validates a configuration document without touching the
/// filesystem or environment.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a configuration file. Relative paths are taken from the file's
/// directory, and `HSIFUSION_OUTPUT_DIR` replaces the output directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
        cfg.paths.output_dir = PathBuf::from(dir);
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"{"paths": {"gt": "x", "srf": "r.csv", "output_dir": "out"}}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config_str(MIN).unwrap();
        assert_eq!(cfg.scale, 32);
        assert_eq!(cfg.widths, vec![32, 64, 128, 128, 128]);
        assert_eq!(cfg.train_config(), TrainConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = r#"{"paths": {"gt": "x", "srf": "r", "output_dir": "o"}, "sclae": 8}"#;
        let err = parse_config_str(text).unwrap_err().to_string();
        assert!(err.contains("sclae"), "{err}");
        let text = r#"{"paths": {"gt": "x", "srf": "r", "output_dir": "o"}, "train": {"maxlr": 1}}"#;
        assert!(parse_config_str(text).unwrap_err().to_string().contains("maxlr"));
    }

    #[test]
    fn non_power_of_two_scale_rejected() {
        let text = r#"{"paths": {"gt": "x", "srf": "r", "output_dir": "o"}, "scale": 12}"#;
        assert!(matches!(parse_config_str(text), Err(Error::Config(_))));
    }

    #[test]
    fn paths_must_name_a_source() {
        assert!(parse_config_str(r#"{"paths": {"output_dir": "o"}}"#).is_err());
        assert!(parse_config_str(r#"{"paths": {"gt": "x", "output_dir": "o"}}"#).is_err());
        assert!(parse_config_str(r#"{"paths": {"lr_hsi": "y", "hr_msi": "z", "output_dir": "o"}}"#).is_ok());
        assert!(parse_config_str(r#"{}"#).is_err());
    }
}
