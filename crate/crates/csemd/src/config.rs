//! Pipeline settings: defaults, then a TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use csemd_core::framing::{WindowConfig, WindowKind};
use csemd_core::recovery::{Epsilon, RecoveryConfig};
use csemd_core::sensing::{SensingFamily, DEFAULT_SPARSE_DENSITY};
use serde::{Deserialize, Serialize};

use crate::error::read_file;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Gaussian,
    Bernoulli,
    SparseGaussian,
    Srm,
}

impl MatrixKind {
    pub fn family(self) -> SensingFamily {
        match self {
            MatrixKind::Gaussian => SensingFamily::Gaussian,
            MatrixKind::Bernoulli => SensingFamily::Bernoulli,
            MatrixKind::SparseGaussian => SensingFamily::SparseGaussian,
            MatrixKind::Srm => SensingFamily::Srm,
        }
    }
}

/// What to do when a level has fewer IMF columns than its atom budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomBudget {
    /// Shrink the level's budget to the columns available.
    Fit,
    /// Fail, naming the level.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonRule {
    /// `ε = epsilon · ‖y‖₂` per column.
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Expected input rate; `None` accepts whatever the WAV header says.
    pub sample_rate: Option<u32>,
    pub frame_len_ms: f64,
    pub overlap: f64,
    /// `m / n`.
    pub compression_ratio: f64,
    pub matrix: MatrixKind,
    pub sparse_density: f64,
    pub seed: u64,
    /// `J`.
    pub imfs: usize,
    /// `N_e`.
    pub ensemble: usize,
    pub noise_std: f64,
    pub max_sift_iters: usize,
    pub sd_threshold: f64,
    /// `K_1..K_J`.
    pub atoms: Vec<usize>,
    pub atom_budget: AtomBudget,
    pub kmeans_iters: usize,
    pub epsilon: f64,
    pub epsilon_rule: EpsilonRule,
    /// Newton step cap per column.
    pub max_iters: usize,
    /// Relative duality-gap tolerance.
    pub tol: f64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate: None,
            frame_len_ms: 50.0,
            overlap: 0.5,
            compression_ratio: 0.5,
            matrix: MatrixKind::Gaussian,
            sparse_density: DEFAULT_SPARSE_DENSITY,
            seed: 0,
            imfs: 5,
            ensemble: 50,
            noise_std: 0.2,
            max_sift_iters: 10,
            sd_threshold: 0.2,
            atoms: vec![140, 140, 110, 110, 100],
            atom_budget: AtomBudget::Fit,
            kmeans_iters: 100,
            epsilon: 1e-3,
            epsilon_rule: EpsilonRule::Relative,
            max_iters: 500,
            tol: 1e-6,
            threads: 0,
            out: PathBuf::from("out"),
        }
    }
}

/// Flags shared by every subcommand. Anything given here beats the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file with pipeline settings
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// m / n
    #[arg(long, value_name = "F")]
    pub compression_ratio: Option<f64>,
    #[arg(long, value_enum)]
    pub matrix: Option<MatrixKind>,
    /// Number of IMF levels J
    #[arg(long, value_name = "J")]
    pub imfs: Option<usize>,
    /// EEMD ensemble size
    #[arg(long, value_name = "N")]
    pub ensemble: Option<usize>,
    /// Atoms per level
    #[arg(long, value_name = "K1,K2,...", value_delimiter = ',')]
    pub atoms: Option<Vec<usize>>,
    /// Residual bound (relative to ‖y‖ unless the config says absolute)
    #[arg(long, value_name = "F")]
    pub epsilon: Option<f64>,
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Artifact directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().replace('\n', " "))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::format(path, e.to_string()))?;
        Self::from_toml(&text).map_err(|r| Error::format(path, r))
    }

    /// Defaults, then `--config`, then the individual flags.
    pub fn resolve(flags: &Overrides) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        let o = flags.clone();
        cfg.seed = o.seed.unwrap_or(cfg.seed);
        cfg.compression_ratio = o.compression_ratio.unwrap_or(cfg.compression_ratio);
        cfg.matrix = o.matrix.unwrap_or(cfg.matrix);
        cfg.imfs = o.imfs.unwrap_or(cfg.imfs);
        cfg.ensemble = o.ensemble.unwrap_or(cfg.ensemble);
        cfg.atoms = o.atoms.unwrap_or(cfg.atoms);
        cfg.epsilon = o.epsilon.unwrap_or(cfg.epsilon);
        cfg.threads = o.threads.unwrap_or(cfg.threads);
        cfg.out = o.out.unwrap_or(cfg.out);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.compression_ratio > 0.0 && self.compression_ratio <= 1.0) {
            return bad(format!("compression_ratio {} outside (0, 1]", self.compression_ratio));
        }
        if self.imfs == 0 {
            return bad("imfs must be at least 1".into());
        }
        if self.atoms.len() != self.imfs {
            return bad(format!("atoms lists {} levels but imfs is {}", self.atoms.len(), self.imfs));
        }
        if let Some(q) = self.atoms.iter().position(|&k| k == 0) {
            return bad(format!("level {} has a zero atom budget", q + 1));
        }
        if self.ensemble == 0 {
            return bad("ensemble must be at least 1".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon {} must be finite and ≥ 0", self.epsilon));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad(format!("tol {} must be positive", self.tol));
        }
        self.window().validate()?;
        Ok(())
    }

    pub fn window(&self) -> WindowConfig {
        WindowConfig { frame_len_ms: self.frame_len_ms, overlap_fraction: self.overlap, window: WindowKind::Hann }
    }

    /// `m = round(ratio · n)`.
    pub fn measurements_for(&self, n: usize) -> Result<usize> {
        let m = (self.compression_ratio * n as f64).round() as usize;
        if m == 0 || m > n {
            return Err(Error::Config(format!("compression ratio {} gives m = {m} for n = {n}", self.compression_ratio)));
        }
        Ok(m)
    }

    pub fn recovery(&self) -> RecoveryConfig {
        let epsilon = match self.epsilon_rule {
            EpsilonRule::Relative => Epsilon::Relative(self.epsilon),
            EpsilonRule::Absolute => Epsilon::Absolute(self.epsilon),
        };
        RecoveryConfig { epsilon, max_iters: self.max_iters, tol: self.tol }
    }
}
