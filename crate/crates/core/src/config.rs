//! System parameters shared by the analysis, detection and simulation code.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All protocol and physical-layer parameters of one MRB-CRA system.
///
/// Field names match the keys of the on-disk config file exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SystemConfig {
    /// Spreading-code length (subcarriers per RB).
    pub L: usize,
    /// Spreading codes per RB.
    pub N: usize,
    /// Number of resource blocks.
    pub M: usize,
    /// Symbols per packet.
    pub T: usize,
    /// Recovery threshold: at most `D` devices per RB are recoverable.
    pub D: usize,
    /// Rate-control threshold; new arrivals to an RB are dropped in the slot
    /// after its load exceeded `Kbar`.
    pub Kbar: usize,
    /// New-arrival rate per RB per slot.
    pub lambda: f64,
    /// `P / N0` in dB with `P = 1`.
    pub snr_db: f64,
    /// Simulation horizon in slots.
    pub slots: usize,
    pub seed: u64,
}

impl Default for SystemConfig {
    /// `(L, M) = (32, 8)`, `eta = 10`, `D = 25`, `Kbar = 2L`, `T = 20L`, 20 dB.
    fn default() -> Self {
        Self {
            L: 32,
            N: 320,
            M: 8,
            T: 640,
            D: 25,
            Kbar: 64,
            lambda: 16.04,
            snr_db: 20.0,
            slots: 10_000,
            seed: 1,
        }
    }
}

impl SystemConfig {
    /// Virtual bandwidth expansion factor `N / L`.
    pub fn eta(&self) -> f64 {
        self.N as f64 / self.L as f64
    }

    /// Total number of subcarriers `L * M`.
    pub fn total_subcarriers(&self) -> usize {
        self.L * self.M
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Noise variance per complex entry with unit signal power.
    pub fn noise_var(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn validate(self) -> Result<Self> {
        validate_config(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        validate_config(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

/// Checks every structural constraint and hands the config back unchanged.
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig> {
    let fail = |msg: String| Err(Error::InvalidConfig(msg));
    if cfg.L == 0 {
        return fail("L must be positive".into());
    }
    if cfg.N < cfg.L {
        return fail(format!("N < L ({} < {}): eta must be at least 1", cfg.N, cfg.L));
    }
    if cfg.M == 0 {
        return fail("M must be positive".into());
    }
    if cfg.T == 0 {
        return fail("T must be positive".into());
    }
    if cfg.D == 0 {
        return fail("D must be at least 1".into());
    }
    if cfg.D >= cfg.L {
        return fail(format!("D >= L ({} >= {})", cfg.D, cfg.L));
    }
    if cfg.Kbar <= cfg.D {
        return fail(format!("Kbar <= D ({} <= {})", cfg.Kbar, cfg.D));
    }
    if !(cfg.lambda.is_finite() && cfg.lambda >= 0.0) {
        return fail(format!("lambda must be finite and nonnegative, got {}", cfg.lambda));
    }
    if !cfg.snr_db.is_finite() {
        return fail("snr_db must be finite".into());
    }
    if cfg.slots == 0 {
        return fail("slots must be positive".into());
    }
    if cfg.seed > i64::MAX as u64 {
        return fail(format!("seed {} does not fit a TOML integer (max {})", cfg.seed, i64::MAX));
    }
    Ok(cfg)
}
