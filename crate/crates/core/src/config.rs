//! Pipeline configuration: a flat `key = value` text format, plus the keys
//! file the three roles share pieces of.
//!
//! Recognized config keys (defaults in parentheses):
//!
//! ```text
//! N = 256          signal dimension
//! L = 2            block length; CR = 1/L, M = N/L measurements
//! m = 64           MAC tag bits, must stay below M
//! n = 128          access password bits, divides N
//! f = 16           scale-diagonal magnitude levels
//! tau = 0.125      BER acceptance threshold
//! solver = omp     omp | bpdn
//! K = 8            sparsity budget (omp)
//! epsilon = auto   residual stop; auto = 1e-6 * ||y||
//! lambda = 0.1     l1 weight (bpdn)
//! max_iters = 500  iteration cap (bpdn)
//! tol = 1e-8       relative objective tolerance (bpdn)
//! seed = 1         master seed for evaluation harnesses
//! test_mode = false  permit n < 128 for hand-checkable runs
//! ```
//!
//! Unknown or duplicated keys are errors; every divisibility and bound
//! constraint from the matrix builders is validated at load.

use std::collections::BTreeSet;
use std::path::Path;

use crate::encoder::{ApPolicy, AP_MIN_BITS};
use crate::error::{CsError, Result};
use crate::keys::{Key, SecretKeys};
use crate::solver::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    Omp,
    Bpdn,
}

impl SolverChoice {
    pub fn tag(&self) -> u8 {
        match self {
            SolverChoice::Omp => 0,
            SolverChoice::Bpdn => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub dim: usize,
    pub block_len: usize,
    pub mac_bits: usize,
    pub ap_bits: usize,
    pub scale_levels: usize,
    pub tau: f64,
    pub solver: SolverChoice,
    pub sparsity: usize,
    pub epsilon: Option<f64>,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub test_mode: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dim: 256,
            block_len: 2,
            mac_bits: 64,
            ap_bits: 128,
            scale_levels: 16,
            tau: 0.125,
            solver: SolverChoice::Omp,
            sparsity: 8,
            epsilon: None,
            lambda: 0.1,
            max_iters: 500,
            tol: 1e-8,
            seed: 1,
            test_mode: false,
        }
    }
}

impl PipelineConfig {
    pub fn measurements(&self) -> usize {
        self.dim / self.block_len
    }

    pub fn compression_ratio(&self) -> f64 {
        1.0 / self.block_len as f64
    }

    pub fn ap_policy(&self) -> ApPolicy {
        if self.test_mode {
            ApPolicy::Test
        } else {
            ApPolicy::Production
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        match self.solver {
            SolverChoice::Omp => SolverConfig::Omp {
                sparsity: self.sparsity,
                epsilon: self.epsilon,
            },
            SolverChoice::Bpdn => SolverConfig::Bpdn {
                lambda: self.lambda,
                max_iters: self.max_iters,
                tol: self.tol,
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CsError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(CsError::Config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
            match key {
                "N" => cfg.dim = parse_num(key, value)?,
                "L" => cfg.block_len = parse_num(key, value)?,
                "m" => cfg.mac_bits = parse_num(key, value)?,
                "n" => cfg.ap_bits = parse_num(key, value)?,
                "f" => cfg.scale_levels = parse_num(key, value)?,
                "tau" => cfg.tau = parse_float(key, value)?,
                "solver" => {
                    cfg.solver = match value {
                        "omp" => SolverChoice::Omp,
                        "bpdn" => SolverChoice::Bpdn,
                        other => {
                            return Err(CsError::Config(format!(
                                "solver must be omp or bpdn, got {other:?}"
                            )));
                        }
                    }
                }
                "K" => cfg.sparsity = parse_num(key, value)?,
                "epsilon" => {
                    cfg.epsilon = if value == "auto" {
                        None
                    } else {
                        Some(parse_float(key, value)?)
                    }
                }
                "lambda" => cfg.lambda = parse_float(key, value)?,
                "max_iters" => cfg.max_iters = parse_num(key, value)?,
                "tol" => cfg.tol = parse_float(key, value)?,
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| {
                        CsError::Config(format!("seed must be a u64, got {value:?}"))
                    })?
                }
                "test_mode" => {
                    cfg.test_mode = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(CsError::Config(format!(
                                "test_mode must be true or false, got {other:?}"
                            )));
                        }
                    }
                }
                other => {
                    return Err(CsError::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(CsError::Config(format!("N must be >= 2, got {}", self.dim)));
        }
        if self.block_len == 0 || !self.dim.is_multiple_of(self.block_len) {
            return Err(CsError::Config(format!(
                "L = {} must divide N = {}",
                self.block_len, self.dim
            )));
        }
        let m_rows = self.measurements();
        if self.mac_bits == 0 || self.mac_bits >= m_rows {
            return Err(CsError::Config(format!(
                "m = {} must satisfy 1 <= m < N/L = {m_rows}",
                self.mac_bits
            )));
        }
        if self.ap_bits == 0 || !self.dim.is_multiple_of(self.ap_bits) {
            return Err(CsError::Config(format!(
                "n = {} must divide N = {}",
                self.ap_bits, self.dim
            )));
        }
        if !self.ap_bits.is_multiple_of(4) {
            return Err(CsError::Config(format!(
                "n = {} must be a multiple of 4 for hex rendering",
                self.ap_bits
            )));
        }
        if !self.test_mode && self.ap_bits < AP_MIN_BITS {
            return Err(CsError::Config(format!(
                "n = {} below the {AP_MIN_BITS}-bit floor (set test_mode = true to permit)",
                self.ap_bits
            )));
        }
        if self.scale_levels < 2 {
            return Err(CsError::Config(format!(
                "f must be >= 2, got {}",
                self.scale_levels
            )));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(CsError::Config(format!(
                "tau must lie in [0, 1], got {}",
                self.tau
            )));
        }
        if self.sparsity == 0 || self.sparsity > m_rows {
            return Err(CsError::Config(format!(
                "K = {} must satisfy 1 <= K <= N/L = {m_rows}",
                self.sparsity
            )));
        }
        if let Some(eps) = self.epsilon {
            if eps.is_nan() || eps < 0.0 {
                return Err(CsError::Config(format!("epsilon must be >= 0, got {eps}")));
            }
        }
        if self.lambda <= 0.0 {
            return Err(CsError::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(CsError::Config("max_iters must be >= 1".into()));
        }
        if self.tol <= 0.0 {
            return Err(CsError::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

fn parse_num(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| CsError::Config(format!("{key} must be a positive integer, got {value:?}")))
}

fn parse_float(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| CsError::Config(format!("{key} must be a number, got {value:?}")))
}

/// A keys file: hex-encoded `k1`, `k2`, `k3` lines, each optional so that a
/// role receives only what it is entitled to.
#[derive(Clone, Debug, Default)]
pub struct KeyFile {
    pub k1: Option<Key>,
    pub k2: Option<Key>,
    pub k3: Option<Key>,
}

impl KeyFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kf = KeyFile::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CsError::Config(format!("line {}: expected `k? = hex`", lineno + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CsError::Config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
            let parsed = Key::from_hex(value.trim())?;
            match key {
                "k1" => kf.k1 = Some(parsed),
                "k2" => kf.k2 = Some(parsed),
                "k3" => kf.k3 = Some(parsed),
                other => {
                    return Err(CsError::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )));
                }
            }
        }
        Ok(kf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn require_k1(&self) -> Result<Key> {
        self.k1
            .ok_or_else(|| CsError::Config("keys file is missing k1".into()))
    }

    pub fn require_k2(&self) -> Result<Key> {
        self.k2
            .ok_or_else(|| CsError::Config("keys file is missing k2".into()))
    }

    pub fn require_k3(&self) -> Result<Key> {
        self.k3
            .ok_or_else(|| CsError::Config("keys file is missing k3".into()))
    }

    pub fn require_all(&self) -> Result<SecretKeys> {
        Ok(SecretKeys::new(
            self.require_k1()?,
            self.require_k2()?,
            self.require_k3()?,
        ))
    }
}
