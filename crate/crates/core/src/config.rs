//! Run configuration: the algebra, the r-matrix family parameters, sampling
//! controls, the tolerance ledger and the suite selection.

use crate::error::{Error, Result};
use crate::residual::Tolerances;
use serde::{Deserialize, Serialize};

pub const ALL_SUITES: [&str; 5] = ["liealg", "dynrmat", "pgroupoid", "bialgebroid", "doublegpd"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub series: String,
    pub rank: usize,
    /// Subset of simple-root positions.
    pub gamma: Vec<usize>,
    /// Shift vector; sampled from the seed when empty.
    pub mu: Vec<f64>,
    /// "zero" | "constant-random" | "linear-random"
    pub twoform: String,
    /// "dynamical" | "standard-constant" | "zero"
    pub r_mode: String,
    pub seed: u64,
    /// Samples per residual family.
    pub samples: usize,
    pub fd_step: f64,
    /// Size of the skew-breaking perturbation for negative-control runs.
    pub perturb_r: f64,
    pub tolerances: Tolerances,
    pub suites: Vec<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            series: "A".into(),
            rank: 1,
            gamma: vec![0],
            mu: vec![],
            twoform: "zero".into(),
            r_mode: "dynamical".into(),
            seed: 42,
            samples: 20,
            fd_step: 1e-5,
            perturb_r: 0.0,
            tolerances: Tolerances::default(),
            suites: ALL_SUITES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        if let Some(bad) = self.gamma.iter().find(|i| **i >= self.rank) {
            return Err(Error::InvalidConfig(format!(
                "gamma index {bad} out of range for rank {}",
                self.rank
            )));
        }
        if !self.mu.is_empty() && self.mu.len() != self.rank {
            return Err(Error::InvalidConfig(format!(
                "mu must have {} entries",
                self.rank
            )));
        }
        for t in [
            self.tolerances.machine,
            self.tolerances.tight,
            self.tolerances.algebraic,
            self.tolerances.analytic,
            self.tolerances.deriv,
            self.tolerances.fd,
            self.tolerances.fd_coarse,
            self.tolerances.calibration,
        ] {
            if t <= 0.0 {
                return Err(Error::InvalidConfig("tolerances must be positive".into()));
            }
        }
        match self.twoform.as_str() {
            "zero" | "constant-random" | "linear-random" => {}
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown twoform mode `{other}`"
                )))
            }
        }
        match self.r_mode.as_str() {
            "dynamical" | "standard-constant" | "zero" => {}
            other => {
                return Err(Error::InvalidConfig(format!("unknown r_mode `{other}`")))
            }
        }
        for s in &self.suites {
            if !ALL_SUITES.contains(&s.as_str()) {
                return Err(Error::InvalidConfig(format!("unknown suite `{s}`")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn parse_and_reject() {
        let cfg = Config::from_toml_str("rank = 2\ngamma = [0, 1]\nseed = 7\n").unwrap();
        assert_eq!(cfg.rank, 2);
        assert_eq!(cfg.seed, 7);
        assert!(Config::from_toml_str("rank = 1\ngamma = [3]\n").is_err());
        assert!(Config::from_toml_str("rank = 1\nsuites = [\"nope\"]\n").is_err());
        assert!(Config::from_toml_str("rank = 1\ntwoform = \"cubic\"\n").is_err());
    }
}
