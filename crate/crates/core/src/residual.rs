//! The universal test currency: a named scalar measuring violation of one
//! identity at one sample point, together with the tolerance ledger.

use serde::{Deserialize, Serialize};

/// A named, tagged scalar measuring violation of one identity at one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub point: String,
    pub tolerance: f64,
    pub pass: bool,
}

impl Residual {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64, point: impl Into<String>) -> Self {
        let name = name.into();
        let point = point.into();
        Self {
            pass: value <= tolerance,
            name,
            value,
            point,
            tolerance,
        }
    }
}

/// Tolerance ledger: every residual class maps to exactly one configured
/// tolerance. No hard-coded tolerances outside this ledger.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Exact algebraic identities (structure tensors, groupoid axioms).
    pub machine: f64,
    /// Exact linear-algebra compositions (roundtrips, chart laws).
    pub tight: f64,
    /// Algebraic identities through a few matrix products.
    pub algebraic: f64,
    /// Identities evaluated with analytic derivatives.
    pub analytic: f64,
    /// Analytic vs finite-difference agreement of first derivatives.
    pub deriv: f64,
    /// Identities using finite-difference dressing fields.
    pub fd: f64,
    /// Nested finite differences (bracket of bracket).
    pub fd_coarse: f64,
    /// Calibration fits (chi scale, convention scalars).
    pub calibration: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            machine: 1e-12,
            tight: 1e-10,
            algebraic: 1e-9,
            analytic: 1e-8,
            deriv: 1e-7,
            fd: 1e-6,
            fd_coarse: 1e-5,
            calibration: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn class(&self, name: &str) -> f64 {
        match name {
            "machine" => self.machine,
            "tight" => self.tight,
            "algebraic" => self.algebraic,
            "analytic" => self.analytic,
            "deriv" => self.deriv,
            "fd" => self.fd,
            "fd_coarse" => self.fd_coarse,
            "calibration" => self.calibration,
            other => panic!("unknown tolerance class `{other}`"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_value_within_tolerance() {
        let r = Residual::new("x", 1e-9, 1e-8, "p");
        assert!(r.pass);
        let r = Residual::new("x", 1e-7, 1e-8, "p");
        assert!(!r.pass);
    }
}
