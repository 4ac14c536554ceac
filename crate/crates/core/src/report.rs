//! Machine-readable experiment records.
//!
//! Every verification and solver run produces one [`ExperimentReport`]:
//! an echo of the parameters, sample/violation counts, and the measured
//! constants with uncertainty estimates. Serialization is deterministic
//! (sorted maps) so identical seeds give byte-identical artifacts.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::Result;

/// A measured quantity with an uncertainty estimate (bootstrap spread or
/// refinement delta, depending on how it was obtained).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: BTreeMap<String, f64>,
    pub samples: u64,
    pub violations: u64,
    pub measured: BTreeMap<String, Measured>,
    /// Whether every asserted invariant of the run held.
    pub passed: bool,
    /// True when the run's preconditions guarantee the asserted outcome;
    /// false marks exploratory runs outside the guaranteed regime.
    pub guaranteed: bool,
    pub notes: Vec<String>,
    pub seed: u64,
    pub elapsed_seconds: f64,
    pub code_version: String,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            parameters: BTreeMap::new(),
            samples: 0,
            violations: 0,
            measured: BTreeMap::new(),
            passed: true,
            guaranteed: true,
            notes: Vec::new(),
            seed,
            elapsed_seconds: 0.0,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub fn set_param(&mut self, key: &str, value: f64) {
        self.parameters.insert(key.to_string(), value);
    }

    pub fn set_measured(&mut self, key: &str, value: f64, uncertainty: f64) {
        self.measured.insert(key.to_string(), Measured { value, uncertainty });
    }

    pub fn measured(&self, key: &str) -> Option<f64> {
        self.measured.get(key).map(|m| m.value)
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn csv_header() -> &'static str {
        "experiment,samples,violations,passed,guaranteed,seed,quantity,value,uncertainty"
    }

    /// One row per measured constant (one summary row when none).
    pub fn to_csv_rows(&self) -> String {
        let base = format!(
            "{},{},{},{},{},{}",
            self.experiment, self.samples, self.violations, self.passed, self.guaranteed, self.seed
        );
        if self.measured.is_empty() {
            return format!("{base},,,\n");
        }
        let mut out = String::new();
        for (name, m) in &self.measured {
            out.push_str(&format!("{base},{name},{:.17e},{:.17e}\n", m.value, m.uncertainty));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "{}", Self::csv_header())?;
        f.write_all(self.to_csv_rows().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut r = ExperimentReport::new("demo", 7).with_param("eps", 0.5);
        r.samples = 100;
        r.set_measured("rate", 1.25, 0.01);
        let s = r.to_json().unwrap();
        let back: ExperimentReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back.experiment, "demo");
        assert_eq!(back.measured("rate"), Some(1.25));
    }

    #[test]
    fn csv_is_deterministic() {
        let mut r = ExperimentReport::new("demo", 7);
        r.set_measured("b", 2.0, 0.0);
        r.set_measured("a", 1.0, 0.0);
        assert_eq!(r.to_csv_rows(), r.clone().to_csv_rows());
        // sorted keys regardless of insertion order
        assert!(r.to_csv_rows().find(",a,").unwrap() < r.to_csv_rows().find(",b,").unwrap());
    }
}
