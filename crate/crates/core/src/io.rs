//! CSV and JSON artifact writers shared by the command-line driver.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }

    /// Row whose cells are already formatted (labels, integers).
    pub fn raw_row(&mut self, cells: &[String]) -> Result<()> {
        debug_assert_eq!(cells.len(), self.columns);
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run record written next to every set of artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Canonical configuration text; feeding it back reproduces the run.
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub epsilon: f64,
    pub wall_seconds: f64,
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub summary: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(subcommand: &str, config: String, seed: u64, epsilon: f64) -> Self {
        Self {
            tool: "bohmchaos".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            seed,
            epsilon,
            wall_seconds: 0.0,
            artifacts: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}
