//! Artifact directory: every file written is recorded for the manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bohmchaos::grid::{write_grid_csv, write_pgm, Grid, PgmEncoding};
use bohmchaos::io::CsvWriter;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;

pub struct Outputs {
    dir: PathBuf,
    pub artifacts: Vec<String>,
    pub summary: BTreeMap<String, Value>,
}

impl Outputs {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            summary: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Opens `name` (relative, may contain subdirectories) for writing.
    pub fn file(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn csv(&mut self, name: &str, header: &[&str]) -> CliResult<CsvWriter<BufWriter<File>>> {
        let f = self.file(name)?;
        Ok(CsvWriter::new(f, header)?)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    /// `<stem>.pgm`, `<stem>.pgm.json` sidecar and `<stem>.csv` raw values.
    pub fn heatmap(&mut self, stem: &str, grid: &Grid<f64>, encoding: PgmEncoding) -> CliResult<()> {
        let mut f = self.file(&format!("{stem}.pgm"))?;
        let sidecar = write_pgm(grid, encoding, &mut f)?;
        f.flush()?;
        self.json(&format!("{stem}.pgm.json"), &sidecar)?;
        let mut c = self.file(&format!("{stem}.csv"))?;
        write_grid_csv(grid, &mut c)?;
        c.flush()?;
        Ok(())
    }

    pub fn note<T: Serialize>(&mut self, key: &str, value: T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), v);
    }
}

/// Finite values as JSON numbers, anything else as null.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
