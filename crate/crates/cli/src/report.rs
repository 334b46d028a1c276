//! Output writers and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{Format, RunConfig};

/// Serialized writer for one run's output directory. Records every file it writes.
pub struct OutputDir {
    root: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output_dir)
            .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;
        Ok(OutputDir {
            root: cfg.output_dir.clone(),
            format: cfg.format,
            written: Vec::new(),
        })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    /// Opens `rel` (relative to the root) for writing, creating parent directories.
    pub fn open(&mut self, rel: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(rel.to_string());
        Ok(BufWriter::new(f))
    }

    /// Writes `rows` to `stem.csv` or `stem.json` depending on the configured format.
    pub fn rows<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(self.open(&format!("{stem}.csv"))?);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            Format::Json => self.json(&format!("{stem}.json"), rows)?,
        }
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut w = self.open(rel)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Applies `f` to a freshly opened `rel` and flushes it.
    pub fn with<F>(&mut self, rel: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let mut w = self.open(rel)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn finish(self, cfg: &RunConfig, command: &str, files: Vec<FileRecord>) -> Result<()> {
        let manifest = Manifest {
            command: command.to_string(),
            generated_at: chrono::Utc::now().to_rfc3339(),
            config_sha256: cfg.sha256(),
            config: cfg.settings.clone(),
            inputs: files.iter().map(|f| f.path.clone()).collect(),
            files,
            outputs: self.written.clone(),
        };
        let path = self.root.join("manifest.json");
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FileRecord {
    pub fn new(path: &Path, status: Status, detail: Option<String>) -> Self {
        FileRecord {
            path: path.display().to_string(),
            status,
            detail,
            warnings: Vec::new(),
        }
    }
}

/// Run metadata. The only place a wall-clock timestamp is written.
#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    generated_at: String,
    config_sha256: String,
    config: BTreeMap<String, String>,
    inputs: Vec<String>,
    files: Vec<FileRecord>,
    outputs: Vec<String>,
}
