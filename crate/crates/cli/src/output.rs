use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use mirrorfreq::Case;
use serde::Serialize;

pub use mirrorfreq::sweep::csv_float as f12;

pub struct Context {
    pub command: String,
}

impl Context {
    pub fn new(command: String) -> Self {
        Context { command }
    }

    pub fn writer(&self, dir: &Path) -> Result<OutputDir> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            command: self.command.clone(),
            files: Vec::new(),
        })
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    schema_version: u32,
    command: &'a str,
    config_path: &'a str,
    output_dir: String,
    timestamp: String,
    tool_version: &'static str,
    files: &'a [String],
    case: &'a Case,
}

/// Output directory of one command. Files are recorded as they are written
/// and listed in `manifest.json` by `finish`.
pub struct OutputDir {
    dir: PathBuf,
    command: String,
    files: Vec<String>,
}

impl OutputDir {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s)
    }

    /// Writes a CSV built in memory by `fill`.
    pub fn write_csv(&mut self, name: &str, fill: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        fill(&mut w)?;
        let bytes = w.into_inner().context("csv buffer")?;
        self.write(name, bytes)
    }

    pub fn finish(self, config_path: &str, case: &Case) -> Result<()> {
        let m = RunManifest {
            schema_version: 1,
            command: &self.command,
            config_path,
            output_dir: self.dir.display().to_string(),
            timestamp: humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            files: &self.files,
            case,
        };
        let p = self.path("manifest.json");
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        fs::write(&p, s).with_context(|| format!("writing {}", p.display()))?;
        println!("wrote {} file(s) and manifest.json to {}", self.files.len(), self.dir.display());
        Ok(())
    }
}
