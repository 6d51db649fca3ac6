//! Run manifest, written after every other output of a run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub config_path: String,
    /// Verbatim config text, so the run can be repeated from the manifest.
    pub config: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Collects output files while a subcommand runs.
pub struct Run {
    pub dir: PathBuf,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn start(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), outputs: Vec::new(), started: Instant::now() })
    }

    /// Path for a new output file, registered for the manifest.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    /// Registers a file written as a side product (e.g. a curve sidecar).
    pub fn register(&mut self, path: &Path) {
        let name = path.strip_prefix(&self.dir).unwrap_or(path);
        self.outputs.push(name.display().to_string());
    }

    pub fn finish(
        self,
        subcommand: &'static str,
        config_path: &Path,
        config: String,
        parameters: serde_json::Value,
        seed: Option<u64>,
    ) -> std::io::Result<PathBuf> {
        let m = RunManifest {
            subcommand,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_path: config_path.display().to_string(),
            config,
            parameters,
            seed,
            output_dir: self.dir.display().to_string(),
            outputs: self.outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
