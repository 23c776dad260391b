use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use eps_fdd_core::sysid::FitReport;
use eps_fdd_core::Error;
use serde::Serialize;

/// Record of one command run. Every listed artifact exists next to it.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub fit_reports: BTreeMap<String, FitReport>,
}

/// Writes files into one directory, each through a temporary file and a
/// rename, and remembers what it wrote.
pub struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, Error> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let io = |source| Error::Io {
            path: path.clone(),
            source,
        };
        fs::write(&tmp, bytes).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(path)
    }

    /// Writes `manifest_<command>.json` listing everything written so far.
    pub fn finish(
        mut self,
        command: &str,
        config_hash: &str,
        seed: u64,
        fit_reports: BTreeMap<String, FitReport>,
    ) -> Result<(), Error> {
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            artifacts: self.written.clone(),
            fit_reports,
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        self.write(&format!("manifest_{command}.json"), json.as_bytes())?;
        Ok(())
    }
}
