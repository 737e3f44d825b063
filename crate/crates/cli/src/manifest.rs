//! Run manifests: the resolved configuration plus what the run produced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::FileConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: FileConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub results: toml::Table,
}

impl Manifest {
    pub fn new(command: &'static str, config: FileConfig) -> Self {
        Self {
            tool: "boxseg",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            results: toml::Table::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), path.display().to_string());
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.outputs.insert(name.into(), path.display().to_string());
    }

    /// Stores any serializable value under `results.<name>`. Values TOML
    /// cannot hold (such as `null`) are dropped.
    pub fn result<T: Serialize>(&mut self, name: &str, value: &T) {
        if let Ok(v) = toml::Value::try_from(value) {
            self.results.insert(name.into(), v);
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = toml::to_string(self).map_err(|e| CliError::Usage(format!("manifest: {e}")))?;
        std::fs::write(path, text).map_err(|e| boxseg_core::Error::io(path, e))?;
        Ok(())
    }
}

/// `--manifest` if given, else `<stem>.manifest.toml` beside `primary`.
pub fn manifest_path(explicit: Option<&Path>, primary: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        primary.map(|p| {
            let stem = p.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
            p.with_file_name(format!("{stem}.manifest.toml"))
        })
    })
}
