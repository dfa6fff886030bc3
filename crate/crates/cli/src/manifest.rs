use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use swd_core::prompting::template_checksums;

use crate::CliError;

/// Everything needed to repeat a run. Deliberately free of timestamps so
/// identical runs produce identical manifests.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub template_checksums: BTreeMap<&'static str, String>,
    pub config: Value,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, config: Value) -> Self {
        RunManifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            template_checksums: template_checksums().into_iter().collect(),
            config,
        }
    }

    /// Write to `target`, or to stderr as one line when there is no file.
    pub fn emit(&self, target: Option<&Path>) -> Result<(), CliError> {
        match target {
            Some(path) => {
                let body = serde_json::to_string_pretty(self).map_err(CliError::input)? + "\n";
                std::fs::write(path, body).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
            }
            None => {
                eprintln!("manifest: {}", serde_json::to_string(self).map_err(CliError::input)?);
                Ok(())
            }
        }
    }
}

/// `<out>.<suffix>` next to an output file.
pub fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}
