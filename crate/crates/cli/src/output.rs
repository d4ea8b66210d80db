use std::io::Write;
use std::path::{Path, PathBuf};

use halfspace::grid::{HalfSpaceGrid, ScalarField};
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Self-description embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub command: &'static str,
    pub a: Value,
    pub n: Value,
    pub grid: Option<HalfSpaceGrid>,
    pub normalization_convention: &'static str,
    pub code_version: &'static str,
    pub seed: u64,
}

impl Meta {
    pub fn new(command: &'static str, a: Value, n: Value, grid: Option<HalfSpaceGrid>, seed: u64) -> Self {
        Self {
            command,
            a,
            n,
            grid,
            normalization_convention: halfspace::NORMALIZATION_CONVENTION,
            code_version: halfspace::VERSION,
            seed,
        }
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    /// Write through a temporary file in the same directory, then rename.
    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.root.join(name);
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", target.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&target).map_err(|e| io(e.error))?;
        Ok(target)
    }

    pub fn report<T: Serialize>(&self, name: &str, meta: &Meta, result: &T) -> Result<PathBuf, CliError> {
        let doc = json!({ "meta": meta, "result": result });
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|e| CliError::Io(format!("serialising {name}: {e}")))?;
        text.push('\n');
        self.write_atomic(name, text.as_bytes())
    }

    /// CSV with a leading comment line carrying the metadata.
    pub fn field(&self, name: &str, meta: &Meta, u: &ScalarField) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        let header = serde_json::to_string(meta).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(buf, "# {header}").map_err(|e| CliError::Io(e.to_string()))?;
        u.write_csv(&mut buf)?;
        self.write_atomic(name, &buf)
    }
}

pub fn diagnostic(kind: &str, message: &str) {
    let line = json!({ "level": "error", "kind": kind, "message": message });
    eprintln!("{line}");
}
