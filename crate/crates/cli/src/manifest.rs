use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliResult, Context};

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// Echo of a run: the command line, the resolved configuration and hashes of
/// every file read or written.
#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub config: C,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).runtime(&format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

fn records(paths: &[PathBuf]) -> CliResult<Vec<FileRecord>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileRecord {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

pub fn write<C: Serialize>(
    path: &Path,
    command: &'static str,
    config: C,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> CliResult<()> {
    let manifest = Manifest {
        tool: "deconfound",
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv: std::env::args().collect(),
        config,
        inputs: records(inputs)?,
        outputs: records(outputs)?,
    };
    let text = serde_json::to_string_pretty(&manifest).runtime("serializing manifest")?;
    fs::write(path, text + "\n").runtime(&format!("writing {}", path.display()))
}
