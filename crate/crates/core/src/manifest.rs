//! Run manifests: what went in, what came out, with content digests.
//!
//! A manifest holds no timestamps or absolute paths, so two runs of the
//! same configuration over the same inputs produce identical manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!("toolcorpus ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// As given for inputs; relative to the output root for outputs.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

fn entry(label: String, path: &Path) -> std::io::Result<FileEntry> {
    let bytes = std::fs::read(path)?;
    Ok(FileEntry {
        path: label,
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

fn label(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

impl Manifest {
    /// `config` is the effective configuration in any stable serialization.
    pub fn new(command: impl Into<String>, config: &str) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command: command.into(),
            config_sha256: sha256_hex(config.as_bytes()),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Records an input under `shown`, the path as the user gave it.
    pub fn add_input(&mut self, shown: &Path, actual: &Path) -> std::io::Result<()> {
        self.inputs.push(entry(label(shown), actual)?);
        Ok(())
    }

    /// Records an output file, labelled relative to `root` when inside it.
    pub fn add_output(&mut self, root: &Path, path: &Path) -> std::io::Result<()> {
        let shown = path.strip_prefix(root).unwrap_or(path);
        self.outputs.push(entry(label(shown), path)?);
        Ok(())
    }

    /// Records every file under `dir`, in path order.
    pub fn add_output_tree(&mut self, root: &Path, dir: &Path) -> std::io::Result<()> {
        let mut files = Vec::new();
        collect_files(dir, &mut files)?;
        files.sort();
        for f in files {
            self.add_output(root, &f)?;
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_pretty())
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for e in std::fs::read_dir(dir)? {
        let path = e?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Manifest path for a single output file: `<file>.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
