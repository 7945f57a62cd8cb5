use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const RESOLVED_CONFIG_NAME: &str = "resolved.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Output directory that remembers what it wrote so a failed run can be undone.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    created: bool,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let created = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created,
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Renders into memory first so an emitter error leaves no partial file.
    pub fn write(
        &mut self,
        name: &str,
        render: impl FnOnce(&mut Vec<u8>) -> io::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        // record before writing so a failed write is still cleaned up
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: buf.len(),
            sha256: sha256_hex(&buf),
        });
        f.write_all(&buf)?;
        Ok(())
    }

    /// Removes every file written by this run, and the directory if this run created it.
    pub fn discard(self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(&f.name));
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_NAME));
        if self.created {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_path: Option<String>,
    /// SHA-256 of the configuration file as read (of the empty string without one).
    pub config_sha256: String,
    pub resolved_config: RunConfig,
    pub defaulted_keys: Vec<String>,
    pub jobs: usize,
    pub files: Vec<FileEntry>,
    pub summary: serde_json::Value,
    pub duration_s: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(dir.join(MANIFEST_NAME), text + "\n")?;
        Ok(())
    }
}
