//! Output directory plumbing: CSV/JSON writers that record every file they
//! touch so the run manifest can carry per-output checksums.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use sbd_core::config::{OutputChecksum, RunManifest};

pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
    manifest: RunManifest,
}

impl OutDir {
    /// Create the directory and write the initial manifest (no outputs yet);
    /// a crash mid-run leaves the stub behind as evidence.
    pub fn begin(root: PathBuf, config_toml: &str, seeds: Vec<u64>) -> Result<Self> {
        fs::create_dir_all(&root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: hex_sha256(config_toml.as_bytes()),
            seeds,
            started_utc: chrono::Utc::now().to_rfc3339(),
            finished_utc: String::new(),
            outputs: Vec::new(),
        };
        let out = OutDir { root, written: Vec::new(), manifest };
        out.write_manifest()?;
        Ok(out)
    }

    /// Write a CSV file: a header row, then one line per row.
    pub fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = String>,
    {
        let mut body = String::from(header);
        body.push('\n');
        for row in rows {
            body.push_str(&row);
            body.push('\n');
        }
        self.write(name, body.as_bytes())
    }

    pub fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// Finalize the manifest with checksums of everything written.
    pub fn finish(mut self) -> Result<()> {
        self.manifest.outputs = self
            .written
            .iter()
            .map(|p| -> Result<OutputChecksum> {
                let bytes = fs::read(p)?;
                Ok(OutputChecksum {
                    path: relative_to(p, &self.root),
                    sha256: hex_sha256(&bytes),
                })
            })
            .collect::<Result<_>>()?;
        self.manifest.finished_utc = chrono::Utc::now().to_rfc3339();
        self.write_manifest()
    }

    fn write_manifest(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}

fn relative_to(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}

fn hex_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let d = h.finalize();
    d.iter().map(|b| format!("{b:02x}")).collect()
}
