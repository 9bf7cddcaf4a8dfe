//! Artifact writing and the per-command manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use spatialnav::Error;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub toolkit_version: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub counts: BTreeMap<String, u64>,
}

/// Collects written artifacts under one output directory.
pub struct Artifacts {
    dir: PathBuf,
    manifest: Manifest,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &str, seed: u64, config: serde_json::Value) -> Result<Self, Error> {
        std::fs::create_dir_all(dir)?;
        let canonical = serde_json::to_vec(&config)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                command: command.to_string(),
                toolkit_version: env!("CARGO_PKG_VERSION"),
                seed,
                config_sha256: sha256_hex(&canonical),
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
                counts: BTreeMap::new(),
            },
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>, Error> {
        let bytes = std::fs::read(path)?;
        self.manifest.inputs.push(FileEntry {
            path: path.display().to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn count(&mut self, key: &str, value: usize) {
        self.manifest.counts.insert(key.to_string(), value as u64);
    }

    /// Write `chunks` in order to `name`, hashing as it goes.
    pub fn write_chunks<'a>(&mut self, name: &str, chunks: impl IntoIterator<Item = &'a [u8]>) -> Result<(), Error> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        let mut hasher = Sha256::new();
        let mut bytes = 0u64;
        for c in chunks {
            w.write_all(c)?;
            hasher.update(c);
            bytes += c.len() as u64;
        }
        w.flush()?;
        let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        self.manifest.outputs.push(FileEntry { path: name.to_string(), bytes, sha256 });
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Error> {
        self.write_chunks(name, [bytes])
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Error> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<Manifest, Error> {
        let name = format!("{}.manifest.json", self.manifest.command);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(self.dir.join(name), text)?;
        Ok(self.manifest)
    }
}
