use std::path::{Path, PathBuf};

use anyhow::Context;
use rscd_core::imagecore::{encode_png, BitDepth, Transfer};
use rscd_core::tensor::TensorFile;
use rscd_core::Frame;
use serde::Serialize;

/// Files produced by a run, held in memory until everything succeeded.
#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, name: impl Into<PathBuf>, data: Vec<u8>) {
        self.files.push((name.into(), data));
    }

    pub fn png(&mut self, name: &str, frame: &Frame, transfer: Transfer, depth: BitDepth) -> anyhow::Result<()> {
        let data = encode_png(frame, transfer, depth).with_context(|| format!("encoding {name}"))?;
        self.bytes(name, data);
        Ok(())
    }

    pub fn tensor(&mut self, name: &str, t: &TensorFile) {
        self.bytes(name, t.to_bytes());
    }

    /// Pretty JSON with a trailing newline.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut data = serde_json::to_vec_pretty(value).with_context(|| format!("serializing {name}"))?;
        data.push(b'\n');
        self.bytes(name, data);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Creates `dir` and writes every staged file into it.
    pub fn commit(self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, data) in self.files {
            let path = dir.join(&name);
            std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}
