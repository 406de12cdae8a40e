use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Run parameters written next to every output file as `<out>.manifest.txt`.
pub struct Manifest {
    started: Instant,
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self {
            started: Instant::now(),
            entries: Vec::new(),
        };
        m.set("tool", format!("localte {}", env!("CARGO_PKG_VERSION")));
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.set("input", path.display());
        self.set("input_sha256", hex::encode(Sha256::digest(&bytes)));
        Ok(self)
    }

    pub fn sidecar_path(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.txt");
        PathBuf::from(name)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!(
            "wall_time_s = {:.3}\n",
            self.started.elapsed().as_secs_f64()
        ));
        s
    }

    pub fn write_for(&self, out: &Path) -> Result<PathBuf> {
        let path = Self::sidecar_path(out);
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
