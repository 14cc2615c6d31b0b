use crate::error::Result;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Full-precision scientific notation: 17 significant digits round-trip
/// every f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: format!("{}\n", header.join(",")) }
    }

    /// One row of already formatted cells.
    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn floats(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
        self.row(&cells);
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 * bytes.len());
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Collects everything a run writes, plus what goes into its manifest.
#[derive(Debug)]
pub struct Artifacts {
    pub dir: PathBuf,
    outputs: Vec<(String, String)>,
    achieved: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Artifacts { dir: dir.to_path_buf(), outputs: Vec::new(), achieved: Vec::new() }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push((name.to_string(), sha256(bytes)));
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, csv: Csv) -> Result<PathBuf> {
        self.write(name, &csv.into_bytes())
    }

    /// A tolerance or residual reached by some stage.
    pub fn achieved(&mut self, key: &str, value: f64) {
        self.achieved.push((key.to_string(), num(value)));
    }

    pub fn outputs(&self) -> &[(String, String)] {
        &self.outputs
    }

    /// `manifest.txt`: command, version, the effective run file and its
    /// digest, wall clock, achieved tolerances and output digests.
    pub fn finish(mut self, command: &str, config: &str, seconds: f64) -> Result<PathBuf> {
        self.write("run.conf", config.as_bytes())?;
        let mut m = String::new();
        let _ = writeln!(m, "command = {command}");
        let _ = writeln!(m, "version = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
        let _ = writeln!(m, "wall_clock_seconds = {seconds:.3}");
        for (k, v) in &self.achieved {
            let _ = writeln!(m, "achieved.{k} = {v}");
        }
        for (name, digest) in &self.outputs {
            let _ = writeln!(m, "sha256.{name} = {digest}");
        }
        let path = self.dir.join("manifest.txt");
        write_atomic(&path, m.as_bytes())?;
        Ok(path)
    }
}
