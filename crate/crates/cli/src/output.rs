//! CSV writing and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cvot::config::ConfigFile;

use crate::CliError;

/// Collects the files written by one command.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.path(name), bytes)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> Result<(), CliError> {
        self.write(name, csv.text.as_bytes())
    }

    /// Writes `manifest.json` describing `command`, its resolved config and
    /// the digests of every file written so far.
    pub fn finish(
        self,
        command: &str,
        cfg: &ConfigFile,
        mode: Option<String>,
    ) -> Result<Manifest, CliError> {
        let outputs = self
            .files
            .iter()
            .map(|f| {
                Ok(OutputDigest {
                    file: f.clone(),
                    sha256: sha256_file(&self.path(f))?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let manifest = Manifest {
            command: command.to_string(),
            mode,
            version: version(),
            seed: cfg.require("seed")?,
            config: cfg
                .keys()
                .map(|k| (k.to_string(), cfg.get_str(k).unwrap().to_string()))
                .collect(),
            outputs,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.path("manifest.json"), json + "\n")?;
        Ok(manifest)
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let digest = Sha256::digest(fs::read(path)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn version() -> String {
    let describe = env!("CVOT_GIT_DESCRIBE");
    if describe.is_empty() {
        env!("CARGO_PKG_VERSION").to_string()
    } else {
        format!("{} ({describe})", env!("CARGO_PKG_VERSION"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    /// The party played in a socket run; absent for in-process runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub version: String,
    pub seed: u64,
    /// Fully resolved configuration, seed included.
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<OutputDigest>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn config_file(&self) -> ConfigFile {
        let mut cfg = ConfigFile::default();
        for (k, v) in &self.config {
            cfg.set(k, v);
        }
        cfg
    }
}

/// A CSV table with a header row; floats get 17 significant digits.
pub struct Csv {
    text: String,
}

pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        let fields: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::F(v) => cvot::fmt17(v),
                Cell::U(v) => v.to_string(),
                Cell::B(v) => v.to_string(),
                Cell::S(v) => v,
            })
            .collect();
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}
