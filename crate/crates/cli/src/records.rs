//! JSON-lines output: one header line, then one record per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub record: String,
    pub schema: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    /// SHA-256 of each input file, keyed by role.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
}

impl Header {
    pub fn new(schema: &str, run: &RunConfig, inputs: &Inputs) -> Self {
        Self {
            record: "header".into(),
            schema: schema.into(),
            version: VERSION.into(),
            seed: run.seed,
            config_hash: run.hash(),
            config: serde_json::to_value(run).expect("config serializes"),
            inputs: inputs.0.clone(),
        }
    }
}

/// Content hashes of the files a command consumed.
#[derive(Debug, Clone, Default)]
pub struct Inputs(BTreeMap<String, String>);

impl Inputs {
    pub fn add(&mut self, role: &str, bytes: &[u8]) {
        self.0.insert(role.into(), sha256(bytes));
    }

    pub fn get(&self, role: &str) -> Option<&str> {
        self.0.get(role).map(String::as_str)
    }
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path, header: &Header) -> anyhow::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = Self { path: path.to_path_buf(), out: BufWriter::new(file) };
        w.write(header)?;
        Ok(w)
    }

    pub fn write<S: Serialize>(&mut self, record: &S) -> anyhow::Result<()> {
        let line = serde_json::to_string(record)?;
        writeln!(self.out, "{line}").with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish(mut self) -> anyhow::Result<PathBuf> {
        self.out.flush().with_context(|| format!("writing {}", self.path.display()))?;
        Ok(self.path)
    }
}

/// Header and raw record lines of a file written by [`JsonlWriter`].
pub fn read_jsonl(bytes: &[u8], schema: &str) -> anyhow::Result<(Header, Vec<String>)> {
    let mut lines = BufReader::new(bytes).lines();
    let first = lines.next().context("empty file")??;
    let header: Header = serde_json::from_str(&first).context("bad header line")?;
    if header.record != "header" || header.schema != schema {
        bail!("expected a `{schema}` file, found `{}`", header.schema);
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(line);
        }
    }
    Ok((header, records))
}
