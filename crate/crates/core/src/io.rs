//! JSON-lines dataset files.
//!
//! The first line is a header record; every following line is one instance.
//!
//! ```text
//! {"record":"header","format":"softrank-dataset","version":1,"generator":"softrank-core 0.1.0","task":"sorting","n":5,"count":2,"seed":7}
//! {"values":[0.61,0.12,0.93,0.40,0.27],"ground_truth":[4,1,5,3,2]}
//! ...
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::{Dataset, Instance, TaskKind};

pub const DATASET_FORMAT: &str = "softrank-dataset";
pub const DATASET_VERSION: u32 = 1;

pub fn generator_version() -> String {
    format!("softrank-core {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub record: String,
    pub format: String,
    pub version: u32,
    pub generator: String,
    pub task: TaskKind,
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    /// Free-form run metadata supplied by the writer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

pub fn write_dataset<W: Write>(dataset: &Dataset<f64>, out: W) -> Result<()> {
    write_dataset_with_run(dataset, None, out)
}

/// As [`write_dataset`], embedding `run` in the header.
pub fn write_dataset_with_run<W: Write>(dataset: &Dataset<f64>, run: Option<serde_json::Value>, mut out: W) -> Result<()> {
    let header = DatasetHeader {
        record: "header".into(),
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        generator: generator_version(),
        task: dataset.kind,
        n: dataset.n,
        count: dataset.instances.len(),
        seed: dataset.seed,
        run,
    };
    writeln!(out, "{}", serde_json::to_string(&header).map_err(format_err)?).map_err(format_err)?;
    for inst in &dataset.instances {
        writeln!(out, "{}", serde_json::to_string(inst).map_err(format_err)?).map_err(format_err)?;
    }
    out.flush().map_err(format_err)
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset<f64>> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))?.map_err(format_err)?;
    let header: DatasetHeader =
        serde_json::from_str(&first).map_err(|e| Error::Format(format!("bad dataset header: {e}")))?;
    if header.format != DATASET_FORMAT || header.record != "header" {
        return Err(Error::Format(format!("not a dataset file: format `{}`", header.format)));
    }
    if header.version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {}", header.version)));
    }
    let mut instances = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(format_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance<f64> =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("instance {i}: {e}")))?;
        if inst.kind() != header.task || inst.n() != header.n {
            return Err(Error::Format(format!("instance {i} does not match the header ({} n={})", header.task.name(), header.n)));
        }
        instances.push(inst);
    }
    if instances.len() != header.count {
        return Err(Error::Format(format!("header declares {} instances, found {}", header.count, instances.len())));
    }
    Ok(Dataset { kind: header.task, n: header.n, seed: header.seed, instances })
}
