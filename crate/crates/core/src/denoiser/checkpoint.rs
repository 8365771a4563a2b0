//! Line-oriented checkpoint format.
//!
//! ```text
//! {"format":"softrank-checkpoint","version":1,"architecture":{...},"param_count":P}
//! <param 0>
//! ...
//! <param P-1>
//! ```
//!
//! Parameters are written as shortest round-trip decimal `f64`, one per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Architecture, DenoiserModel};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT: &str = "softrank-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    architecture: Architecture,
    param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run: Option<serde_json::Value>,
}

pub fn write_checkpoint<T: Real, W: Write>(model: &DenoiserModel<T>, out: W) -> Result<()> {
    write_checkpoint_with_run(model, None, out)
}

/// As [`write_checkpoint`], embedding `run` in the header.
pub fn write_checkpoint_with_run<T: Real, W: Write>(
    model: &DenoiserModel<T>,
    run: Option<serde_json::Value>,
    mut out: W,
) -> Result<()> {
    let header = Header {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        architecture: model.arch().clone(),
        param_count: model.params().len(),
        run,
    };
    let io = |e: std::io::Error| Error::Format(e.to_string());
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(out, "{line}").map_err(io)?;
    for p in model.params() {
        writeln!(out, "{}", p.to_f64_lossy()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_checkpoint<T: Real, R: BufRead>(input: R) -> Result<DenoiserModel<T>> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty checkpoint".into()))?
        .map_err(|e| Error::Format(e.to_string()))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!("not a checkpoint: format `{}`", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
    }
    let mut params = Vec::with_capacity(header.param_count);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: f64 = line.trim().parse().map_err(|_| Error::Format(format!("parameter {i}: cannot parse `{line}`")))?;
        params.push(T::lit(v));
    }
    if params.len() != header.param_count {
        return Err(Error::Format(format!(
            "header declares {} parameters, found {}",
            header.param_count,
            params.len()
        )));
    }
    DenoiserModel::from_parts(header.architecture, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = DenoiserModel::<f64>::init(Architecture::pointer(4, 2, 5, 3), &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let back: DenoiserModel<f64> = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let model = DenoiserModel::<f64>::zeros(Architecture::mlp(3, 1, 4)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_checkpoint::<f64, _>(truncated.as_bytes()), Err(Error::Format(_))));
        let foreign = text.replacen(CHECKPOINT_FORMAT, "something-else", 1);
        assert!(read_checkpoint::<f64, _>(foreign.as_bytes()).is_err());
        assert!(read_checkpoint::<f64, _>(&b""[..]).is_err());
    }
}
