//! Checkpoint format: a text header (key-value metadata and block shapes)
//! followed by flat little-endian f64 parameter arrays in declaration order.
//!
//! ```text
//! aoci-ckpt v1
//! meta <key> <value>
//! ...
//! block <name> <len>
//! ...
//! data
//! <len * 8 bytes per block, little endian, in header order>
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

const MAGIC: &str = "aoci-ckpt v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("malformed header line: {0}")]
    BadHeader(String),
    #[error("checkpoint ends before block {0} is complete")]
    Truncated(String),
    #[error("checkpoint block {name} has length {got}, expected {expected}")]
    ShapeMismatch { name: String, got: usize, expected: usize },
    #[error("checkpoint is missing block {0}")]
    MissingBlock(String),
    #[error("checkpoint meta key {0} is missing")]
    MissingMeta(String),
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub blocks: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require_meta(&self, key: &str) -> Result<&str, CheckpointError> {
        self.meta_value(key).ok_or_else(|| CheckpointError::MissingMeta(key.to_string()))
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Looks a block up and checks its length.
    pub fn take_block(&self, name: &str, expected: usize) -> Result<&[f64], CheckpointError> {
        let data = self.block(name).ok_or_else(|| CheckpointError::MissingBlock(name.to_string()))?;
        if data.len() != expected {
            return Err(CheckpointError::ShapeMismatch { name: name.to_string(), got: data.len(), expected });
        }
        Ok(data)
    }
}

pub fn write_checkpoint(
    path: &Path,
    meta: &[(String, String)],
    blocks: &[(String, &[f64])],
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MAGIC}")?;
    for (k, v) in meta {
        writeln!(w, "meta {k} {v}")?;
    }
    for (name, data) in blocks {
        writeln!(w, "block {name} {}", data.len())?;
    }
    writeln!(w, "data")?;
    for (_, data) in blocks {
        for v in *data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;

    // Split the text header from the binary payload at the "data\n" line.
    let mut meta = Vec::new();
    let mut shapes: Vec<(String, usize)> = Vec::new();
    let mut cursor = 0usize;
    let mut first = true;
    loop {
        let rest = &bytes[cursor..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| CheckpointError::BadHeader("unterminated header".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| CheckpointError::BadHeader("non-utf8 header".into()))?;
        cursor += nl + 1;
        if first {
            if line != MAGIC {
                return Err(CheckpointError::BadMagic);
            }
            first = false;
            continue;
        }
        if line == "data" {
            break;
        }
        if let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest
                .split_once(' ')
                .ok_or_else(|| CheckpointError::BadHeader(line.to_string()))?;
            meta.push((k.to_string(), v.to_string()));
        } else if let Some(rest) = line.strip_prefix("block ") {
            let (name, len) = rest
                .split_once(' ')
                .ok_or_else(|| CheckpointError::BadHeader(line.to_string()))?;
            let len: usize = len.parse().map_err(|_| CheckpointError::BadHeader(line.to_string()))?;
            shapes.push((name.to_string(), len));
        } else {
            return Err(CheckpointError::BadHeader(line.to_string()));
        }
    }

    let mut blocks = Vec::with_capacity(shapes.len());
    for (name, len) in shapes {
        let need = len * 8;
        if bytes.len() < cursor + need {
            return Err(CheckpointError::Truncated(name));
        }
        let mut data = Vec::with_capacity(len);
        for chunk in bytes[cursor..cursor + need].chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        cursor += need;
        blocks.push((name, data));
    }
    Ok(Checkpoint { meta, blocks })
}
