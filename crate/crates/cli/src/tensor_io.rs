//! Plain-text tensor files.
//!
//! ```text
//! shape: 2 3
//! 1 2 3 4 5 6
//! ```
//!
//! The header gives the extents; the values follow in storage order (first
//! index fastest), separated by any whitespace.

use std::fmt::Write as _;
use std::path::Path;

use trsr_core::DenseTensor;

use crate::error::{io_err, CliError, Result};

pub fn parse_tensor(text: &str) -> Result<DenseTensor> {
    let bad = |msg: String| CliError::TensorFormat(msg);
    let text = text.trim_start();
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let dims = header
        .trim()
        .strip_prefix("shape:")
        .ok_or_else(|| bad(format!("expected a `shape:` header, found {header:?}")))?;
    let shape = dims
        .split_whitespace()
        .map(|d| d.parse::<usize>().map_err(|e| bad(format!("extent {d:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let data = body
        .split_whitespace()
        .map(|v| v.parse::<f64>().map_err(|e| bad(format!("value {v:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseTensor::new(shape, data)?)
}

/// Values use the shortest representation that parses back exactly.
pub fn render_tensor(t: &DenseTensor) -> String {
    let mut out = String::from("shape:");
    for d in t.shape() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    let row = t.shape().first().copied().unwrap_or(1).max(1);
    for chunk in t.data().chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_tensor(&text)
}

pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    std::fs::write(path, render_tensor(t)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_storage_order() {
        let t = parse_tensor("shape: 2 3\n1 2 3\n4 5 6\n").unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.get(&[1, 0]).unwrap(), 2.0);
        assert_eq!(t.get(&[0, 2]).unwrap(), 5.0);
    }

    #[test]
    fn round_trips_exactly() {
        let t = DenseTensor::from_fn(vec![3, 2, 2], |i| (i[0] as f64 + 0.1) / (1.0 + i[1] as f64 * 3.0 + i[2] as f64)).unwrap();
        assert_eq!(parse_tensor(&render_tensor(&t)).unwrap(), t);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse_tensor("2 3\n1 2 3 4 5 6").is_err());
        assert!(parse_tensor("shape: 2 3\n1 2 3").is_err());
        assert!(parse_tensor("shape: 2 x\n1 2").is_err());
        assert!(parse_tensor("shape: 2\n1 y").is_err());
    }
}
