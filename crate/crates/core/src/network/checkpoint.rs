//! Versioned plain-text checkpoints.
//!
//! ```text
//! kanlab-checkpoint v1
//! dims 3 2 2
//! grid_size 5
//! order 3
//! range -1.0000000000000000e0 1.0000000000000000e0
//! seed 42
//! layer 0 base_weights 6
//! <6 values>
//! layer 0 spline_coeffs 48
//! ...
//! end
//! ```
//!
//! Values are written with 17 significant digits, enough for every f64
//! to parse back to the identical bit pattern.

use std::fmt::Write as _;

use super::{KanLayer, KanNetwork, NetworkError};
use crate::spline::KnotGrid;

pub const CHECKPOINT_MAGIC: &str = "kanlab-checkpoint v1";

const BLOCKS: [&str; 3] = ["base_weights", "spline_coeffs", "spline_scalers"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub dims: Vec<usize>,
    pub grid_size: usize,
    pub order: usize,
    pub range: (f64, f64),
    pub seed: u64,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl KanNetwork {
    pub fn to_checkpoint(&self, seed: u64) -> String {
        let grid = self.layers[0].grid();
        let mut s = String::new();
        let dims: Vec<String> = self.dims().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(s, "dims {}", dims.join(" "));
        let _ = writeln!(s, "grid_size {}", grid.grid_size());
        let _ = writeln!(s, "order {}", grid.order());
        let _ = writeln!(s, "range {} {}", fmt_f64(grid.range_lo()), fmt_f64(grid.range_hi()));
        let _ = writeln!(s, "seed {seed}");
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, block) in BLOCKS
                .iter()
                .zip([&layer.base_weights, &layer.spline_coeffs, &layer.spline_scalers])
            {
                let _ = writeln!(s, "layer {l} {name} {}", block.len());
                let vals: Vec<String> = block.iter().map(|v| fmt_f64(*v)).collect();
                let _ = writeln!(s, "{}", vals.join(" "));
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<(Self, CheckpointHeader), NetworkError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| -> Result<(usize, &str), NetworkError> {
            lines.next().ok_or_else(|| NetworkError::Checkpoint {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let err = |line: usize, message: String| NetworkError::Checkpoint { line, message };

        let (n, magic) = next("header")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(err(n, format!("expected '{CHECKPOINT_MAGIC}', found '{magic}'")));
        }
        let mut field = |key: &str| -> Result<(usize, Vec<String>), NetworkError> {
            let (n, line) = next(key)?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some(k) if k == key => Ok((n, parts.map(str::to_owned).collect())),
                other => Err(err(n, format!("expected '{key}', found {other:?}"))),
            }
        };
        let parse_usize = |n: usize, s: &str| s.parse::<usize>().map_err(|e| err(n, format!("'{s}': {e}")));
        let parse_f64 = |n: usize, s: &str| s.parse::<f64>().map_err(|e| err(n, format!("'{s}': {e}")));

        let (n, v) = field("dims")?;
        let dims = v.iter().map(|s| parse_usize(n, s)).collect::<Result<Vec<_>, _>>()?;
        let (n, v) = field("grid_size")?;
        let grid_size = parse_usize(n, v.first().map_or("", String::as_str))?;
        let (n, v) = field("order")?;
        let order = parse_usize(n, v.first().map_or("", String::as_str))?;
        let (n, v) = field("range")?;
        if v.len() != 2 {
            return Err(err(n, "range needs two values".into()));
        }
        let range = (parse_f64(n, &v[0])?, parse_f64(n, &v[1])?);
        let (n, v) = field("seed")?;
        let seed = v
            .first()
            .ok_or_else(|| err(n, "missing seed".into()))?
            .parse::<u64>()
            .map_err(|e| err(n, e.to_string()))?;
        drop(field);

        if dims.len() < 2 || dims.contains(&0) {
            return Err(NetworkError::InvalidDims(dims));
        }
        let grid = KnotGrid::new(range.0, range.1, grid_size, order)?;
        let mut layers = Vec::new();
        for (l, w) in dims.windows(2).enumerate() {
            let mut layer = KanLayer::zeros(w[0], w[1], grid.clone());
            for name in BLOCKS {
                let (n, head) = next("layer block header")?;
                let parts: Vec<&str> = head.split_whitespace().collect();
                let expected_len = match name {
                    "spline_coeffs" => layer.spline_coeffs.len(),
                    _ => layer.base_weights.len(),
                };
                if parts.len() != 4 || parts[0] != "layer" || parts[1] != l.to_string() || parts[2] != name {
                    return Err(err(n, format!("expected 'layer {l} {name} {expected_len}', found '{head}'")));
                }
                let count = parse_usize(n, parts[3])?;
                if count != expected_len {
                    return Err(err(n, format!("{name} has {count} values, dims imply {expected_len}")));
                }
                let (n, body) = next("values")?;
                let values = body.split_whitespace().map(|s| parse_f64(n, s)).collect::<Result<Vec<_>, _>>()?;
                if values.len() != count {
                    return Err(err(n, format!("expected {count} values, found {}", values.len())));
                }
                if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                    return Err(err(n, format!("non-finite parameter {bad}")));
                }
                match name {
                    "base_weights" => layer.base_weights = values,
                    "spline_coeffs" => layer.spline_coeffs = values,
                    _ => layer.spline_scalers = values,
                }
            }
            layers.push(layer);
        }
        let (n, end) = next("end")?;
        if end != "end" {
            return Err(err(n, format!("expected 'end', found '{end}'")));
        }
        let header = CheckpointHeader {
            dims,
            grid_size,
            order,
            range,
            seed,
        };
        Ok((KanNetwork::from_layers(layers)?, header))
    }
}
