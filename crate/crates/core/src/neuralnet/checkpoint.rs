//! Checkpoint layout:
//!
//! ```text
//! DEEPDDM-CKPT 1
//! layers 2,30,30,1
//! activation tanh
//! endian little f64
//! params 1051
//! data
//! <params × 8 bytes, little-endian f64>
//! ```
//!
//! Parameters follow layer order; within a layer the weights come first,
//! row-major `(out, in)`, then the biases.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use super::{Activation, Layer, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "DEEPDDM-CKPT 1";

pub fn write_checkpoint<W: Write>(net: &Network, mut w: W) -> Result<()> {
    let sizes: Vec<String> = net.layer_sizes().iter().map(|s| s.to_string()).collect();
    let header = format!(
        "{CHECKPOINT_MAGIC}\nlayers {}\nactivation {}\nendian little f64\nparams {}\ndata\n",
        sizes.join(","),
        net.activation().id(),
        net.param_count()
    );
    let io = |e| Error::Checkpoint(format!("write failed: {e}"));
    w.write_all(header.as_bytes()).map_err(io)?;
    let mut bytes = Vec::with_capacity(8 * net.param_count());
    for v in net.to_flat() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes).map_err(io)?;
    w.flush().map_err(io)
}

fn header_line<R: BufRead>(r: &mut R, key: &str) -> Result<String> {
    let mut line = String::new();
    r.read_line(&mut line)
        .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    let line = line.trim_end_matches('\n');
    if key.is_empty() {
        return Ok(line.to_string());
    }
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::to_string)
        .ok_or_else(|| Error::Checkpoint(format!("expected `{key}` line, found `{line}`")))
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<Network> {
    let magic = header_line(&mut r, "")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("bad magic `{magic}`")));
    }
    let sizes: Vec<usize> = header_line(&mut r, "layers")?
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Checkpoint(format!("bad layer sizes: {e}")))?;
    let act_id = header_line(&mut r, "activation")?;
    let activation = Activation::from_id(&act_id)
        .ok_or_else(|| Error::Checkpoint(format!("unknown activation `{act_id}`")))?;
    let endian = header_line(&mut r, "endian")?;
    if endian != "little f64" {
        return Err(Error::Checkpoint(format!("unsupported encoding `{endian}`")));
    }
    let count: usize = header_line(&mut r, "params")?
        .parse()
        .map_err(|e| Error::Checkpoint(format!("bad parameter count: {e}")))?;
    if header_line(&mut r, "")? != "data" {
        return Err(Error::Checkpoint("missing `data` marker".into()));
    }
    if sizes.len() < 2 {
        return Err(Error::Checkpoint(format!("bad layer sizes {sizes:?}")));
    }
    let layers: Vec<Layer> = sizes
        .windows(2)
        .map(|w| Layer {
            weights: Array2::zeros((w[1], w[0])),
            biases: Array1::zeros(w[1]),
        })
        .collect();
    let mut net = Network::from_layers(activation, layers)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if count != net.param_count() {
        return Err(Error::Checkpoint(format!(
            "header declares {count} parameters, layer sizes imply {}",
            net.param_count()
        )));
    }
    let mut bytes = vec![0u8; 8 * count];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("truncated parameter block: {e}")))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| Error::Checkpoint(e.to_string()))? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    let params: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    net.set_flat(&params)?;
    Ok(net)
}
