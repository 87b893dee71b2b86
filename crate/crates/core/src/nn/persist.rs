//! Binary network persistence.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic            8 bytes  b"MIANET01"
//! activation       u8       0 = relu, 1 = leaky_relu
//! slope            f64      leaky slope (0.0 for relu)
//! input_dim        u32
//! num_hidden       u32
//! hidden_dims      u32 * num_hidden
//! num_classes      u32
//! per layer, input to output:
//!   weights        f64 * (out * in), row-major
//!   bias           f64 * out
//! ```
//!
//! Parameters are written bit-exactly, so save/load round-trips reproduce
//! the network down to the last bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Layer, Network, NetworkConfig};
use crate::error::{Error, Result};

pub(crate) const NETWORK_MAGIC: &[u8; 8] = b"MIANET01";

// Sanity cap on dimensions read from files.
const MAX_DIM: u32 = 1 << 24;

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Persist(format!("truncated file: {e}")))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Persist(format!("truncated file: {e}")))?;
    Ok(f64::from_le_bytes(buf))
}

fn read_dim<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u32(r)?;
    if v == 0 || v > MAX_DIM {
        return Err(Error::Persist(format!("implausible {what}: {v}")));
    }
    Ok(v as usize)
}

/// Serialize a network into a writer.
pub fn write_network<W: Write>(net: &Network, w: &mut W) -> std::io::Result<()> {
    w.write_all(NETWORK_MAGIC)?;
    match net.config.activation {
        Activation::Relu => {
            w.write_all(&[0u8])?;
            write_f64(w, 0.0)?;
        }
        Activation::LeakyRelu { slope } => {
            w.write_all(&[1u8])?;
            write_f64(w, slope)?;
        }
    }
    write_u32(w, net.config.input_dim as u32)?;
    write_u32(w, net.config.hidden_dims.len() as u32)?;
    for &h in &net.config.hidden_dims {
        write_u32(w, h as u32)?;
    }
    write_u32(w, net.config.num_classes as u32)?;
    for layer in &net.layers {
        for &v in layer.weights.iter() {
            write_f64(w, v)?;
        }
        for &v in layer.bias.iter() {
            write_f64(w, v)?;
        }
    }
    Ok(())
}

/// Deserialize a network from a reader.
pub fn read_network<R: Read>(r: &mut R) -> Result<Network> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Persist(format!("truncated file: {e}")))?;
    if &magic != NETWORK_MAGIC {
        return Err(Error::Persist(format!(
            "bad magic {magic:?}, expected {NETWORK_MAGIC:?}"
        )));
    }
    let mut act_byte = [0u8; 1];
    r.read_exact(&mut act_byte)
        .map_err(|e| Error::Persist(format!("truncated file: {e}")))?;
    let slope = read_f64(r)?;
    let activation = match act_byte[0] {
        0 => Activation::Relu,
        1 => Activation::LeakyRelu { slope },
        other => return Err(Error::Persist(format!("unknown activation code {other}"))),
    };
    let input_dim = read_dim(r, "input_dim")?;
    let num_hidden = read_u32(r)? as usize;
    if num_hidden > 1024 {
        return Err(Error::Persist(format!(
            "implausible hidden layer count: {num_hidden}"
        )));
    }
    let mut hidden_dims = Vec::with_capacity(num_hidden);
    for _ in 0..num_hidden {
        hidden_dims.push(read_dim(r, "hidden_dim")?);
    }
    let num_classes = read_dim(r, "num_classes")?;
    let config = NetworkConfig {
        input_dim,
        hidden_dims,
        num_classes,
        activation,
    };
    config.validate().map_err(|e| Error::Persist(e.to_string()))?;

    let mut layers = Vec::new();
    for (fan_in, fan_out) in config.layer_dims() {
        let mut weights = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in * fan_out {
            weights.push(read_f64(r)?);
        }
        let mut bias = Vec::with_capacity(fan_out);
        for _ in 0..fan_out {
            bias.push(read_f64(r)?);
        }
        layers.push(Layer {
            weights: Array2::from_shape_vec((fan_out, fan_in), weights)
                .expect("shape matches vector length"),
            bias: Array1::from(bias),
        });
    }
    Ok(Network { config, layers })
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_network(net, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<Network> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let net = read_network(&mut r)?;
    // trailing bytes mean the file is not what we wrote
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => Ok(net),
        Ok(_) => Err(Error::Persist("trailing bytes after parameters".into())),
        Err(e) => Err(Error::io(path, e)),
    }
}
