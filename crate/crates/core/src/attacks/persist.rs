//! Binary attack-model persistence.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic     8 bytes  b"MIAATK01"
//! variant   u8       0 = entropy, 1 = max_score, 2 = top3
//! entropy / max_score:
//!   tau     f64
//! top3:
//!   cutoff  f64
//!   network block in the MIANET01 format
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AttackModel, ThresholdAttack, ThresholdStatistic, Top3Attack};
use crate::error::{Error, Result};
use crate::nn::{read_network, write_network};

const ATTACK_MAGIC: &[u8; 8] = b"MIAATK01";

pub fn save_attack(attack: &AttackModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);
    w.write_all(ATTACK_MAGIC).map_err(io_err)?;
    match attack {
        AttackModel::Entropy(t) => {
            w.write_all(&[0u8]).map_err(io_err)?;
            w.write_all(&t.tau.to_le_bytes()).map_err(io_err)?;
        }
        AttackModel::MaxScore(t) => {
            w.write_all(&[1u8]).map_err(io_err)?;
            w.write_all(&t.tau.to_le_bytes()).map_err(io_err)?;
        }
        AttackModel::Top3(t) => {
            w.write_all(&[2u8]).map_err(io_err)?;
            w.write_all(&t.cutoff.to_le_bytes()).map_err(io_err)?;
            write_network(&t.net, &mut w).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn load_attack(path: &Path) -> Result<AttackModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Persist(format!("truncated file: {e}")))?;
    if &magic != ATTACK_MAGIC {
        return Err(Error::Persist(format!(
            "bad magic {magic:?}, expected {ATTACK_MAGIC:?}"
        )));
    }
    let mut variant = [0u8; 1];
    r.read_exact(&mut variant)
        .map_err(|e| Error::Persist(format!("truncated file: {e}")))?;
    let mut value = [0u8; 8];
    r.read_exact(&mut value)
        .map_err(|e| Error::Persist(format!("truncated file: {e}")))?;
    let value = f64::from_le_bytes(value);
    match variant[0] {
        0 => Ok(AttackModel::Entropy(ThresholdAttack {
            statistic: ThresholdStatistic::Entropy,
            tau: value,
        })),
        1 => Ok(AttackModel::MaxScore(ThresholdAttack {
            statistic: ThresholdStatistic::MaxScore,
            tau: value,
        })),
        2 => {
            let net = read_network(&mut r)?;
            if net.input_dim() != 3 || net.output_dim() != 1 {
                return Err(Error::Persist(format!(
                    "top3 attack network has shape {}->{}, expected 3->1",
                    net.input_dim(),
                    net.output_dim()
                )));
            }
            Ok(AttackModel::Top3(Top3Attack { net, cutoff: value }))
        }
        other => Err(Error::Persist(format!("unknown attack variant {other}"))),
    }
}
