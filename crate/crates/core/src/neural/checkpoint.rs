//! Binary network checkpoint, version 1. All integers and floats little-endian.
//!
//! ```text
//! offset  size        field
//! 0       8           magic "ESPRDFNN"
//! 8       4           u32 format version (= 1)
//! 12      4           u32 L, number of affine layers
//! 16      4·(L+1)     u32 layer widths, input first, output last
//! ..      8           u64 optimizer steps taken
//! ..      per layer l: 8·w_l·w_{l+1} bytes of f64 weights (row-major, fan_in × fan_out)
//!                      then 8·w_{l+1} bytes of f64 biases
//! ..      4           u32 H, history entries
//! ..      H × 20      u32 epoch, f64 train loss, f64 validation loss (NaN when absent)
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{EpochLoss, FnnArchitecture, FnnModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"ESPRDFNN";

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

impl FnnModel {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let widths = self.arch.widths();
        w.write_all(MAGIC)?;
        w.write_all(&CHECKPOINT_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_layers() as u32).to_le_bytes())?;
        for &width in &widths {
            w.write_all(&(width as u32).to_le_bytes())?;
        }
        w.write_all(&self.optimizer_steps.to_le_bytes())?;
        let mut buf = Vec::new();
        for (wt, b) in self.weights.iter().zip(&self.biases) {
            buf.clear();
            for v in wt.iter().chain(b.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.write_all(&(self.history.len() as u32).to_le_bytes())?;
        for h in &self.history {
            w.write_all(&(h.epoch as u32).to_le_bytes())?;
            w.write_all(&h.train_loss.to_le_bytes())?;
            w.write_all(&h.validation_loss.unwrap_or(f64::NAN).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<FnnModel> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse { what: "checkpoint", line: 0, message: "bad magic".into() });
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "checkpoint",
                found: version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        let layers = read_u32(&mut r)? as usize;
        if layers == 0 || layers > 64 {
            return Err(Error::Parse {
                what: "checkpoint",
                line: 0,
                message: format!("implausible layer count {layers}"),
            });
        }
        let widths = (0..=layers).map(|_| read_u32(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let arch =
            FnnArchitecture { input_dim: widths[0], hidden: widths[1..layers].to_vec(), output_dim: widths[layers] };
        arch.validate()?;
        let optimizer_steps = read_u64(&mut r)?;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for pair in widths.windows(2) {
            let (i, o) = (pair[0], pair[1]);
            let mut bytes = vec![0u8; 8 * (i * o + o)];
            r.read_exact(&mut bytes)?;
            let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            weights.push(Array2::from_shape_vec((i, o), vals[..i * o].to_vec()).expect("sized above"));
            biases.push(Array1::from(vals[i * o..].to_vec()));
        }
        let n_hist = read_u32(&mut r)? as usize;
        let mut history = Vec::with_capacity(n_hist.min(1 << 16));
        for _ in 0..n_hist {
            let epoch = read_u32(&mut r)? as usize;
            let train_loss = read_f64(&mut r)?;
            let v = read_f64(&mut r)?;
            history.push(EpochLoss { epoch, train_loss, validation_loss: (!v.is_nan()).then_some(v) });
        }
        Ok(FnnModel { arch, weights, biases, history, optimizer_steps, fit_wall_time: 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_layout() {
        let mut m = FnnModel::init(FnnArchitecture { input_dim: 2, hidden: vec![3], output_dim: 4 }, 5).unwrap();
        m.history.push(EpochLoss { epoch: 1, train_loss: 1.25, validation_loss: None });
        m.history.push(EpochLoss { epoch: 2, train_loss: 0.5, validation_loss: Some(0.75) });
        m.optimizer_steps = 17;
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf).unwrap();
        let params = 2 * 3 + 3 + 3 * 4 + 4;
        assert_eq!(buf.len(), 8 + 4 + 4 + 4 * 3 + 8 + 8 * params + 4 + 2 * 20);
        assert_eq!(&buf[..8], b"ESPRDFNN");
        let back = FnnModel::read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_foreign_bytes() {
        assert!(FnnModel::read_checkpoint(&b"NOTAMODELxxxxxxx"[..]).is_err());
        let mut buf = Vec::new();
        buf.extend_from_slice(b"ESPRDFNN");
        buf.extend_from_slice(&7u32.to_le_bytes());
        assert!(matches!(FnnModel::read_checkpoint(&buf[..]), Err(Error::FormatVersion { found: 7, .. })));
    }
}
