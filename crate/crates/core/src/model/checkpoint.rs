//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"HMFCKPT\0"
//! version  u32 (1)
//! desc_len u32, descriptor UTF-8 bytes
//! n_params u64, n_params x f64
//! n_epochs u32, n_epochs x (u32 epoch, f64 train_loss, f64 val_auc)
//! best     u32
//! ```

use std::path::Path;

use super::network::{EpochRecord, TrainedModel};
use super::spec::ModelSpec;
use super::ModelError;
use crate::Scalar;

const MAGIC: &[u8; 8] = b"HMFCKPT\0";
const VERSION: u32 = 1;

pub fn encode_checkpoint<T: Scalar>(model: &TrainedModel<T>) -> Vec<u8> {
    let desc = model.spec.descriptor();
    let mut out = Vec::with_capacity(32 + desc.len() + model.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(desc.as_bytes());
    out.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.as_f64().to_le_bytes());
    }
    out.extend_from_slice(&(model.history.len() as u32).to_le_bytes());
    for r in &model.history {
        out.extend_from_slice(&(r.epoch as u32).to_le_bytes());
        out.extend_from_slice(&r.train_loss.to_le_bytes());
        out.extend_from_slice(&r.val_auc.to_le_bytes());
    }
    out.extend_from_slice(&(model.best_epoch as u32).to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelError::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<TrainedModel<T>, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(ModelError::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let desc_len = r.u32()? as usize;
    let desc =
        std::str::from_utf8(r.take(desc_len)?).map_err(|_| ModelError::Checkpoint("descriptor is not UTF-8".into()))?;
    let spec = ModelSpec::parse_descriptor(desc)?;
    let n = r.u64()? as usize;
    if n > bytes.len() / 8 {
        return Err(ModelError::Checkpoint(format!("parameter count {n} exceeds file size")));
    }
    let params = (0..n).map(|_| r.f64().map(T::of)).collect::<Result<Vec<_>, _>>()?;
    let mut model = TrainedModel::from_params(&spec, params)?;
    let epochs = r.u32()? as usize;
    for _ in 0..epochs {
        let epoch = r.u32()? as usize;
        let train_loss = r.f64()?;
        let val_auc = r.f64()?;
        model.history.push(EpochRecord { epoch, train_loss, val_auc });
    }
    model.best_epoch = r.u32()? as usize;
    if r.pos != bytes.len() {
        return Err(ModelError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &TrainedModel<T>, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, encode_checkpoint(model))
        .map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<TrainedModel<T>, ModelError> {
    let bytes = std::fs::read(path).map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BlockFamily;

    #[test]
    fn round_trip_is_bit_exact() {
        for family in BlockFamily::ALL {
            let mut m = TrainedModel::<f64>::init(&ModelSpec::default_for(family), 21).unwrap();
            m.history = vec![
                EpochRecord { epoch: 1, train_loss: 0.1 + 0.2, val_auc: 0.5 },
                EpochRecord { epoch: 2, train_loss: f64::MIN_POSITIVE, val_auc: 1.0 / 3.0 },
            ];
            m.best_epoch = 2;
            let bytes = encode_checkpoint(&m);
            let back = decode_checkpoint::<f64>(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_checkpoint(&back), bytes);
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let m = TrainedModel::<f64>::init(&ModelSpec::default_for(BlockFamily::Plain), 1).unwrap();
        let bytes = encode_checkpoint(&m);
        assert!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_checkpoint::<f64>(b"nonsense").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint::<f64>(&extra).is_err());
        let mut bumped = bytes;
        bumped[8] = 2;
        assert!(decode_checkpoint::<f64>(&bumped).unwrap_err().to_string().contains("version"));
    }
}
