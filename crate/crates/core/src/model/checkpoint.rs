//! `FXCK` checkpoint files: magic, `u32` version, 32-byte config digest,
//! `u64` record count, named tensor records, then the `u64` Adam step.
//! Tensor record: `u32` name length, UTF-8 name, `u32` rank, `u64` dims,
//! `u8` dtype tag (0 = f64), little-endian values. Adam moments are stored
//! as `adam.m.<name>` and `adam.v.<name>`.

use std::path::Path;

use super::net::FutureX;
use crate::error::{Error, Result};
use crate::io::{hex, ByteReader, ByteWriter};
use crate::tensor::{AdamConfig, AdamState, Tensor};

const MAGIC: &[u8; 4] = b"FXCK";
const VERSION: u32 = 1;
const DTYPE_F64: u8 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub digest: [u8; 32],
    pub tensors: Vec<(String, Tensor)>,
    pub step: u64,
}

impl Checkpoint {
    pub fn from_model(model: &FutureX, adam: Option<&AdamState>, digest: [u8; 32]) -> Self {
        let names = model.params.names();
        let mut tensors: Vec<(String, Tensor)> = names.iter().cloned().zip(model.params.tensors().iter().cloned()).collect();
        if let Some(a) = adam {
            tensors.extend(names.iter().zip(&a.m).map(|(n, t)| (format!("adam.m.{n}"), t.clone())));
            tensors.extend(names.iter().zip(&a.v).map(|(n, t)| (format!("adam.v.{n}"), t.clone())));
        }
        Self { digest, tensors, step: adam.map_or(0, |a| a.step) }
    }

    fn find(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copies every model parameter from the checkpoint by name.
    pub fn apply_to(&self, model: &mut FutureX) -> Result<()> {
        let names = model.params.names().to_vec();
        for (i, name) in names.iter().enumerate() {
            let t = self.find(name).ok_or_else(|| Error::Format(format!("checkpoint lacks parameter {name}")))?;
            model.params.set(crate::nn::ParamId(i), t.clone())?;
        }
        Ok(())
    }

    /// Optimizer state matching `model`, if the checkpoint carries moments.
    pub fn adam_state(&self, model: &FutureX, config: AdamConfig) -> Result<Option<AdamState>> {
        let names = model.params.names();
        if self.find(&format!("adam.m.{}", names[0])).is_none() {
            return Ok(None);
        }
        let mut st = AdamState::new(config, model.params.tensors());
        for (i, n) in names.iter().enumerate() {
            for (tag, slot) in [("m", &mut st.m[i]), ("v", &mut st.v[i])] {
                let t = self.find(&format!("adam.{tag}.{n}")).ok_or_else(|| Error::Format(format!("checkpoint lacks adam.{tag}.{n}")))?;
                if t.shape() != slot.shape() {
                    return Err(crate::error::shape_err("checkpoint", slot.shape(), t.shape()));
                }
                *slot = t.clone();
            }
        }
        st.step = self.step;
        Ok(Some(st))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        MAGIC.iter().for_each(|&b| w.u8(b));
        w.u32(VERSION);
        self.digest.iter().for_each(|&b| w.u8(b));
        w.u64(self.tensors.len() as u64);
        for (name, t) in &self.tensors {
            w.u32(name.len() as u32);
            w.bytes(name.as_bytes());
            w.u32(t.rank() as u32);
            t.shape().iter().for_each(|&d| w.u64(d as u64));
            w.u8(DTYPE_F64);
            t.data().iter().for_each(|&v| w.f64(v));
        }
        w.u64(self.step);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not an FXCK checkpoint".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let digest: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let count = r.u64()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| Ok(r.u64()? as usize)).collect::<Result<Vec<_>>>()?;
            let tag = r.u8()?;
            if tag != DTYPE_F64 {
                return Err(Error::Format(format!("unknown dtype tag {tag} for {name}")));
            }
            let n: usize = shape.iter().product();
            if n.checked_mul(8).is_none_or(|b| b > r.remaining()) {
                return Err(Error::Format(format!("tensor {name} overruns the file")));
            }
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            tensors.push((name, Tensor::new(shape, data)?));
        }
        let step = r.u64()?;
        r.finish()?;
        Ok(Self { digest, tensors, step })
    }
}

/// Writes through a temporary file so an interrupted save never replaces a
/// good checkpoint with a partial one.
pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, ck.to_bytes())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a checkpoint, refusing it if `expected` is given and differs.
pub fn load_checkpoint(path: &Path, expected: Option<&[u8; 32]>) -> Result<Checkpoint> {
    let ck = Checkpoint::from_bytes(&std::fs::read(path)?)?;
    if let Some(e) = expected {
        if e != &ck.digest {
            return Err(Error::DigestMismatch { expected: hex(e), found: hex(&ck.digest) });
        }
    }
    Ok(ck)
}
