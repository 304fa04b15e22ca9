//! Checkpoint layout, all integers little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `LSEGCKPT`                          |
//! | 4     | format version (`u32`)                    |
//! | 4     | config length `n` (`u32`)                 |
//! | n     | segmentor config as UTF-8 JSON            |
//! | 8     | parameter count `p` (`u64`)               |
//! | 4 * p | parameters as `f32`, in declaration order |

use std::path::Path;

use super::config::SegmentorConfig;
use super::network::Segmentor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LSEGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::IncompatibleCheckpoint(msg.into())
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(bad("checkpoint truncated"));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

impl Segmentor<f32> {
    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>> {
        let config = serde_json::to_vec(self.config()).map_err(|e| Error::Config(e.to_string()))?;
        let mut out = Vec::with_capacity(24 + config.len() + 4 * self.params().len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&(self.params().len() as u64).to_le_bytes());
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_checkpoint_bytes(mut bytes: &[u8]) -> Result<Self> {
        if take(&mut bytes, 8)? != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let len = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().unwrap()) as usize;
        let cfg: SegmentorConfig =
            serde_json::from_slice(take(&mut bytes, len)?).map_err(|e| bad(format!("config: {e}")))?;
        let count = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().unwrap()) as usize;
        let blob = take(
            &mut bytes,
            count.checked_mul(4).ok_or_else(|| bad("parameter count overflow"))?,
        )?;
        if !bytes.is_empty() {
            return Err(bad(format!("{} trailing bytes", bytes.len())));
        }
        let params = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Segmentor::from_params(cfg, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Loads a checkpoint and checks it matches `cfg`'s architecture. The
    /// returned model keeps `cfg`'s runtime settings.
    pub fn load_for(path: &Path, cfg: &SegmentorConfig) -> Result<Self> {
        let loaded = Self::load(path)?;
        if !loaded.config().same_architecture(cfg) {
            return Err(bad(format!(
                "{} was trained with widths {:?}, depths {:?}, {} classes; config asks for {:?}, {:?}, {}",
                path.display(),
                loaded.config().widths,
                loaded.config().depths,
                loaded.config().num_classes,
                cfg.widths,
                cfg.depths,
                cfg.num_classes
            )));
        }
        Segmentor::from_params(cfg.clone(), loaded.params().to_vec())
    }
}
