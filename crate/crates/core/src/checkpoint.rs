//! Binary checkpoint container: model parameters, the schedule they were
//! trained under, and optionally a warm memory bank.
//!
//! Layout (all integers and reals little-endian, reals are `f64`):
//!
//! ```text
//! magic "IETCKPT\0" | version u32
//! d u64 | hidden u64 | time_embed u64 | T u64 | epochs_done u64
//! betas T×f64
//! param_count u64 | params param_count×f64
//! bank flag u8 | [gamma f64 | levels T×f64 | update counts T×u64]
//! ```

use std::fs;
use std::path::Path;

use crate::agc::MemoryBank;
use crate::data::ByteReader;
use crate::denoiser::{Architecture, DenoiserParams};
use crate::error::{Error, Result};
use crate::schedule::Schedule;

const MAGIC: &[u8; 8] = b"IETCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: DenoiserParams,
    pub schedule: Schedule,
    pub bank: Option<MemoryBank>,
    /// Total training epochs behind these parameters.
    pub epochs_done: usize,
}

impl Checkpoint {
    pub fn new(
        params: DenoiserParams,
        schedule: Schedule,
        bank: Option<MemoryBank>,
        epochs_done: usize,
    ) -> Result<Self> {
        if let Some(b) = &bank {
            if b.steps() != schedule.steps() {
                return Err(Error::shape(format!(
                    "bank covers {} timesteps, schedule has {}",
                    b.steps(),
                    schedule.steps()
                )));
            }
        }
        Ok(Self {
            params,
            schedule,
            bank,
            epochs_done,
        })
    }

    /// Short human-readable descriptor used in compatibility errors.
    pub fn descriptor(&self) -> String {
        let a = self.params.architecture();
        format!(
            "checkpoint(d={}, hidden={}, time_embed={}, T={})",
            a.data_dim,
            a.hidden,
            a.time_embed,
            self.schedule.steps()
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let a = self.params.architecture();
        let flat = self.params.as_flat();
        let mut out = Vec::with_capacity(64 + 8 * (flat.len() + 3 * self.schedule.steps()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for v in [
            a.data_dim,
            a.hidden,
            a.time_embed,
            self.schedule.steps(),
            self.epochs_done,
        ] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for b in self.schedule.betas() {
            out.extend_from_slice(&b.to_le_bytes());
        }
        out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &self.bank {
            None => out.push(0),
            Some(bank) => {
                out.push(1);
                out.extend_from_slice(&bank.gamma().to_le_bytes());
                for l in bank.levels() {
                    out.extend_from_slice(&l.to_le_bytes());
                }
                for c in bank.update_counts() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        out
    }

    /// Parses container bytes; `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |reason: &str| Error::Corrupt {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut r = ByteReader::new(bytes);
        if r.take(MAGIC.len()).ok_or_else(|| corrupt("truncated header"))? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut header = [0usize; 5];
        for h in &mut header {
            *h = r.u64().ok_or_else(|| corrupt("truncated header"))? as usize;
        }
        let [data_dim, hidden, time_embed, steps, epochs_done] = header;
        if r.remaining() / 8 < steps {
            return Err(corrupt("truncated schedule"));
        }
        let betas: Vec<f64> = (0..steps).map(|_| r.f64().unwrap()).collect();
        let schedule = Schedule::from_betas(betas).map_err(|e| corrupt(&e.to_string()))?;

        let count = r.u64().ok_or_else(|| corrupt("truncated parameter block"))? as usize;
        if r.remaining() / 8 < count {
            return Err(corrupt("truncated parameter block"));
        }
        let flat: Vec<f64> = (0..count).map(|_| r.f64().unwrap()).collect();
        let arch = Architecture {
            data_dim,
            hidden,
            time_embed,
        };
        let params = DenoiserParams::from_flat(arch, flat).map_err(|e| corrupt(&e.to_string()))?;

        let bank = match r.take(1).ok_or_else(|| corrupt("missing bank flag"))?[0] {
            0 => None,
            1 => {
                let gamma = r.f64().ok_or_else(|| corrupt("truncated bank"))?;
                if r.remaining() / 16 < steps {
                    return Err(corrupt("truncated bank"));
                }
                let levels = (0..steps).map(|_| r.f64().unwrap()).collect();
                let counts = (0..steps).map(|_| r.u64().unwrap()).collect();
                Some(MemoryBank::from_parts(levels, gamma, counts).map_err(|e| corrupt(&e.to_string()))?)
            }
            _ => return Err(corrupt("bad bank flag")),
        };
        if r.remaining() != 0 {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self {
            params,
            schedule,
            bank,
            epochs_done,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?, path)
    }
}
