//! Training checkpoints.
//!
//! Layout: magic `TST1`, completed epochs (`u64`), next learning rate
//! (`f64`), phase (`u8`: 0 constant, 1 halving, 2 stopped), best epoch
//! (`u64`, 0 for none), history length (`u32`) and CV errors (`f64`), the
//! current network (`u64` byte length + NNG1 image), then a presence byte
//! and the best network in the same form. Little-endian throughout.

use std::fs;
use std::path::Path;

use super::schedule::{Phase, TrainConfig, TrainState};
use crate::error::{Error, Result};
use crate::nn::{put_u32, ByteReader, NetworkGraph};

pub const TRAIN_MAGIC: &[u8; 4] = b"TST1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainCheckpoint {
    pub net: NetworkGraph,
    pub state: TrainState,
    pub best: Option<NetworkGraph>,
}

fn put_net(out: &mut Vec<u8>, net: &NetworkGraph) {
    let bytes = net.to_bytes();
    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&bytes);
}

fn get_net(r: &mut ByteReader) -> Result<NetworkGraph> {
    let len = usize::try_from(r.u64()?).map_err(|_| Error::Corrupt("network length overflows".into()))?;
    NetworkGraph::from_bytes(r.take(len)?)
}

impl TrainCheckpoint {
    pub fn new(net: NetworkGraph, cfg: &TrainConfig) -> Self {
        Self {
            net,
            state: TrainState::new(cfg),
            best: None,
        }
    }

    /// The lowest-CV network, or the current one before any epoch.
    pub fn into_best(self) -> NetworkGraph {
        self.best.unwrap_or(self.net)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.state;
        let mut out = Vec::new();
        out.extend_from_slice(TRAIN_MAGIC);
        out.extend_from_slice(&(s.epoch as u64).to_le_bytes());
        out.extend_from_slice(&s.lr.to_le_bytes());
        out.push(match s.phase {
            Phase::Constant => 0,
            Phase::Halving => 1,
            Phase::Stopped => 2,
        });
        out.extend_from_slice(&(s.best_epoch.unwrap_or(0) as u64).to_le_bytes());
        put_u32(&mut out, s.cv_error_history.len());
        for e in &s.cv_error_history {
            out.extend_from_slice(&e.to_le_bytes());
        }
        put_net(&mut out, &self.net);
        match &self.best {
            Some(b) => {
                out.push(1);
                put_net(&mut out, b);
            }
            None => out.push(0),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(TRAIN_MAGIC)?;
        let epoch = r.u64()? as usize;
        let lr = r.f64()?;
        let phase = match r.u8()? {
            0 => Phase::Constant,
            1 => Phase::Halving,
            2 => Phase::Stopped,
            other => return Err(Error::Corrupt(format!("phase tag {other}"))),
        };
        let best_epoch = match r.u64()? as usize {
            0 => None,
            e => Some(e),
        };
        let n = r.usize()?;
        let history = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if history.len() != epoch || best_epoch.is_some_and(|b| b > epoch) {
            return Err(Error::Corrupt("training state is inconsistent".into()));
        }
        let net = get_net(&mut r)?;
        let best = match r.u8()? {
            0 => None,
            1 => Some(get_net(&mut r)?),
            other => return Err(Error::Corrupt(format!("presence tag {other}"))),
        };
        if !r.is_empty() {
            return Err(Error::Corrupt("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            net,
            state: TrainState {
                epoch,
                lr,
                cv_error_history: history,
                best_epoch,
                phase,
            },
            best,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub fn save_checkpoint(net: &NetworkGraph, state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    TrainCheckpoint {
        net: net.clone(),
        state: state.clone(),
        best: None,
    }
    .save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(NetworkGraph, TrainState)> {
    let c = TrainCheckpoint::load(path)?;
    Ok((c.net, c.state))
}
