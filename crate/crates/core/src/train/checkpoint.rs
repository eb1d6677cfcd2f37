//! Versioned binary checkpoints: lossless round-trip of the full training
//! state including the RNG position, guarded by the parameter-layout
//! fingerprint so a checkpoint can never silently load into a different
//! architecture.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::nets::{init_glorot, Network, NetworkConfig};
use crate::weighting::LossWeights;

use super::{LrSchedule, TrainState};

const MAGIC: &[u8; 8] = b"PINNCKPT";
const VERSION: u32 = 1;

/// A loaded checkpoint: enough to rebuild the network (config + seed) and
/// resume training exactly.
pub struct CheckpointData {
    pub net_config: NetworkConfig,
    pub net_seed: u64,
    pub state: TrainState,
}

impl CheckpointData {
    /// Rebuild the network deterministically from its construction seed.
    pub fn rebuild_network(&self) -> Result<Network> {
        init_glorot(&self.net_config, self.net_seed)
    }
}

fn rng_word_pos(rng: &ChaCha8Rng) -> u128 {
    rng.get_word_pos()
}

pub fn save_checkpoint(
    path: &Path,
    net: &Network,
    state: &TrainState,
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());

    let cfg_json = serde_json::to_string(net.config())
        .map_err(|e| Error::Checkpoint(format!("config serialization: {e}")))?;
    buf.extend_from_slice(&(cfg_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(cfg_json.as_bytes());
    buf.extend_from_slice(&net.seed().to_le_bytes());
    buf.extend_from_slice(&net.layout().fingerprint().to_le_bytes());

    buf.extend_from_slice(&state.step.to_le_bytes());
    buf.extend_from_slice(&state.lr.eta0.to_le_bytes());
    buf.extend_from_slice(&state.lr.decay_rate.to_le_bytes());
    buf.extend_from_slice(&state.lr.decay_steps.to_le_bytes());
    buf.extend_from_slice(&state.lr.warmup_steps.to_le_bytes());

    let w = &state.weights;
    buf.extend_from_slice(&w.lambda_ic.to_le_bytes());
    buf.extend_from_slice(&w.lambda_bc.to_le_bytes());
    buf.extend_from_slice(&w.lambda_r.to_le_bytes());
    buf.extend_from_slice(&w.epsilon.to_le_bytes());
    buf.extend_from_slice(&w.alpha.to_le_bytes());
    buf.extend_from_slice(&w.update_every.to_le_bytes());
    buf.extend_from_slice(&(w.w.len() as u64).to_le_bytes());
    for v in &w.w {
        buf.extend_from_slice(&v.to_le_bytes());
    }

    for vec in [&state.params, &state.m, &state.v] {
        buf.extend_from_slice(&(vec.len() as u64).to_le_bytes());
        for v in vec.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    buf.extend_from_slice(&rng_seed_bytes(&state.rng));
    buf.extend_from_slice(&rng_word_pos(&state.rng).to_le_bytes());

    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

fn rng_seed_bytes(rng: &ChaCha8Rng) -> [u8; 32] {
    rng.get_seed()
}

struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("unexpected end of checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointData> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let cfg_len = r.u32()? as usize;
    let cfg_json = String::from_utf8(r.take(cfg_len)?.to_vec())
        .map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
    let net_config: NetworkConfig = serde_json::from_str(&cfg_json)
        .map_err(|e| Error::Checkpoint(format!("config parse: {e}")))?;
    let net_seed = r.u64()?;
    let fingerprint = r.u64()?;

    let net = init_glorot(&net_config, net_seed)?;
    if net.layout().fingerprint() != fingerprint {
        return Err(Error::Checkpoint(format!(
            "layout fingerprint mismatch: file {fingerprint:#x}, rebuilt {:#x} \
             (checkpoint from an incompatible network configuration)",
            net.layout().fingerprint()
        )));
    }

    let step = r.u64()?;
    let lr = LrSchedule {
        eta0: r.f64()?,
        decay_rate: r.f64()?,
        decay_steps: r.u64()?,
        warmup_steps: r.u64()?,
    };
    let lambda_ic = r.f64()?;
    let lambda_bc = r.f64()?;
    let lambda_r = r.f64()?;
    let epsilon = r.f64()?;
    let alpha = r.f64()?;
    let update_every = r.u64()?;
    let w_len = r.u64()? as usize;
    let w: Vec<f64> = (0..w_len).map(|_| r.f64()).collect::<Result<_>>()?;
    let weights = LossWeights {
        lambda_ic,
        lambda_bc,
        lambda_r,
        w,
        epsilon,
        alpha,
        update_every,
    };

    let layout = net.layout().clone();
    let expect = layout.total_len();
    let mut vecs = Vec::with_capacity(3);
    for name in ["params", "m", "v"] {
        let data = r.f64_vec()?;
        if data.len() != expect {
            return Err(Error::Checkpoint(format!(
                "{name} has {} entries, layout expects {expect}",
                data.len()
            )));
        }
        vecs.push(ParamVector::from_data(layout.clone(), data));
    }
    let v = vecs.pop().unwrap();
    let m = vecs.pop().unwrap();
    let params = vecs.pop().unwrap();

    let seed_bytes: [u8; 32] = r.take(32)?.try_into().unwrap();
    let word_pos = r.u128()?;
    let mut rng = ChaCha8Rng::from_seed(seed_bytes);
    rng.set_word_pos(word_pos);

    Ok(CheckpointData {
        net_config,
        net_seed,
        state: TrainState {
            params,
            m,
            v,
            step,
            weights,
            rng,
            lr,
        },
    })
}
