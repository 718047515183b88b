//! Binary chain container.
//!
//! ```text
//! magic      8 bytes  "DPMENCHN"
//! hlen       u64 LE   length of the header
//! header     hlen bytes of UTF-8 JSON (ChainHeader)
//! draws      n_draws blocks of f64 LE:
//!            sticks[J-1] weights[J] alpha beta[J*p] sigma2[J] tau[J*p]
//!            z[n] c[J] w[K] lambda1[K] lambda2[K]
//! ```
//!
//! Indicators are stored as exact small integers in f64.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{file_err, IoError, SCHEMA_VERSION};
use crate::linalg::Matrix;
use crate::model::{ChainState, Hyperparameters, PosteriorChain};

pub const CHAIN_MAGIC: &[u8; 8] = b"DPMENCHN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub schema_version: u32,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_components: usize,
    pub n_nets: usize,
    pub n_draws: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub class_id: String,
    pub relabeled: bool,
    pub hyper: Hyperparameters,
}

impl ChainHeader {
    fn of(chain: &PosteriorChain) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n_samples: chain.n_samples,
            n_features: chain.n_features,
            n_components: chain.hyper.truncation,
            n_nets: chain.hyper.n_nets,
            n_draws: chain.draws.len(),
            n_chains: chain.n_chains,
            seed: chain.seed,
            class_id: chain.class_id.clone(),
            relabeled: chain.relabeled,
            hyper: chain.hyper.clone(),
        }
    }

    /// Number of f64 values per draw.
    pub fn block_len(&self) -> usize {
        let (n, p, j, k) = (self.n_samples, self.n_features, self.n_components, self.n_nets);
        (j - 1) + j + 1 + j * p + j + j * p + n + j + 3 * k
    }

    fn check(&self) -> Result<(), IoError> {
        let fail = |m: String| Err(IoError::Persistence(m));
        if self.schema_version != SCHEMA_VERSION {
            return Err(IoError::SchemaVersion { found: self.schema_version, expected: SCHEMA_VERSION });
        }
        if self.n_components == 0 || self.n_nets == 0 || self.n_features == 0 {
            return fail("header has a zero dimension".into());
        }
        if self.hyper.truncation != self.n_components || self.hyper.n_nets != self.n_nets {
            return fail("header dimensions disagree with its hyperparameters".into());
        }
        Ok(())
    }
}

pub fn encode_chain(chain: &PosteriorChain) -> Vec<u8> {
    let header = serde_json::to_vec(&ChainHeader::of(chain)).expect("chain header serializes");
    let block = ChainHeader::of(chain).block_len();
    let mut out = Vec::with_capacity(16 + header.len() + 8 * block * chain.draws.len());
    out.extend_from_slice(CHAIN_MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
    for d in &chain.draws {
        d.sticks.iter().for_each(|&v| put(v));
        d.weights.iter().for_each(|&v| put(v));
        put(d.alpha);
        d.beta.as_slice().iter().for_each(|&v| put(v));
        d.sigma2.iter().for_each(|&v| put(v));
        d.tau.as_slice().iter().for_each(|&v| put(v));
        d.assignments.iter().for_each(|&z| put(z as f64));
        d.net_of.iter().for_each(|&c| put(c as f64));
        d.net_weights.iter().for_each(|&v| put(v));
        d.lambda1.iter().for_each(|&v| put(v));
        d.lambda2.iter().for_each(|&v| put(v));
    }
    out
}

/// Parse a container. The header and total size are checked before any
/// draw is read.
pub fn decode_chain(bytes: &[u8]) -> Result<PosteriorChain, IoError> {
    let fail = |m: &str| IoError::Persistence(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != CHAIN_MAGIC {
        return Err(fail("not a chain container"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let body = &bytes[16..];
    if hlen > body.len() as u64 {
        return Err(fail("truncated header"));
    }
    let (head, data) = body.split_at(hlen as usize);
    let header: ChainHeader =
        serde_json::from_slice(head).map_err(|e| IoError::Persistence(format!("bad header: {e}")))?;
    header.check()?;
    let block = header.block_len();
    let expected = header
        .n_draws
        .checked_mul(block)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| fail("header sizes overflow"))?;
    if data.len() != expected {
        return Err(IoError::Persistence(format!(
            "expected {expected} bytes of draws for the header's dimensions, found {}",
            data.len()
        )));
    }

    let (n, p, j, k) = (header.n_samples, header.n_features, header.n_components, header.n_nets);
    let mut values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |len: usize| -> Vec<f64> { values.by_ref().take(len).collect() };
    let index = |v: Vec<f64>, bound: usize, what: &str| -> Result<Vec<usize>, IoError> {
        v.into_iter()
            .map(|x| {
                if x >= 0.0 && x < bound as f64 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(IoError::Persistence(format!("{what} value {x} is not an index below {bound}")))
                }
            })
            .collect()
    };
    let mut draws = Vec::with_capacity(header.n_draws);
    for _ in 0..header.n_draws {
        let sticks = take(j - 1);
        let weights = take(j);
        let alpha = take(1)[0];
        let beta = Matrix::from_row_major(j, p, take(j * p));
        let sigma2 = take(j);
        let tau = Matrix::from_row_major(j, p, take(j * p));
        let assignments = index(take(n), j, "assignment")?;
        let net_of = index(take(j), k, "elastic-net indicator")?;
        draws.push(ChainState {
            sticks,
            weights,
            alpha,
            beta,
            sigma2,
            tau,
            assignments,
            net_of,
            net_weights: take(k),
            lambda1: take(k),
            lambda2: take(k),
        });
    }
    Ok(PosteriorChain {
        draws,
        hyper: header.hyper,
        relabeled: header.relabeled,
        seed: header.seed,
        class_id: header.class_id,
        n_samples: n,
        n_features: p,
        n_chains: header.n_chains,
    })
}

pub fn write_chain(path: &Path, chain: &PosteriorChain) -> Result<(), IoError> {
    std::fs::write(path, encode_chain(chain)).map_err(file_err(path))
}

pub fn read_chain(path: &Path) -> Result<PosteriorChain, IoError> {
    let bytes = std::fs::read(path).map_err(file_err(path))?;
    decode_chain(&bytes).map_err(|e| match e {
        IoError::Persistence(m) => IoError::Persistence(format!("{}: {m}", path.display())),
        other => other,
    })
}
