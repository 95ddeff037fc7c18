//! Splittable, reproducible random streams.
//!
//! A stream is addressed by `(seed, stream_id)`. The generator behind it is
//! ChaCha8 keyed from the seed with the stream id selecting the ChaCha
//! stream, so sequences are identical across runs and platforms and two
//! different stream ids never overlap.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::tensor::{validate_shape, FeatureTensor, TensorRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Root stream for a master seed.
    pub fn root(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Child stream named by `label`. See [`substream`].
    pub fn substream(&self, label: &str) -> RngStream {
        substream(*self, label)
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Derives a child stream whose id is the first eight bytes of
/// `SHA-256(parent_id_le || label)`. The seed is inherited.
pub fn substream(parent: RngStream, label: &str) -> RngStream {
    let mut hasher = Sha256::new();
    hasher.update(parent.stream_id.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut id = [0u8; 8];
    id.copy_from_slice(&digest[..8]);
    RngStream::new(parent.seed, u64::from_le_bytes(id))
}

/// Tensor of i.i.d. standard normal values drawn from `stream`.
pub fn gaussian_tensor(shape: &[usize], stream: RngStream) -> Result<FeatureTensor> {
    validate_shape(shape)?;
    let n: usize = shape.iter().product();
    let mut rng = stream.rng();
    let values = standard_normals(&mut rng, n);
    Ok(FeatureTensor::from_parts(
        shape.to_vec(),
        values,
        TensorRole::Seed,
    ))
}

pub(crate) fn standard_normals<R: RngCore>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
