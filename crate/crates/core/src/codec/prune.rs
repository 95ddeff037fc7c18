//! Magnitude pruning: keep the `k` largest entries as an index/value list.

use crate::error::{Error, Result};
use crate::tensor::FeatureTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePayload {
    pub shape: Vec<usize>,
    /// Kept positions in ascending order.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub payload_bits: u64,
}

/// Bits needed to address one of `n` positions.
pub fn index_bits(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Payload of `k` kept entries out of `n`: a 16-bit value and an index each.
pub fn pruned_payload_bits(n: usize, k: usize) -> u64 {
    k as u64 * (16 + index_bits(n) as u64)
}

pub fn prune_topk(t: &FeatureTensor, keep: usize) -> Result<SparsePayload> {
    let n = t.len();
    if keep == 0 || keep > n {
        return Err(Error::OutOfRange(format!("keep must lie in [1, {n}], got {keep}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let v = t.values();
    // Descending magnitude; equal magnitudes keep the lower index.
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let mut indices = order[..keep].to_vec();
    indices.sort_unstable();
    let values = indices.iter().map(|&i| v[i]).collect();
    Ok(SparsePayload {
        shape: t.shape().to_vec(),
        indices,
        values,
        payload_bits: pruned_payload_bits(n, keep),
    })
}

impl SparsePayload {
    /// Dense tensor with zeros at pruned positions.
    pub fn to_dense(&self, role: crate::tensor::TensorRole) -> FeatureTensor {
        let n: usize = self.shape.iter().product();
        let mut dense = vec![0.0; n];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            dense[i] = v;
        }
        FeatureTensor::from_parts(self.shape.clone(), dense, role)
    }
}
