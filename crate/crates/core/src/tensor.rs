//! Feature tensors exchanged between pipeline halves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a tensor stands for inside a generation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorRole {
    Seed,
    Sketch,
    Prompt,
    Image,
}

/// Dense row-major array of finite reals with a role tag.
///
/// The constructor is the only way in, so every live tensor satisfies
/// `product(shape) == values.len()` and holds no NaN or infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    role: TensorRole,
}

impl FeatureTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>, role: TensorRole) -> Result<Self> {
        let expected = shape_len(&shape);
        if expected != values.len() {
            return Err(Error::shape(
                &shape,
                format!("holds {} values but shape implies {expected}", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(Self {
            shape,
            values,
            role,
        })
    }

    /// One-dimensional tensor over `values`.
    pub fn from_vec(values: Vec<f64>, role: TensorRole) -> Result<Self> {
        let n = values.len();
        Self::new(vec![n], values, role)
    }

    pub fn filled(shape: Vec<usize>, value: f64, role: TensorRole) -> Result<Self> {
        let n = shape_len(&shape);
        Self::new(shape, vec![value; n], role)
    }

    /// Builds a tensor from values the caller has already checked.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<f64>, role: TensorRole) -> Self {
        debug_assert_eq!(shape_len(&shape), values.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            shape,
            values,
            role,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn role(&self) -> TensorRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_role(mut self, role: TensorRole) -> Self {
        self.role = role;
        self
    }

    /// Same values under a new shape with equal element count.
    pub fn reshaped(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.values, self.role)
    }

    /// Mean of squared values.
    pub fn mean_power(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub(crate) fn ensure_same_shape(&self, other: &FeatureTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                found: other.shape.clone(),
            });
        }
        Ok(())
    }
}

/// Number of elements implied by `shape`.
pub fn shape_len(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Rejects empty shapes and zero-sized dimensions.
pub fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::shape(shape, "shape must have at least one dimension"));
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::shape(shape, "dimensions must be at least 1"));
    }
    Ok(())
}
