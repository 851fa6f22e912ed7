use serde::{Deserialize, Serialize};

use crate::protocols::Wire;
use crate::ring::RingParams;

use super::NnError;

/// Plaintext tensor of raw fixed-point values at scale `2^d`, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<i128>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<i128>) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NnError::Shape(format!(
                "shape {shape:?} holds {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0; len],
        }
    }

    pub fn from_f64(shape: Vec<usize>, values: &[f64], params: &RingParams) -> Result<Self, NnError> {
        let scale = (params.d as f64).exp2();
        Self::new(shape, values.iter().map(|v| (v * scale).round() as i128).collect())
    }

    pub fn to_f64(&self, params: &RingParams) -> Vec<f64> {
        self.data.iter().map(|&r| r as f64 * params.ulp()).collect()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Wires of a secret tensor. The shape is public.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecureTensor {
    pub shape: Vec<usize>,
    pub wires: Vec<Wire>,
}

impl SecureTensor {
    pub fn new(shape: Vec<usize>, wires: Vec<Wire>) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != wires.len() {
            return Err(NnError::Shape(format!(
                "shape {shape:?} does not fit {} wires",
                wires.len()
            )));
        }
        Ok(Self { shape, wires })
    }

    pub fn len(&self) -> usize {
        self.wires.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wires.is_empty()
    }
}

/// Spatial view `(channels, height, width)` of a shape; flat shapes are
/// `(len, 1, 1)`.
pub fn chw(shape: &[usize]) -> (usize, usize, usize) {
    match *shape {
        [c, h, w] => (c, h, w),
        [h, w] => (1, h, w),
        _ => (shape.iter().product(), 1, 1),
    }
}
