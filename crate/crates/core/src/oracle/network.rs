//! Plaintext fixed-point evaluation of a layer stack.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::nn::layers::{bn_multipliers, bn_shift, pool_windows, reciprocal, tree_depth, LayerSpec};
use crate::nn::tensor::{chw, Tensor};
use crate::ring::RingParams;

use super::exact::{floor_shift, poly_fixed, pow2};
use super::OracleError;

/// How activations and max pooling are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    /// The layer's polynomial, floored to the grid, with the same comparison
    /// tree as the secure max pool.
    Poly,
    /// True ReLU and true maximum.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRun {
    pub shape: Vec<usize>,
    pub logits: Vec<i128>,
    /// Output of every layer.
    pub layers: Vec<Vec<i128>>,
    /// Floors on the longest path from input to output.
    pub truncations: usize,
}

/// Evaluates `model` on `input` with floor truncation after every
/// fixed-point product.
pub fn eval_network(
    model: &[LayerSpec],
    input: &Tensor,
    params: &RingParams,
    act: Activation,
) -> Result<OracleRun, OracleError> {
    let d = params.d;
    let limit = pow2(params.l - 1);
    let mut shape = input.shape.clone();
    let mut x: Vec<BigInt> = input.data.iter().map(|&v| BigInt::from(v)).collect();
    let mut layers = Vec::with_capacity(model.len());
    let mut truncations = 0;
    for (li, layer) in model.iter().enumerate() {
        let out_shape = layer
            .output_shape(&shape)
            .map_err(|e| OracleError::Model(format!("layer {li}: {e}")))?;
        let (c, h, w) = chw(&shape);
        x = match layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                weights,
                bias,
                ..
            } => {
                let (oh, ow) = (out_shape[1], out_shape[2]);
                let mut out = Vec::with_capacity(out_channels * oh * ow);
                for oc in 0..*out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = BigInt::from(0);
                            for ic in 0..c {
                                for ky in 0..*kernel {
                                    for kx in 0..*kernel {
                                        let xi = &x[ic * h * w + (oy * stride + ky) * w + ox * stride + kx];
                                        let wi = weights[((oc * c + ic) * kernel + ky) * kernel + kx];
                                        acc += xi * wi;
                                    }
                                }
                            }
                            let b = bias.get(oc).copied().unwrap_or(0);
                            out.push(floor_shift(&acc, d) + b);
                        }
                    }
                }
                truncations += 1;
                out
            }
            LayerSpec::Fc {
                out_features,
                weights,
                bias,
                ..
            } => {
                let fan_in = x.len();
                truncations += 1;
                (0..*out_features)
                    .map(|o| {
                        let acc: BigInt = (0..fan_in).map(|i| &x[i] * weights[o * fan_in + i]).sum();
                        floor_shift(&acc, d) + bias.get(o).copied().unwrap_or(0)
                    })
                    .collect()
            }
            LayerSpec::AvgPool { window } => {
                let (_, groups) = pool_windows(&shape, *window);
                let recip = reciprocal(window * window, params);
                truncations += 1;
                groups
                    .iter()
                    .map(|g| {
                        let sum: BigInt = g.iter().map(|&i| &x[i]).sum();
                        floor_shift(&(sum * recip), d)
                    })
                    .collect()
            }
            LayerSpec::MaxPool { window } => {
                let (_, groups) = pool_windows(&shape, *window);
                let (coeffs, _) = crate::nn::layers::activation_after(model, li, params);
                let depth = tree_depth(window * window);
                truncations += match act {
                    Activation::Poly => depth * (2 * coeffs.len()),
                    Activation::Exact => 0,
                };
                groups
                    .iter()
                    .map(|g| {
                        let vals: Vec<BigInt> = g.iter().map(|&i| x[i].clone()).collect();
                        match act {
                            Activation::Exact => vals.into_iter().max().expect("non-empty window"),
                            Activation::Poly => poly_max(vals, &coeffs, d),
                        }
                    })
                    .collect()
            }
            LayerSpec::BatchNorm {
                gamma,
                beta,
                var,
                mean,
                eps,
            } => {
                let mult = bn_multipliers(*gamma, var, *eps, params)
                    .map_err(|e| OracleError::Model(format!("layer {li}: {e}")))?;
                let shift = bn_shift(*beta, params);
                let plane = h * w;
                truncations += 1;
                x.iter()
                    .enumerate()
                    .map(|(i, xi)| {
                        let ch = i / plane;
                        floor_shift(&((xi - mean[ch]) * mult[ch]), d) + shift
                    })
                    .collect()
            }
            LayerSpec::ReluPoly { coeffs, .. } => match act {
                Activation::Exact => x.iter().map(|v| v.clone().max(BigInt::from(0))).collect(),
                Activation::Poly => {
                    truncations += coeffs.len() - 1;
                    x.iter().map(|v| poly_fixed(coeffs, d, v)).collect()
                }
            },
        };
        shape = out_shape;
        let raw: Vec<i128> = x
            .iter()
            .map(|v| {
                if v.magnitude() >= limit.magnitude() {
                    return Err(OracleError::Overflow {
                        node: li,
                        raw: v.to_string(),
                    });
                }
                Ok(v.to_i128().expect("below 2^(l-1)"))
            })
            .collect::<Result<_, _>>()?;
        layers.push(raw);
    }
    let logits = x.iter().map(|v| v.to_i128().expect("checked")).collect();
    Ok(OracleRun {
        shape,
        logits,
        layers,
        truncations,
    })
}

/// Pairwise tree `max(a, b) = b + 2·p(floor((a - b)/2))`, pairing in order.
fn poly_max(mut level: Vec<BigInt>, coeffs: &[i128], d: u32) -> BigInt {
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => b + 2 * poly_fixed(coeffs, d, &floor_shift(&(a - b), 1)),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    level.pop().expect("non-empty window")
}

/// Index of the largest logit; the first wins ties.
pub fn argmax(values: &[i128]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, i128)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> RingParams {
        RingParams::default()
    }

    #[test]
    fn argmax_first_wins() {
        assert_eq!(argmax(&[1, 5, 5, 2]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn identity_conv() {
        let input = Tensor::new(vec![1, 2, 2], vec![65536, -32768, 7, 0]).unwrap();
        let model = [LayerSpec::Conv {
            out_channels: 1,
            kernel: 1,
            stride: 1,
            weights: vec![65536],
            bias: vec![],
            public: true,
        }];
        let run = eval_network(&model, &input, &p(), Activation::Exact).unwrap();
        assert_eq!(run.logits, input.data);
        assert_eq!(run.truncations, 1);
    }

    #[test]
    fn avg_pool_of_one_to_four() {
        let input = Tensor::from_f64(vec![1, 2, 2], &[1.0, 2.0, 3.0, 4.0], &p()).unwrap();
        let run = eval_network(&[LayerSpec::AvgPool { window: 2 }], &input, &p(), Activation::Exact).unwrap();
        assert_eq!(run.logits, vec![163840]);
    }

    #[test]
    fn bn_scales_standardized_input() {
        let input = Tensor::from_f64(vec![1, 1, 1], &[3.0], &p()).unwrap();
        let bn = LayerSpec::BatchNorm {
            gamma: 1.67,
            beta: 0.0,
            mean: vec![0],
            var: vec![65536],
            eps: 1e-5,
        };
        let run = eval_network(&[bn], &input, &p(), Activation::Exact).unwrap();
        assert!((run.logits[0] as f64 / 65536.0 - 5.01).abs() <= 2.0 / 65536.0);
    }

    #[test]
    fn reordering_identity_with_exact_relu() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        let relu = LayerSpec::ReluPoly {
            coeffs: vec![0, 65536],
            bound: 5.0,
        };
        for _ in 0..100 {
            let data: Vec<i128> = (0..16).map(|_| rng.gen_range(-300_000..300_000)).collect();
            let input = Tensor::new(vec![1, 4, 4], data).unwrap();
            let a = eval_network(&[LayerSpec::MaxPool { window: 2 }, relu.clone()], &input, &p(), Activation::Exact).unwrap();
            let b = eval_network(&[relu.clone(), LayerSpec::MaxPool { window: 2 }], &input, &p(), Activation::Exact).unwrap();
            assert_eq!(a.logits, b.logits);
        }
    }
}
