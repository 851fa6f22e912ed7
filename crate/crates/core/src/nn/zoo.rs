//! Seeded toy models for demos and end-to-end checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::oracle::{eval_network, Activation};
use crate::ring::RingParams;

use super::fit::PolyFit;
use super::layers::{LayerSpec, BN_EPS, BN_GAMMA, POLY_BOUND};
use super::model::Model;
use super::tensor::Tensor;
use super::NnError;

pub const LENET_INPUT: [usize; 3] = [1, 16, 16];
pub const LENET_CLASSES: usize = 10;

/// Images used to fit the batch-norm statistics.
const CALIBRATION: usize = 32;

fn uniform(rng: &mut ChaCha20Rng, len: usize, mag: f64, params: &RingParams) -> Vec<i128> {
    let scale = (params.d as f64).exp2();
    (0..len).map(|_| (rng.gen_range(-mag..mag) * scale).round() as i128).collect()
}

/// Random pixel image in `[0, 1)` with the LeNet input shape.
pub fn random_image(rng: &mut impl Rng, params: &RingParams) -> Tensor {
    let len = LENET_INPUT.iter().product();
    let v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
    Tensor::from_f64(LENET_INPUT.to_vec(), &v, params).expect("shape matches data")
}

/// conv5 → bn → maxpool2 → relu → conv3 → bn → maxpool2 → relu → fc → fc,
/// on a 1×16×16 input with 10 logits. Weights are drawn from `seed`; the
/// batch-norm statistics are measured on seeded calibration images so every
/// activation sees roughly standardized inputs.
pub fn toy_lenet(seed: u64, params: &RingParams) -> Result<Model, NnError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let relu = PolyFit::relu_deg6(params).coeffs;
    let conv = |rng: &mut ChaCha20Rng, oc: usize, ic: usize, k: usize| {
        let fan_in = (ic * k * k) as f64;
        LayerSpec::Conv {
            out_channels: oc,
            kernel: k,
            stride: 1,
            weights: uniform(rng, oc * ic * k * k, 1.0 / fan_in.sqrt(), params),
            bias: uniform(rng, oc, 0.1, params),
            public: false,
        }
    };
    let fc = |rng: &mut ChaCha20Rng, out: usize, fan_in: usize| LayerSpec::Fc {
        out_features: out,
        weights: uniform(rng, out * fan_in, 1.0 / (fan_in as f64).sqrt(), params),
        bias: uniform(rng, out, 0.1, params),
        public: false,
    };
    let bn = |channels: usize| LayerSpec::BatchNorm {
        gamma: BN_GAMMA,
        beta: 0.0,
        mean: vec![0; channels],
        var: vec![1i128 << params.d; channels],
        eps: BN_EPS,
    };
    let act = || LayerSpec::ReluPoly {
        coeffs: relu.clone(),
        bound: POLY_BOUND,
    };
    let mut layers = vec![
        conv(&mut rng, 4, 1, 5),
        bn(4),
        LayerSpec::MaxPool { window: 2 },
        act(),
        conv(&mut rng, 8, 4, 3),
        bn(8),
        LayerSpec::MaxPool { window: 2 },
        act(),
        fc(&mut rng, 16, 32),
        fc(&mut rng, LENET_CLASSES, 16),
    ];

    let images: Vec<Tensor> = (0..CALIBRATION).map(|_| random_image(&mut rng, params)).collect();
    for i in 0..layers.len() {
        if !matches!(layers[i], LayerSpec::BatchNorm { .. }) {
            continue;
        }
        let (mean, var) = channel_stats(&layers[..i], &images, params)?;
        if let LayerSpec::BatchNorm { mean: m, var: v, .. } = &mut layers[i] {
            *m = mean;
            *v = var;
        }
    }
    Model::new(LENET_INPUT.to_vec(), layers)
}

/// Per-channel mean and variance, at scale `2^d`, of `prefix` applied to
/// `images`.
fn channel_stats(prefix: &[LayerSpec], images: &[Tensor], params: &RingParams) -> Result<(Vec<i128>, Vec<i128>), NnError> {
    let scale = (params.d as f64).exp2();
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    for img in images {
        let run = eval_network(prefix, img, params, Activation::Poly).map_err(|e| NnError::Model(e.to_string()))?;
        let channels = run.shape.first().copied().unwrap_or(1);
        let plane = run.logits.len() / channels;
        sums.resize(channels, (0.0, 0.0, 0));
        for (k, &raw) in run.logits.iter().enumerate() {
            let v = raw as f64 / scale;
            let e = &mut sums[k / plane];
            e.0 += v;
            e.1 += v * v;
            e.2 += 1;
        }
    }
    let mean = sums.iter().map(|&(s, _, c)| s / c as f64);
    let var = sums.iter().map(|&(s, sq, c)| (sq / c as f64 - (s / c as f64).powi(2)).max(1e-4));
    Ok((
        mean.map(|m| (m * scale).round() as i128).collect(),
        var.map(|v| (v * scale).round() as i128).collect(),
    ))
}
