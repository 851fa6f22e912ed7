//! Secure layers over masked wires and the network runner.

use crate::protocols::mult::{mult_trun, prep_mult_trun, prep_scale_trunc, prep_trunc, DotSpec};
use crate::protocols::{
    input, open, poly_chain, prep_input, prep_poly_chain, prep_two_poly, two_poly, Opened,
    Session, Wire,
};
use crate::ring::{RingElement, RingParams};

use super::tensor::{chw, SecureTensor, Tensor};
use super::NnError;

/// BN variance floor.
pub const BN_EPS: f64 = 1e-5;
/// BN scale used ahead of polynomial activations.
pub const BN_GAMMA: f64 = 1.67;
/// Default input bound for polynomial activations.
pub const POLY_BOUND: f64 = 5.0;

/// One layer with its public hyperparameters and the model owner's values.
/// All weights are raw fixed-point at scale `2^d`.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// Weights `[out, in, k, k]`, bias `[out]` or empty.
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        weights: Vec<i128>,
        bias: Vec<i128>,
        public: bool,
    },
    /// Weights `[out, in]`, bias `[out]` or empty.
    Fc {
        out_features: usize,
        weights: Vec<i128>,
        bias: Vec<i128>,
        public: bool,
    },
    AvgPool {
        window: usize,
    },
    MaxPool {
        window: usize,
    },
    /// Per-channel statistics; `gamma` and `beta` are public.
    BatchNorm {
        gamma: f64,
        beta: f64,
        mean: Vec<i128>,
        var: Vec<i128>,
        eps: f64,
    },
    ReluPoly {
        coeffs: Vec<i128>,
        bound: f64,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Fc { .. } => "fc",
            LayerSpec::AvgPool { .. } => "avgpool",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::BatchNorm { .. } => "bn",
            LayerSpec::ReluPoly { .. } => "relu_poly",
        }
    }

    /// Output shape for `input`, or a description of the mismatch.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        let (c, h, w) = chw(input);
        match self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                weights,
                bias,
                ..
            } => {
                if *kernel == 0 || *stride == 0 {
                    return Err("kernel and stride must be positive".into());
                }
                if h < *kernel || w < *kernel {
                    return Err(format!("kernel {kernel} larger than {h}x{w} input"));
                }
                let want = out_channels * c * kernel * kernel;
                if weights.len() != want {
                    return Err(format!("expected {want} weights, got {}", weights.len()));
                }
                if !bias.is_empty() && bias.len() != *out_channels {
                    return Err(format!("expected {out_channels} biases, got {}", bias.len()));
                }
                Ok(vec![
                    *out_channels,
                    (h - kernel) / stride + 1,
                    (w - kernel) / stride + 1,
                ])
            }
            LayerSpec::Fc {
                out_features,
                weights,
                bias,
                ..
            } => {
                let fan_in: usize = input.iter().product();
                if weights.len() != out_features * fan_in {
                    return Err(format!(
                        "expected {} weights, got {}",
                        out_features * fan_in,
                        weights.len()
                    ));
                }
                if !bias.is_empty() && bias.len() != *out_features {
                    return Err(format!("expected {out_features} biases, got {}", bias.len()));
                }
                Ok(vec![*out_features])
            }
            LayerSpec::AvgPool { window } | LayerSpec::MaxPool { window } => {
                if *window == 0 {
                    return Err("window size 0".into());
                }
                if h < *window || w < *window {
                    return Err(format!("window {window} larger than {h}x{w} input"));
                }
                Ok(vec![c, h / window, w / window])
            }
            LayerSpec::BatchNorm {
                mean, var, eps, ..
            } => {
                if mean.len() != c || var.len() != c {
                    return Err(format!(
                        "expected {c} channel statistics, got {} means and {} variances",
                        mean.len(),
                        var.len()
                    ));
                }
                if !(*eps >= 0.0) {
                    return Err(format!("bad eps {eps}"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::ReluPoly { coeffs, bound } => {
                if coeffs.len() < 2 {
                    return Err("polynomial degree must be at least 1".into());
                }
                if !(*bound > 0.0) {
                    return Err(format!("bad bound {bound}"));
                }
                Ok(input.to_vec())
            }
        }
    }

    /// Values the model owner inputs for this layer, in consumption order.
    pub fn private_values(&self, params: &RingParams) -> Result<Vec<i128>, NnError> {
        Ok(match self {
            LayerSpec::Conv {
                weights,
                bias,
                public: false,
                ..
            }
            | LayerSpec::Fc {
                weights,
                bias,
                public: false,
                ..
            } => weights.iter().chain(bias).copied().collect(),
            LayerSpec::BatchNorm {
                gamma,
                mean,
                var,
                eps,
                ..
            } => {
                let mut out = bn_multipliers(*gamma, var, *eps, params)?;
                out.extend(mean);
                out
            }
            _ => Vec::new(),
        })
    }
}

/// Per-channel `gamma / sqrt(var + eps)` at scale `2^d`, as the owner
/// computes it.
pub fn bn_multipliers(gamma: f64, var: &[i128], eps: f64, params: &RingParams) -> Result<Vec<i128>, NnError> {
    let scale = (params.d as f64).exp2();
    var.iter()
        .enumerate()
        .map(|(ch, &v)| {
            let denom = v as f64 / scale + eps;
            if !(denom > 0.0) {
                return Err(NnError::Model(format!("channel {ch}: variance + eps = {denom} is not positive")));
            }
            Ok((gamma / denom.sqrt() * scale).round() as i128)
        })
        .collect()
}

/// `round(beta · 2^d)`.
pub fn bn_shift(beta: f64, params: &RingParams) -> i128 {
    (beta * (params.d as f64).exp2()).round() as i128
}

/// Checks shapes and activation placement; returns each layer's output
/// shape.
pub fn validate(model: &[LayerSpec], input: &[usize]) -> Result<Vec<Vec<usize>>, NnError> {
    let mut shape = input.to_vec();
    let mut shapes = Vec::with_capacity(model.len());
    for (i, layer) in model.iter().enumerate() {
        if let LayerSpec::ReluPoly { .. } = layer {
            let prev = model[..i]
                .iter()
                .rev()
                .find(|l| !matches!(l, LayerSpec::MaxPool { .. }));
            if !matches!(prev, Some(LayerSpec::BatchNorm { .. })) {
                return Err(NnError::Validation {
                    layer: i,
                    kind: layer.kind(),
                    reason: "no batch norm ahead of this activation".into(),
                });
            }
        }
        shape = layer.output_shape(&shape).map_err(|reason| NnError::Validation {
            layer: i,
            kind: layer.kind(),
            reason,
        })?;
        shapes.push(shape.clone());
    }
    Ok(shapes)
}

/// Weights either held as wires or known to everyone.
#[derive(Clone, Copy, Debug)]
pub enum Weights<'a> {
    Shared(&'a [Wire]),
    Public(&'a [i128]),
}

impl Weights<'_> {
    fn len(&self) -> usize {
        match self {
            Weights::Shared(w) => w.len(),
            Weights::Public(w) => w.len(),
        }
    }
}

/// Rows of `(input index, weight index)` pairs, one per output element,
/// with a bias index each.
fn affine(
    sess: &mut Session,
    x: &[Wire],
    rows: &[Vec<(usize, usize)>],
    bias_of: impl Fn(usize) -> usize,
    weights: Weights,
    bias: Weights,
) -> Result<Vec<Wire>, NnError> {
    let d = sess.params.d;
    let outs = match weights {
        Weights::Shared(w) => {
            let specs: Vec<DotSpec> = rows
                .iter()
                .map(|row| DotSpec {
                    terms: row.iter().map(|&(i, j)| (RingElement::ONE, x[i], w[j])).collect(),
                })
                .collect();
            let plans = prep_mult_trun(sess, &specs, d)?;
            mult_trun(sess, &plans)?
        }
        Weights::Public(w) => {
            let sums: Vec<Wire> = rows
                .iter()
                .map(|row| {
                    let terms: Vec<(RingElement, Wire)> =
                        row.iter().map(|&(i, j)| (sess.signed(w[j]), x[i])).collect();
                    sess.lincomb(&terms, RingElement::ZERO)
                })
                .collect();
            prep_trunc(sess, &sums, d)?
        }
    };
    if bias.len() == 0 {
        return Ok(outs);
    }
    Ok(outs
        .into_iter()
        .enumerate()
        .map(|(r, o)| match bias {
            Weights::Shared(b) => sess.add(o, b[bias_of(r)]),
            Weights::Public(b) => {
                let c = sess.signed(b[bias_of(r)]);
                sess.add_const(o, c)
            }
        })
        .collect())
}

/// Valid convolution: one truncated dot product per output element.
pub fn conv2d(
    sess: &mut Session,
    x: &SecureTensor,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    weights: Weights,
    bias: Weights,
) -> Result<SecureTensor, NnError> {
    let (c, h, w) = chw(&x.shape);
    if kernel == 0 || stride == 0 || h < kernel || w < kernel {
        return Err(NnError::Shape(format!("kernel {kernel}/stride {stride} on {h}x{w}")));
    }
    if weights.len() != out_channels * c * kernel * kernel {
        return Err(NnError::Shape(format!("{} conv weights for {out_channels}x{c}x{kernel}x{kernel}", weights.len())));
    }
    if bias.len() != 0 && bias.len() != out_channels {
        return Err(NnError::Shape(format!("{} conv biases for {out_channels} channels", bias.len())));
    }
    let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
    let mut rows = Vec::with_capacity(out_channels * oh * ow);
    for oc in 0..out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut row = Vec::with_capacity(c * kernel * kernel);
                for ic in 0..c {
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let i = ic * h * w + (oy * stride + ky) * w + ox * stride + kx;
                            let j = ((oc * c + ic) * kernel + ky) * kernel + kx;
                            row.push((i, j));
                        }
                    }
                }
                rows.push(row);
            }
        }
    }
    let per_channel = oh * ow;
    let wires = affine(sess, &x.wires, &rows, |r| r / per_channel, weights, bias)?;
    SecureTensor::new(vec![out_channels, oh, ow], wires)
}

/// `weights · x + bias` over the flattened input.
pub fn fully_connected(
    sess: &mut Session,
    x: &SecureTensor,
    out_features: usize,
    weights: Weights,
    bias: Weights,
) -> Result<SecureTensor, NnError> {
    let fan_in = x.len();
    if weights.len() != out_features * fan_in {
        return Err(NnError::Shape(format!("{} fc weights for {out_features}x{fan_in}", weights.len())));
    }
    if bias.len() != 0 && bias.len() != out_features {
        return Err(NnError::Shape(format!("{} fc biases for {out_features} outputs", bias.len())));
    }
    let rows: Vec<Vec<(usize, usize)>> = (0..out_features)
        .map(|o| (0..fan_in).map(|i| (i, o * fan_in + i)).collect())
        .collect();
    let wires = affine(sess, &x.wires, &rows, |r| r, weights, bias)?;
    SecureTensor::new(vec![out_features], wires)
}

/// Input indices of each pooling window, row-major within the window.
pub fn pool_windows(shape: &[usize], window: usize) -> (Vec<usize>, Vec<Vec<usize>>) {
    let (c, h, w) = chw(shape);
    let (oh, ow) = (h / window, w / window);
    let mut groups = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut g = Vec::with_capacity(window * window);
                for ky in 0..window {
                    for kx in 0..window {
                        g.push(ch * h * w + (oy * window + ky) * w + ox * window + kx);
                    }
                }
                groups.push(g);
            }
        }
    }
    (vec![c, oh, ow], groups)
}

/// Fixed-point `round(2^d / count)`.
pub fn reciprocal(count: usize, params: &RingParams) -> i128 {
    let one = 1i128 << params.d;
    (one + count as i128 / 2) / count as i128
}

/// Window sums times a public reciprocal, one truncation each.
pub fn avg_pool(sess: &mut Session, x: &SecureTensor, window: usize) -> Result<SecureTensor, NnError> {
    let (c, h, w) = chw(&x.shape);
    if window == 0 || h < window || w < window {
        return Err(NnError::Shape(format!("window {window} on {c}x{h}x{w}")));
    }
    let (shape, groups) = pool_windows(&x.shape, window);
    let sums: Vec<Wire> = groups
        .iter()
        .map(|g| {
            let terms: Vec<(RingElement, Wire)> = g.iter().map(|&i| (RingElement::ONE, x.wires[i])).collect();
            sess.lincomb(&terms, RingElement::ZERO)
        })
        .collect();
    let recip = sess.signed(reciprocal(window * window, &sess.params));
    let d = sess.params.d;
    let wires = prep_scale_trunc(sess, &sums, recip, d)?;
    SecureTensor::new(shape, wires)
}

/// Polynomial activation: [`two_poly`] for two parties, a truncated
/// multiplication chain otherwise.
pub fn relu_poly(sess: &mut Session, xs: &[Wire], coeffs: &[i128], bound: f64) -> Result<Vec<Wire>, NnError> {
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    Ok(if sess.n() == 2 {
        let plans = prep_two_poly(sess, xs, coeffs, bound)?;
        two_poly(sess, &plans)?
    } else {
        let plans = prep_poly_chain(sess, xs, coeffs)?;
        poly_chain(sess, &plans)?
    })
}

/// Number of sequential comparison levels for `count` inputs.
pub fn tree_depth(count: usize) -> usize {
    count.next_power_of_two().trailing_zeros() as usize
}

/// Pairwise maximum tree with `max(a, b) = b + 2·relu((a - b)/2)`; the
/// halving keeps differences of in-range values inside the fit interval.
pub fn max_pool(
    sess: &mut Session,
    x: &SecureTensor,
    window: usize,
    coeffs: &[i128],
    bound: f64,
) -> Result<SecureTensor, NnError> {
    let (c, h, w) = chw(&x.shape);
    if window == 0 || h < window || w < window {
        return Err(NnError::Shape(format!("window {window} on {c}x{h}x{w}")));
    }
    let (shape, groups) = pool_windows(&x.shape, window);
    let mut level: Vec<Vec<Wire>> = groups
        .iter()
        .map(|g| g.iter().map(|&i| x.wires[i]).collect())
        .collect();
    while level.iter().any(|g| g.len() > 1) {
        let mut diffs = Vec::new();
        let mut seconds = Vec::new();
        for g in &level {
            for pair in g.chunks_exact(2) {
                diffs.push(sess.sub(pair[0], pair[1]));
                seconds.push(pair[1]);
            }
        }
        let halves = prep_trunc(sess, &diffs, 1)?;
        let rel = relu_poly(sess, &halves, coeffs, bound)?;
        let two = RingElement(2);
        let mut k = 0;
        level = level
            .iter()
            .map(|g| {
                let mut next = Vec::with_capacity(g.len().div_ceil(2));
                for pair in g.chunks(2) {
                    if pair.len() == 2 {
                        next.push(sess.lincomb(&[(two, rel[k]), (RingElement::ONE, seconds[k])], RingElement::ZERO));
                        k += 1;
                    } else {
                        next.push(pair[0]);
                    }
                }
                next
            })
            .collect();
    }
    SecureTensor::new(shape, level.into_iter().map(|g| g[0]).collect())
}

/// `multiplier·(x - mean) + beta` per channel with shared multipliers and
/// means.
pub fn batch_norm(
    sess: &mut Session,
    x: &SecureTensor,
    multipliers: &[Wire],
    means: &[Wire],
    beta: i128,
) -> Result<SecureTensor, NnError> {
    let (c, h, w) = chw(&x.shape);
    if multipliers.len() != c || means.len() != c {
        return Err(NnError::Shape(format!("{} multipliers and {} means for {c} channels", multipliers.len(), means.len())));
    }
    let plane = h * w;
    let specs: Vec<DotSpec> = x
        .wires
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let ch = i / plane;
            let centered = sess.sub(xi, means[ch]);
            DotSpec::single(multipliers[ch], centered)
        })
        .collect();
    let d = sess.params.d;
    let plans = prep_mult_trun(sess, &specs, d)?;
    let outs = mult_trun(sess, &plans)?;
    let shift = sess.signed(beta);
    let wires = outs.into_iter().map(|o| sess.add_const(o, shift)).collect();
    SecureTensor::new(x.shape.clone(), wires)
}

/// Who holds what in a network run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub model_owner: usize,
    pub data_owner: usize,
    pub recipients: Vec<usize>,
}

impl RunConfig {
    /// Model on P1, data on the last party, output to the data owner.
    pub fn for_parties(n: usize) -> Self {
        Self {
            model_owner: 0,
            data_owner: n - 1,
            recipients: vec![n - 1],
        }
    }
}

#[derive(Clone, Debug)]
pub struct NetworkOutput {
    pub shape: Vec<usize>,
    pub opened: Opened,
}

impl NetworkOutput {
    /// Signed raw logits as seen by the first recipient.
    pub fn logits(&self, params: &RingParams) -> Vec<i128> {
        self.opened.signed(params)
    }
}

/// Evaluates `model` on the data owner's `input` and opens the result to
/// the recipients after a final check of all pending values.
pub fn run_network(
    sess: &mut Session,
    model: &[LayerSpec],
    data: &Tensor,
    cfg: &RunConfig,
) -> Result<NetworkOutput, NnError> {
    let n = sess.n();
    if cfg.model_owner >= n || cfg.data_owner >= n {
        return Err(NnError::Model(format!("owners must be among {n} parties")));
    }
    validate(model, &data.shape)?;
    let params = sess.params;

    let mut private = Vec::new();
    let mut offsets = Vec::with_capacity(model.len());
    for layer in model {
        offsets.push(private.len());
        private.extend(layer.private_values(&params)?);
    }
    let model_plan = prep_input(sess, cfg.model_owner, private.len())?;
    let data_plan = prep_input(sess, cfg.data_owner, data.len())?;
    let model_vals: Vec<RingElement> = private.iter().map(|&v| params.from_signed(v)).collect();
    let data_vals: Vec<RingElement> = data.data.iter().map(|&v| params.from_signed(v)).collect();
    let mut jobs: Vec<(&_, &[RingElement])> = vec![(&data_plan, &data_vals[..])];
    if !model_vals.is_empty() {
        jobs.push((&model_plan, &model_vals[..]));
    }
    let wires = input(sess, &jobs)?;
    let owned: &[Wire] = wires.get(1).map(|w| w.as_slice()).unwrap_or(&[]);

    let mut x = SecureTensor::new(data.shape.clone(), wires[0].clone())?;
    for (i, layer) in model.iter().enumerate() {
        sess.set_scope(Some(&format!("{i}-{}", layer.kind())));
        let mine = &owned[offsets[i]..];
        x = match layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                weights,
                bias,
                public,
            } => {
                let (wt, b) = split_params(*public, weights, bias, mine);
                conv2d(sess, &x, *out_channels, *kernel, *stride, wt, b)?
            }
            LayerSpec::Fc {
                out_features,
                weights,
                bias,
                public,
            } => {
                let (wt, b) = split_params(*public, weights, bias, mine);
                fully_connected(sess, &x, *out_features, wt, b)?
            }
            LayerSpec::AvgPool { window } => avg_pool(sess, &x, *window)?,
            LayerSpec::MaxPool { window } => {
                let (coeffs, bound) = activation_after(model, i, &params);
                max_pool(sess, &x, *window, &coeffs, bound)?
            }
            LayerSpec::BatchNorm { beta, mean, .. } => {
                let c = mean.len();
                batch_norm(sess, &x, &mine[..c], &mine[c..2 * c], bn_shift(*beta, &params))?
            }
            LayerSpec::ReluPoly { coeffs, bound } => {
                let wires = relu_poly(sess, &x.wires, coeffs, *bound)?;
                SecureTensor::new(x.shape.clone(), wires)?
            }
        };
    }
    sess.set_scope(None);
    let opened = open(sess, &x.wires, &cfg.recipients)?;
    Ok(NetworkOutput {
        shape: x.shape,
        opened,
    })
}

fn split_params<'a>(public: bool, weights: &'a [i128], bias: &'a [i128], mine: &'a [Wire]) -> (Weights<'a>, Weights<'a>) {
    if public {
        (Weights::Public(weights), Weights::Public(bias))
    } else {
        (
            Weights::Shared(&mine[..weights.len()]),
            Weights::Shared(&mine[weights.len()..weights.len() + bias.len()]),
        )
    }
}

/// The polynomial a max pool at `index` compares with: the next activation,
/// else any activation in the model, else the stored ReLU fit.
pub fn activation_after(model: &[LayerSpec], index: usize, params: &RingParams) -> (Vec<i128>, f64) {
    let poly = |l: &LayerSpec| match l {
        LayerSpec::ReluPoly { coeffs, bound } => Some((coeffs.clone(), *bound)),
        _ => None,
    };
    model[index..]
        .iter()
        .find_map(poly)
        .or_else(|| model.iter().find_map(poly))
        .unwrap_or_else(|| (super::fit::PolyFit::relu_deg6(params).coeffs, POLY_BOUND))
}
