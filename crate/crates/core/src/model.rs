//! Two-layer mean-aggregation message passing with a 0-1 labeling trick,
//! mean-pool readout and a scalar logit per subgraph. Forward and backward
//! passes are written out by hand over a flat parameter vector.
//!
//! Every node carries an indicator bit `z`. Each layer keeps two weight sets
//! and a node uses the set its bit selects:
//!
//! ```text
//! h_v' = relu(W_self[z_v] h_v + W_nbr[z_v] mean_{u in N(v)} h_u + b[z_v])
//! logit = w . mean_{v in S} h_v + c
//! ```

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BackgroundGraph, NeighborView};
use crate::sampler::{seeded_rng, segregated_adjacency, Minibatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Subgraphs embedded in the background graph, members marked by the
    /// indicator bit.
    #[default]
    Glass,
    /// Each subgraph as an isolated graph.
    GnnSeg,
    /// No message passing: mean of per-node transforms.
    MeanPool,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Glass => "glass",
            Mode::GnnSeg => "gnnseg",
            Mode::MeanPool => "meanpool",
        }
    }

    fn code(self) -> u64 {
        self as u64
    }

    fn from_code(c: u64) -> Option<Self> {
        [Mode::Glass, Mode::GnnSeg, Mode::MeanPool].get(c as usize).copied()
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "glass" => Ok(Mode::Glass),
            "gnnseg" => Ok(Mode::GnnSeg),
            "meanpool" => Ok(Mode::MeanPool),
            _ => Err(Error::Config(format!("unknown mode {s:?} (glass, gnnseg, meanpool)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `floor(log2 d) + 1` for `d > 0`, and 0 for isolated nodes.
pub fn degree_bin(d: usize) -> f64 {
    (usize::BITS - d.leading_zeros()) as f64
}

/// Per-slot inputs: `[degree bin, indicator, dataset features...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFeatures {
    pub width: usize,
    pub x: Vec<f64>,
    pub indicator: Vec<bool>,
}

impl InputFeatures {
    pub fn rows(&self) -> usize {
        self.indicator.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.width..(i + 1) * self.width]
    }
}

/// Input width for a graph, with or without its node features.
pub fn input_width(g: &BackgroundGraph, node_features: bool) -> usize {
    2 + if node_features { g.node_feature_width() } else { 0 }
}

/// Features for every slot of `mb`. In GLASS mode the degree is the
/// background total degree and the indicator marks the subgraph slots. The
/// other modes see subgraphs as standalone graphs: degree counts neighbors
/// inside the subgraph and every node is a member.
pub fn input_features(
    g: &BackgroundGraph,
    view: &NeighborView,
    mb: &Minibatch,
    mode: Mode,
    node_features: bool,
) -> InputFeatures {
    let width = input_width(g, node_features);
    let rows = mb.node_list.len();
    let degrees: Vec<usize> = match mode {
        Mode::Glass => mb.node_list.iter().map(|&v| g.total_degree(v)).collect(),
        Mode::GnnSeg | Mode::MeanPool => segregated_adjacency(view, &mb.node_list, &mb.subgraph_ranges)
            .iter()
            .map(Vec::len)
            .chain(std::iter::repeat(0))
            .take(rows)
            .collect(),
    };
    let indicator: Vec<bool> = match mode {
        Mode::Glass => (0..rows).map(|s| s < mb.prefix_len()).collect(),
        Mode::GnnSeg | Mode::MeanPool => vec![true; rows],
    };
    let mut x = Vec::with_capacity(rows * width);
    for (slot, &v) in mb.node_list.iter().enumerate() {
        x.push(degree_bin(degrees[slot]));
        x.push(if indicator[slot] { 1.0 } else { 0.0 });
        if node_features {
            x.extend(g.node_features(v).iter().map(|&f| f as f64));
        }
    }
    InputFeatures { width, x, indicator }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    din: usize,
    dout: usize,
    w_self: [usize; 2],
    w_nbr: [usize; 2],
    bias: [usize; 2],
}

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: Vec<usize>,
    layout: Vec<LayerLayout>,
    head_w: usize,
    head_b: usize,
    pub values: Vec<f64>,
}

/// `sum_l 2 (2 d_l d_{l+1} + d_{l+1}) + d_L + 1`.
pub fn parameter_count(dims: &[usize]) -> usize {
    let layers: usize = dims.windows(2).map(|w| 2 * (2 * w[0] * w[1] + w[1])).sum();
    layers + dims.last().copied().unwrap_or(0) + 1
}

impl ModelParams {
    /// All-zero parameters for `dims = [input, hidden_1, ..., hidden_L]`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(
                "model needs an input width and at least one layer".into(),
            ));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Config(format!("model dimension {i} is zero")));
        }
        let mut at = 0;
        let mut take = |n: usize| {
            at += n;
            at - n
        };
        let layout: Vec<LayerLayout> = dims
            .windows(2)
            .map(|w| {
                let (din, dout) = (w[0], w[1]);
                let w_self = [take(din * dout), take(din * dout)];
                let w_nbr = [take(din * dout), take(din * dout)];
                let bias = [take(dout), take(dout)];
                LayerLayout {
                    din,
                    dout,
                    w_self,
                    w_nbr,
                    bias,
                }
            })
            .collect();
        let head_w = take(*dims.last().unwrap());
        let head_b = take(1);
        Ok(Self {
            dims: dims.to_vec(),
            layout,
            head_w,
            head_b,
            values: vec![0.0; at],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> usize {
        self.layout.len()
    }

    pub fn input_width(&self) -> usize {
        self.dims[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.values.len()
    }

    /// Named tensors in storage order.
    pub fn tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        for (l, lay) in self.layout.iter().enumerate() {
            for z in 0..2 {
                out.push(Tensor {
                    name: format!("layer{l}.w_self[{z}]"),
                    offset: lay.w_self[z],
                    shape: vec![lay.din, lay.dout],
                });
            }
            for z in 0..2 {
                out.push(Tensor {
                    name: format!("layer{l}.w_nbr[{z}]"),
                    offset: lay.w_nbr[z],
                    shape: vec![lay.din, lay.dout],
                });
            }
            for z in 0..2 {
                out.push(Tensor {
                    name: format!("layer{l}.bias[{z}]"),
                    offset: lay.bias[z],
                    shape: vec![lay.dout],
                });
            }
        }
        out.push(Tensor {
            name: "head.w".into(),
            offset: self.head_w,
            shape: vec![*self.dims.last().unwrap()],
        });
        out.push(Tensor {
            name: "head.b".into(),
            offset: self.head_b,
            shape: vec![1],
        });
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Weights uniform in `±1/sqrt(fan_in)` from a seeded stream, biases zero.
pub fn init_params(dims: &[usize], seed: u64) -> Result<ModelParams> {
    let mut p = ModelParams::zeros(dims)?;
    let mut rng = seeded_rng(seed);
    for t in p.tensors() {
        if t.shape.len() == 1 && t.name != "head.w" {
            continue;
        }
        let bound = 1.0 / (t.shape[0] as f64).sqrt();
        for x in &mut p.values[t.range()] {
            *x = rng.gen_range(-bound..=bound);
        }
    }
    Ok(p)
}

#[derive(Debug, Clone)]
struct LayerCache {
    rows: usize,
    agg: Vec<f64>,
    degree: Vec<u32>,
    pre: Vec<f64>,
    out: Vec<f64>,
}

/// Logits plus the activations the backward pass needs.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Vec<f64>,
    layers: Vec<LayerCache>,
    pooled: Vec<f64>,
}

fn check_shapes(params: &ModelParams, mb: &Minibatch, input: &InputFeatures) -> Result<()> {
    if mb.hops() != params.layers() {
        return Err(Error::Contract(format!(
            "minibatch has {} hops, model has {} layers",
            mb.hops(),
            params.layers()
        )));
    }
    if input.width != params.input_width() {
        return Err(Error::Contract(format!(
            "input width {} does not match model input {}",
            input.width,
            params.input_width()
        )));
    }
    if input.rows() != mb.node_list.len() || input.x.len() != input.rows() * input.width {
        return Err(Error::Contract("input rows do not match minibatch slots".into()));
    }
    if let Some(i) = mb.subgraph_ranges.iter().position(|r| r.is_empty()) {
        return Err(Error::Contract(format!("subgraph {i} of the batch has no nodes")));
    }
    Ok(())
}

pub fn forward(params: &ModelParams, mb: &Minibatch, input: &InputFeatures) -> Result<Forward> {
    check_shapes(params, mb, input)?;
    let depth = params.layers();
    let w = &params.values;
    let mut caches: Vec<LayerCache> = Vec::with_capacity(depth);
    for (l, lay) in params.layout.iter().enumerate() {
        // Model layer l consumes the edges of hop depth - l.
        let rows = mb.layer_sizes[depth - l - 1];
        let edges = &mb.layers[depth - l - 1];
        let prev: &[f64] = caches.last().map_or(&input.x, |c| &c.out);
        let (din, dout) = (lay.din, lay.dout);

        let mut agg = vec![0.0; rows * din];
        let mut degree = vec![0u32; rows];
        for &(t, s) in edges {
            let (t, s) = (t as usize, s as usize);
            degree[t] += 1;
            for i in 0..din {
                agg[t * din + i] += prev[s * din + i];
            }
        }
        for t in 0..rows {
            if degree[t] > 1 {
                let k = degree[t] as f64;
                agg[t * din..(t + 1) * din].iter_mut().for_each(|a| *a /= k);
            }
        }

        let mut pre = vec![0.0; rows * dout];
        for t in 0..rows {
            let z = input.indicator[t] as usize;
            let row = &mut pre[t * dout..(t + 1) * dout];
            row.copy_from_slice(&w[lay.bias[z]..lay.bias[z] + dout]);
            for i in 0..din {
                let hs = prev[t * din + i];
                let ha = agg[t * din + i];
                let ws = &w[lay.w_self[z] + i * dout..lay.w_self[z] + (i + 1) * dout];
                let wn = &w[lay.w_nbr[z] + i * dout..lay.w_nbr[z] + (i + 1) * dout];
                for j in 0..dout {
                    row[j] += hs * ws[j] + ha * wn[j];
                }
            }
        }
        let out = pre.iter().map(|&p| p.max(0.0)).collect();
        caches.push(LayerCache {
            rows,
            agg,
            degree,
            pre,
            out,
        });
    }

    let d = *params.dims.last().unwrap();
    let last = &caches.last().unwrap().out;
    let mut pooled = vec![0.0; mb.subgraph_count() * d];
    let mut logits = Vec::with_capacity(mb.subgraph_count());
    for (i, r) in mb.subgraph_ranges.iter().enumerate() {
        let p = &mut pooled[i * d..(i + 1) * d];
        for s in r.clone() {
            for j in 0..d {
                p[j] += last[s * d + j];
            }
        }
        let k = r.len() as f64;
        p.iter_mut().for_each(|x| *x /= k);
        let head = &w[params.head_w..params.head_w + d];
        logits.push(w[params.head_b] + p.iter().zip(head).map(|(a, b)| a * b).sum::<f64>());
    }
    Ok(Forward {
        logits,
        layers: caches,
        pooled,
    })
}

/// Gradient of the loss with respect to every parameter, given the gradient
/// with respect to each logit.
pub fn backward(
    params: &ModelParams,
    mb: &Minibatch,
    input: &InputFeatures,
    fwd: &Forward,
    dlogits: &[f64],
) -> Vec<f64> {
    let w = &params.values;
    let mut grad = vec![0.0; w.len()];
    let depth = params.layers();
    let d = *params.dims.last().unwrap();

    let top = &fwd.layers[depth - 1];
    let mut dout_buf = vec![0.0; top.rows * d];
    for (i, r) in mb.subgraph_ranges.iter().enumerate() {
        let g = dlogits[i];
        grad[params.head_b] += g;
        for j in 0..d {
            grad[params.head_w + j] += g * fwd.pooled[i * d + j];
        }
        let k = r.len() as f64;
        for s in r.clone() {
            for j in 0..d {
                dout_buf[s * d + j] += g * w[params.head_w + j] / k;
            }
        }
    }

    for l in (0..depth).rev() {
        let lay = params.layout[l];
        let cache = &fwd.layers[l];
        let (din, dout) = (lay.din, lay.dout);
        let prev: &[f64] = if l == 0 { &input.x } else { &fwd.layers[l - 1].out };
        let prev_rows = if l == 0 { input.rows() } else { fwd.layers[l - 1].rows };
        let mut dprev = vec![0.0; prev_rows * din];
        let mut dagg = vec![0.0; cache.rows * din];

        for t in 0..cache.rows {
            let z = input.indicator[t] as usize;
            let dpre: Vec<f64> = (0..dout)
                .map(|j| {
                    if cache.pre[t * dout + j] > 0.0 {
                        dout_buf[t * dout + j]
                    } else {
                        0.0
                    }
                })
                .collect();
            if dpre.iter().all(|&x| x == 0.0) {
                continue;
            }
            for j in 0..dout {
                grad[lay.bias[z] + j] += dpre[j];
            }
            for i in 0..din {
                let hs = prev[t * din + i];
                let ha = cache.agg[t * din + i];
                let (mut ds, mut da) = (0.0, 0.0);
                for j in 0..dout {
                    grad[lay.w_self[z] + i * dout + j] += hs * dpre[j];
                    grad[lay.w_nbr[z] + i * dout + j] += ha * dpre[j];
                    ds += w[lay.w_self[z] + i * dout + j] * dpre[j];
                    da += w[lay.w_nbr[z] + i * dout + j] * dpre[j];
                }
                dprev[t * din + i] += ds;
                dagg[t * din + i] = da;
            }
        }
        for &(t, s) in &mb.layers[depth - l - 1] {
            let (t, s) = (t as usize, s as usize);
            let k = cache.degree[t] as f64;
            for i in 0..din {
                dprev[s * din + i] += dagg[t * din + i] / k;
            }
        }
        dout_buf = dprev;
    }
    grad
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean over the batch of `-(w y log s + (1 - y) log(1 - s))` with
/// `s = sigmoid(logit)`, and its gradient with respect to each logit.
pub fn weighted_bce(logits: &[f64], labels: &[f64], pos_weight: f64) -> (f64, Vec<f64>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(&x, &y)| {
            loss += pos_weight * y * softplus(-x) + (1.0 - y) * softplus(x);
            let s = sigmoid(x);
            (pos_weight * y * (s - 1.0) + (1.0 - y) * s) / n
        })
        .collect();
    (loss / n, grad)
}

/// Loss and parameter gradient for one batch.
pub fn loss_and_grad(
    params: &ModelParams,
    mb: &Minibatch,
    input: &InputFeatures,
    labels: &[f64],
    pos_weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let fwd = forward(params, mb, input)?;
    if labels.len() != fwd.logits.len() {
        return Err(Error::Contract(format!(
            "{} labels for {} subgraphs",
            labels.len(),
            fwd.logits.len()
        )));
    }
    let (loss, dlogits) = weighted_bce(&fwd.logits, labels, pos_weight);
    Ok((loss, backward(params, mb, input, &fwd, &dlogits)))
}

/// Loss only.
pub fn batch_loss(
    params: &ModelParams,
    mb: &Minibatch,
    input: &InputFeatures,
    labels: &[f64],
    pos_weight: f64,
) -> Result<f64> {
    let fwd = forward(params, mb, input)?;
    Ok(weighted_bce(&fwd.logits, labels, pos_weight).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; params.parameter_count()],
            v: vec![0.0; params.parameter_count()],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ModelParams, grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, (p, &g)) in params.values.iter_mut().zip(grad).enumerate() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            *p -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub loss: f64,
    pub grads: Vec<f64>,
}

/// One optimizer step on a labeled batch.
pub fn train_step(
    params: &mut ModelParams,
    opt: &mut Adam,
    mb: &Minibatch,
    input: &InputFeatures,
    labels: &[f64],
    lr: f64,
    pos_weight: f64,
) -> Result<StepOutput> {
    if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Contract(format!("label {y} is not 0 or 1")));
    }
    let (loss, grads) = loss_and_grad(params, mb, input, labels, pos_weight)?;
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        let positives = labels.iter().filter(|&&y| y == 1.0).count();
        return Err(Error::Numeric(format!(
            "non-finite loss {loss} on a batch of {} subgraphs ({positives} positive, {} slots, step {})",
            labels.len(),
            mb.node_list.len(),
            opt.steps() + 1
        )));
    }
    opt.update(params, &grads, lr);
    Ok(StepOutput { loss, grads })
}

const MODEL_MAGIC: &[u8; 4] = b"SGM1";

/// Checkpoint layout, little-endian: `"SGM1"`, mode (u64), number of dims
/// (u64), dims (u64 each), then the flat parameter vector as f64 in tensor
/// storage order.
pub fn encode_checkpoint(params: &ModelParams, mode: Mode) -> Vec<u8> {
    let mut out = MODEL_MAGIC.to_vec();
    out.extend_from_slice(&mode.code().to_le_bytes());
    out.extend_from_slice(&(params.dims.len() as u64).to_le_bytes());
    for &d in &params.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in &params.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<(ModelParams, Mode), String> {
    if bytes.get(..4) != Some(MODEL_MAGIC.as_slice()) {
        return Err("bad magic (expected SGM1)".into());
    }
    let words: Vec<[u8; 8]> = bytes[4..]
        .chunks(8)
        .map(|c| c.try_into().unwrap_or([0xff; 8]))
        .collect();
    if (bytes.len() - 4) % 8 != 0 || words.len() < 2 {
        return Err("truncated checkpoint".into());
    }
    let mode = Mode::from_code(u64::from_le_bytes(words[0])).ok_or("unknown mode code")?;
    let nd = u64::from_le_bytes(words[1]) as usize;
    if words.len() < 2 + nd {
        return Err("truncated dims".into());
    }
    let dims: Vec<usize> = words[2..2 + nd]
        .iter()
        .map(|w| u64::from_le_bytes(*w) as usize)
        .collect();
    let mut params = ModelParams::zeros(&dims).map_err(|e| e.to_string())?;
    let body = &words[2 + nd..];
    if body.len() != params.parameter_count() {
        return Err(format!(
            "expected {} parameters, found {}",
            params.parameter_count(),
            body.len()
        ));
    }
    for (p, w) in params.values.iter_mut().zip(body) {
        *p = f64::from_le_bytes(*w);
    }
    Ok((params, mode))
}

pub fn save_checkpoint(params: &ModelParams, mode: Mode, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params, mode)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, Mode)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}
