//! Single-head, two-layer graph attention network with an inner-product
//! link decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::optim::Optimizer;
use crate::surrogate::{glorot, weighted_bce_logits};
use crate::tensor::{Matrix, Tape, Var};

pub const LAYERS: [usize; 2] = [32, 16];
const SLOPE: f64 = 0.2;
/// Added to masked logits so their softmax weight underflows to exactly 0.
const MASKED: f64 = -1e30;

/// Weights of one attention layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GatLayer {
    pub w: Matrix,
    /// Attention vector half applied to the receiving node, `out x 1`.
    pub a_dst: Matrix,
    /// Attention vector half applied to the neighbour, `out x 1`.
    pub a_src: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatParams {
    pub layers: Vec<GatLayer>,
}

impl GatParams {
    pub fn init(input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = input_dim;
        let layers = LAYERS
            .iter()
            .map(|&out| {
                let layer = GatLayer {
                    w: glorot(fan_in, out, &mut rng),
                    a_dst: glorot(out, 1, &mut rng),
                    a_src: glorot(out, 1, &mut rng),
                };
                fan_in = out;
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| [&l.w, &l.a_dst, &l.a_src]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.a_dst, &mut l.a_src])
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TracedLayer {
    pub w: Var,
    pub a_dst: Var,
    pub a_src: Var,
}

/// `A + I` as a 0/1 mask: every node attends to its neighbours and itself.
pub fn attention_mask(adjacency: &Matrix) -> Matrix {
    let mut m = adjacency.map(|v| if v != 0.0 { 1.0 } else { 0.0 });
    for i in 0..m.rows() {
        m[(i, i)] = 1.0;
    }
    m
}

/// One attention layer. Returns the aggregated features (before the
/// nonlinearity) and the attention matrix, whose rows are softmax
/// distributions over the nonzero entries of `mask`.
pub fn gat_layer(tape: &mut Tape, h: Var, mask: &Matrix, p: &TracedLayer) -> Result<(Var, Var)> {
    let n = tape.shape(h).0;
    let wh = tape.matmul(h, p.w)?;
    let dst = tape.matmul(wh, p.a_dst)?;
    let src = tape.matmul(wh, p.a_src)?;
    let dst = tape.repeat_cols(dst, n)?;
    let src = tape.repeat_cols(src, n)?;
    let src = tape.transpose(src)?;
    let logits = tape.add(dst, src)?;
    let e = tape.leaky_relu(logits, SLOPE)?;

    let keep = tape.constant(mask.clone());
    let e = tape.mul(e, keep)?;
    // the row shift only stabilises exp; softmax is invariant to it
    let shift = {
        let v = tape.value(e);
        Matrix::from_fn(n, n, |i, j| {
            let row_max = (0..n)
                .filter(|&k| mask[(i, k)] != 0.0)
                .map(|k| v[(i, k)])
                .fold(f64::NEG_INFINITY, f64::max);
            let off = if mask[(i, j)] != 0.0 { 0.0 } else { MASKED };
            off - if row_max.is_finite() { row_max } else { 0.0 }
        })
    };
    let shift = tape.constant(shift);
    let shifted = tape.add(e, shift)?;
    let ex = tape.exp(shifted)?;
    let ex = tape.mul(ex, keep)?;
    let z = tape.row_sum(ex)?;
    let inv = tape.powf(z, -1.0)?;
    let inv = tape.repeat_cols(inv, n)?;
    let alpha = tape.mul(ex, inv)?;
    Ok((tape.matmul(alpha, wh)?, alpha))
}

pub(crate) struct Encoded {
    pub z: Var,
    pub traced: Vec<TracedLayer>,
}

pub(crate) fn encode(tape: &mut Tape, x: &Matrix, mask: &Matrix, params: &GatParams) -> Result<Encoded> {
    let mut h = tape.constant(x.clone());
    let mut traced = Vec::with_capacity(params.layers.len());
    let last = params.layers.len() - 1;
    for (k, l) in params.layers.iter().enumerate() {
        let t = TracedLayer {
            w: tape.param(l.w.clone()),
            a_dst: tape.param(l.a_dst.clone()),
            a_src: tape.param(l.a_src.clone()),
        };
        let (out, _) = gat_layer(tape, h, mask, &t)?;
        h = if k < last { tape.relu(out)? } else { out };
        traced.push(t);
    }
    Ok(Encoded { z: h, traced })
}

/// One training step on the weighted reconstruction loss; returns the loss.
pub(crate) fn train_step(
    params: &mut GatParams,
    optimizer: &mut Optimizer,
    x: &Matrix,
    adjacency: &Matrix,
    mask: &Matrix,
    w: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let enc = encode(&mut tape, x, mask, params)?;
    let zt = tape.transpose(enc.z)?;
    let logits = tape.matmul(enc.z, zt)?;
    let y = tape.constant(adjacency.clone());
    let loss = weighted_bce_logits(&mut tape, logits, y, None, w)?;
    let grads = tape.backward(loss)?;
    let g: Vec<Matrix> = enc
        .traced
        .iter()
        .flat_map(|t| [t.w, t.a_dst, t.a_src])
        .map(|v| grads.wrt(v).clone())
        .collect();
    let g: Vec<&Matrix> = g.iter().collect();
    optimizer.step(&mut params.tensors_mut(), &g);
    Ok(tape.value(loss).item())
}

pub(crate) fn embed(x: &Matrix, mask: &Matrix, params: &GatParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let enc = encode(&mut tape, x, mask, params)?;
    Ok(tape.value(enc.z).clone())
}
