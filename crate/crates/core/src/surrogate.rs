//! Two-layer VGAE built on the tape, so that a training run can be
//! differentiated with respect to the adjacency matrix.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::checkpoint::{self, CheckpointHeader};
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::tensor::{Matrix, Tape, Var};

pub const HIDDEN: usize = 32;
pub const LATENT: usize = 16;

/// Lower and upper clip applied to predictions inside the logarithms.
pub const CLIP: f64 = 1e-7;

/// Encoder weights.
#[derive(Clone, Debug, PartialEq)]
pub struct VgaeParams {
    /// `d x HIDDEN`
    pub w0: Matrix,
    /// `HIDDEN x LATENT`
    pub w_mu: Matrix,
    /// `HIDDEN x LATENT`
    pub w_logvar: Matrix,
}

impl VgaeParams {
    /// Glorot-uniform initialisation.
    pub fn init(input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            w0: glorot(input_dim, HIDDEN, &mut rng),
            w_mu: glorot(HIDDEN, LATENT, &mut rng),
            w_logvar: glorot(HIDDEN, LATENT, &mut rng),
        }
    }

    pub fn zeros(input_dim: usize) -> Self {
        Self {
            w0: Matrix::zeros(input_dim, HIDDEN),
            w_mu: Matrix::zeros(HIDDEN, LATENT),
            w_logvar: Matrix::zeros(HIDDEN, LATENT),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w0.rows()
    }

    pub fn tensors(&self) -> [&Matrix; 3] {
        [&self.w0, &self.w_mu, &self.w_logvar]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.w0, &mut self.w_mu, &mut self.w_logvar]
    }

    /// Records the weights as tracked leaves.
    pub fn on_tape(&self, tape: &mut Tape) -> TracedParams {
        TracedParams {
            w0: tape.param(self.w0.clone()),
            w_mu: tape.param(self.w_mu.clone()),
            w_logvar: tape.param(self.w_logvar.clone()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.all_finite())
    }
}

pub(crate) fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit))
}

/// Encoder weights living on a tape.
#[derive(Clone, Copy, Debug)]
pub struct TracedParams {
    pub w0: Var,
    pub w_mu: Var,
    pub w_logvar: Var,
}

impl TracedParams {
    pub fn vars(&self) -> [Var; 3] {
        [self.w0, self.w_mu, self.w_logvar]
    }

    pub fn from_vars(v: &[Var]) -> Self {
        Self {
            w0: v[0],
            w_mu: v[1],
            w_logvar: v[2],
        }
    }

    pub fn values(&self, tape: &Tape) -> VgaeParams {
        VgaeParams {
            w0: tape.value(self.w0).clone(),
            w_mu: tape.value(self.w_mu).clone(),
            w_logvar: tape.value(self.w_logvar).clone(),
        }
    }
}

/// `D^-1/2 (A + I) D^-1/2` with `D` the degree matrix of `A + I`.
#[derive(Clone, Copy, Debug)]
pub struct NormalizedAdjacency {
    pub value: Var,
}

pub fn normalize_adjacency(tape: &mut Tape, a: Var) -> Result<NormalizedAdjacency> {
    let (n, m) = tape.shape(a);
    if n != m {
        return Err(Error::Shape {
            op: "normalize_adjacency",
            left: (n, m),
            right: (n, m),
        });
    }
    let eye = tape.constant(Matrix::identity(n));
    let looped = tape.add(a, eye)?;
    let deg = tape.row_sum(looped)?;
    let d = tape.powf(deg, -0.5)?;
    let dt = tape.transpose(d)?;
    let outer = tape.matmul(d, dt)?;
    Ok(NormalizedAdjacency {
        value: tape.mul(outer, looped)?,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct Encoding {
    pub z: Var,
    pub mu: Var,
    pub logvar: Var,
}

/// Two GCN layers with a shared ReLU hidden layer and a reparameterised
/// sample `z = mu + exp(logvar / 2) * noise`.
pub fn encode(
    tape: &mut Tape,
    adj: &NormalizedAdjacency,
    x: Var,
    p: &TracedParams,
    noise: &Matrix,
) -> Result<Encoding> {
    let xw = tape.matmul(x, p.w0)?;
    let pre = tape.matmul(adj.value, xw)?;
    let h = tape.relu(pre)?;
    let hm = tape.matmul(h, p.w_mu)?;
    let mu = tape.matmul(adj.value, hm)?;
    let hl = tape.matmul(h, p.w_logvar)?;
    let logvar = tape.matmul(adj.value, hl)?;
    let half = tape.scale(logvar, 0.5)?;
    let std = tape.exp(half)?;
    let eps = tape.constant(noise.clone());
    let jitter = tape.mul(std, eps)?;
    let z = tape.add(mu, jitter)?;
    Ok(Encoding { z, mu, logvar })
}

/// Inner-product decoder `sigmoid(Z Z^T)`.
pub fn decode(tape: &mut Tape, z: Var) -> Result<Var> {
    let logits = decode_logits(tape, z)?;
    tape.sigmoid(logits)
}

/// Decoder logits `Z Z^T`.
pub fn decode_logits(tape: &mut Tape, z: Var) -> Result<Var> {
    let zt = tape.transpose(z)?;
    tape.matmul(z, zt)
}

/// KL divergence to a standard normal prior, averaged over nodes.
pub fn kl_divergence(tape: &mut Tape, mu: Var, logvar: Var) -> Result<Var> {
    let n = tape.shape(mu).0.max(1) as f64;
    let one_plus = tape.add_scalar(logvar, 1.0)?;
    let mu2 = tape.mul(mu, mu)?;
    let var = tape.exp(logvar)?;
    let t = tape.sub(one_plus, mu2)?;
    let t = tape.sub(t, var)?;
    let s = tape.sum(t);
    tape.scale(s, -0.5 / n)
}

/// Positive-class weight `(N^2 - sum A) / sum A`; 1 for an edgeless graph.
pub fn positive_weight(a: &Matrix) -> f64 {
    let total = a.sum();
    if total <= 0.0 {
        return 1.0;
    }
    (a.data().len() as f64 - total) / total
}

/// 0/1 mask over both orientations of every listed pair.
pub fn pair_mask(n: usize, pairs: &[(usize, usize)]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for &(i, j) in pairs {
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
    }
    m
}

/// Weighted binary cross-entropy summed over the entries where `restrict`
/// is nonzero (all entries when `None`). `w` is a plain number, so no
/// gradient flows through it.
pub fn weighted_bce(
    tape: &mut Tape,
    a_hat: Var,
    target: Var,
    restrict: Option<&Matrix>,
    w: f64,
) -> Result<Var> {
    if let Some(mask) = restrict {
        if mask.data().iter().all(|&v| v == 0.0) {
            return Err(Error::Empty("loss restriction selects no entries"));
        }
    }
    let y_hat = tape.clamp(a_hat, CLIP, 1.0 - CLIP)?;
    let log_p = tape.log(y_hat)?;
    let flipped = tape.scale(y_hat, -1.0)?;
    let one_minus = tape.add_scalar(flipped, 1.0)?;
    let log_q = tape.log(one_minus)?;
    let pos = tape.mul(target, log_p)?;
    let pos = tape.scale(pos, -w)?;
    let not_y = tape.scale(target, -1.0)?;
    let not_y = tape.add_scalar(not_y, 1.0)?;
    let neg = tape.mul(not_y, log_q)?;
    let mut terms = tape.sub(pos, neg)?;
    if let Some(mask) = restrict {
        let m = tape.constant(mask.clone());
        terms = tape.mul(terms, m)?;
    }
    Ok(tape.sum(terms))
}

/// [`weighted_bce`] evaluated from decoder logits. Clamping the logits at
/// `±logit(1 - CLIP)` is the same clip as on probabilities, but `ln(1 - y)`
/// is taken as `ln sigmoid(-l)`, which keeps full precision when the
/// prediction saturates.
pub fn weighted_bce_logits(
    tape: &mut Tape,
    logits: Var,
    target: Var,
    restrict: Option<&Matrix>,
    w: f64,
) -> Result<Var> {
    if let Some(mask) = restrict {
        if mask.data().iter().all(|&v| v == 0.0) {
            return Err(Error::Empty("loss restriction selects no entries"));
        }
    }
    let bound = ((1.0 - CLIP) / CLIP).ln();
    let l = tape.clamp(logits, -bound, bound)?;
    let p = tape.sigmoid(l)?;
    let log_p = tape.log(p)?;
    let neg_l = tape.scale(l, -1.0)?;
    let q = tape.sigmoid(neg_l)?;
    let log_q = tape.log(q)?;
    let pos = tape.mul(target, log_p)?;
    let pos = tape.scale(pos, -w)?;
    let not_y = tape.scale(target, -1.0)?;
    let not_y = tape.add_scalar(not_y, 1.0)?;
    let neg = tape.mul(not_y, log_q)?;
    let mut terms = tape.sub(pos, neg)?;
    if let Some(mask) = restrict {
        let m = tape.constant(mask.clone());
        terms = tape.mul(terms, m)?;
    }
    Ok(tape.sum(terms))
}

#[derive(Clone, Copy, Debug)]
pub struct Loss {
    pub total: Var,
    pub bce: Var,
    pub kl: Var,
}

/// Everything one forward pass of the surrogate produces.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub adj: NormalizedAdjacency,
    pub encoding: Encoding,
    pub logits: Var,
    pub a_hat: Var,
    pub loss: Loss,
}

/// Full forward pass with the training objective: weighted BCE against `a`
/// plus the KL term.
pub fn forward(
    tape: &mut Tape,
    a: Var,
    x: Var,
    p: &TracedParams,
    noise: &Matrix,
    w: f64,
) -> Result<Forward> {
    let adj = normalize_adjacency(tape, a)?;
    let encoding = encode(tape, &adj, x, p, noise)?;
    let logits = decode_logits(tape, encoding.z)?;
    let a_hat = tape.sigmoid(logits)?;
    let bce = weighted_bce_logits(tape, logits, a, None, w)?;
    let kl = kl_divergence(tape, encoding.mu, encoding.logvar)?;
    let total = tape.add(bce, kl)?;
    Ok(Forward {
        adj,
        encoding,
        logits,
        a_hat,
        loss: Loss { total, bce, kl },
    })
}

/// Standard normal `n x LATENT` noise for one epoch. Each epoch reads its own
/// ChaCha stream, so any epoch can be regenerated independently.
pub fn epoch_noise(seed: u64, epoch: usize, n: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    Matrix::from_fn(n, LATENT, |_, _| rng.sample(StandardNormal))
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub epoch: usize,
    pub loss: f64,
    pub bce: f64,
    pub kl: f64,
    pub reconstruction: Matrix,
}

/// Numeric training state: parameters, optimizer moments and the noise seed.
#[derive(Clone, Debug)]
pub struct VgaeTrainer {
    params: VgaeParams,
    optimizer: Optimizer,
    seed: u64,
    epoch: usize,
}

impl VgaeTrainer {
    pub fn new(input_dim: usize, optimizer: OptimizerKind, seed: u64) -> Self {
        Self::from_params(VgaeParams::init(input_dim, seed), optimizer, seed)
    }

    pub fn from_params(params: VgaeParams, optimizer: OptimizerKind, seed: u64) -> Self {
        Self {
            params,
            optimizer: Optimizer::new(optimizer),
            seed,
            epoch: 0,
        }
    }

    pub fn params(&self) -> &VgaeParams {
        &self.params
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One gradient update on the ELBO of adjacency `a` with features `x`.
    pub fn train_step(&mut self, a: &Matrix, x: &Matrix, w: f64) -> Result<StepReport> {
        let epoch = self.epoch;
        let diagnose = |e: Error| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("surrogate diverged at epoch {epoch}: {msg}")),
            other => other,
        };
        let mut tape = Tape::new();
        let av = tape.constant(a.clone());
        let xv = tape.constant(x.clone());
        let p = self.params.on_tape(&mut tape);
        let noise = epoch_noise(self.seed, epoch, a.rows());
        let fwd = forward(&mut tape, av, xv, &p, &noise, w).map_err(diagnose)?;
        let grads = tape.backward(fwd.loss.total)?;
        let g: Vec<&Matrix> = p.vars().iter().map(|&v| grads.wrt(v)).collect();
        if g.iter().any(|m| !m.all_finite()) {
            return Err(diagnose(Error::NonFinite("parameter gradient".into())));
        }
        self.optimizer.step(&mut self.params.tensors_mut(), &g);
        if !self.params.all_finite() {
            return Err(diagnose(Error::NonFinite("parameter update".into())));
        }
        self.epoch += 1;
        Ok(StepReport {
            epoch,
            loss: tape.value(fwd.loss.total).item(),
            bce: tape.value(fwd.loss.bce).item(),
            kl: tape.value(fwd.loss.kl).item(),
            reconstruction: tape.value(fwd.a_hat).clone(),
        })
    }

    /// Posterior means for every node.
    pub fn embed(&self, a: &Matrix, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let av = tape.constant(a.clone());
        let xv = tape.constant(x.clone());
        let p = self.params.on_tape(&mut tape);
        let adj = normalize_adjacency(&mut tape, av)?;
        let zero = Matrix::zeros(a.rows(), LATENT);
        let enc = encode(&mut tape, &adj, xv, &p, &zero)?;
        Ok(tape.value(enc.mu).clone())
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = CheckpointHeader {
            model: "vgae".into(),
            names: vec!["w0".into(), "w_mu".into(), "w_logvar".into()],
            shapes: self.params.tensors().iter().map(|m| m.shape()).collect(),
            seed: self.seed,
            epoch: self.epoch,
        };
        checkpoint::save(path, &header, &self.params.tensors())
    }

    /// Restores parameters and epoch counter; optimizer moments start fresh.
    pub fn load_checkpoint(path: impl AsRef<Path>, optimizer: OptimizerKind) -> Result<Self> {
        let (header, mut t) = checkpoint::load(path)?;
        if header.model != "vgae" || t.len() != 3 {
            return Err(Error::Config(format!("not a vgae checkpoint: {}", header.model)));
        }
        let w_logvar = t.pop().expect("three tensors");
        let w_mu = t.pop().expect("three tensors");
        let w0 = t.pop().expect("three tensors");
        let params = VgaeParams { w0, w_mu, w_logvar };
        let mut trainer = Self::from_params(params, optimizer, header.seed);
        trainer.epoch = header.epoch;
        Ok(trainer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::planted_partition;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(1, 1));
        let n = normalize_adjacency(&mut t, a).unwrap();
        assert_eq!(t.value(n.value), &Matrix::from_rows(&[[1.0]]));
    }

    #[test]
    fn single_edge_normalizes_to_halves() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        let n = normalize_adjacency(&mut t, a).unwrap();
        let v = t.value(n.value);
        for &x in v.data() {
            assert!(close(x, 0.5, 1e-15));
        }
    }

    #[test]
    fn zero_noise_gives_mean() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]));
        let x = t.constant(Matrix::identity(3));
        let p = VgaeParams::init(3, 1).on_tape(&mut t);
        let adj = normalize_adjacency(&mut t, a).unwrap();
        let e = encode(&mut t, &adj, x, &p, &Matrix::zeros(3, LATENT)).unwrap();
        assert_eq!(t.value(e.z), t.value(e.mu));
        assert_eq!(t.shape(e.z), (3, LATENT));
    }

    #[test]
    fn zero_weights_give_noise() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 2));
        let x = t.constant(Matrix::identity(2));
        let p = VgaeParams::zeros(2).on_tape(&mut t);
        let adj = normalize_adjacency(&mut t, a).unwrap();
        let noise = epoch_noise(4, 0, 2);
        let e = encode(&mut t, &adj, x, &p, &noise).unwrap();
        assert!(t.value(e.mu).data().iter().all(|&v| v == 0.0));
        assert_eq!(t.value(e.z), &noise);
    }

    #[test]
    fn zero_embedding_decodes_to_half() {
        let mut t = Tape::new();
        let z = t.constant(Matrix::zeros(3, 2));
        let a = decode(&mut t, z).unwrap();
        assert!(t.value(a).data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn decoder_prefers_identical_rows() {
        let mut t = Tape::new();
        // rows 1 and 2 share norm; row 1 equals row 0
        let z = t.constant(Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]));
        let a = decode(&mut t, z).unwrap();
        let v = t.value(a);
        assert!(v[(0, 1)] > v[(0, 2)]);
    }

    #[test]
    fn kl_closed_forms() {
        let mut t = Tape::new();
        let mu = t.constant(Matrix::zeros(3, 2));
        let lv = t.constant(Matrix::zeros(3, 2));
        let k = kl_divergence(&mut t, mu, lv).unwrap();
        assert_eq!(t.value(k).item(), 0.0);

        let mu = t.constant(Matrix::from_rows(&[[1.0]]));
        let lv = t.constant(Matrix::zeros(1, 1));
        let k = kl_divergence(&mut t, mu, lv).unwrap();
        assert!(close(t.value(k).item(), 0.5, 1e-15));
    }

    #[test]
    fn kl_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let mut t = Tape::new();
            let mu = t.constant(Matrix::from_fn(5, 4, |_, _| rng.random_range(-2.0..2.0)));
            let lv = t.constant(Matrix::from_fn(5, 4, |_, _| rng.random_range(-2.0..2.0)));
            let k = kl_divergence(&mut t, mu, lv).unwrap();
            assert!(t.value(k).item() >= 0.0);
        }
    }

    #[test]
    fn positive_weight_of_single_edge() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(positive_weight(&a), 1.0);
    }

    #[test]
    fn bce_of_half_predictions() {
        let mut t = Tape::new();
        let y = t.constant(Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        let p = t.constant(Matrix::filled(2, 2, 0.5));
        let l = weighted_bce(&mut t, p, y, None, 1.0).unwrap();
        assert!(close(t.value(l).item(), 4.0 * 2f64.ln(), 1e-12));
        assert!(close(t.value(l).item(), 2.7726, 1e-4));
    }

    #[test]
    fn logit_bce_agrees_with_probability_bce() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut t = Tape::new();
        let l = t.constant(Matrix::from_fn(4, 4, |_, _| rng.random_range(-6.0..6.0)));
        let y = t.constant(Matrix::from_fn(4, 4, |i, j| ((i + j) % 2) as f64));
        let p = t.sigmoid(l).unwrap();
        let a = weighted_bce(&mut t, p, y, None, 2.5).unwrap();
        let b = weighted_bce_logits(&mut t, l, y, None, 2.5).unwrap();
        assert!(close(t.value(a).item(), t.value(b).item(), 1e-10));
    }

    #[test]
    fn bce_of_perfect_prediction_is_near_zero() {
        let mut t = Tape::new();
        let target = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let y = t.constant(target.clone());
        let p = t.constant(target);
        let l = weighted_bce(&mut t, p, y, None, 1.0).unwrap();
        assert!(t.value(l).item() < 1e-6);
    }

    #[test]
    fn bce_respects_restriction() {
        let mut t = Tape::new();
        let y = t.constant(Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        let p = t.constant(Matrix::filled(2, 2, 0.5));
        let mask = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        let l = weighted_bce(&mut t, p, y, Some(&mask), 3.0).unwrap();
        assert!(close(t.value(l).item(), 3.0 * 2f64.ln(), 1e-12));
        let empty = Matrix::zeros(2, 2);
        assert!(matches!(
            weighted_bce(&mut t, p, y, Some(&empty), 1.0),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn loss_is_bce_plus_kl_and_reconstruction_symmetric() {
        let g = planted_partition(12, 2, 0.5, 0.1, 3);
        let x = Matrix::identity(12);
        let w = positive_weight(g.adjacency());
        let mut tr = VgaeTrainer::new(12, OptimizerKind::Sgd { lr: 0.01 }, 5);
        for _ in 0..3 {
            let r = tr.train_step(g.adjacency(), &x, w).unwrap();
            assert_eq!(r.loss, r.bce + r.kl);
            assert!(r.reconstruction.is_symmetric());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let g = planted_partition(15, 3, 0.5, 0.05, 2);
        let x = Matrix::identity(15);
        let w = positive_weight(g.adjacency());
        let run = || {
            let mut tr = VgaeTrainer::new(15, OptimizerKind::Adam { lr: 0.01 }, 9);
            for _ in 0..5 {
                tr.train_step(g.adjacency(), &x, w).unwrap();
            }
            tr.params().clone()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let g = planted_partition(10, 2, 0.5, 0.1, 1);
        let x = Matrix::identity(10);
        let mut tr = VgaeTrainer::new(10, OptimizerKind::Sgd { lr: 0.0 }, 1);
        let before = tr.params().clone();
        for _ in 0..3 {
            tr.train_step(g.adjacency(), &x, 1.0).unwrap();
        }
        assert_eq!(tr.params(), &before);
    }

    #[test]
    fn loss_decreases_on_planted_partition() {
        let g = planted_partition(20, 2, 0.6, 0.05, 11);
        let x = Matrix::identity(20);
        let w = positive_weight(g.adjacency());
        let mut tr = VgaeTrainer::new(20, OptimizerKind::Sgd { lr: 0.01 }, 3);
        let losses: Vec<f64> = (0..50)
            .map(|_| tr.train_step(g.adjacency(), &x, w).unwrap().loss)
            .collect();
        let head: f64 = losses[..5].iter().sum::<f64>() / 5.0;
        let tail: f64 = losses[45..].iter().sum::<f64>() / 5.0;
        assert!(tail < head, "head {head} tail {tail}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vgae.ckpt");
        let g = planted_partition(8, 2, 0.6, 0.1, 0);
        let x = Matrix::identity(8);
        let mut tr = VgaeTrainer::new(8, OptimizerKind::Sgd { lr: 0.01 }, 4);
        tr.train_step(g.adjacency(), &x, 1.0).unwrap();
        tr.save_checkpoint(&path).unwrap();
        let back = VgaeTrainer::load_checkpoint(&path, OptimizerKind::Sgd { lr: 0.01 }).unwrap();
        assert_eq!(back.params(), tr.params());
        assert_eq!(back.epoch(), 1);
    }
}
