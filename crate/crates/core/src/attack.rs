//! Meta-gradient of a weighted, per-epoch attack loss with respect to the
//! adjacency matrix of the surrogate's training graph.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, LinkSplit};
use crate::metrics::average_precision;
use crate::modifier::Budget;
use crate::optim::{Optimizer, OptimizerKind};
use crate::surrogate::{self, epoch_noise, positive_weight, TracedParams, VgaeParams};
use crate::tensor::{Matrix, Tape, Var};

/// How each epoch's attack loss is weighted before accumulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Uniform,
    /// Norm of the epoch's attack-loss gradient with respect to the adjacency.
    Magnitude,
    /// Average precision of the epoch's reconstruction on validation links.
    Performance,
    /// `i / k` for epoch `i` of `k`, counting from 1.
    Linear,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 4] = [
        WeightScheme::Uniform,
        WeightScheme::Magnitude,
        WeightScheme::Performance,
        WeightScheme::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Uniform => "uniform",
            WeightScheme::Magnitude => "magnitude",
            WeightScheme::Performance => "performance",
            WeightScheme::Linear => "linear",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightScheme::ALL
            .into_iter()
            .find(|w| w.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown weight scheme `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMode {
    /// Differentiate through every parameter update.
    FullUnroll,
    /// Treat parameters as constants per epoch and sum adjacency gradients.
    FirstOrder,
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMode::FullUnroll => "full-unroll",
            AttackMode::FirstOrder => "first-order",
        })
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-unroll" => Ok(AttackMode::FullUnroll),
            "first-order" => Ok(AttackMode::FirstOrder),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected full-unroll or first-order)"
            ))),
        }
    }
}

/// Entries the attack loss is evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackTarget {
    /// Validation positives and their sampled negatives.
    ValidationLinks,
    /// Every entry of the training adjacency.
    AllEntries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub budget: Budget,
    pub epochs: usize,
    pub scheme: WeightScheme,
    pub seed: u64,
    pub mode: AttackMode,
    pub target: AttackTarget,
    /// Surrogate optimizer. Full unrolling requires plain gradient descent.
    pub optimizer: OptimizerKind,
    /// Full unrolling refuses graphs with more nodes than this.
    pub max_unroll_nodes: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            budget: Budget::Fraction(0.05),
            epochs: 100,
            scheme: WeightScheme::Linear,
            seed: 0,
            mode: AttackMode::FirstOrder,
            target: AttackTarget::ValidationLinks,
            optimizer: OptimizerKind::Adam { lr: 0.01 },
            max_unroll_nodes: 1500,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("attack needs at least one epoch".into()));
        }
        if self.mode == AttackMode::FullUnroll && !matches!(self.optimizer, OptimizerKind::Sgd { .. }) {
            return Err(Error::Config(
                "full-unroll mode differentiates plain gradient descent only; use the sgd optimizer".into(),
            ));
        }
        Ok(())
    }
}

/// Weight of epoch `i` (1-based) out of `k`.
pub fn epoch_weight(scheme: WeightScheme, i: usize, k: usize, grad: &Matrix, val_ap: f64) -> f64 {
    match scheme {
        WeightScheme::Uniform => 1.0,
        WeightScheme::Magnitude => grad.frobenius_norm(),
        WeightScheme::Performance => val_ap,
        WeightScheme::Linear => i as f64 / k as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub weight: f64,
    pub attack_loss: f64,
    pub train_loss: f64,
}

/// Gradient of the accumulated attack loss with respect to the training
/// adjacency, with masked entries zeroed.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaGradient {
    pub value: Matrix,
    pub epochs: Vec<EpochRecord>,
    /// `sum_i w_i * L_i`
    pub accumulated_loss: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    n: usize,
    config: AttackConfig,
    accumulated_loss: f64,
    epochs: Vec<EpochRecord>,
}

impl MetaGradient {
    /// Writes `<stem>.bin` (row-major little-endian f64) and `<stem>.json`.
    pub fn save(&self, stem: impl AsRef<Path>, config: &AttackConfig) -> Result<(PathBuf, PathBuf)> {
        let stem = stem.as_ref();
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        fs::write(&bin, self.value.to_le_bytes()).map_err(|e| Error::io(&bin, e))?;
        let sidecar = Sidecar {
            n: self.value.rows(),
            config: config.clone(),
            accumulated_loss: self.accumulated_loss,
            epochs: self.epochs.clone(),
        };
        let text = serde_json::to_string_pretty(&sidecar)?;
        fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
        Ok((bin, json))
    }

    pub fn load(stem: impl AsRef<Path>) -> Result<(Self, AttackConfig)> {
        let stem = stem.as_ref();
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        let value = Matrix::from_le_bytes(sidecar.n, sidecar.n, &bytes)?;
        Ok((
            Self {
                value,
                epochs: sidecar.epochs,
                accumulated_loss: sidecar.accumulated_loss,
            },
            sidecar.config,
        ))
    }
}

/// Fixed inputs of one attack run.
#[derive(Clone, Debug)]
pub struct AttackProblem {
    /// Adjacency the surrogate trains on; the differentiation variable.
    pub adjacency: Matrix,
    pub features: Matrix,
    /// Labels of the attack loss, taken from the original graph.
    pub target: Matrix,
    /// Entries included in the attack loss; `None` means all.
    pub mask: Option<Matrix>,
    pub val_pairs: Vec<(usize, usize)>,
    pub val_labels: Vec<bool>,
    /// Positive-class weight of the training loss.
    pub train_weight: f64,
    /// Positive-class weight of the attack loss.
    pub attack_weight: f64,
    /// Pairs whose gradient is zeroed before edge selection.
    pub masked_pairs: HashSet<(usize, usize)>,
}

impl AttackProblem {
    /// Trains on the split's training graph. Every validation and test pair is
    /// masked so the attack cannot edit held-out links directly.
    pub fn new(g: &Graph, split: &LinkSplit, target: AttackTarget) -> Result<Self> {
        let n = g.n();
        let train = split.training_graph(g);
        let adjacency = train.adjacency().clone();
        let (val_pairs, val_labels) = split.validation_pairs();
        let (target_m, mask) = match target {
            AttackTarget::ValidationLinks => {
                if val_pairs.is_empty() {
                    return Err(Error::Config(
                        "validation-links attack target needs a nonzero validation fraction".into(),
                    ));
                }
                let mut y = Matrix::zeros(n, n);
                for &(i, j) in &split.val_pos {
                    y[(i, j)] = 1.0;
                    y[(j, i)] = 1.0;
                }
                (y, Some(surrogate::pair_mask(n, &val_pairs)))
            }
            AttackTarget::AllEntries => (adjacency.clone(), None),
        };
        let attack_weight = match &mask {
            Some(m) => {
                let included = m.sum();
                let positives = target_m.hadamard(m)?.sum();
                if positives > 0.0 {
                    (included - positives) / positives
                } else {
                    1.0
                }
            }
            None => positive_weight(&target_m),
        };
        Ok(Self {
            train_weight: positive_weight(&adjacency),
            adjacency,
            features: g.features_or_identity(),
            target: target_m,
            mask,
            val_pairs,
            val_labels,
            attack_weight,
            masked_pairs: split.held_out(),
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    fn val_ap(&self, a_hat: &Matrix) -> Result<f64> {
        if self.val_pairs.is_empty() {
            return Err(Error::Config("performance weighting needs validation links".into()));
        }
        let scores: Vec<f64> = self.val_pairs.iter().map(|&(i, j)| a_hat[(i, j)]).collect();
        average_precision(&scores, &self.val_labels)
    }

    /// Attack-loss gradient at fixed parameters (first-order sense).
    fn attack_gradient(&self, params: &VgaeParams, noise: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let a = tape.param(self.adjacency.clone());
        let x = tape.constant(self.features.clone());
        let p = TracedParams {
            w0: tape.constant(params.w0.clone()),
            w_mu: tape.constant(params.w_mu.clone()),
            w_logvar: tape.constant(params.w_logvar.clone()),
        };
        let fwd = surrogate::forward(&mut tape, a, x, &p, noise, self.train_weight)?;
        let l = self.attack_loss(&mut tape, fwd.logits)?;
        Ok(tape.backward(l)?.wrt(a).clone())
    }

    fn attack_loss(&self, tape: &mut Tape, logits: Var) -> Result<Var> {
        let y = tape.constant(self.target.clone());
        surrogate::weighted_bce_logits(tape, logits, y, self.mask.as_ref(), self.attack_weight)
    }

    /// Zeroes the diagonal and every masked pair in both orientations.
    pub fn apply_mask(&self, grad: &mut Matrix) {
        for i in 0..grad.rows() {
            grad[(i, i)] = 0.0;
        }
        for &(i, j) in &self.masked_pairs {
            grad[(i, j)] = 0.0;
            grad[(j, i)] = 0.0;
        }
    }
}

/// Runs the attack on the split's training graph and returns the masked
/// meta-gradient.
pub fn run_attack(g: &Graph, split: &LinkSplit, cfg: &AttackConfig) -> Result<MetaGradient> {
    let problem = AttackProblem::new(g, split, cfg.target)?;
    let mut meta = meta_gradient(&problem, cfg)?;
    problem.apply_mask(&mut meta.value);
    Ok(meta)
}

/// Unmasked meta-gradient of `problem`.
pub fn meta_gradient(problem: &AttackProblem, cfg: &AttackConfig) -> Result<MetaGradient> {
    cfg.validate()?;
    let params = VgaeParams::init(problem.features.cols(), cfg.seed);
    match cfg.mode {
        AttackMode::FirstOrder => first_order(problem, cfg, params),
        AttackMode::FullUnroll => {
            if problem.n() > cfg.max_unroll_nodes {
                return Err(Error::Unsupported(format!(
                    "full unrolling is capped at {} nodes (graph has {}); use --mode first-order",
                    cfg.max_unroll_nodes,
                    problem.n()
                )));
            }
            let mut tape = Tape::new();
            let a = tape.param(problem.adjacency.clone());
            let (acc, epochs) = unroll(&mut tape, a, problem, cfg, &params)?;
            let value = tape.backward(acc)?.wrt(a).clone();
            finish(value, epochs, tape.value(acc).item())
        }
    }
}

/// Accumulated attack loss of the full-unroll pipeline evaluated at an
/// arbitrary adjacency, with no gradient tracking. Used to check the
/// meta-gradient against finite differences.
pub fn unrolled_objective(problem: &AttackProblem, a: &Matrix, cfg: &AttackConfig) -> Result<f64> {
    cfg.validate()?;
    let params = VgaeParams::init(problem.features.cols(), cfg.seed);
    let mut tape = Tape::new();
    let av = tape.constant(a.clone());
    let (acc, _) = unroll(&mut tape, av, problem, cfg, &params)?;
    Ok(tape.value(acc).item())
}

fn finish(value: Matrix, epochs: Vec<EpochRecord>, accumulated_loss: f64) -> Result<MetaGradient> {
    if !value.all_finite() || !accumulated_loss.is_finite() {
        return Err(Error::NonFinite("accumulated attack loss".into()));
    }
    Ok(MetaGradient {
        value,
        epochs,
        accumulated_loss,
    })
}

fn unroll(
    tape: &mut Tape,
    a: Var,
    problem: &AttackProblem,
    cfg: &AttackConfig,
    init: &VgaeParams,
) -> Result<(Var, Vec<EpochRecord>)> {
    let lr = cfg.optimizer.lr();
    let k = cfg.epochs;
    let n = problem.n();
    let x = tape.constant(problem.features.clone());
    let mut p = init.on_tape(tape);
    let mut acc: Option<Var> = None;
    let mut records = Vec::with_capacity(k);
    for i in 1..=k {
        let noise = epoch_noise(cfg.seed, i - 1, n);
        let fwd = surrogate::forward(tape, a, x, &p, &noise, problem.train_weight)?;
        let l_att = problem.attack_loss(tape, fwd.logits)?;
        let w = match cfg.scheme {
            WeightScheme::Magnitude => {
                let g = problem.attack_gradient(&p.values(tape), &noise)?;
                epoch_weight(cfg.scheme, i, k, &g, 0.0)
            }
            WeightScheme::Performance => {
                let ap = problem.val_ap(tape.value(fwd.a_hat))?;
                epoch_weight(cfg.scheme, i, k, &Matrix::zeros(0, 0), ap)
            }
            s => epoch_weight(s, i, k, &Matrix::zeros(0, 0), 0.0),
        };
        let term = tape.scale(l_att, w)?;
        acc = Some(match acc {
            None => term,
            Some(prev) => tape.add(prev, term)?,
        });
        records.push(EpochRecord {
            epoch: i,
            weight: w,
            attack_loss: tape.value(l_att).item(),
            train_loss: tape.value(fwd.loss.total).item(),
        });
        // the update after the last epoch feeds no loss
        if i < k {
            let grads = tape.grad(fwd.loss.total, &p.vars())?;
            let mut next = Vec::with_capacity(3);
            for (&param, &g) in p.vars().iter().zip(&grads) {
                let step = tape.scale(g, lr)?;
                next.push(tape.sub(param, step)?);
            }
            p = TracedParams::from_vars(&next);
        }
    }
    Ok((acc.expect("at least one epoch"), records))
}

fn first_order(problem: &AttackProblem, cfg: &AttackConfig, mut params: VgaeParams) -> Result<MetaGradient> {
    let k = cfg.epochs;
    let n = problem.n();
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut meta = Matrix::zeros(n, n);
    let mut accumulated = 0.0;
    let mut records = Vec::with_capacity(k);
    for i in 1..=k {
        let noise = epoch_noise(cfg.seed, i - 1, n);
        let mut tape = Tape::new();
        let a = tape.param(problem.adjacency.clone());
        let x = tape.constant(problem.features.clone());
        let p = params.on_tape(&mut tape);
        let fwd = surrogate::forward(&mut tape, a, x, &p, &noise, problem.train_weight)
            .map_err(|e| diverged(e, i))?;
        let l_att = problem.attack_loss(&mut tape, fwd.logits)?;

        let att_grads = tape.backward(l_att)?;
        let g_a = att_grads.wrt(a);
        let ap = match cfg.scheme {
            WeightScheme::Performance => problem.val_ap(tape.value(fwd.a_hat))?,
            _ => 0.0,
        };
        let w = epoch_weight(cfg.scheme, i, k, g_a, ap);
        meta.axpy(w, g_a);
        let l_value = tape.value(l_att).item();
        accumulated += w * l_value;
        records.push(EpochRecord {
            epoch: i,
            weight: w,
            attack_loss: l_value,
            train_loss: tape.value(fwd.loss.total).item(),
        });

        let train_grads = tape.backward(fwd.loss.total)?;
        let g: Vec<&Matrix> = p.vars().iter().map(|&v| train_grads.wrt(v)).collect();
        let [w0, w_mu, w_logvar] = [&mut params.w0, &mut params.w_mu, &mut params.w_logvar];
        optimizer.step(&mut [w0, w_mu, w_logvar], &g);
        if !params.all_finite() {
            return Err(diverged(Error::NonFinite("parameter update".into()), i));
        }
    }
    finish(meta, records, accumulated)
}

fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("surrogate diverged at epoch {epoch}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_split, planted_partition, SplitFractions};

    fn fixture() -> (Graph, LinkSplit) {
        let g = planted_partition(24, 2, 0.5, 0.05, 3);
        let s = make_split(&g, SplitFractions { train: 0.7, val: 0.15, test: 0.15 }, 1).unwrap();
        (g, s)
    }

    fn cfg(scheme: WeightScheme, mode: AttackMode, epochs: usize) -> AttackConfig {
        AttackConfig {
            epochs,
            scheme,
            mode,
            seed: 4,
            optimizer: OptimizerKind::Sgd { lr: 0.01 },
            ..AttackConfig::default()
        }
    }

    #[test]
    fn weight_examples() {
        let z = Matrix::zeros(1, 1);
        assert_eq!(epoch_weight(WeightScheme::Linear, 5, 10, &z, 0.0), 0.5);
        let g = Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]);
        assert_eq!(epoch_weight(WeightScheme::Magnitude, 1, 1, &g, 0.0), 5.0);
        let ap = average_precision(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap();
        assert_eq!(epoch_weight(WeightScheme::Performance, 1, 1, &z, ap), 1.0);
        assert_eq!(epoch_weight(WeightScheme::Uniform, 3, 7, &z, 0.2), 1.0);
    }

    #[test]
    fn linear_weights_increase() {
        let (g, s) = fixture();
        let m = run_attack(&g, &s, &cfg(WeightScheme::Linear, AttackMode::FirstOrder, 6)).unwrap();
        for pair in m.epochs.windows(2) {
            assert!(pair[1].weight > pair[0].weight);
        }
        assert_eq!(m.epochs.last().unwrap().weight, 1.0);
    }

    #[test]
    fn uniform_accumulation_is_sum_of_losses() {
        let (g, s) = fixture();
        for mode in [AttackMode::FirstOrder, AttackMode::FullUnroll] {
            let m = run_attack(&g, &s, &cfg(WeightScheme::Uniform, mode, 4)).unwrap();
            let sum: f64 = m.epochs.iter().map(|e| e.attack_loss).sum();
            assert!((m.accumulated_loss - sum).abs() <= 1e-10);
        }
    }

    #[test]
    fn all_weights_nonnegative() {
        let (g, s) = fixture();
        for scheme in WeightScheme::ALL {
            let m = run_attack(&g, &s, &cfg(scheme, AttackMode::FirstOrder, 3)).unwrap();
            assert!(m.epochs.iter().all(|e| e.weight >= 0.0 && e.weight.is_finite()));
        }
    }

    #[test]
    fn single_epoch_modes_agree() {
        // with k = 1 both modes differentiate the same single loss
        let (g, s) = fixture();
        let a = run_attack(&g, &s, &cfg(WeightScheme::Uniform, AttackMode::FirstOrder, 1)).unwrap();
        let b = run_attack(&g, &s, &cfg(WeightScheme::Uniform, AttackMode::FullUnroll, 1)).unwrap();
        let diff = a.value.sub(&b.value).unwrap().max_abs();
        assert!(diff <= 1e-12 * a.value.max_abs().max(1.0), "diff {diff}");
    }

    #[test]
    fn deterministic() {
        let (g, s) = fixture();
        for mode in [AttackMode::FirstOrder, AttackMode::FullUnroll] {
            let c = cfg(WeightScheme::Magnitude, mode, 3);
            assert_eq!(run_attack(&g, &s, &c).unwrap(), run_attack(&g, &s, &c).unwrap());
        }
    }

    #[test]
    fn masked_entries_are_zero() {
        let (g, s) = fixture();
        let m = run_attack(&g, &s, &cfg(WeightScheme::Linear, AttackMode::FirstOrder, 2)).unwrap();
        for i in 0..g.n() {
            assert_eq!(m.value[(i, i)], 0.0);
        }
        for (i, j) in s.held_out() {
            assert_eq!(m.value[(i, j)], 0.0);
            assert_eq!(m.value[(j, i)], 0.0);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let (g, s) = fixture();
        let zero = cfg(WeightScheme::Linear, AttackMode::FirstOrder, 0);
        assert!(matches!(run_attack(&g, &s, &zero), Err(Error::Config(_))));
        let mut adam = cfg(WeightScheme::Linear, AttackMode::FullUnroll, 2);
        adam.optimizer = OptimizerKind::Adam { lr: 0.01 };
        assert!(matches!(run_attack(&g, &s, &adam), Err(Error::Config(_))));
        let mut capped = cfg(WeightScheme::Linear, AttackMode::FullUnroll, 2);
        capped.max_unroll_nodes = 10;
        assert!(matches!(run_attack(&g, &s, &capped), Err(Error::Unsupported(_))));
    }

    #[test]
    fn export_round_trip() {
        let (g, s) = fixture();
        let c = cfg(WeightScheme::Linear, AttackMode::FirstOrder, 2);
        let m = run_attack(&g, &s, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (bin, _) = m.save(dir.path().join("meta"), &c).unwrap();
        assert_eq!(fs::metadata(bin).unwrap().len(), (g.n() * g.n() * 8) as u64);
        let (back, c2) = MetaGradient::load(dir.path().join("meta")).unwrap();
        assert_eq!(back, m);
        assert_eq!(c2, c);
    }

    #[test]
    fn names_parse() {
        for s in WeightScheme::ALL {
            assert_eq!(s.name().parse::<WeightScheme>().unwrap(), s);
        }
        assert_eq!("full-unroll".parse::<AttackMode>().unwrap(), AttackMode::FullUnroll);
        assert!("fast".parse::<AttackMode>().is_err());
    }
}
