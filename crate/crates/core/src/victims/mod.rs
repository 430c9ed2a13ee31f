//! Link predictors trained on clean and poisoned graphs.

pub mod gat;
pub mod lightgcn;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointHeader};
use crate::error::{Error, Result};
use crate::graph::{Graph, LinkSplit};
use crate::optim::{Optimizer, OptimizerKind};
use crate::surrogate::{positive_weight, VgaeTrainer};
use crate::tensor::{sigmoid, Matrix};

pub use gat::GatParams;
pub use lightgcn::LightGcnParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VictimKind {
    Vgae,
    Gat,
    LightGcn,
}

impl VictimKind {
    pub const ALL: [VictimKind; 3] = [VictimKind::Vgae, VictimKind::Gat, VictimKind::LightGcn];

    pub fn name(self) -> &'static str {
        match self {
            VictimKind::Vgae => "vgae",
            VictimKind::Gat => "gat",
            VictimKind::LightGcn => "lightgcn",
        }
    }
}

impl fmt::Display for VictimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VictimKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VictimKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown victim model `{s}`")))
    }
}

/// Training schedule of a victim; always optimised with Adam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VictimHyper {
    pub epochs: usize,
    pub lr: f64,
}

impl VictimHyper {
    pub fn default_for(kind: VictimKind) -> Self {
        match kind {
            VictimKind::Vgae => Self { epochs: 200, lr: 0.01 },
            VictimKind::Gat => Self { epochs: 200, lr: 0.005 },
            VictimKind::LightGcn => Self { epochs: 200, lr: 0.01 },
        }
    }
}

#[derive(Clone, Debug)]
enum Model {
    Vgae(VgaeTrainer),
    Gat(GatParams),
    LightGcn(LightGcnParams),
}

/// A trained victim with the node embeddings it scores pairs from.
#[derive(Clone, Debug)]
pub struct TrainedVictim {
    kind: VictimKind,
    model: Model,
    embeddings: Matrix,
    losses: Vec<f64>,
    seed: u64,
}

impl TrainedVictim {
    pub fn kind(&self) -> VictimKind {
        self.kind
    }

    /// Training loss after every epoch.
    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    /// Higher means more likely linked. VGAE and GAT return
    /// `sigmoid(z_i . z_j)`, LightGCN the raw inner product.
    pub fn predict_links(&self, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        let n = self.embeddings.rows();
        pairs
            .iter()
            .map(|&(i, j)| {
                if i >= n || j >= n {
                    return Err(Error::Domain {
                        op: "predict_links",
                        msg: format!("pair ({i}, {j}) out of range for {n} nodes"),
                    });
                }
                let dot: f64 = self
                    .embeddings
                    .row(i)
                    .iter()
                    .zip(self.embeddings.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                Ok(match self.kind {
                    VictimKind::LightGcn => dot,
                    _ => sigmoid(dot),
                })
            })
            .collect()
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let (names, tensors): (Vec<String>, Vec<&Matrix>) = match &self.model {
            Model::Vgae(t) => {
                let p = t.params();
                (vec!["w0".into(), "w_mu".into(), "w_logvar".into()], p.tensors().to_vec())
            }
            Model::Gat(p) => {
                let names = (0..p.layers.len())
                    .flat_map(|k| [format!("w{k}"), format!("a_dst{k}"), format!("a_src{k}")])
                    .collect();
                (names, p.tensors())
            }
            Model::LightGcn(p) => (vec!["embeddings".into()], vec![&p.embeddings]),
        };
        let header = CheckpointHeader {
            model: self.kind.name().into(),
            names,
            shapes: tensors.iter().map(|m| m.shape()).collect(),
            seed: self.seed,
            epoch: self.losses.len(),
        };
        checkpoint::save(path, &header, &tensors)
    }
}

/// `i,j,score` lines with a header.
pub fn predictions_csv(pairs: &[(usize, usize)], scores: &[f64]) -> String {
    let mut out = String::from("i,j,score\n");
    for (&(i, j), s) in pairs.iter().zip(scores) {
        out.push_str(&format!("{i},{j},{s:e}\n"));
    }
    out
}

/// Trains `kind` on the split's training graph of `g`. Validation and test
/// positives are removed before training and no held-out pair is read.
pub fn train_victim(
    kind: VictimKind,
    g: &Graph,
    split: &LinkSplit,
    hyper: VictimHyper,
    seed: u64,
) -> Result<TrainedVictim> {
    train_on(kind, &split.training_graph(g), hyper, seed)
}

/// Trains `kind` directly on `train`.
pub fn train_on(kind: VictimKind, train: &Graph, hyper: VictimHyper, seed: u64) -> Result<TrainedVictim> {
    let opt = OptimizerKind::Adam { lr: hyper.lr };
    let a = train.adjacency();
    let mut losses = Vec::with_capacity(hyper.epochs);
    let diverged = |e: Error, epoch: usize| match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("{kind} diverged at epoch {epoch}: {msg}")),
        other => other,
    };
    let (model, embeddings) = match kind {
        VictimKind::Vgae => {
            let x = train.features_or_identity();
            let w = positive_weight(a);
            let mut t = VgaeTrainer::new(x.cols(), opt, seed);
            for _ in 0..hyper.epochs {
                losses.push(t.train_step(a, &x, w)?.loss);
            }
            let z = t.embed(a, &x)?;
            (Model::Vgae(t), z)
        }
        VictimKind::Gat => {
            let x = train
                .features()
                .ok_or_else(|| Error::Config("GAT needs node features".into()))?
                .clone();
            let mask = gat::attention_mask(a);
            let w = positive_weight(a);
            let mut p = GatParams::init(x.cols(), seed);
            let mut o = Optimizer::new(opt);
            for epoch in 0..hyper.epochs {
                let l = gat::train_step(&mut p, &mut o, &x, a, &mask, w).map_err(|e| diverged(e, epoch))?;
                losses.push(l);
            }
            let z = gat::embed(&x, &mask, &p)?;
            (Model::Gat(p), z)
        }
        VictimKind::LightGcn => {
            if train.bipartite().is_none() {
                return Err(Error::Config("LightGCN needs a bipartite user/item graph".into()));
            }
            let norm = lightgcn::propagation_matrix(train);
            let mut p = LightGcnParams::init(train.n(), seed);
            let mut o = Optimizer::new(opt);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            for epoch in 0..hyper.epochs {
                let l = lightgcn::train_step(&mut p, &mut o, train, &norm, &mut rng)
                    .map_err(|e| diverged(e, epoch))?;
                losses.push(l);
            }
            let z = lightgcn::final_embeddings(&p, train)?;
            (Model::LightGcn(p), z)
        }
    };
    Ok(TrainedVictim {
        kind,
        model,
        embeddings,
        losses,
        seed,
    })
}
