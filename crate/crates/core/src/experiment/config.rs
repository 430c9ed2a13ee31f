//! TOML experiment configuration.
//!
//! ```toml
//! [data]
//! name = "fixture"
//! [data.planted]
//! nodes = 200
//! blocks = 2
//! p_in = 0.1
//! p_out = 0.005
//!
//! [split]
//! train = 0.85
//! val = 0.05
//! test = 0.10
//! seed = 0
//!
//! [attack]
//! budget = 0.05        # a float is a fraction of the edge count, an integer a flip count
//! scheme = "linear"
//! mode = "first-order"
//!
//! [victims]
//! models = ["vgae"]
//!
//! [metrics]
//! names = ["roc_auc", "ap"]
//!
//! [output]
//! dir = "runs/fixture"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{AttackConfig, AttackMode, AttackTarget, WeightScheme};
use crate::baselines::BaselineKind;
use crate::error::{Error, Result};
use crate::graph::io::{load_graph, load_interactions, load_linqs};
use crate::graph::{planted_partition, Graph, SplitFractions};
use crate::metrics::{MetricKind, DEFAULT_K};
use crate::modifier::Budget;
use crate::optim::OptimizerKind;
use crate::tensor::Matrix;
use crate::victims::{VictimHyper, VictimKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub victims: VictimsConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Where the graph comes from. Exactly one source must be set: `edges`,
/// `linqs_content` + `linqs_cites`, `interactions` or `planted`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset name recorded in reports.
    #[serde(default = "default_name")]
    pub name: String,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub linqs_content: Option<PathBuf>,
    pub linqs_cites: Option<PathBuf>,
    /// `user,item` rows; builds a bipartite graph.
    pub interactions: Option<PathBuf>,
    pub planted: Option<PlantedConfig>,
    /// Keep only a connected subset of at most this many nodes.
    pub max_nodes: Option<usize>,
    /// Attach identity features when the source has none.
    #[serde(default)]
    pub identity_features: bool,
}

fn default_name() -> String {
    "dataset".into()
}

/// Synthetic planted-partition graph; labels are the block ids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedConfig {
    pub nodes: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Generator seed. When absent the graph follows the run seed, so each
    /// sweep seed draws a fresh fixture.
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_train")]
    pub train: f64,
    #[serde(default = "default_val")]
    pub val: f64,
    #[serde(default = "default_test")]
    pub test: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_train() -> f64 {
    SplitFractions::default().train
}
fn default_val() -> f64 {
    SplitFractions::default().val
}
fn default_test() -> f64 {
    SplitFractions::default().test
}

impl Default for SplitConfig {
    fn default() -> Self {
        let f = SplitFractions::default();
        Self {
            train: f.train,
            val: f.val,
            test: f.test,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn fractions(&self) -> SplitFractions {
        SplitFractions {
            train: self.train,
            val: self.val,
            test: self.test,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub budget: Budget,
    /// Surrogate training epochs `k`.
    pub epochs: usize,
    pub scheme: WeightScheme,
    pub mode: AttackMode,
    pub target: AttackTarget,
    /// Defaults to adam in first-order mode and sgd in full-unroll mode.
    pub optimizer: Option<OptimizerName>,
    pub lr: f64,
    pub max_unroll_nodes: usize,
    pub seed: u64,
}

impl Default for AttackSection {
    fn default() -> Self {
        let d = AttackConfig::default();
        Self {
            budget: d.budget,
            epochs: d.epochs,
            scheme: d.scheme,
            mode: d.mode,
            target: d.target,
            optimizer: None,
            lr: d.optimizer.lr(),
            max_unroll_nodes: d.max_unroll_nodes,
            seed: d.seed,
        }
    }
}

impl AttackSection {
    pub fn to_attack(&self) -> AttackConfig {
        let name = self.optimizer.unwrap_or(match self.mode {
            AttackMode::FullUnroll => OptimizerName::Sgd,
            AttackMode::FirstOrder => OptimizerName::Adam,
        });
        let optimizer = match name {
            OptimizerName::Sgd => OptimizerKind::Sgd { lr: self.lr },
            OptimizerName::Adam => OptimizerKind::Adam { lr: self.lr },
        };
        AttackConfig {
            budget: self.budget,
            epochs: self.epochs,
            scheme: self.scheme,
            seed: self.seed,
            mode: self.mode,
            target: self.target,
            optimizer,
            max_unroll_nodes: self.max_unroll_nodes,
        }
    }
}

/// Optional per-model overrides of [`VictimHyper`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperOverride {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VictimsConfig {
    #[serde(default = "default_models")]
    pub models: Vec<VictimKind>,
    #[serde(default)]
    pub seed: u64,
    /// Independent trainings per graph; reported metrics are their mean.
    #[serde(default = "one")]
    pub restarts: usize,
    #[serde(default)]
    pub vgae: HyperOverride,
    #[serde(default)]
    pub gat: HyperOverride,
    #[serde(default)]
    pub lightgcn: HyperOverride,
}

fn default_models() -> Vec<VictimKind> {
    vec![VictimKind::Vgae]
}

fn one() -> usize {
    1
}

impl Default for VictimsConfig {
    fn default() -> Self {
        Self {
            models: default_models(),
            seed: 0,
            restarts: 1,
            vgae: HyperOverride::default(),
            gat: HyperOverride::default(),
            lightgcn: HyperOverride::default(),
        }
    }
}

impl VictimsConfig {
    pub fn hyper(&self, kind: VictimKind) -> VictimHyper {
        let base = VictimHyper::default_for(kind);
        let o = match kind {
            VictimKind::Vgae => self.vgae,
            VictimKind::Gat => self.gat,
            VictimKind::LightGcn => self.lightgcn,
        };
        VictimHyper {
            epochs: o.epochs.unwrap_or(base.epochs),
            lr: o.lr.unwrap_or(base.lr),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default = "default_metrics")]
    pub names: Vec<MetricKind>,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::RocAuc, MetricKind::Ap]
}

fn default_k() -> usize {
    DEFAULT_K
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            names: default_metrics(),
            k: DEFAULT_K,
        }
    }
}

/// Grid for `sweep`; empty lists fall back to the single value of the
/// corresponding section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub budgets: Vec<Budget>,
    #[serde(default)]
    pub schemes: Vec<WeightScheme>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub baselines: Vec<BaselineKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// A parsed configuration together with the bytes it was read from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Hex SHA-256 of the source text.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Reads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: impl AsRef<Path>) -> Result<LoadedConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(LoadedConfig {
            config,
            hash: sha256_hex(text.as_bytes()),
        })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        let d = &mut self.data;
        for p in [
            &mut d.edges,
            &mut d.features,
            &mut d.labels,
            &mut d.linqs_content,
            &mut d.linqs_cites,
            &mut d.interactions,
        ] {
            fix(p);
        }
        if self.output.dir.is_relative() {
            self.output.dir = base.join(&self.output.dir);
        }
    }

    /// Sets the split, attack, victim and fixture seeds to `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.attack.seed = seed;
        self.victims.seed = seed;
        if let Some(p) = &mut self.data.planted {
            p.seed = None;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        let sources = [
            d.edges.is_some(),
            d.linqs_content.is_some() || d.linqs_cites.is_some(),
            d.interactions.is_some(),
            d.planted.is_some(),
        ];
        match sources.iter().filter(|&&s| s).count() {
            1 => {}
            0 => return Err(Error::Config("[data] needs a source: edges, linqs_*, interactions or planted".into())),
            _ => return Err(Error::Config("[data] sets more than one graph source".into())),
        }
        if d.linqs_content.is_some() != d.linqs_cites.is_some() {
            return Err(Error::Config("linqs_content and linqs_cites go together".into()));
        }
        if (d.features.is_some() || d.labels.is_some()) && d.edges.is_none() {
            return Err(Error::Config("features and labels files accompany an edge list".into()));
        }
        for p in [&d.edges, &d.features, &d.labels, &d.linqs_content, &d.linqs_cites, &d.interactions]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", p.display())));
            }
        }
        if let Some(p) = &d.planted {
            if p.nodes == 0 || p.blocks == 0 || p.blocks > p.nodes {
                return Err(Error::Config(format!("bad planted partition size: {p:?}")));
            }
            if ![p.p_in, p.p_out].iter().all(|x| (0.0..=1.0).contains(x)) {
                return Err(Error::Config(format!("planted probabilities must lie in [0, 1]: {p:?}")));
            }
        }
        if d.max_nodes == Some(0) {
            return Err(Error::Config("max_nodes must be positive".into()));
        }
        self.split.fractions().validate()?;
        for b in std::iter::once(&self.attack.budget).chain(&self.sweep.budgets) {
            b.resolve(0)?;
        }
        self.attack.to_attack().validate()?;
        if !(self.attack.lr.is_finite() && self.attack.lr > 0.0) {
            return Err(Error::Config(format!("attack lr must be positive, got {}", self.attack.lr)));
        }
        if self.victims.models.is_empty() {
            return Err(Error::Config("[victims] models is empty".into()));
        }
        if self.victims.restarts == 0 {
            return Err(Error::Config("[victims] restarts must be at least 1".into()));
        }
        for &kind in &self.victims.models {
            let h = self.victims.hyper(kind);
            if h.epochs == 0 || !(h.lr.is_finite() && h.lr > 0.0) {
                return Err(Error::Config(format!("bad {kind} hyperparameters: {h:?}")));
            }
        }
        if self.metrics.names.is_empty() {
            return Err(Error::Config("[metrics] names is empty".into()));
        }
        if self.metrics.k == 0 {
            return Err(Error::Config("[metrics] k must be at least 1".into()));
        }
        Ok(())
    }

    /// Builds the graph. `seed` only matters for a planted fixture without
    /// its own seed.
    pub fn load_graph(&self, seed: u64) -> Result<Graph> {
        let d = &self.data;
        let mut g = if let Some(p) = &d.planted {
            planted_partition(p.nodes, p.blocks, p.p_in, p.p_out, p.seed.unwrap_or(seed))
        } else if let (Some(c), Some(e)) = (&d.linqs_content, &d.linqs_cites) {
            load_linqs(c, e)?.0
        } else if let Some(path) = &d.interactions {
            load_interactions(path)?
        } else if let Some(path) = &d.edges {
            load_graph(path, d.features.as_deref(), d.labels.as_deref())?
        } else {
            return Err(Error::Config("[data] has no graph source".into()));
        };
        if let Some(max) = d.max_nodes {
            if g.n() > max {
                let keep = g.connected_subset(max);
                g = g.induced_subgraph(&keep)?;
            }
        }
        if d.identity_features && g.features().is_none() {
            let n = g.n();
            g = g.with_features(Matrix::identity(n))?;
        }
        Ok(g)
    }

    /// Attack settings with the sweep overrides applied.
    pub fn attack_with(&self, budget: Budget, scheme: WeightScheme, seed: u64) -> AttackConfig {
        AttackConfig {
            budget,
            scheme,
            seed,
            ..self.attack.to_attack()
        }
    }

    pub fn sweep_budgets(&self) -> Vec<Budget> {
        or_single(&self.sweep.budgets, self.attack.budget)
    }

    pub fn sweep_schemes(&self) -> Vec<WeightScheme> {
        or_single(&self.sweep.schemes, self.attack.scheme)
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        or_single(&self.sweep.seeds, self.split.seed)
    }

    /// The seeds in effect, for manifests.
    pub fn seeds(&self) -> BTreeMap<&'static str, u64> {
        let mut m = BTreeMap::from([
            ("split", self.split.seed),
            ("attack", self.attack.seed),
            ("victim", self.victims.seed),
        ]);
        if let Some(p) = &self.data.planted {
            m.insert("planted", p.seed.unwrap_or(self.split.seed));
        }
        m
    }
}

fn or_single<T: Clone>(list: &[T], single: T) -> Vec<T> {
    if list.is_empty() {
        vec![single]
    } else {
        list.to_vec()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"
[data]
name = "fixture"
[data.planted]
nodes = 30
blocks = 2
p_in = 0.3
p_out = 0.02

[attack]
budget = 0.05
scheme = "uniform"
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = ExperimentConfig::parse(FIXTURE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.attack.budget, Budget::Fraction(0.05));
        assert_eq!(c.attack.scheme, WeightScheme::Uniform);
        assert_eq!(c.attack.epochs, 100);
        assert_eq!(c.victims.models, vec![VictimKind::Vgae]);
        assert_eq!(c.metrics.k, 20);
        assert_eq!(c.sweep_seeds(), vec![0]);
        assert!(matches!(c.attack.to_attack().optimizer, OptimizerKind::Adam { .. }));
    }

    #[test]
    fn integer_budget_is_a_count() {
        let c = ExperimentConfig::parse(&FIXTURE.replace("budget = 0.05", "budget = 7")).unwrap();
        assert_eq!(c.attack.budget, Budget::Count(7));
    }

    #[test]
    fn full_unroll_defaults_to_sgd() {
        let c = ExperimentConfig::parse(&format!("{FIXTURE}mode = \"full-unroll\"\n")).unwrap();
        assert!(matches!(c.attack.to_attack().optimizer, OptimizerKind::Sgd { .. }));
        c.validate().unwrap();
        let bad = ExperimentConfig::parse(&format!("{FIXTURE}mode = \"full-unroll\"\noptimizer = \"adam\"\n")).unwrap();
        assert!(bad.validate().unwrap_err().is_config());
    }

    #[test]
    fn rejects_bad_configs() {
        let over = ExperimentConfig::parse(&FIXTURE.replace("0.05", "0.6")).unwrap();
        assert!(over.validate().is_err());
        assert!(ExperimentConfig::parse("[data]\nbogus = 1\n").is_err());
        let none = ExperimentConfig::parse("[data]\nname = \"x\"\n").unwrap();
        assert!(none.validate().is_err());
        let missing = ExperimentConfig::parse("[data]\nedges = \"/no/such/file\"\n").unwrap();
        assert!(missing.validate().is_err());
    }

    #[test]
    fn seed_override_reaches_every_seed() {
        let mut c = ExperimentConfig::parse(FIXTURE).unwrap();
        c.override_seed(9);
        assert!(c.seeds().values().all(|&s| s == 9));
        assert_eq!(c.load_graph(9).unwrap(), c.load_graph(9).unwrap());
        assert_ne!(c.load_graph(9).unwrap(), c.load_graph(10).unwrap());
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let mut c = ExperimentConfig::parse("[data]\nedges = \"g.txt\"\n[output]\ndir = \"out\"\n").unwrap();
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.data.edges.as_deref(), Some(Path::new("/cfg/g.txt")));
        assert_eq!(c.output.dir, Path::new("/cfg/out"));
    }
}
