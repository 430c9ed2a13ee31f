//! The `attack`, `evaluate`, `sweep`, `stats` and `baseline` commands. Each
//! writes its artifacts and a `manifest.json` into the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, LoadedConfig};
use super::pipeline::{attack_graph, baseline_graph, evaluate_victim, VictimRun, VictimScores};
use crate::baselines::{diff_edits, BaselineKind};
use crate::error::{Error, Result};
use crate::graph::io::{load_edge_list, save_edge_list};
use crate::graph::{compute_stats, make_split, EditList, Graph, GraphStats, LinkSplit};
use crate::metrics::{write_jsonl, MetricKind, MetricsReport};
use crate::modifier::{poison, Budget};

/// Everything needed to re-run a command bit-identically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Hex SHA-256 of the config file text.
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    /// Attack scheme or baseline that produced a poisoned graph.
    pub method: Option<String>,
    /// Resolved configuration, overrides included.
    pub config: ExperimentConfig,
    pub artifacts: Vec<String>,
}

impl Manifest {
    fn new(command: &str, lc: &LoadedConfig, method: Option<String>, artifacts: &[&str]) -> Self {
        Self {
            command: command.into(),
            config_hash: lc.hash.clone(),
            seeds: lc.config.seeds().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            versions: BTreeMap::from([("linkpoison".to_string(), env!("CARGO_PKG_VERSION").to_string())]),
            method,
            config: lc.config.clone(),
            artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn out_dir(lc: &LoadedConfig) -> Result<PathBuf> {
    let dir = lc.config.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

fn dataset(lc: &LoadedConfig) -> Result<(Graph, LinkSplit)> {
    let c = &lc.config;
    let g = c.load_graph(c.split.seed)?;
    let split = make_split(&g, c.split.fractions(), c.split.seed)?;
    Ok((g, split))
}

fn victim_runs(c: &ExperimentConfig) -> Vec<VictimRun> {
    c.victims
        .models
        .iter()
        .map(|&kind| VictimRun {
            kind,
            hyper: c.victims.hyper(kind),
            seed: c.victims.seed,
            restarts: c.victims.restarts,
        })
        .collect()
}

/// Summary of a run that produced a poisoned graph.
#[derive(Clone, Debug, PartialEq)]
pub struct PoisonSummary {
    pub dir: PathBuf,
    pub budget: usize,
    pub edits: EditList,
    pub clean_edges: usize,
    pub poisoned_edges: usize,
}

/// Runs the meta-gradient attack and writes `poisoned.edges`, `edits.csv`,
/// `meta_gradient.{bin,json}`, `split.json` and `manifest.json`.
pub fn cmd_attack(lc: &LoadedConfig) -> Result<PoisonSummary> {
    let c = &lc.config;
    let dir = out_dir(lc)?;
    let (g, split) = dataset(lc)?;
    let cfg = c.attack.to_attack();
    let out = attack_graph(&g, &split, &cfg)?;
    info!(
        "attack: {} of {} flips ({} adds), {} -> {} edges",
        out.edits.len(),
        out.budget,
        out.edits.count(crate::graph::EditAction::Add),
        g.edge_count(),
        out.poisoned.edge_count()
    );
    save_edge_list(&out.poisoned, dir.join("poisoned.edges"))?;
    out.edits.save_csv(dir.join("edits.csv"))?;
    out.meta.save(dir.join("meta_gradient"), &cfg)?;
    write_json(&dir.join("split.json"), &split)?;
    let manifest = Manifest::new(
        "attack",
        lc,
        Some(cfg.scheme.to_string()),
        &["poisoned.edges", "edits.csv", "meta_gradient.bin", "meta_gradient.json", "split.json"],
    );
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(PoisonSummary {
        dir,
        budget: out.budget,
        clean_edges: g.edge_count(),
        poisoned_edges: out.poisoned.edge_count(),
        edits: out.edits,
    })
}

/// Runs one baseline at the attack budget; writes the same files as
/// [`cmd_attack`] minus the meta-gradient.
pub fn cmd_baseline(lc: &LoadedConfig, kind: BaselineKind) -> Result<PoisonSummary> {
    let c = &lc.config;
    let dir = out_dir(lc)?;
    let (g, split) = dataset(lc)?;
    let budget = c.attack.budget.resolve(g.edge_count())?;
    let (edits, poisoned) = baseline_graph(kind, &g, &split, c.attack.budget, c.attack.seed)?;
    save_edge_list(&poisoned, dir.join("poisoned.edges"))?;
    edits.save_csv(dir.join("edits.csv"))?;
    write_json(&dir.join("split.json"), &split)?;
    let manifest = Manifest::new("baseline", lc, Some(kind.to_string()), &["poisoned.edges", "edits.csv", "split.json"]);
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(PoisonSummary {
        dir,
        budget,
        clean_edges: g.edge_count(),
        poisoned_edges: poisoned.edge_count(),
        edits,
    })
}

/// `base` with its edges replaced by those of the edge list at `path`;
/// features, labels and the bipartite split carry over.
fn restructure(base: &Graph, path: &Path) -> Result<Graph> {
    let (other, _) = load_edge_list(path)?;
    if other.n() != base.n() {
        return Err(Error::Config(format!(
            "node-universe mismatch: {} has {} nodes, the dataset has {}",
            path.display(),
            other.n(),
            base.n()
        )));
    }
    poison(base, &diff_edits(base, &other)?).map(|p| p.graph)
}

fn reports(
    c: &ExperimentConfig,
    method: &str,
    seed: u64,
    budget: usize,
    clean: &VictimScores,
    poisoned: &VictimScores,
) -> Vec<MetricsReport> {
    c.metrics
        .names
        .iter()
        .map(|&m| {
            let (a, b) = (clean.get(m).unwrap_or(f64::NAN), poisoned.get(m).unwrap_or(f64::NAN));
            MetricsReport {
                model: clean.kind.to_string(),
                dataset: c.data.name.clone(),
                budget,
                scheme: method.to_string(),
                seed,
                metric: m,
                clean: a,
                poisoned: b,
                delta: MetricsReport::drop(a, b),
            }
        })
        .collect()
}

/// Trains every victim on the clean and the poisoned graph, scores the same
/// test pairs and writes `metrics.jsonl`. The clean graph is the configured
/// dataset unless `clean` names another edge list over the same nodes. The
/// reported method comes from a `manifest.json` next to `poisoned`, if any.
pub fn cmd_evaluate(lc: &LoadedConfig, poisoned: &Path, clean: Option<&Path>) -> Result<Vec<MetricsReport>> {
    let c = &lc.config;
    let dir = out_dir(lc)?;
    let base = c.load_graph(c.split.seed)?;
    let clean_g = match clean {
        Some(path) => restructure(&base, path)?,
        None => base,
    };
    let poisoned_g = restructure(&clean_g, poisoned)?;
    let split = make_split(&clean_g, c.split.fractions(), c.split.seed)?;
    let flips = diff_edits(&clean_g, &poisoned_g)?.len();
    let method = poisoned
        .parent()
        .map(|d| d.join("manifest.json"))
        .filter(|p| p.is_file())
        .and_then(|p| Manifest::load(p).ok())
        .and_then(|m| m.method)
        .unwrap_or_else(|| c.attack.scheme.to_string());
    let mut out = Vec::new();
    for run in victim_runs(c) {
        let a = evaluate_victim(&run, &clean_g, &split, &c.metrics.names, c.metrics.k)?;
        let b = evaluate_victim(&run, &poisoned_g, &split, &c.metrics.names, c.metrics.k)?;
        out.extend(reports(c, &method, run.seed, flips, &a, &b));
    }
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &out)?;
    write(&dir.join("metrics.jsonl"), buf)?;
    write_json(&dir.join("manifest.json"), &Manifest::new("evaluate", lc, Some(method), &["metrics.jsonl"]))?;
    Ok(out)
}

/// Structural statistics of the dataset and, optionally, a poisoned copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub original: GraphStats,
    pub poisoned: Option<GraphStats>,
}

impl StatsReport {
    /// Side-by-side text table.
    pub fn table(&self) -> String {
        let o = &self.original;
        let p = self.poisoned.as_ref();
        let mut s = String::new();
        let _ = writeln!(s, "{:<16}{:>12}{:>12}", "", "original", if p.is_some() { "poisoned" } else { "" });
        let mut row = |name: &str, f: &dyn Fn(&GraphStats) -> String| {
            let _ = writeln!(s, "{:<16}{:>12}{:>12}", name, f(o), p.map(f).unwrap_or_default());
        };
        row("nodes", &|g| g.nodes.to_string());
        row("edges", &|g| g.edges.to_string());
        row("avg degree", &|g| format!("{:.2}", g.avg_degree));
        row("density", &|g| format!("{:.4}", g.density));
        row("diameter", &|g| g.diameter.to_string());
        row("avg clustering", &|g| format!("{:.2}", g.avg_clustering));
        row("avg path length", &|g| format!("{:.2}", g.avg_path_length));
        s
    }
}

/// Writes `stats.json`.
pub fn cmd_stats(lc: &LoadedConfig, poisoned: Option<&Path>) -> Result<StatsReport> {
    let c = &lc.config;
    let dir = out_dir(lc)?;
    let g = c.load_graph(c.split.seed)?;
    let poisoned = match poisoned {
        Some(path) => Some(compute_stats(&restructure(&g, path)?)?),
        None => None,
    };
    let report = StatsReport {
        original: compute_stats(&g)?,
        poisoned,
    };
    write_json(&dir.join("stats.json"), &report)?;
    write_json(&dir.join("manifest.json"), &Manifest::new("stats", lc, None, &["stats.json"]))?;
    Ok(report)
}

/// One (seed, budget, method, model, metric) cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    #[serde(flatten)]
    pub report: MetricsReport,
    /// Budget as configured, e.g. `5%` or `12`.
    pub budget_label: String,
    pub baseline: bool,
}

/// Mean and sample standard deviation of a drop over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub model: String,
    pub metric: MetricKind,
    pub budget: String,
    pub method: String,
    pub mean: f64,
    pub stdev: f64,
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub runs: Vec<SweepRun>,
    pub cells: Vec<SweepCell>,
    /// Column order of the table: schemes, then baselines.
    pub methods: Vec<String>,
    pub csv: String,
}

impl SweepOutcome {
    /// Drops of `method` at `budget` for one model and metric, in seed order.
    pub fn drops(&self, model: &str, metric: MetricKind, budget: &str, method: &str) -> Vec<(u64, f64)> {
        self.runs
            .iter()
            .filter(|r| {
                r.report.model == model && r.report.metric == metric && r.budget_label == budget && r.report.scheme == method
            })
            .map(|r| (r.report.seed, r.report.delta))
            .collect()
    }
}

/// Every scheme and baseline at every budget and seed. Writes `runs.jsonl`,
/// `sweep.csv` (mean drops laid out as model, metric and budget rows against
/// method columns), `sweep.json` (mean and standard deviation) and
/// per-cell edit lists under `cells/`.
pub fn cmd_sweep(lc: &LoadedConfig) -> Result<SweepOutcome> {
    let dir = out_dir(lc)?;
    let cells_dir = dir.join("cells");
    fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;
    let base = &lc.config;
    let budgets = base.sweep_budgets();
    let schemes = base.sweep_schemes();
    let baselines = base.sweep.baselines.clone();
    let mut runs = Vec::new();
    for seed in base.sweep_seeds() {
        let mut c = base.clone();
        c.override_seed(seed);
        let g = c.load_graph(seed)?;
        let split = make_split(&g, c.split.fractions(), seed)?;
        let victims = victim_runs(&c);
        let clean: Vec<VictimScores> = victims
            .iter()
            .map(|v| evaluate_victim(v, &g, &split, &c.metrics.names, c.metrics.k))
            .collect::<Result<_>>()?;
        for &budget in &budgets {
            let flips = budget.resolve(g.edge_count())?;
            let mut cell = |method: String, baseline: bool, edits: &EditList, poisoned: &Graph| -> Result<()> {
                info!("sweep seed {seed} budget {} {method}: {} flips", budget.label(), edits.len());
                edits.save_csv(cells_dir.join(format!("s{seed}_b{}_{method}.csv", budget_slug(budget))))?;
                for (v, clean) in victims.iter().zip(&clean) {
                    let p = evaluate_victim(v, poisoned, &split, &c.metrics.names, c.metrics.k)?;
                    for report in reports(&c, &method, seed, flips, clean, &p) {
                        runs.push(SweepRun {
                            report,
                            budget_label: budget.label(),
                            baseline,
                        });
                    }
                }
                Ok(())
            };
            for &scheme in &schemes {
                let out = attack_graph(&g, &split, &c.attack_with(budget, scheme, seed))?;
                cell(scheme.to_string(), false, &out.edits, &out.poisoned)?;
            }
            for &kind in &baselines {
                let (edits, poisoned) = baseline_graph(kind, &g, &split, budget, seed)?;
                cell(kind.to_string(), true, &edits, &poisoned)?;
            }
        }
    }
    let methods: Vec<String> = schemes
        .iter()
        .map(ToString::to_string)
        .chain(baselines.iter().map(ToString::to_string))
        .collect();
    let cells = aggregate(base, &budgets, &methods, &runs);
    let csv = sweep_csv(&methods, &cells);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &runs)?;
    write(&dir.join("runs.jsonl"), buf)?;
    write(&dir.join("sweep.csv"), &csv)?;
    write_json(&dir.join("sweep.json"), &cells)?;
    write_json(
        &dir.join("manifest.json"),
        &Manifest::new("sweep", lc, None, &["runs.jsonl", "sweep.csv", "sweep.json", "cells/"]),
    )?;
    Ok(SweepOutcome {
        runs,
        cells,
        methods,
        csv,
    })
}

fn budget_slug(b: Budget) -> String {
    match b {
        Budget::Count(c) => c.to_string(),
        Budget::Fraction(f) => format!("{f}"),
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn aggregate(c: &ExperimentConfig, budgets: &[Budget], methods: &[String], runs: &[SweepRun]) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for model in &c.victims.models {
        for &metric in &c.metrics.names {
            for b in budgets {
                for method in methods {
                    let xs: Vec<f64> = runs
                        .iter()
                        .filter(|r| {
                            r.report.model == model.name()
                                && r.report.metric == metric
                                && r.budget_label == b.label()
                                && &r.report.scheme == method
                        })
                        .map(|r| r.report.delta)
                        .collect();
                    if xs.is_empty() {
                        continue;
                    }
                    let (mean, stdev) = mean_sd(&xs);
                    cells.push(SweepCell {
                        model: model.to_string(),
                        metric,
                        budget: b.label(),
                        method: method.clone(),
                        mean,
                        stdev,
                        seeds: xs.len(),
                    });
                }
            }
        }
    }
    cells
}

fn sweep_csv(methods: &[String], cells: &[SweepCell]) -> String {
    let mut s = format!("model,metric,budget,{}\n", methods.join(","));
    let mut rows: Vec<(&str, MetricKind, &str)> = Vec::new();
    for c in cells {
        let key = (c.model.as_str(), c.metric, c.budget.as_str());
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    for (model, metric, budget) in rows {
        let _ = write!(s, "{model},{metric},{budget}");
        for m in methods {
            let v = cells
                .iter()
                .find(|c| c.model == model && c.metric == metric && c.budget == budget && &c.method == m)
                .map(|c| format!("{:.6}", c.mean))
                .unwrap_or_default();
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}
