use std::fs;
use std::path::Path;

use linkpoison::experiment::{cmd_attack, cmd_baseline, cmd_evaluate, cmd_stats, cmd_sweep, ExperimentConfig, LoadedConfig, Manifest};
use linkpoison::graph::io::{edge_list_string, load_edge_list, save_edge_list};
use linkpoison::graph::{erdos_renyi, random_bipartite};
use linkpoison::baselines::BaselineKind;
use linkpoison::metrics::MetricKind;

const SMALL: &str = r#"
[data]
name = "tiny"
[data.planted]
nodes = 40
blocks = 2
p_in = 0.3
p_out = 0.03

[split]
seed = 3

[attack]
budget = 0.05
epochs = 5
scheme = "linear"
seed = 3

[victims]
seed = 3
[victims.vgae]
epochs = 20

[metrics]
names = ["roc_auc", "ap"]
"#;

fn config(dir: &Path, text: &str) -> LoadedConfig {
    let path = dir.join("exp.toml");
    fs::write(&path, format!("{text}\n[output]\ndir = \"out\"\n")).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn zero_budget_leaves_the_edge_list_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let g = erdos_renyi(25, 0.2, 4);
    save_edge_list(&g, tmp.path().join("g.edges")).unwrap();
    let text = SMALL
        .replace("[data.planted]\nnodes = 40\nblocks = 2\np_in = 0.3\np_out = 0.03", "edges = \"g.edges\"")
        .replace("budget = 0.05", "budget = 0");
    let lc = config(tmp.path(), &text);
    let s = cmd_attack(&lc).unwrap();
    assert!(s.edits.is_empty());
    let out = s.dir.join("poisoned.edges");
    assert_eq!(read(&out), edge_list_string(&load_edge_list(tmp.path().join("g.edges")).unwrap().0).into_bytes());
}

#[test]
fn attack_is_reproducible_and_documented() {
    let tmp = tempfile::tempdir().unwrap();
    let lc = config(tmp.path(), SMALL);
    let first = cmd_attack(&lc).unwrap();
    let files = ["poisoned.edges", "edits.csv", "meta_gradient.bin", "meta_gradient.json", "split.json", "manifest.json"];
    let before: Vec<_> = files.iter().map(|f| read(first.dir.join(f))).collect();
    let second = cmd_attack(&lc).unwrap();
    let after: Vec<_> = files.iter().map(|f| read(second.dir.join(f))).collect();
    assert_eq!(before, after);

    // 5% of the edge count, rounded half up; every flip lands.
    assert_eq!(first.budget, (0.05 * first.clean_edges as f64 + 0.5).floor() as usize);
    assert_eq!(first.edits.len(), first.budget);
    let m = Manifest::load(first.dir.join("manifest.json")).unwrap();
    assert_eq!(m.config_hash, lc.hash);
    assert_eq!(m.config_hash.len(), 64);
    assert_eq!(m.seeds["split"], 3);
    assert_eq!(m.method.as_deref(), Some("linear"));
}

#[test]
fn evaluating_the_clean_graph_gives_zero_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let lc = config(tmp.path(), SMALL);
    let g = lc.config.load_graph(3).unwrap();
    save_edge_list(&g, tmp.path().join("same.edges")).unwrap();
    let reports = cmd_evaluate(&lc, &tmp.path().join("same.edges"), None).unwrap();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.budget, 0);
    }
    let text = String::from_utf8(read(tmp.path().join("out/metrics.jsonl"))).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn evaluate_reads_the_method_and_flip_count_of_an_attack() {
    let tmp = tempfile::tempdir().unwrap();
    let lc = config(tmp.path(), SMALL);
    let s = cmd_baseline(&lc, BaselineKind::RandomFlip).unwrap();
    let reports = cmd_evaluate(&lc, &s.dir.join("poisoned.edges"), None).unwrap();
    assert!(reports.iter().all(|r| r.scheme == "random-flip" && r.budget == s.edits.len()));
}

#[test]
fn evaluate_rejects_another_node_universe() {
    let tmp = tempfile::tempdir().unwrap();
    let lc = config(tmp.path(), SMALL);
    save_edge_list(&erdos_renyi(12, 0.3, 0), tmp.path().join("other.edges")).unwrap();
    let err = cmd_evaluate(&lc, &tmp.path().join("other.edges"), None).unwrap_err();
    assert!(err.is_config(), "{err}");
}

#[test]
fn sweep_covers_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}\n[sweep]\nbudgets = [0.01, 0.025, 0.05]\nschemes = [\"uniform\", \"performance\", \"magnitude\", \"linear\"]\nseeds = [0, 1]\n"
    )
    .replace("names = [\"roc_auc\", \"ap\"]", "names = [\"roc_auc\"]");
    let lc = config(tmp.path(), &text);
    let out = cmd_sweep(&lc).unwrap();
    assert_eq!(out.runs.len(), 24);
    let header = out.csv.lines().next().unwrap();
    assert_eq!(header, "model,metric,budget,uniform,performance,magnitude,linear");
    let rows: Vec<&str> = out.csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("vgae,roc_auc,1%,"));
    assert!(rows[2].starts_with("vgae,roc_auc,5%,"));
    assert!(out.cells.iter().all(|c| c.seeds == 2));
    assert_eq!(out.drops("vgae", MetricKind::RocAuc, "5%", "linear").len(), 2);
    assert_eq!(fs::read_dir(tmp.path().join("out/cells")).unwrap().count(), 24);
}

#[test]
fn stats_compare_original_and_poisoned() {
    let tmp = tempfile::tempdir().unwrap();
    let lc = config(tmp.path(), SMALL);
    let s = cmd_attack(&lc).unwrap();
    let r = cmd_stats(&lc, Some(&s.dir.join("poisoned.edges"))).unwrap();
    let p = r.poisoned.as_ref().unwrap();
    assert_eq!(r.original.nodes, p.nodes);
    assert_eq!(p.edges as i64 - r.original.edges as i64, s.poisoned_edges as i64 - s.clean_edges as i64);
    assert!(r.table().contains("avg degree"));
    assert!(tmp.path().join("out/stats.json").is_file());
}

#[test]
fn recommendation_metrics_on_an_interaction_log() {
    let tmp = tempfile::tempdir().unwrap();
    let g = random_bipartite(12, 20, 0.25, 1);
    let users = 12;
    let mut log = String::from("user,item,rating\n");
    for (u, i) in g.edges() {
        log.push_str(&format!("{u},{},5\n", i - users));
    }
    fs::write(tmp.path().join("ratings.csv"), log).unwrap();
    let text = "[data]\ninteractions = \"ratings.csv\"\n[attack]\nbudget = 4\nepochs = 3\n[victims]\nmodels = [\"lightgcn\"]\n[victims.lightgcn]\nepochs = 10\n[metrics]\nnames = [\"ndcg\", \"recall\"]\nk = 5\n";
    let lc = config(tmp.path(), text);
    let s = cmd_attack(&lc).unwrap();
    assert_eq!(s.edits.len(), 4);
    let reports = cmd_evaluate(&lc, &s.dir.join("poisoned.edges"), None).unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert!((0.0..=1.0).contains(&r.clean) && (0.0..=1.0).contains(&r.poisoned), "{r:?}");
    }
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let planted = ExperimentConfig::load(root.join("planted.toml")).unwrap();
    planted.config.validate().unwrap();
    let g = planted.config.load_graph(0).unwrap();
    assert_eq!(g.n(), 200);
    let cora = ExperimentConfig::parse(&fs::read_to_string(root.join("cora.toml")).unwrap()).unwrap();
    assert_eq!(cora.sweep.schemes.len(), 4);
}
