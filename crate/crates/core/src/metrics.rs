//! Link-prediction and ranking metrics.
//!
//! Ties: ROC-AUC gives half credit to tied positive/negative pairs; the
//! ranking metrics order by descending score and keep input order among
//! equal scores.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    RocAuc,
    Ap,
    Ndcg,
    Recall,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [MetricKind::RocAuc, MetricKind::Ap, MetricKind::Ndcg, MetricKind::Recall];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::RocAuc => "roc_auc",
            MetricKind::Ap => "ap",
            MetricKind::Ndcg => "ndcg",
            MetricKind::Recall => "recall",
        }
    }

    pub fn compute(self, scores: &[f64], relevant: &[bool], k: usize) -> Result<f64> {
        match self {
            MetricKind::RocAuc => roc_auc(scores, relevant),
            MetricKind::Ap => average_precision(scores, relevant),
            MetricKind::Ndcg => ndcg_at_k(scores, relevant, k),
            MetricKind::Recall => recall_at_k(scores, relevant, k),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "roc_auc" | "auc" | "roc" => Ok(MetricKind::RocAuc),
            "ap" | "average_precision" => Ok(MetricKind::Ap),
            "ndcg" | "ndcg_at_k" => Ok(MetricKind::Ndcg),
            "recall" | "recall_at_k" => Ok(MetricKind::Recall),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

fn check_lengths(scores: &[f64], relevant: &[bool]) -> Result<()> {
    if scores.len() != relevant.len() {
        return Err(Error::Shape {
            op: "metric",
            left: (scores.len(), 1),
            right: (relevant.len(), 1),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("metric input contains NaN".into()));
    }
    Ok(())
}

/// Indices sorted by descending score; equal scores keep input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    idx
}

/// Probability that a random positive outscores a random negative, computed
/// from mid-ranks.
pub fn roc_auc(scores: &[f64], relevant: &[bool]) -> Result<f64> {
    check_lengths(scores, relevant)?;
    let pos = relevant.iter().filter(|&&r| r).count();
    let neg = relevant.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Domain {
            op: "roc_auc",
            msg: "needs at least one positive and one negative".into(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // twice the rank sum keeps mid-ranks integral
    let mut rank2_sum: u64 = 0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let mid2 = (start + 1 + end) as u64;
        let hits = idx[start..end].iter().filter(|&&i| relevant[i]).count() as u64;
        rank2_sum += hits * mid2;
        start = end;
    }
    let (p, q) = (pos as u64, neg as u64);
    let u2 = rank2_sum - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Mean of precision at the rank of every positive.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> Result<f64> {
    check_lengths(scores, relevant)?;
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return Err(Error::Domain {
            op: "average_precision",
            msg: "needs at least one positive".into(),
        });
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in descending(scores).iter().enumerate() {
        if relevant[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / total as f64)
}

/// DCG of the top `k` normalised by the DCG of the ideal ordering; 0 when
/// nothing is relevant.
pub fn ndcg_at_k(scores: &[f64], relevant: &[bool], k: usize) -> Result<f64> {
    check_lengths(scores, relevant)?;
    if k == 0 {
        return Err(Error::Domain {
            op: "ndcg_at_k",
            msg: "k must be at least 1".into(),
        });
    }
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return Ok(0.0);
    }
    let gain = |rank: usize| 1.0 / ((rank + 2) as f64).log2();
    let dcg: f64 = descending(scores)
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &i)| relevant[i])
        .map(|(r, _)| gain(r))
        .sum();
    let ideal: f64 = (0..total.min(k)).map(gain).sum();
    Ok(dcg / ideal)
}

/// Fraction of relevant candidates found in the top `k`.
pub fn recall_at_k(scores: &[f64], relevant: &[bool], k: usize) -> Result<f64> {
    check_lengths(scores, relevant)?;
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return Err(Error::Domain {
            op: "recall_at_k",
            msg: "needs at least one relevant item".into(),
        });
    }
    let found = descending(scores).iter().take(k).filter(|&&i| relevant[i]).count();
    Ok(found as f64 / total as f64)
}

/// Clean vs. poisoned value of one metric for one victim run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub dataset: String,
    pub budget: usize,
    pub scheme: String,
    pub seed: u64,
    pub metric: MetricKind,
    pub clean: f64,
    pub poisoned: f64,
    /// `clean - poisoned`; positive means the attack hurt.
    pub delta: f64,
}

impl MetricsReport {
    pub fn drop(clean: f64, poisoned: f64) -> f64 {
        clean - poisoned
    }
}

/// One JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
    }
    Ok(())
}
