//! Ranking metrics for binary scores: AUROC (Mann–Whitney, ties count one
//! half), average precision and recall at a precision target, both computed
//! over tie blocks in descending score order.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Precision target of the headline recall metric.
pub const RP_TARGET: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("scores must be finite")]
    NonFinite,
    #[error("labels must be 0 or 1")]
    InvalidLabel,
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(MetricError::InvalidLabel);
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    Ok((n_pos, labels.len() - n_pos))
}

/// Cumulative `(true positives, false positives)` after each block of equal
/// scores, highest score first.
fn tie_blocks(scores: &[f64], labels: &[u8]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_block = order.get(k + 1).is_none_or(|&next| scores[next] != scores[i]);
        if last_of_block {
            out.push((tp, fp));
        }
    }
    out
}

/// Needs at least one positive and one negative.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    let (n_pos, n_neg) = check(scores, labels)?;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::Undefined("AUROC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // midranks (1-based) summed over positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + 1 + end) as f64 / 2.0;
        let pos_in_block = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum += midrank * pos_in_block as f64;
        start = end;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// One point per distinct score, from the highest threshold down.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<PrPoint>, MetricError> {
    let (n_pos, _) = check(scores, labels)?;
    if n_pos == 0 {
        return Err(MetricError::Undefined("precision-recall needs a positive"));
    }
    Ok(tie_blocks(scores, labels)
        .into_iter()
        .map(|(tp, fp)| PrPoint { recall: tp as f64 / n_pos as f64, precision: tp as f64 / (tp + fp) as f64 })
        .collect())
}

/// Average precision: `sum_k precision_k * (recall_k - recall_{k-1})`.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    Ok(step_integral(&pr_curve(scores, labels)?))
}

pub fn step_integral(points: &[PrPoint]) -> f64 {
    let mut prev = 0.0;
    let mut area = 0.0;
    for p in points {
        area += p.precision * (p.recall - prev);
        prev = p.recall;
    }
    area
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallAtPrecision {
    pub recall: f64,
    /// False when no threshold reaches the target; `recall` is then 0.
    pub defined: bool,
}

/// Highest recall among thresholds whose precision is at least `target`.
pub fn recall_at_precision(scores: &[f64], labels: &[u8], target: f64) -> Result<RecallAtPrecision, MetricError> {
    let best = pr_curve(scores, labels)?
        .into_iter()
        .filter(|p| p.precision >= target)
        .map(|p| p.recall)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(match best {
        Some(recall) => RecallAtPrecision { recall, defined: true },
        None => RecallAtPrecision { recall: 0.0, defined: false },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auroc: f64,
    pub auprc: f64,
    pub rp80: f64,
    pub rp80_defined: bool,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(skip)]
    pub pr_points: Vec<PrPoint>,
}

impl MetricsReport {
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Self, MetricError> {
        let (n_pos, n_neg) = check(scores, labels)?;
        let auroc = auroc(scores, labels)?;
        let pr_points = pr_curve(scores, labels)?;
        let rp = recall_at_precision(scores, labels, RP_TARGET)?;
        Ok(MetricsReport {
            auroc,
            auprc: step_integral(&pr_points),
            rp80: rp.recall,
            rp80_defined: rp.defined,
            n_pos,
            n_neg,
            pr_points,
        })
    }
}

/// `recall\tprecision` header, then one row per point.
pub fn write_pr_tsv<W: Write>(points: &[PrPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "recall\tprecision")?;
    for p in points {
        writeln!(out, "{}\t{}", p.recall, p.precision)?;
    }
    Ok(())
}
