//! Evaluation: clustering quality (purity, pairwise precision/recall),
//! identification quality (MAP, ROC) and repost-removal ratios.
//!
//! Ties in rankings and ROC sweeps never favor the method: in MAP a tied
//! negative ranks ahead of a tied positive, and a block of tied scores in the
//! ROC sweep is a single diagonal segment.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterResult, ClusterSummary};
use crate::error::{Error, Result};
use crate::identity::{compare_scores, ScoreMatrix};

/// Ground-truth relation between two accounts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    /// Both accounts belong to one individual.
    Positive,
    /// Different individuals with no camera in common.
    Negative,
    /// Different individuals sharing some camera; not scored.
    Excluded,
}

/// Labels keyed by the lexicographically ordered id pair.
pub type PairLabels = BTreeMap<(String, String), PairLabel>;

pub fn lookup_label(labels: &PairLabels, a: &str, b: &str) -> Option<PairLabel> {
    let key = if a < b { (a, b) } else { (b, a) };
    labels.get(&(key.0.to_string(), key.1.to_string())).copied()
}

/// How images that the clustering rejected are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Each rejected image is its own singleton cluster.
    Strict,
    /// Rejected images are left out of the evaluation.
    Lenient,
}

/// Predicted clustering of images `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub groups: Vec<Vec<usize>>,
    pub rejected: Vec<usize>,
}

impl Partition {
    pub fn from_result(result: &ClusterResult) -> Self {
        Self {
            groups: result.groups.iter().map(|g| g.members().iter().copied().collect()).collect(),
            rejected: result.rejected_ids.iter().copied().collect(),
        }
    }

    pub fn from_summary(summary: &ClusterSummary) -> Self {
        Self {
            groups: summary.groups.iter().map(|g| g.members.clone()).collect(),
            rejected: summary.rejected.clone(),
        }
    }

    /// Baseline that puts every image in one group.
    pub fn single_group(n: usize) -> Self {
        Self {
            groups: vec![(0..n).collect()],
            rejected: Vec::new(),
        }
    }

    fn clusters(&self, mode: EvalMode) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.groups.iter().filter(|g| !g.is_empty()).cloned().collect();
        if mode == EvalMode::Strict {
            out.extend(self.rejected.iter().map(|&i| vec![i]));
        }
        out
    }
}

fn contingency(clusters: &[Vec<usize>], truth: &[u32]) -> Result<Vec<HashMap<u32, u64>>> {
    clusters
        .iter()
        .map(|c| {
            let mut counts = HashMap::new();
            for &i in c {
                let label = truth.get(i).ok_or_else(|| {
                    Error::InvalidConfig(format!("image {i} has no ground-truth label"))
                })?;
                *counts.entry(*label).or_insert(0u64) += 1;
            }
            Ok(counts)
        })
        .collect()
}

/// `(1/N) * sum over clusters of the largest single-camera share`.
pub fn purity(pred: &Partition, truth: &[u32], mode: EvalMode) -> Result<f64> {
    let table = contingency(&pred.clusters(mode), truth)?;
    let n: u64 = table.iter().flat_map(|c| c.values()).sum();
    if n == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let hits: u64 = table.iter().map(|c| c.values().copied().max().unwrap_or(0)).sum();
    Ok(hits as f64 / n as f64)
}

/// Image-pair confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

impl std::ops::AddAssign for PairCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Pair counts over every image in scope, computed from the contingency table.
pub fn pair_counts(pred: &Partition, truth: &[u32], mode: EvalMode) -> Result<PairCounts> {
    let table = contingency(&pred.clusters(mode), truth)?;
    let mut per_camera: HashMap<u32, u64> = HashMap::new();
    let mut n = 0;
    let mut same_cluster = 0;
    let mut tp = 0;
    for cluster in &table {
        let size: u64 = cluster.values().sum();
        n += size;
        same_cluster += pairs(size);
        for (&label, &count) in cluster {
            tp += pairs(count);
            *per_camera.entry(label).or_insert(0) += count;
        }
    }
    let same_camera: u64 = per_camera.values().map(|&c| pairs(c)).sum();
    let fp = same_cluster - tp;
    let fn_ = same_camera - tp;
    Ok(PairCounts {
        tp,
        fp,
        fn_,
        tn: pairs(n) - tp - fp - fn_,
    })
}

/// `(precision, recall, counts)`; `None` where the ratio is undefined.
pub fn pairwise_precision_recall(
    pred: &Partition,
    truth: &[u32],
    mode: EvalMode,
) -> Result<(Option<f64>, Option<f64>, PairCounts)> {
    let c = pair_counts(pred, truth, mode)?;
    Ok((c.precision(), c.recall(), c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub map: f64,
    pub queries: usize,
    /// Queries without any positive candidate.
    pub skipped: usize,
}

/// Mean over queries of average precision. Excluded pairs are removed from
/// each ranking; queries with no positive are skipped and counted.
pub fn mean_average_precision(matrix: &ScoreMatrix, labels: &PairLabels) -> Result<MapReport> {
    let ids = matrix.ids();
    let mut total = 0.0;
    let mut queries = 0;
    let mut skipped = 0;
    for q in 0..ids.len() {
        let mut ranked: Vec<(Option<f64>, bool)> = Vec::new();
        for c in 0..ids.len() {
            if c == q {
                continue;
            }
            match lookup_label(labels, &ids[q], &ids[c]) {
                Some(PairLabel::Positive) => ranked.push((matrix.get(q, c), true)),
                Some(PairLabel::Negative) => ranked.push((matrix.get(q, c), false)),
                Some(PairLabel::Excluded) => {}
                None => return Err(missing_label(&ids[q], &ids[c])),
            }
        }
        if !ranked.iter().any(|r| r.1) {
            skipped += 1;
            continue;
        }
        ranked.sort_by(|a, b| compare_scores(a.0, b.0).then(a.1.cmp(&b.1)));
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (rank, &(_, positive)) in ranked.iter().enumerate() {
            if positive {
                hits += 1;
                sum += hits as f64 / (rank + 1) as f64;
            }
        }
        total += sum / hits as f64;
        queries += 1;
    }
    if queries == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(MapReport {
        map: total / queries as f64,
        queries,
        skipped,
    })
}

fn missing_label(a: &str, b: &str) -> Error {
    Error::InvalidConfig(format!("no ground-truth label for pair ({a}, {b})"))
}

/// Scores of every positive or negative account pair, excluded pairs dropped.
pub fn labeled_scores(matrix: &ScoreMatrix, labels: &PairLabels) -> Result<Vec<(Option<f64>, bool)>> {
    let ids = matrix.ids();
    let mut out = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            match lookup_label(labels, &ids[i], &ids[j]) {
                Some(PairLabel::Positive) => out.push((matrix.get(i, j), true)),
                Some(PairLabel::Negative) => out.push((matrix.get(i, j), false)),
                Some(PairLabel::Excluded) => {}
                None => return Err(missing_label(&ids[i], &ids[j])),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Pairs scoring at least this much are called positive. The first point
    /// uses `+inf`; a missing score sorts as `-inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| Error::InvalidConfig(format!("writing ROC csv: {e}"));
        w.write_record(["threshold", "fpr", "tpr"]).map_err(fail)?;
        for p in &self.points {
            w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])
                .map_err(fail)?;
        }
        w.flush().map_err(|e| Error::InvalidConfig(format!("writing ROC csv: {e}")))?;
        Ok(())
    }
}

/// Threshold sweep over every distinct score with trapezoidal AUC.
pub fn roc_points(scored: &[(Option<f64>, bool)]) -> Result<RocCurve> {
    let positives = scored.iter().filter(|s| s.1).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateRoc);
    }
    let mut sorted: Vec<(Option<f64>, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| compare_scores(a.0, b.0));
    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && compare_scores(sorted[i].0, score) == Ordering::Equal {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().expect("curve starts with the origin");
        let next = RocPoint {
            threshold: score.unwrap_or(f64::NEG_INFINITY),
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        };
        auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
        points.push(next);
    }
    Ok(RocCurve { points, auc })
}

/// Removal counts for reposted and own images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RepostTally {
    pub reposts: usize,
    pub reposts_removed: usize,
    pub own: usize,
    pub own_removed: usize,
}

impl RepostTally {
    /// Counts images outside `kept` as removed.
    pub fn from_kept(kept: &BTreeSet<usize>, repost_flags: &[bool]) -> Self {
        let mut t = Self::default();
        for (i, &repost) in repost_flags.iter().enumerate() {
            let removed = !kept.contains(&i);
            if repost {
                t.reposts += 1;
                t.reposts_removed += usize::from(removed);
            } else {
                t.own += 1;
                t.own_removed += usize::from(removed);
            }
        }
        t
    }

    pub fn ratios(&self) -> RepostRatios {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        RepostRatios {
            removed_repost_ratio: ratio(self.reposts_removed, self.reposts),
            false_rejected_ratio: ratio(self.own_removed, self.own),
        }
    }
}

impl std::ops::AddAssign for RepostTally {
    fn add_assign(&mut self, o: Self) {
        self.reposts += o.reposts;
        self.reposts_removed += o.reposts_removed;
        self.own += o.own;
        self.own_removed += o.own_removed;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepostRatios {
    /// Share of reposted images outside every kept group.
    pub removed_repost_ratio: Option<f64>,
    /// Share of own images outside every kept group.
    pub false_rejected_ratio: Option<f64>,
}

pub fn repost_removal_ratios(result: &ClusterResult, repost_flags: &[bool]) -> RepostRatios {
    RepostTally::from_kept(&result.kept_members(), repost_flags).ratios()
}

/// Clustering quality aggregated over accounts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub purity_strict: Option<f64>,
    pub purity_lenient: Option<f64>,
    pub precision_strict: Option<f64>,
    pub recall_strict: Option<f64>,
    pub precision_lenient: Option<f64>,
    pub recall_lenient: Option<f64>,
    pub counts_strict: PairCounts,
    pub counts_lenient: PairCounts,
}

/// Pools pair counts and purity hits over several accounts, each given as a
/// partition plus per-image camera labels.
pub fn clustering_report(accounts: &[(Partition, Vec<u32>)]) -> Result<ClusteringReport> {
    let mut counts = [PairCounts::default(); 2];
    let mut purity_num = [0.0f64; 2];
    let mut purity_den = [0usize; 2];
    for (pred, truth) in accounts {
        for (k, mode) in [EvalMode::Strict, EvalMode::Lenient].into_iter().enumerate() {
            counts[k] += pair_counts(pred, truth, mode)?;
            let n: usize = pred.clusters(mode).iter().map(Vec::len).sum();
            if n > 0 {
                purity_num[k] += purity(pred, truth, mode)? * n as f64;
                purity_den[k] += n;
            }
        }
    }
    let pur = |k: usize| (purity_den[k] > 0).then(|| purity_num[k] / purity_den[k] as f64);
    Ok(ClusteringReport {
        purity_strict: pur(0),
        purity_lenient: pur(1),
        precision_strict: counts[0].precision(),
        recall_strict: counts[0].recall(),
        precision_lenient: counts[1].precision(),
        recall_lenient: counts[1].recall(),
        counts_strict: counts[0],
        counts_lenient: counts[1],
    })
}

/// Everything `eval` reports for one score matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub map: Option<MapReport>,
    pub auc: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
    pub missing_scores: usize,
    pub clustering: Option<ClusteringReport>,
    pub reposts: Option<RepostTally>,
    pub repost_ratios: Option<RepostRatios>,
}
