//! Straight-line reference implementations used as test oracles. Nothing
//! here calls into the library's numeric code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_values(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Pearson correlation from explicit means and norms.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mut ma = 0.0;
    let mut mb = 0.0;
    for i in 0..a.len() {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    num / (da.sqrt() * db.sqrt())
}

/// Elementwise `sum(I * R) / sum(I^2)`, zero where the denominator vanishes.
pub fn fingerprint(pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let n = pairs[0].0.len();
    let mut out = vec![0.0; n];
    for (p, slot) in out.iter_mut().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for (img, res) in pairs {
            num += img[p] * res[p];
            den += img[p] * img[p];
        }
        *slot = if den == 0.0 { 0.0 } else { num / den };
    }
    out
}

/// Clusters in scope: predicted groups plus, in strict mode, one singleton
/// per rejected image.
pub fn clusters(groups: &[Vec<usize>], rejected: &[usize], strict: bool) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = groups.iter().filter(|g| !g.is_empty()).cloned().collect();
    if strict {
        for &r in rejected {
            out.push(vec![r]);
        }
    }
    out
}

pub fn purity(groups: &[Vec<usize>], rejected: &[usize], truth: &[u32], strict: bool) -> Option<f64> {
    let cs = clusters(groups, rejected, strict);
    let n: usize = cs.iter().map(Vec::len).sum();
    if n == 0 {
        return None;
    }
    let mut hits = 0;
    for c in &cs {
        let mut best = 0;
        for &label in truth {
            let count = c.iter().filter(|&&i| truth[i] == label).count();
            best = best.max(count);
        }
        hits += best;
    }
    Some(hits as f64 / n as f64)
}

/// `(tp, fp, fn, tn)` by enumerating every image pair in scope.
pub fn pair_counts(groups: &[Vec<usize>], rejected: &[usize], truth: &[u32], strict: bool) -> (u64, u64, u64, u64) {
    let cs = clusters(groups, rejected, strict);
    let mut owner = BTreeMap::new();
    for (k, c) in cs.iter().enumerate() {
        for &i in c {
            owner.insert(i, k);
        }
    }
    let ids: Vec<usize> = owner.keys().copied().collect();
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for x in 0..ids.len() {
        for y in x + 1..ids.len() {
            let (i, j) = (ids[x], ids[y]);
            let together = owner[&i] == owner[&j];
            let same = truth[i] == truth[j];
            match (together, same) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
    }
    (tp, fp, fn_, tn)
}

fn key(s: Option<f64>) -> f64 {
    s.unwrap_or(f64::NEG_INFINITY)
}

/// Average precision of one query with ties resolved against the method:
/// every tied negative ranks ahead of the tied positives.
pub fn average_precision(candidates: &[(Option<f64>, bool)]) -> Option<f64> {
    let positives: Vec<f64> = candidates.iter().filter(|c| c.1).map(|c| key(c.0)).collect();
    if positives.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    let mut seen_scores: Vec<f64> = Vec::new();
    for &s in &positives {
        if seen_scores.contains(&s) {
            continue;
        }
        seen_scores.push(s);
        let above = candidates.iter().filter(|c| key(c.0) > s).count();
        let pos_above = candidates.iter().filter(|c| c.1 && key(c.0) > s).count();
        let neg_tied = candidates.iter().filter(|c| !c.1 && key(c.0) == s).count();
        let pos_tied = positives.iter().filter(|&&p| p == s).count();
        for i in 1..=pos_tied {
            let rank = above + neg_tied + i;
            sum += (pos_above + i) as f64 / rank as f64;
        }
    }
    Some(sum / positives.len() as f64)
}

/// Mann-Whitney form of the area under the ROC curve, ties counted half.
pub fn auc(scored: &[(Option<f64>, bool)]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for p in scored.iter().filter(|s| s.1) {
        for n in scored.iter().filter(|s| !s.1) {
            pairs += 1.0;
            let (a, b) = (key(p.0), key(n.0));
            if a > b {
                num += 1.0;
            } else if a == b {
                num += 0.5;
            }
        }
    }
    num / pairs
}
