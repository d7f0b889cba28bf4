use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{CameraFingerprint, NormalizedGrid};

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptScoreMatrix(msg.into())
}

/// Highest correlation between any fingerprint of `x` and any of `y`.
/// `None` (no evidence) when either side has no usable fingerprint.
pub fn account_similarity(x: &[CameraFingerprint], y: &[CameraFingerprint]) -> Result<Option<f64>> {
    for a in x {
        for b in y {
            a.grid().ensure_same_dims(b.grid())?;
        }
    }
    let nx = normalize_all(x);
    let ny = normalize_all(y);
    Ok(best_pair(&nx, &ny))
}

fn normalize_all(set: &[CameraFingerprint]) -> Vec<NormalizedGrid> {
    set.iter().filter_map(|f| NormalizedGrid::new(f.grid()).ok()).collect()
}

fn best_pair(x: &[NormalizedGrid], y: &[NormalizedGrid]) -> Option<f64> {
    x.iter()
        .flat_map(|a| y.iter().map(move |b| a.correlate(b)))
        .fold(None, |best, c| Some(best.map_or(c, |b: f64| b.max(c))))
}

/// Orders scores descending with `None` below every real value.
pub fn compare_scores(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Symmetric account-by-account similarity table. The diagonal is undefined
/// and stored as `None`, as is any pair lacking evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    ids: Vec<String>,
    values: Vec<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreMatrixJson {
    accounts: Vec<String>,
    scores: Vec<Vec<Option<f64>>>,
}

impl ScoreMatrix {
    pub fn new(ids: Vec<String>, values: Vec<Option<f64>>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(corrupt(format!("expected {} cells, got {}", n * n, values.len())));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &ids {
            if id.is_empty() || !seen.insert(id.as_str()) {
                return Err(corrupt(format!("empty or duplicate account id {id:?}")));
            }
        }
        for i in 0..n {
            if values[i * n + i].is_some() {
                return Err(corrupt(format!("diagonal cell for {} must be empty", ids[i])));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if let Some(x) = v {
                    if !(-1.0..=1.0).contains(&x) {
                        return Err(corrupt(format!("score {x} outside [-1, 1]")));
                    }
                }
                let w = values[j * n + i];
                if v.map(f64::to_bits) != w.map(f64::to_bits) {
                    return Err(corrupt(format!("asymmetric cell ({}, {})", ids[i], ids[j])));
                }
            }
        }
        Ok(Self { ids, values })
    }

    /// Similarity of every account pair. Fingerprint dimensions must agree
    /// across all accounts.
    pub fn from_fingerprint_sets<S, F>(sets: &[(S, F)]) -> Result<Self>
    where
        S: AsRef<str> + Sync,
        F: AsRef<[CameraFingerprint]> + Sync,
    {
        let dims = sets.iter().flat_map(|(_, s)| s.as_ref()).map(|f| f.dims()).next();
        if let Some(d) = dims {
            for f in sets.iter().flat_map(|(_, s)| s.as_ref()) {
                if f.dims() != d {
                    return Err(Error::DimensionMismatch {
                        left: d,
                        right: f.dims(),
                    });
                }
            }
        }
        let normalized: Vec<Vec<NormalizedGrid>> =
            sets.par_iter().map(|(_, s)| normalize_all(s.as_ref())).collect();
        let n = sets.len();
        let mut values = vec![None; n * n];
        let upper: Vec<(usize, usize, Option<f64>)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, best_pair(&normalized[i], &normalized[j])))
            .collect();
        for (i, j, v) in upper {
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
        Self::new(sets.iter().map(|(id, _)| id.as_ref().to_string()).collect(), values)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.len() + j]
    }

    pub fn get_by_id(&self, a: &str, b: &str) -> Result<Option<f64>> {
        let i = self.position(a).ok_or_else(|| Error::UnknownAccount(a.to_string()))?;
        let j = self.position(b).ok_or_else(|| Error::UnknownAccount(b.to_string()))?;
        Ok(self.get(i, j))
    }

    /// Header row and column of ids; empty cells mean no score.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["account".to_string()];
        header.extend(self.ids.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend((0..self.len()).map(|j| self.get(i, j).map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| corrupt(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| corrupt(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut rows = r.records();
        let header = rows
            .next()
            .ok_or_else(|| corrupt("missing header row"))?
            .map_err(csv_err)?;
        let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let n = ids.len();
        let mut values = Vec::with_capacity(n * n);
        let mut row_count = 0;
        for record in rows {
            let record = record.map_err(csv_err)?;
            if record.len() != n + 1 {
                return Err(corrupt(format!("row {} has {} cells, expected {}", row_count + 1, record.len(), n + 1)));
            }
            if row_count >= n || record[0] != ids[row_count] {
                return Err(corrupt(format!("row {} label does not match the header", row_count + 1)));
            }
            for cell in record.iter().skip(1) {
                values.push(parse_cell(cell)?);
            }
            row_count += 1;
        }
        if row_count != n {
            return Err(corrupt(format!("expected {n} rows, got {row_count}")));
        }
        Self::new(ids, values)
    }

    pub fn from_csv_slice(bytes: &[u8]) -> Result<Self> {
        Self::read_csv(bytes)
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.len();
        let doc = ScoreMatrixJson {
            accounts: self.ids.clone(),
            scores: self.values.chunks(n.max(1)).map(<[_]>::to_vec).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let doc: ScoreMatrixJson =
            serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
        let n = doc.accounts.len();
        if doc.scores.len() != n || doc.scores.iter().any(|r| r.len() != n) {
            return Err(corrupt("score rows do not match the account list"));
        }
        Self::new(doc.accounts, doc.scores.into_iter().flatten().collect())
    }
}

fn csv_err(e: csv::Error) -> Error {
    corrupt(e.to_string())
}

fn parse_cell(cell: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| corrupt(format!("bad score {cell:?}")))?;
    if !v.is_finite() {
        return Err(corrupt(format!("non-finite score {cell:?}")));
    }
    Ok(Some(v))
}

/// A candidate account and its score against the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub account_id: String,
    pub score: Option<f64>,
}

/// Every other account, best score first; missing scores last, ties by id.
pub fn rank_candidates(matrix: &ScoreMatrix, query: &str) -> Result<Vec<RankedCandidate>> {
    let q = matrix
        .position(query)
        .ok_or_else(|| Error::UnknownAccount(query.to_string()))?;
    let mut out: Vec<RankedCandidate> = (0..matrix.len())
        .filter(|&j| j != q)
        .map(|j| RankedCandidate {
            account_id: matrix.ids[j].clone(),
            score: matrix.get(q, j),
        })
        .collect();
    out.sort_by(|a, b| compare_scores(a.score, b.score).then_with(|| a.account_id.cmp(&b.account_id)));
    Ok(out)
}

/// An unordered account pair asserted to belong to one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub a: String,
    pub b: String,
    pub score: f64,
}

/// All pairs scoring strictly above `tau`, ordered by id pair.
pub fn decide_pairs(matrix: &ScoreMatrix, tau: f64) -> Vec<MatchDecision> {
    let mut out = Vec::new();
    for i in 0..matrix.len() {
        for j in i + 1..matrix.len() {
            if let Some(score) = matrix.get(i, j).filter(|&d| d > tau) {
                let (a, b) = (&matrix.ids[i], &matrix.ids[j]);
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                out.push(MatchDecision {
                    a: a.clone(),
                    b: b.clone(),
                    score,
                });
            }
        }
    }
    out.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    out
}

/// Index of every account id in `matrix`, for label lookups.
pub fn id_index(matrix: &ScoreMatrix) -> HashMap<&str, usize> {
    matrix.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::PixelGrid;

    fn fp(values: &[f64]) -> CameraFingerprint {
        CameraFingerprint::new(PixelGrid::new(values.len(), 1, values.to_vec()).unwrap(), 1).unwrap()
    }

    fn matrix(ids: &[&str], upper: &[Option<f64>]) -> ScoreMatrix {
        let n = ids.len();
        let mut values = vec![None; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().unwrap();
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        ScoreMatrix::new(ids.iter().map(|s| s.to_string()).collect(), values).unwrap()
    }

    #[test]
    fn similarity_of_identical_sets_is_one() {
        let s = fp(&[1.0, 3.0, 2.0, 5.0]);
        let v = account_similarity(&[s.clone()], &[s]).unwrap().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_is_max_over_pairs_and_symmetric() {
        let x = [fp(&[1.0, 2.0, 3.0, 4.0]), fp(&[4.0, 1.0, 3.0, 2.0])];
        let y = [fp(&[1.0, 2.0, 4.0, 3.0]), fp(&[2.0, 2.0, 1.0, 5.0])];
        let mut best = f64::NEG_INFINITY;
        for a in &x {
            for b in &y {
                best = best.max(crate::fingerprint::correlation(a.grid(), b.grid()).unwrap());
            }
        }
        let d = account_similarity(&x, &y).unwrap().unwrap();
        assert_eq!(d, best);
        assert_eq!(d, account_similarity(&y, &x).unwrap().unwrap());
    }

    #[test]
    fn empty_set_is_no_evidence() {
        let s = fp(&[1.0, 2.0]);
        assert_eq!(account_similarity(&[], &[s.clone()]).unwrap(), None);
        assert_eq!(account_similarity(&[s], &[]).unwrap(), None);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let r = account_similarity(&[fp(&[1.0, 2.0])], &[fp(&[1.0, 2.0, 3.0])]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ranking_orders_by_score_then_id() {
        let m = matrix(&["A", "B", "C"], &[Some(0.9), Some(0.1), Some(0.0)]);
        let ranked: Vec<_> = rank_candidates(&m, "A").unwrap().into_iter().map(|c| c.account_id).collect();
        assert_eq!(ranked, ["B", "C"]);
        let m = matrix(&["A", "C", "B", "D"], &[Some(0.5), Some(0.5), None, Some(0.0), Some(0.0), Some(0.0)]);
        let ranked: Vec<_> = rank_candidates(&m, "A").unwrap().into_iter().map(|c| c.account_id).collect();
        assert_eq!(ranked, ["B", "C", "D"]);
        assert!(matches!(rank_candidates(&m, "Z"), Err(Error::UnknownAccount(_))));
    }

    #[test]
    fn decisions_are_strictly_above_tau() {
        let m = matrix(&["A", "B", "C"], &[Some(0.9), None, Some(-0.5)]);
        assert!(decide_pairs(&m, 0.95).is_empty());
        assert_eq!(decide_pairs(&m, -1.0).len(), 2);
        let d = decide_pairs(&m, 0.9);
        assert!(d.is_empty());
        let d = decide_pairs(&m, 0.5);
        assert_eq!((d[0].a.as_str(), d[0].b.as_str()), ("A", "B"));
    }

    #[test]
    fn csv_round_trip_keeps_bits_and_gaps() {
        let m = matrix(&["a", "b", "c"], &[Some(0.1 + 0.2), None, Some(-0.123_456_789_012_345_6)]);
        let text = m.to_csv_string().unwrap();
        assert!(text.starts_with("account,a,b,c\n"));
        assert_eq!(ScoreMatrix::from_csv_slice(text.as_bytes()).unwrap(), m);
        let json = m.to_json().unwrap();
        assert_eq!(ScoreMatrix::from_json_slice(json.as_bytes()).unwrap(), m);
    }

    #[test]
    fn csv_rejects_malformed_tables() {
        for bad in [
            "",
            "account,a,b\na,,0.5\n",
            "account,a,b\na,,0.5\nb,0.4,\n",
            "account,a,b\na,,0.5\nx,0.5,\n",
            "account,a,b\na,,2\nb,2,\n",
            "account,a,b\na,0.1,0.5\nb,0.5,\n",
            "account,a,b\na,,nan\nb,nan,\n",
            "account,a,a\na,,0.5\na,0.5,\n",
            "account,a,b\na,,0.5,1\nb,0.5,\n",
        ] {
            assert!(ScoreMatrix::from_csv_slice(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }
}
