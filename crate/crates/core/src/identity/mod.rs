//! Account linkage: per-account fingerprint sets under the SCF, MCF and UCI
//! schemes, max-correlation account similarity, ranking and decisions.
//!
//! - SCF: one fingerprint from every image of the account.
//! - MCF: clustered fingerprints, groups smaller than `gamma` dropped.
//! - UCI: clustered fingerprints, groups smaller than `lambda` dropped.
//!
//! An account whose processing fails contributes an empty fingerprint set,
//! which shows up as missing scores rather than aborting the run.

mod scores;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_samples, prepare_samples, ClusterConfig, ClusterResult, ImageSample};
use crate::error::{Error, Result};
use crate::fingerprint::{CameraFingerprint, WeightedAccumulator};
use crate::imaging::{DenoiserConfig, PixelGrid};

pub use scores::{
    account_similarity, compare_scores, decide_pairs, id_index, rank_candidates, MatchDecision,
    RankedCandidate, ScoreMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Scf,
    Mcf,
    Uci,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Scf, Scheme::Mcf, Scheme::Uci];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Scf => "scf",
            Scheme::Mcf => "mcf",
            Scheme::Uci => "uci",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scf" => Ok(Scheme::Scf),
            "mcf" => Ok(Scheme::Mcf),
            "uci" => Ok(Scheme::Uci),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub denoiser: DenoiserConfig,
    pub cluster: ClusterConfig,
    /// Minimum group size kept by MCF.
    pub gamma: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            denoiser: DenoiserConfig::default(),
            cluster: ClusterConfig::default(),
            gamma: 2,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        self.denoiser.validate()?;
        self.cluster.validate()?;
        if self.gamma < 2 {
            return Err(Error::InvalidConfig(format!("gamma must be >= 2, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Clustering thresholds with the size filter this scheme applies.
    pub fn cluster_for(&self, scheme: Scheme) -> ClusterConfig {
        match scheme {
            Scheme::Mcf => ClusterConfig {
                lambda: self.gamma,
                ..self.cluster
            },
            _ => self.cluster,
        }
    }
}

/// What one scheme produced for one account.
#[derive(Debug, Clone)]
pub struct AccountOutcome {
    pub account_id: String,
    pub fingerprints: Vec<CameraFingerprint>,
    /// Present for the clustering schemes when clustering succeeded.
    pub cluster: Option<ClusterResult>,
    /// Why the account has no fingerprints, if it failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub accounts: Vec<AccountOutcome>,
    pub scores: ScoreMatrix,
}

impl SchemeRun {
    pub fn outcome(&self, account_id: &str) -> Option<&AccountOutcome> {
        self.accounts.iter().find(|a| a.account_id == account_id)
    }
}

/// The single all-images fingerprint used by SCF.
pub fn single_fingerprint(samples: &[ImageSample]) -> Result<CameraFingerprint> {
    let first = samples.first().ok_or(Error::EmptyGroup)?;
    let (w, h) = first.image.dims();
    let mut acc = WeightedAccumulator::new(w, h);
    for s in samples {
        acc.accumulate(&s.image, &s.residual)?;
    }
    acc.finalize()
}

/// Fingerprint set of one account under `scheme`, from precomputed samples.
pub fn account_fingerprints(
    samples: &[ImageSample],
    scheme: Scheme,
    cfg: &SchemeConfig,
) -> Result<(Vec<CameraFingerprint>, Option<ClusterResult>)> {
    if samples.len() < 2 {
        return Err(Error::NotEnoughImages(samples.len()));
    }
    match scheme {
        Scheme::Scf => Ok((vec![single_fingerprint(samples)?], None)),
        Scheme::Mcf | Scheme::Uci => {
            let result = cluster_samples(samples, &cfg.cluster_for(scheme), None)?;
            Ok((result.kept_fingerprints(), Some(result)))
        }
    }
}

/// Runs several schemes over the same accounts, extracting each account's
/// residuals once. `load(i)` yields the images of account `ids[i]`.
pub fn run_schemes<F>(
    ids: &[String],
    load: F,
    schemes: &[Scheme],
    cfg: &SchemeConfig,
) -> Result<Vec<SchemeRun>>
where
    F: Fn(usize) -> Result<Vec<PixelGrid>> + Sync,
{
    cfg.validate()?;
    let per_account: Vec<Vec<AccountOutcome>> = (0..ids.len())
        .into_par_iter()
        .map(|i| {
            let samples = load(i).and_then(|images| {
                if images.len() < 2 {
                    return Err(Error::NotEnoughImages(images.len()));
                }
                prepare_samples(&images, &cfg.denoiser)
            });
            schemes
                .iter()
                .map(|&scheme| {
                    let result = samples
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|s| account_fingerprints(s, scheme, cfg).map_err(|e| e.to_string()));
                    match result {
                        Ok((fingerprints, cluster)) => AccountOutcome {
                            account_id: ids[i].clone(),
                            fingerprints,
                            cluster,
                            error: None,
                        },
                        Err(e) => AccountOutcome {
                            account_id: ids[i].clone(),
                            fingerprints: Vec::new(),
                            cluster: None,
                            error: Some(e),
                        },
                    }
                })
                .collect()
        })
        .collect();

    let mut by_scheme: Vec<Vec<AccountOutcome>> = schemes.iter().map(|_| Vec::new()).collect();
    for outcomes in per_account {
        for (k, outcome) in outcomes.into_iter().enumerate() {
            by_scheme[k].push(outcome);
        }
    }
    schemes
        .iter()
        .zip(by_scheme)
        .map(|(&scheme, accounts)| {
            let sets: Vec<(&str, &[CameraFingerprint])> = accounts
                .iter()
                .map(|a| (a.account_id.as_str(), a.fingerprints.as_slice()))
                .collect();
            let scores = ScoreMatrix::from_fingerprint_sets(&sets)?;
            Ok(SchemeRun {
                scheme,
                accounts,
                scores,
            })
        })
        .collect()
}

/// Single-scheme convenience over in-memory accounts.
pub fn run_scheme(
    accounts: &[(String, Vec<PixelGrid>)],
    scheme: Scheme,
    cfg: &SchemeConfig,
) -> Result<SchemeRun> {
    let ids: Vec<String> = accounts.iter().map(|(id, _)| id.clone()).collect();
    let mut runs = run_schemes(&ids, |i| Ok(accounts[i].1.clone()), &[scheme], cfg)?;
    Ok(runs.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("xyz".parse::<Scheme>().is_err());
        assert_eq!("UCI".parse::<Scheme>().unwrap(), Scheme::Uci);
    }

    #[test]
    fn config_validation() {
        assert!(SchemeConfig::default().validate().is_ok());
        let bad = SchemeConfig {
            gamma: 1,
            ..SchemeConfig::default()
        };
        assert!(bad.validate().is_err());
        let cfg = SchemeConfig {
            gamma: 4,
            ..SchemeConfig::default()
        };
        assert_eq!(cfg.cluster_for(Scheme::Mcf).lambda, 4);
        assert_eq!(cfg.cluster_for(Scheme::Uci).lambda, 3);
    }

    #[test]
    fn failed_account_becomes_no_evidence() {
        let cfg = SchemeConfig {
            denoiser: DenoiserConfig {
                crop: (32, 32),
                wavelet_levels: 2,
                ..DenoiserConfig::default()
            },
            ..SchemeConfig::default()
        };
        let grid = |s: u64| {
            PixelGrid::from_fn(32, 32, |x, y| {
                ((x as u64 * 31 + y as u64 * 17 + s * 7) % 97) as f64 + 50.0
            })
        };
        let accounts = vec![
            ("a".to_string(), vec![grid(1), grid(2), grid(3)]),
            ("b".to_string(), vec![grid(4)]),
            ("c".to_string(), vec![grid(5), grid(6)]),
        ];
        let run = run_scheme(&accounts, Scheme::Scf, &cfg).unwrap();
        let b = run.outcome("b").unwrap();
        assert!(b.fingerprints.is_empty());
        assert!(b.error.is_some());
        let bi = run.scores.position("b").unwrap();
        for j in 0..3 {
            assert_eq!(run.scores.get(bi, j), None);
        }
        assert!(run.scores.get_by_id("a", "c").unwrap().is_some());
        assert_eq!(run.outcome("a").unwrap().fingerprints.len(), 1);
    }
}
