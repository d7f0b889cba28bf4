//! Incremental multi-camera fingerprint estimation for one account.
//!
//! The pipeline seeds two-image groups from strongly correlated residual
//! pairs, merges groups whose fingerprints agree, then pulls the remaining
//! images one at a time into the best-matching group until no image clears
//! the assignment threshold. Groups smaller than the repost threshold are
//! dropped from the final fingerprint set.

mod engine;
mod trace;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{CameraFingerprint, NormalizedGrid, WeightedAccumulator};
use crate::imaging::{center_crop, extract_residual, DenoiserConfig, PixelGrid, ResidualNoise};

pub use engine::ClusterState;
pub use trace::{write_trace_jsonl, TraceEvent};

use engine::Engine;

/// Thresholds driving the clustering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Seeding (`>=`) and merging (`>`) threshold.
    pub alpha: f64,
    /// Assignment threshold (`>=`).
    pub beta: f64,
    /// Minimum size of a group whose fingerprint is kept.
    pub lambda: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            alpha: 0.10,
            beta: 0.05,
            lambda: 3,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= self.alpha && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "thresholds must satisfy 0 < beta <= alpha < 1, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.lambda < 2 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 2, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// An image together with its noise residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub image: PixelGrid,
    pub residual: ResidualNoise,
}

impl ImageSample {
    pub fn extract(image: PixelGrid, cfg: &DenoiserConfig) -> Result<Self> {
        let residual = extract_residual(&image, cfg)?;
        Ok(Self { image, residual })
    }
}

/// Center-crops every image to `cfg.crop` and extracts residuals in parallel.
pub fn prepare_samples(images: &[PixelGrid], cfg: &DenoiserConfig) -> Result<Vec<ImageSample>> {
    cfg.validate()?;
    images
        .par_iter()
        .map(|img| ImageSample::extract(center_crop(img, cfg.crop)?, cfg))
        .collect()
}

/// A set of images hypothesized to share one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGroup {
    id: usize,
    members: BTreeSet<usize>,
    accumulator: WeightedAccumulator,
    fingerprint: CameraFingerprint,
    normalized: Option<NormalizedGrid>,
}

impl ImageGroup {
    /// Builds a group over `members` (indices into `samples`).
    pub fn from_members(
        id: usize,
        members: impl IntoIterator<Item = usize>,
        samples: &[ImageSample],
    ) -> Result<Self> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        let first = *members.iter().next().ok_or(Error::EmptyGroup)?;
        let first = samples.get(first).ok_or(Error::EmptyGroup)?;
        let (w, h) = first.image.dims();
        let mut accumulator = WeightedAccumulator::new(w, h);
        for &m in &members {
            let s = samples.get(m).ok_or_else(|| {
                Error::InvalidConfig(format!("group member {m} out of range"))
            })?;
            accumulator.accumulate(&s.image, &s.residual)?;
        }
        Self::from_accumulator(id, members, accumulator)
    }

    fn from_accumulator(
        id: usize,
        members: BTreeSet<usize>,
        accumulator: WeightedAccumulator,
    ) -> Result<Self> {
        let fingerprint = accumulator.finalize()?;
        let normalized = NormalizedGrid::new(fingerprint.grid()).ok();
        Ok(Self {
            id,
            members,
            accumulator,
            fingerprint,
            normalized,
        })
    }

    fn refresh(&mut self) -> Result<()> {
        self.fingerprint = self.accumulator.finalize()?;
        self.normalized = NormalizedGrid::new(self.fingerprint.grid()).ok();
        Ok(())
    }

    /// Stable identifier assigned at creation; survives merges as the
    /// identity of the absorbing group.
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn fingerprint(&self) -> &CameraFingerprint {
        &self.fingerprint
    }

    pub fn accumulator(&self) -> &WeightedAccumulator {
        &self.accumulator
    }

    /// Correlation with another fingerprint-like normalized grid, if defined.
    pub(crate) fn correlate(&self, other: &NormalizedGrid) -> Option<f64> {
        self.normalized.as_ref().map(|n| n.correlate(other))
    }
}

/// Symmetric matrix of residual-to-residual correlations.
///
/// Images whose residual is constant have no defined correlation; their
/// entries are `None` and they are listed in [`CorrelationMatrix::degenerate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    values: Vec<Option<f64>>,
}

impl CorrelationMatrix {
    /// Builds a matrix from an explicit row-major `n x n` table.
    pub fn from_values(n: usize, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "{n}x{n} matrix needs {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        for j in 0..n {
            for k in 0..n {
                if values[j * n + k] != values[k * n + j] {
                    return Err(Error::InvalidConfig(format!(
                        "matrix is not symmetric at ({j}, {k})"
                    )));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, j: usize, k: usize) -> Option<f64> {
        self.values[j * self.n + k]
    }

    pub fn degenerate(&self) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(j, j).is_none()).collect()
    }
}

pub fn pairwise_residual_correlations(residuals: &[ResidualNoise]) -> Result<CorrelationMatrix> {
    if residuals.len() < 2 {
        return Err(Error::NotEnoughImages(residuals.len()));
    }
    for r in &residuals[1..] {
        residuals[0].as_grid().ensure_same_dims(r.as_grid())?;
    }
    let normalized: Vec<Option<NormalizedGrid>> = residuals
        .par_iter()
        .map(|r| NormalizedGrid::new(r.as_grid()).ok())
        .collect();
    Ok(correlations_of(&normalized))
}

pub(crate) fn correlations_of(normalized: &[Option<NormalizedGrid>]) -> CorrelationMatrix {
    let n = normalized.len();
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .map(|k| match (&normalized[j], &normalized[k]) {
                    (Some(_), Some(_)) if j == k => Some(1.0),
                    (Some(a), Some(b)) if j < k => Some(a.correlate(b)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    let mut values: Vec<Option<f64>> = rows.into_iter().flatten().collect();
    for j in 0..n {
        for k in 0..j {
            values[j * n + k] = values[k * n + j];
        }
    }
    CorrelationMatrix { n, values }
}

/// Greedy seed pairs: pairs with correlation `>= alpha`, strongest first,
/// each image used at most once. Returns the seed groups and the unused pool.
pub fn select_seeds(
    matrix: &CorrelationMatrix,
    samples: &[ImageSample],
    alpha: f64,
) -> Result<(Vec<ImageGroup>, Vec<usize>)> {
    let mut engine = Engine::new(samples, Vec::new(), Vec::new());
    engine.seed(matrix, alpha)?;
    Ok(engine.into_groups_and_pool())
}

/// Merges fingerprint-consistent groups (correlation `> alpha`) until none remain.
pub fn merge_groups(groups: Vec<ImageGroup>, alpha: f64) -> Result<Vec<ImageGroup>> {
    let mut engine = Engine::new(&[], groups, Vec::new());
    engine.merge_all(alpha)?;
    Ok(engine.into_groups_and_pool().0)
}

/// Repeatedly moves the single best (image, group) match with correlation
/// `>= beta` from the pool into its group. Returns the groups and the images
/// that never qualified.
pub fn assign_remaining(
    groups: Vec<ImageGroup>,
    pool: &[usize],
    samples: &[ImageSample],
    beta: f64,
) -> Result<(Vec<ImageGroup>, BTreeSet<usize>)> {
    let mut engine = Engine::new(samples, groups, pool.to_vec());
    while engine.assign_one(beta)? {}
    let (groups, pool) = engine.into_groups_and_pool();
    Ok((groups, pool.into_iter().collect()))
}

/// Fingerprints of the groups holding at least `lambda` images.
pub fn filter_small_groups(groups: &[ImageGroup], lambda: usize) -> Vec<CameraFingerprint> {
    groups
        .iter()
        .filter(|g| g.len() >= lambda)
        .map(|g| g.fingerprint.clone())
        .collect()
}

/// Outcome of clustering one account.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub image_count: usize,
    pub groups: Vec<ImageGroup>,
    pub rejected_ids: BTreeSet<usize>,
    /// Indices into `groups` that survived the size filter.
    pub kept: Vec<usize>,
    pub trace: Vec<TraceEvent>,
    pub initial_groups: usize,
    pub iterations: usize,
}

impl ClusterResult {
    pub fn kept_fingerprints(&self) -> Vec<CameraFingerprint> {
        self.kept
            .iter()
            .map(|&g| self.groups[g].fingerprint.clone())
            .collect()
    }

    /// Images that ended up in a kept group.
    pub fn kept_members(&self) -> BTreeSet<usize> {
        self.kept
            .iter()
            .flat_map(|&g| self.groups[g].members.iter().copied())
            .collect()
    }

    pub fn summary(&self) -> ClusterSummary {
        ClusterSummary {
            image_count: self.image_count,
            groups: self
                .groups
                .iter()
                .enumerate()
                .map(|(i, g)| GroupSummary {
                    members: g.members.iter().copied().collect(),
                    kept: self.kept.contains(&i),
                })
                .collect(),
            rejected: self.rejected_ids.iter().copied().collect(),
        }
    }
}

/// Fingerprint-free description of a [`ClusterResult`], suitable for JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSummary {
    pub image_count: usize,
    pub groups: Vec<GroupSummary>,
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSummary {
    pub members: Vec<usize>,
    pub kept: bool,
}

impl ClusterSummary {
    /// Parses and checks that groups and rejected ids partition `0..image_count`.
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let summary: ClusterSummary = serde_json::from_slice(bytes)?;
        summary.check()?;
        Ok(summary)
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = vec![false; self.image_count];
        let ids = self
            .groups
            .iter()
            .flat_map(|g| g.members.iter())
            .chain(&self.rejected);
        for &id in ids {
            match seen.get_mut(id) {
                Some(slot) if !*slot => *slot = true,
                Some(_) => {
                    return Err(Error::InvalidConfig(format!("image {id} listed twice")));
                }
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "image {id} out of range for {} images",
                        self.image_count
                    )));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidConfig(format!("image {missing} is unaccounted for")));
        }
        Ok(())
    }

    pub fn kept_members(&self) -> BTreeSet<usize> {
        self.groups
            .iter()
            .filter(|g| g.kept)
            .flat_map(|g| g.members.iter().copied())
            .collect()
    }
}

/// Full pipeline for one account: residuals, seeding, merge/assign loop and
/// size filtering.
pub fn estimate_user_fingerprints(
    images: &[PixelGrid],
    denoiser: &DenoiserConfig,
    cfg: &ClusterConfig,
) -> Result<ClusterResult> {
    cfg.validate()?;
    if images.len() < 2 {
        return Err(Error::NotEnoughImages(images.len()));
    }
    let samples = prepare_samples(images, denoiser)?;
    cluster_samples(&samples, cfg, None)
}

/// Clusters precomputed samples. `observer`, when given, sees the state after
/// every mutation (seed, merge, assignment).
pub fn cluster_samples(
    samples: &[ImageSample],
    cfg: &ClusterConfig,
    observer: Option<&mut dyn FnMut(&ClusterState<'_>)>,
) -> Result<ClusterResult> {
    cfg.validate()?;
    let mut engine = Engine::new(samples, Vec::new(), Vec::new());
    if let Some(obs) = observer {
        engine.set_observer(obs);
    }
    let usable = engine.quarantine_degenerate();
    if usable < 2 {
        return Err(Error::NotEnoughImages(usable));
    }
    let matrix = correlations_of(engine.normalized_residuals());
    engine.seed(&matrix, cfg.alpha)?;
    let initial_groups = engine.group_count();
    loop {
        engine.next_iteration();
        engine.merge_all(cfg.alpha)?;
        if !engine.assign_one(cfg.beta)? {
            break;
        }
    }
    Ok(engine.finish(cfg.lambda, initial_groups))
}
