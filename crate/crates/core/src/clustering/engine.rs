use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{ClusterResult, CorrelationMatrix, ImageGroup, ImageSample, TraceEvent};
use crate::error::{Error, Result};
use crate::fingerprint::NormalizedGrid;

/// Snapshot handed to a clustering observer after each mutation.
#[derive(Debug)]
pub struct ClusterState<'a> {
    pub groups: &'a [ImageGroup],
    /// Images not (yet) in any group, ascending.
    pub pool: &'a [usize],
    /// Images set aside because their residual is constant.
    pub quarantined: &'a BTreeSet<usize>,
    pub iteration: usize,
}

type Observer<'o> = &'o mut dyn FnMut(&ClusterState<'_>);

/// Mutable clustering state with cached correlations.
///
/// `group_corr[a][b]` caches fingerprint correlations between group positions,
/// `pool_corr[a][i]` the correlation of image `i`'s residual with group `a`.
/// Both are rebuilt lazily and patched for the one group touched by each
/// merge or assignment.
pub(super) struct Engine<'s, 'o> {
    samples: &'s [ImageSample],
    residuals: Vec<Option<NormalizedGrid>>,
    groups: Vec<ImageGroup>,
    pool: Vec<usize>,
    quarantined: BTreeSet<usize>,
    group_corr: Option<Vec<Vec<Option<f64>>>>,
    pool_corr: Option<Vec<Vec<Option<f64>>>>,
    trace: Vec<TraceEvent>,
    iteration: usize,
    next_id: usize,
    observer: Option<Observer<'o>>,
}

impl<'s, 'o> Engine<'s, 'o> {
    pub(super) fn new(samples: &'s [ImageSample], groups: Vec<ImageGroup>, pool: Vec<usize>) -> Self {
        let residuals = samples
            .par_iter()
            .map(|s| NormalizedGrid::new(s.residual.as_grid()).ok())
            .collect();
        let next_id = groups.iter().map(|g| g.id + 1).max().unwrap_or(0);
        let mut pool = pool;
        pool.sort_unstable();
        pool.dedup();
        Self {
            samples,
            residuals,
            groups,
            pool,
            quarantined: BTreeSet::new(),
            group_corr: None,
            pool_corr: None,
            trace: Vec::new(),
            iteration: 0,
            next_id,
            observer: None,
        }
    }

    pub(super) fn set_observer(&mut self, observer: Observer<'o>) {
        self.observer = Some(observer);
    }

    pub(super) fn normalized_residuals(&self) -> &[Option<NormalizedGrid>] {
        &self.residuals
    }

    pub(super) fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub(super) fn next_iteration(&mut self) {
        self.iteration += 1;
    }

    pub(super) fn into_groups_and_pool(self) -> (Vec<ImageGroup>, Vec<usize>) {
        (self.groups, self.pool)
    }

    fn notify(&mut self) {
        if let Some(observer) = self.observer.as_mut() {
            observer(&ClusterState {
                groups: &self.groups,
                pool: &self.pool,
                quarantined: &self.quarantined,
                iteration: self.iteration,
            });
        }
    }

    /// Sets aside images whose residual has no defined correlation; returns
    /// the number of usable images.
    pub(super) fn quarantine_degenerate(&mut self) -> usize {
        for (image, r) in self.residuals.iter().enumerate() {
            if r.is_none() {
                self.quarantined.insert(image);
                self.trace.push(TraceEvent::Quarantine {
                    image,
                    reason: "constant residual".into(),
                });
            }
        }
        self.residuals.len() - self.quarantined.len()
    }

    pub(super) fn seed(&mut self, matrix: &CorrelationMatrix, alpha: f64) -> Result<()> {
        let n = self.samples.len();
        if matrix.len() != n {
            return Err(Error::DimensionMismatch {
                left: (matrix.len(), matrix.len()),
                right: (n, n),
            });
        }
        self.pool = (0..n).filter(|i| !self.quarantined.contains(i)).collect();

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for j in 0..n {
            for k in j + 1..n {
                if let Some(c) = matrix.get(j, k) {
                    if c >= alpha && !self.quarantined.contains(&j) && !self.quarantined.contains(&k) {
                        pairs.push((c, j, k));
                    }
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

        let mut used = vec![false; n];
        for (c, j, k) in pairs {
            if used[j] || used[k] {
                continue;
            }
            used[j] = true;
            used[k] = true;
            let group = ImageGroup::from_members(self.next_id, [j, k], self.samples)?;
            self.trace.push(TraceEvent::Seed {
                iteration: self.iteration,
                group: group.id,
                images: [j, k],
                correlation: c,
            });
            self.next_id += 1;
            self.groups.push(group);
            self.pool.retain(|&i| i != j && i != k);
            self.group_corr = None;
            self.pool_corr = None;
            self.notify();
        }
        Ok(())
    }

    fn group_pair(&self, a: usize, b: usize) -> Option<f64> {
        let nb = self.groups[b].normalized.as_ref()?;
        self.groups[a].correlate(nb)
    }

    fn group_row(&self, a: usize) -> Vec<Option<f64>> {
        (0..self.groups.len())
            .map(|b| if a == b { None } else { self.group_pair(a, b) })
            .collect()
    }

    fn pool_column(&self, a: usize) -> Vec<Option<f64>> {
        let group = &self.groups[a];
        let residuals = &self.residuals;
        let mut column = vec![None; residuals.len()];
        let values: Vec<(usize, Option<f64>)> = self
            .pool
            .par_iter()
            .map(|&i| (i, residuals[i].as_ref().and_then(|r| group.correlate(r))))
            .collect();
        for (i, c) in values {
            column[i] = c;
        }
        column
    }

    fn ensure_group_corr(&mut self) {
        if self.group_corr.is_none() {
            let rows = (0..self.groups.len()).map(|a| self.group_row(a)).collect();
            self.group_corr = Some(rows);
        }
    }

    fn ensure_pool_corr(&mut self) {
        if self.pool_corr.is_none() {
            let cols = (0..self.groups.len()).map(|a| self.pool_column(a)).collect();
            self.pool_corr = Some(cols);
        }
    }

    /// Recomputes every cached correlation involving group position `a`.
    fn refresh_caches_for(&mut self, a: usize) {
        if self.group_corr.is_some() {
            let row = self.group_row(a);
            let cache = self.group_corr.as_mut().unwrap();
            for (b, &c) in row.iter().enumerate() {
                cache[b][a] = c;
            }
            cache[a] = row;
        }
        if self.pool_corr.is_some() {
            let column = self.pool_column(a);
            self.pool_corr.as_mut().unwrap()[a] = column;
        }
    }

    /// Merges groups while any pair correlates above `alpha`, strongest pair
    /// first (ties: lexicographically smallest position pair).
    pub(super) fn merge_all(&mut self, alpha: f64) -> Result<()> {
        loop {
            self.ensure_group_corr();
            let cache = self.group_corr.as_ref().unwrap();
            let mut best: Option<(f64, usize, usize)> = None;
            for j in 0..self.groups.len() {
                for k in j + 1..self.groups.len() {
                    if let Some(c) = cache[j][k] {
                        if c > alpha && best.map_or(true, |(bc, _, _)| c > bc) {
                            best = Some((c, j, k));
                        }
                    }
                }
            }
            let Some((c, j, k)) = best else {
                return Ok(());
            };
            self.merge(j, k, c)?;
        }
    }

    fn merge(&mut self, j: usize, k: usize, correlation: f64) -> Result<()> {
        let absorbed = self.groups.remove(k);
        if let Some(cache) = self.group_corr.as_mut() {
            cache.remove(k);
            for row in cache.iter_mut() {
                row.remove(k);
            }
        }
        if let Some(cache) = self.pool_corr.as_mut() {
            cache.remove(k);
        }
        let target = &mut self.groups[j];
        target.members.extend(absorbed.members.iter().copied());
        target.accumulator.absorb(&absorbed.accumulator)?;
        target.refresh()?;
        self.trace.push(TraceEvent::Merge {
            iteration: self.iteration,
            group: target.id,
            absorbed: absorbed.id,
            correlation,
            size: target.len(),
        });
        self.refresh_caches_for(j);
        self.notify();
        Ok(())
    }

    /// Moves the best-matching pool image into its group if the match
    /// reaches `beta` (ties: smallest image id, then smallest group
    /// position). Returns whether an assignment happened.
    pub(super) fn assign_one(&mut self, beta: f64) -> Result<bool> {
        if self.pool.is_empty() || self.groups.is_empty() {
            return Ok(false);
        }
        self.ensure_pool_corr();
        let cache = self.pool_corr.as_ref().unwrap();
        let mut best: Option<(f64, usize, usize)> = None;
        for &i in &self.pool {
            for (a, column) in cache.iter().enumerate() {
                if let Some(c) = column[i] {
                    if c >= beta && best.map_or(true, |(bc, _, _)| c > bc) {
                        best = Some((c, i, a));
                    }
                }
            }
        }
        let Some((correlation, image, a)) = best else {
            return Ok(false);
        };
        self.pool.retain(|&i| i != image);
        let sample = &self.samples[image];
        let group = &mut self.groups[a];
        group.members.insert(image);
        group.accumulator.accumulate(&sample.image, &sample.residual)?;
        group.refresh()?;
        self.trace.push(TraceEvent::Assign {
            iteration: self.iteration,
            image,
            group: group.id,
            correlation,
            size: group.len(),
        });
        self.refresh_caches_for(a);
        self.notify();
        Ok(true)
    }

    pub(super) fn finish(mut self, lambda: usize, initial_groups: usize) -> ClusterResult {
        self.ensure_pool_corr();
        let cache = self.pool_corr.as_ref().unwrap();
        for &image in &self.pool {
            let best = cache
                .iter()
                .filter_map(|column| column[image])
                .max_by(f64::total_cmp);
            self.trace.push(TraceEvent::Reject {
                iteration: self.iteration,
                image,
                best_correlation: best,
            });
        }
        let mut kept = Vec::new();
        for (position, group) in self.groups.iter().enumerate() {
            let keep = group.len() >= lambda;
            if keep {
                kept.push(position);
            }
            self.trace.push(TraceEvent::Filter {
                group: group.id,
                size: group.len(),
                kept: keep,
            });
        }
        let rejected_ids = self.pool.iter().chain(&self.quarantined).copied().collect();
        ClusterResult {
            image_count: self.samples.len(),
            groups: self.groups,
            rejected_ids,
            kept,
            trace: self.trace,
            initial_groups,
            iterations: self.iteration,
        }
    }
}
