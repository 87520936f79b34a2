use std::time::Instant;

use super::{LocalizationResult, Method, SearchDomain};
use crate::channel::SnapshotMatrix;
use crate::de::{run_de, DeSettings};
use crate::error::{invalid_arg, Result};
use crate::geometry::SourceLocation;
use crate::objectives::EsfObjective;
use crate::subspace::{sample_covariance, signal_subspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeefConfig {
    pub de: DeSettings,
}

impl NeefConfig {
    /// `Np = 40·K`, `Gmax = 500`, `F = 0.5`, `Cr = 0.8`.
    pub fn for_sources(k: usize) -> Self {
        Self { de: DeSettings { population_size: (40 * k).max(4), max_generations: 500, ..DeSettings::default() } }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.de.seed = seed;
        self
    }
}

/// Joint search: one DE run over the stacked parameters of all `K` sources,
/// minimizing the subspace-fitting residual of the sample covariance.
pub fn neef_de(snap: &SnapshotMatrix, k: usize, domain: &SearchDomain, cfg: &NeefConfig) -> Result<LocalizationResult> {
    let start = Instant::now();
    let response = &snap.response;
    domain.check_response(response)?;
    let m = response.element_count();
    if k == 0 || k >= m {
        return Err(invalid_arg(format!("NEEF-DE needs 1 <= K < M, got K={k}, M={m}")));
    }
    let r = sample_covariance(&snap.data)?;
    let sub = signal_subspace(&r, k)?;
    let esf = EsfObjective::new(&sub.basis, response);

    let block = domain.bounds();
    let bounds: Vec<(f64, f64)> = (0..k).flat_map(|_| block.iter().copied()).collect();
    let res = run_de(|x| esf.cost(x), &cfg.de.with_bounds(bounds))?;

    let mut out = LocalizationResult::new(Method::Neef);
    out.estimates = res.best_vector.chunks_exact(block.len()).map(SourceLocation::from_params).collect();
    out.per_source_cost = vec![res.best_cost; k];
    out.traces.push(res.trace);
    out.runtime_s = start.elapsed().as_secs_f64();
    Ok(out)
}
