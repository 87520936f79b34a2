use std::time::Instant;

use super::{compass_refine, LocalizationResult, Method, SearchDomain};
use crate::channel::SnapshotMatrix;
use crate::de::{run_de, DeSettings};
use crate::error::{invalid_arg, Result};
use crate::geometry::SourceLocation;
use crate::objectives::{PenaltyConfig, RlsObjective};
use crate::rng::derive_seed;
use crate::subspace::residual_project;

/// Settings of the sequential estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NemoConfig {
    /// Settings of each per-source DE run. The seed of run `k` is derived
    /// from `de.seed` and `k`.
    pub de: DeSettings,
    pub penalty: PenaltyConfig,
    /// A detection is rejected when its residual keeps more than this
    /// fraction of the current data energy.
    pub quality_gate: f64,
    /// Stop once the residual energy falls below this fraction of the
    /// input energy (nothing left to detect).
    pub exhaustion: f64,
    /// Polish each DE result with a bounded compass search.
    pub refine: bool,
}

impl Default for NemoConfig {
    fn default() -> Self {
        Self {
            de: DeSettings::default(),
            penalty: PenaltyConfig::default(),
            quality_gate: 0.999,
            exhaustion: 1e-9,
            refine: false,
        }
    }
}

impl NemoConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.de.seed = seed;
        self
    }

    pub fn with_refine(mut self, refine: bool) -> Self {
        self.refine = refine;
        self
    }
}

/// Sequential search: `K` penalized RLS minimizations, each followed by
/// projection deflation of the data.
///
/// The data is rescaled to unit Frobenius norm before every search, so the
/// RLS term lies in `[0, 1]` and the penalty weight is independent of the
/// signal power.
pub fn nemo_de(snap: &SnapshotMatrix, k: usize, domain: &SearchDomain, cfg: &NemoConfig) -> Result<LocalizationResult> {
    let start = Instant::now();
    let response = &snap.response;
    domain.check_response(response)?;
    cfg.penalty.validate()?;
    if k == 0 {
        return Err(invalid_arg("NEMO-DE needs K >= 1"));
    }
    let bounds = domain.bounds();
    let mut out = LocalizationResult::new(Method::Nemo);
    let mut y = snap.data.clone();
    let initial = y.norm_squared();
    let mut detected: Vec<Vec<f64>> = Vec::new();

    for run in 0..k {
        let energy = y.norm_squared();
        if !(energy > cfg.exhaustion * initial) {
            out.abort_reason = Some(format!("residual energy exhausted before detection {}", run + 1));
            break;
        }
        let yn = y.unscale(energy.sqrt());
        let rls = RlsObjective::new(&yn, response);
        let cost = |p: &[f64]| rls.cost(p) + cfg.penalty.penalty_params(p, &detected);

        let de_cfg = DeSettings { seed: derive_seed(cfg.de.seed, &[run as u64]), ..cfg.de }.with_bounds(bounds.clone());
        let res = run_de(cost, &de_cfg)?;
        let mut theta = res.best_vector;
        let mut best = res.best_cost;
        if cfg.refine {
            compass_refine(cost, &mut theta, &mut best, &bounds, 4000);
        }
        out.traces.push(res.trace);

        let ratio = rls.cost(&theta);
        if ratio > cfg.quality_gate {
            out.abort_reason =
                Some(format!("detection {} removes only {:.3e} of the residual energy", run + 1, 1.0 - ratio));
            break;
        }

        let a = response.steering_params(&theta);
        let next = residual_project(&y, a.as_slice())?;
        debug_assert!(next.norm_squared() <= energy * (1.0 + 1e-9));
        y = next;
        out.per_source_cost.push(ratio * energy);
        out.estimates.push(SourceLocation::from_params(&theta));
        detected.push(theta);
    }
    out.runtime_s = start.elapsed().as_secs_f64();
    Ok(out)
}
