use itertools::Itertools;

use crate::error::{invalid_arg, Result};
use crate::geometry::{ArrayGeometry, SourceLocation};

/// Largest source count handled by exhaustive matching.
pub const MAX_MATCH: usize = 8;

/// Cartesian position in meters: `(x, y)` for linear arrays, `(x, y, z)`
/// for planar ones.
pub fn to_cartesian(loc: &SourceLocation, geometry: &ArrayGeometry) -> Vec<f64> {
    let p = loc.position();
    if geometry.is_planar() {
        p.to_vec()
    } else {
        p[..2].to_vec()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `assignment[i]` is the estimate matched to truth `i`.
    pub assignment: Vec<Option<usize>>,
    /// Euclidean error of each truth, `None` when unmatched.
    pub errors: Vec<Option<f64>>,
    /// Root mean squared error over matched pairs; `None` when nothing was
    /// estimated.
    pub rmse: Option<f64>,
    pub misses: usize,
}

/// Injective estimate-to-truth assignment minimizing the total squared
/// distance, by enumeration of all permutations.
pub fn match_and_rmse(truth: &[Vec<f64>], estimates: &[Vec<f64>]) -> Result<Matching> {
    let (n, k) = (truth.len(), estimates.len());
    if n > MAX_MATCH {
        return Err(invalid_arg(format!("matching supports at most {MAX_MATCH} sources, got {n}")));
    }
    if k > n {
        return Err(invalid_arg(format!("{k} estimates for {n} true sources")));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(k) {
        let cost: f64 = perm.iter().enumerate().map(|(j, &i)| sq_dist(&truth[i], &estimates[j])).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    let mut assignment = vec![None; n];
    let mut errors = vec![None; n];
    let (total, perm) = best.unwrap_or((0.0, Vec::new()));
    for (j, &i) in perm.iter().enumerate() {
        assignment[i] = Some(j);
        errors[i] = Some(sq_dist(&truth[i], &estimates[j]).sqrt());
    }
    Ok(Matching { assignment, errors, rmse: (k > 0).then(|| (total / k as f64).sqrt()), misses: n - k })
}
