//! Cost functions minimized by the localizers.
//!
//! * residual least squares `J_RLS(θ) = ‖(I − P_a(θ))Y‖_F²`
//! * its penalized form with a hinge on the distance to detected modes
//! * eigen-subspace fitting `J_ESF(x) = ‖(I − P_A(x))U_s‖_F²`

use crate::error::{invalid_arg, Result};
use crate::geometry::{ArrayResponse, SourceLocation};
use crate::subspace::{column_projector, dotc, norm_sqr, orthonormalize, RANK_TOL};
use crate::{CMatrix, C64};

/// Repulsion between a candidate and already detected sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub alpha: f64,
    /// Minimum normalized separation.
    pub delta_min: f64,
    /// Azimuth normalization, radians.
    pub phi0: f64,
    /// Range normalization, meters.
    pub r0: f64,
    /// Elevation normalization, radians.
    pub psi0: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { alpha: 1000.0, delta_min: 0.08, phi0: 1.0, r0: 1.0, psi0: 1.0 }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.delta_min >= 0.0) {
            return Err(invalid_arg("penalty alpha and delta_min must be >= 0"));
        }
        if !(self.phi0 > 0.0 && self.r0 > 0.0 && self.psi0 > 0.0) {
            return Err(invalid_arg("penalty normalizations must be > 0"));
        }
        Ok(())
    }

    /// Euclidean norm of the component-wise normalized difference of two
    /// parameter vectors `[φ, (ψ,) r]`.
    pub fn normalized_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let n = a.len();
        let mut acc = ((a[0] - b[0]) / self.phi0).powi(2) + ((a[n - 1] - b[n - 1]) / self.r0).powi(2);
        if n == 3 {
            acc += ((a[1] - b[1]) / self.psi0).powi(2);
        }
        acc.sqrt()
    }

    pub fn location_distance(&self, a: &SourceLocation, b: &SourceLocation) -> f64 {
        self.normalized_distance(&a.to_params(), &b.to_params())
    }

    pub(crate) fn penalty_params(&self, theta: &[f64], detected: &[Vec<f64>]) -> f64 {
        detected.iter().map(|d| self.alpha * (self.delta_min - self.normalized_distance(theta, d)).max(0.0)).sum()
    }
}

/// `Σ_i α·max(0, δ_min − ‖θ − θ_i*‖)` over the detected modes.
pub fn penalty(theta: &SourceLocation, detected: &[SourceLocation], cfg: &PenaltyConfig) -> f64 {
    let t = theta.to_params();
    let d: Vec<Vec<f64>> = detected.iter().map(SourceLocation::to_params).collect();
    cfg.penalty_params(&t, &d)
}

fn check_rows(y: &CMatrix, response: &ArrayResponse) -> Result<()> {
    if y.nrows() != response.element_count() {
        return Err(invalid_arg(format!(
            "data has {} rows, array has {} elements",
            y.nrows(),
            response.element_count()
        )));
    }
    Ok(())
}

/// Residual least-squares cost, evaluated as `‖Y‖² − ‖aᴴY‖²/M` in `O(MT)`.
pub fn rls_cost(y: &CMatrix, theta: &SourceLocation, response: &ArrayResponse) -> Result<f64> {
    check_rows(y, response)?;
    let a = response.steering(theta)?;
    let obj = RlsObjective::new(y, response);
    Ok(obj.cost_with(a.as_slice()))
}

/// Same cost through an explicitly materialized projector; for cross-checks.
pub fn rls_cost_explicit(y: &CMatrix, theta: &SourceLocation, response: &ArrayResponse) -> Result<f64> {
    check_rows(y, response)?;
    let a = response.steering(theta)?;
    let m = a.len();
    let p = column_projector(&CMatrix::from_column_slice(m, 1, a.as_slice()))?;
    Ok(((CMatrix::identity(m, m) - p) * y).norm_squared())
}

pub fn penalized_rls_cost(
    y: &CMatrix,
    theta: &SourceLocation,
    detected: &[SourceLocation],
    cfg: &PenaltyConfig,
    response: &ArrayResponse,
) -> Result<f64> {
    Ok(rls_cost(y, theta, response)? + penalty(theta, detected, cfg))
}

/// Eigen-subspace fitting cost for `K` candidate locations against a signal
/// basis `U_s` with `K` orthonormal columns.
///
/// Returns `+∞` when the candidates' steering matrix is numerically rank
/// deficient (coincident sources).
pub fn esf_cost(x: &[SourceLocation], us: &CMatrix, response: &ArrayResponse) -> Result<f64> {
    check_rows(us, response)?;
    if x.len() != us.ncols() || x.is_empty() {
        return Err(invalid_arg(format!("{} candidates for a {}-dimensional signal subspace", x.len(), us.ncols())));
    }
    for loc in x {
        response.steering(loc)?;
    }
    let params: Vec<f64> = x.iter().flat_map(SourceLocation::to_params).collect();
    Ok(EsfObjective::new(us, response).cost(&params))
}

/// `‖(I − P_A)U_s‖²` with `P_A` formed explicitly; `+∞` when `A` is rank deficient.
pub fn esf_cost_explicit(x: &[SourceLocation], us: &CMatrix, response: &ArrayResponse) -> Result<f64> {
    let m = response.element_count();
    let cols: Vec<_> = x.iter().map(|l| response.steering(l)).collect::<Result<_>>()?;
    let a = CMatrix::from_columns(&cols);
    match column_projector(&a) {
        Ok(p) => Ok(((CMatrix::identity(m, m) - p) * us).norm_squared()),
        Err(crate::Error::IllConditionedBasis { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// RLS cost bound to a data matrix, evaluated on raw parameter vectors.
pub struct RlsObjective<'a> {
    y: &'a CMatrix,
    response: &'a ArrayResponse,
    energy: f64,
}

impl<'a> RlsObjective<'a> {
    pub fn new(y: &'a CMatrix, response: &'a ArrayResponse) -> Self {
        Self { y, response, energy: y.norm_squared() }
    }

    /// `‖Y‖_F²`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn cost(&self, params: &[f64]) -> f64 {
        let mut a = vec![C64::new(0.0, 0.0); self.response.element_count()];
        self.response.steering_into(params, &mut a);
        self.cost_with(&a)
    }

    fn cost_with(&self, a: &[C64]) -> f64 {
        let m = a.len();
        let captured: f64 = self.y.as_slice().chunks_exact(m).map(|col| dotc(a, col).norm_sqr()).sum();
        (self.energy - captured / norm_sqr(a)).max(0.0)
    }
}

/// ESF cost bound to a signal basis, evaluated on stacked parameter vectors
/// `[θ_1, …, θ_K]`.
pub struct EsfObjective<'a> {
    us: &'a CMatrix,
    response: &'a ArrayResponse,
}

impl<'a> EsfObjective<'a> {
    pub fn new(us: &'a CMatrix, response: &'a ArrayResponse) -> Self {
        Self { us, response }
    }

    pub fn sources(&self) -> usize {
        self.us.ncols()
    }

    pub fn cost(&self, params: &[f64]) -> f64 {
        let m = self.response.element_count();
        let k = self.us.ncols();
        let dim = self.response.param_dim();
        debug_assert_eq!(params.len(), k * dim);
        let mut q = vec![C64::new(0.0, 0.0); m * k];
        for (col, p) in q.chunks_exact_mut(m).zip(params.chunks_exact(dim)) {
            self.response.steering_into(p, col);
        }
        if orthonormalize(&mut q, m, k, RANK_TOL).is_err() {
            return f64::INFINITY;
        }
        let captured: f64 = q
            .chunks_exact(m)
            .flat_map(|qi| self.us.as_slice().chunks_exact(m).map(move |u| dotc(qi, u).norm_sqr()))
            .sum();
        (k as f64 - captured).max(0.0)
    }
}
