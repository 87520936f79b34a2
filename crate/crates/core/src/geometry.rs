//! Array layouts and near-field spherical-wave array responses.
//!
//! Axis convention: a ULA lies on the x-axis with element 1 at the origin and
//! the source in the xy-plane at `(r sin φ, r cos φ, 0)`. A UPA lies in the
//! xz-plane (element 1 at the origin) and the source sits at
//! `(r cos ψ sin φ, r cos ψ cos φ, r sin ψ)`. Only distance differences
//! between elements enter the array response, so the choice is otherwise
//! arbitrary.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{invalid_arg, Result};
use crate::{CVector, C64};

/// Element layout of the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    /// Uniform linear array of `elements` antennas.
    Ula { elements: usize },
    /// Uniform planar array, `mx` columns along x by `my` rows along z.
    Upa { mx: usize, my: usize },
}

/// Validated array geometry with precomputed element coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    kind: ArrayKind,
    spacing: f64,
    positions: Vec<[f64; 3]>,
}

impl ArrayGeometry {
    pub fn ula(elements: usize, spacing: f64) -> Result<Self> {
        Self::new(ArrayKind::Ula { elements }, spacing)
    }

    pub fn upa(mx: usize, my: usize, spacing: f64) -> Result<Self> {
        Self::new(ArrayKind::Upa { mx, my }, spacing)
    }

    pub fn new(kind: ArrayKind, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(invalid_arg(format!("element spacing must be > 0, got {spacing}")));
        }
        let positions = match kind {
            ArrayKind::Ula { elements } => {
                if elements < 2 {
                    return Err(invalid_arg("a ULA needs at least 2 elements"));
                }
                (0..elements).map(|m| [m as f64 * spacing, 0.0, 0.0]).collect()
            }
            ArrayKind::Upa { mx, my } => {
                if mx < 2 || my < 2 {
                    return Err(invalid_arg("a UPA needs at least 2 elements per dimension"));
                }
                let mut p = Vec::with_capacity(mx * my);
                for iz in 0..my {
                    for ix in 0..mx {
                        p.push([ix as f64 * spacing, 0.0, iz as f64 * spacing]);
                    }
                }
                p
            }
        };
        Ok(Self { kind, spacing, positions })
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of antennas `M`.
    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    /// Planar arrays resolve elevation, so their locations carry `psi`.
    pub fn is_planar(&self) -> bool {
        matches!(self.kind, ArrayKind::Upa { .. })
    }

    /// Aperture length used for the near-field boundary.
    ///
    /// ULA: `(M-1)·δ`. UPA: `max(mx, my)·δ·√2`, the convention that gives
    /// 0.226 m for a 16×16 half-wavelength array at 15 GHz.
    pub fn aperture(&self) -> f64 {
        match self.kind {
            ArrayKind::Ula { elements } => (elements - 1) as f64 * self.spacing,
            ArrayKind::Upa { mx, my } => mx.max(my) as f64 * self.spacing * SQRT_2,
        }
    }

    /// Fraunhofer distance `2·D²/λ`.
    pub fn fraunhofer_distance(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let d = self.aperture();
        Ok(2.0 * d * d / lambda)
    }

    /// Fresnel for ULAs, Exact for UPAs.
    pub fn default_phase_model(&self) -> PhaseModel {
        if self.is_planar() {
            PhaseModel::Exact
        } else {
            PhaseModel::Fresnel
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(invalid_arg(format!("wavelength must be > 0, got {lambda}")))
    }
}

/// How per-element source distances are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseModel {
    /// Euclidean distance to every element.
    Exact,
    /// Second-order expansion `r − (m−1)δ sin φ + (m−1)²δ²/(2r)`; ULA only.
    #[default]
    Fresnel,
}

/// Source position in array-centric spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceLocation {
    /// Azimuth, radians.
    pub phi: f64,
    /// Elevation, radians; present iff the array is planar.
    pub psi: Option<f64>,
    /// Distance to the reference element, meters.
    pub range: f64,
}

impl SourceLocation {
    pub fn new(phi: f64, range: f64) -> Self {
        Self { phi, psi: None, range }
    }

    pub fn with_elevation(phi: f64, psi: f64, range: f64) -> Self {
        Self { phi, psi: Some(psi), range }
    }

    pub fn from_degrees(phi_deg: f64, psi_deg: Option<f64>, range: f64) -> Self {
        Self { phi: phi_deg.to_radians(), psi: psi_deg.map(f64::to_radians), range }
    }

    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x.is_finite() && x > -FRAC_PI_2 && x < FRAC_PI_2;
        if !open(self.phi) {
            return Err(invalid_arg(format!("azimuth {} rad outside (-π/2, π/2)", self.phi)));
        }
        if let Some(psi) = self.psi {
            if !open(psi) {
                return Err(invalid_arg(format!("elevation {psi} rad outside (-π/2, π/2)")));
            }
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(invalid_arg(format!("range must be > 0, got {}", self.range)));
        }
        Ok(())
    }

    /// Cartesian position under the crate's axis convention.
    pub fn position(&self) -> [f64; 3] {
        let psi = self.psi.unwrap_or(0.0);
        let (sp, cp) = self.phi.sin_cos();
        let (se, ce) = psi.sin_cos();
        [self.range * ce * sp, self.range * ce * cp, self.range * se]
    }

    /// Flattens to `[φ, r]` or `[φ, ψ, r]`.
    pub fn to_params(&self) -> Vec<f64> {
        match self.psi {
            Some(psi) => vec![self.phi, psi, self.range],
            None => vec![self.phi, self.range],
        }
    }

    /// Inverse of [`to_params`](Self::to_params). Panics on a slice of the wrong length.
    pub fn from_params(p: &[f64]) -> Self {
        match *p {
            [phi, r] => Self::new(phi, r),
            [phi, psi, r] => Self::with_elevation(phi, psi, r),
            _ => panic!("location parameter vector must have 2 or 3 entries, got {}", p.len()),
        }
    }

    fn check_against(&self, geometry: &ArrayGeometry) -> Result<()> {
        self.validate()?;
        if geometry.is_planar() != self.psi.is_some() {
            return Err(invalid_arg(if geometry.is_planar() {
                "planar arrays need an elevation angle"
            } else {
                "linear arrays take no elevation angle"
            }));
        }
        Ok(())
    }
}

fn check_model(geometry: &ArrayGeometry, model: PhaseModel) -> Result<()> {
    if model == PhaseModel::Fresnel && geometry.is_planar() {
        Err(invalid_arg("the Fresnel phase model is defined for linear arrays only"))
    } else {
        Ok(())
    }
}

/// Distances from `loc` to every array element.
pub fn element_distances(geometry: &ArrayGeometry, loc: &SourceLocation, model: PhaseModel) -> Result<Vec<f64>> {
    check_model(geometry, model)?;
    loc.check_against(geometry)?;
    Ok(match model {
        PhaseModel::Exact => {
            let s = loc.position();
            geometry
                .positions()
                .iter()
                .map(|e| ((s[0] - e[0]).powi(2) + (s[1] - e[1]).powi(2) + (s[2] - e[2]).powi(2)).sqrt())
                .collect()
        }
        PhaseModel::Fresnel => {
            let (r, sin_phi, d) = (loc.range, loc.phi.sin(), geometry.spacing());
            (0..geometry.element_count())
                .map(|m| {
                    let x = m as f64 * d;
                    r - x * sin_phi + x * x / (2.0 * r)
                })
                .collect()
        }
    })
}

/// Near-field array response `a_m = exp(j·2π/λ·(d₁ − d_m))`.
pub fn steering_vector(
    geometry: &ArrayGeometry,
    loc: &SourceLocation,
    lambda: f64,
    model: PhaseModel,
) -> Result<CVector> {
    check_lambda(lambda)?;
    let d = element_distances(geometry, loc, model)?;
    let k = 2.0 * PI / lambda;
    Ok(CVector::from_iterator(d.len(), d.iter().map(|&dm| C64::cis(k * (d[0] - dm)))))
}

/// A geometry bound to a wavelength and phase model.
///
/// Construction validates the combination once; the hot-path methods then
/// skip per-call checks. Used by the cost functions and the simulator.
#[derive(Debug, Clone)]
pub struct ArrayResponse {
    geometry: ArrayGeometry,
    lambda: f64,
    model: PhaseModel,
    wavenumber: f64,
}

impl ArrayResponse {
    pub fn new(geometry: ArrayGeometry, lambda: f64, model: PhaseModel) -> Result<Self> {
        check_lambda(lambda)?;
        check_model(&geometry, model)?;
        Ok(Self { geometry, lambda, model, wavenumber: 2.0 * PI / lambda })
    }

    pub fn with_default_model(geometry: ArrayGeometry, lambda: f64) -> Result<Self> {
        let model = geometry.default_phase_model();
        Self::new(geometry, lambda, model)
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn model(&self) -> PhaseModel {
        self.model
    }

    pub fn element_count(&self) -> usize {
        self.geometry.element_count()
    }

    /// Number of location parameters per source (2 or 3).
    pub fn param_dim(&self) -> usize {
        if self.geometry.is_planar() {
            3
        } else {
            2
        }
    }

    /// Checked steering vector.
    pub fn steering(&self, loc: &SourceLocation) -> Result<CVector> {
        steering_vector(&self.geometry, loc, self.lambda, self.model)
    }

    /// Writes the steering vector for parameters `[φ, (ψ,) r]` into `out`.
    ///
    /// No validation: the caller keeps `params` inside the admissible box.
    pub fn steering_into(&self, params: &[f64], out: &mut [C64]) {
        debug_assert_eq!(out.len(), self.element_count());
        let k = self.wavenumber;
        match self.model {
            PhaseModel::Fresnel => {
                let (phi, r) = (params[0], params[params.len() - 1]);
                let (sin_phi, d) = (phi.sin(), self.geometry.spacing);
                let inv_2r = 0.5 / r;
                for (m, o) in out.iter_mut().enumerate() {
                    let x = m as f64 * d;
                    // d1 - dm = x sinφ - x²/(2r)
                    *o = C64::cis(k * (x * sin_phi - x * x * inv_2r));
                }
            }
            PhaseModel::Exact => {
                let loc = SourceLocation::from_params(params);
                let s = loc.position();
                let dist =
                    |e: &[f64; 3]| ((s[0] - e[0]).powi(2) + (s[1] - e[1]).powi(2) + (s[2] - e[2]).powi(2)).sqrt();
                let pos = self.geometry.positions();
                let d1 = dist(&pos[0]);
                for (o, e) in out.iter_mut().zip(pos) {
                    *o = C64::cis(k * (d1 - dist(e)));
                }
            }
        }
    }

    pub fn steering_params(&self, params: &[f64]) -> CVector {
        let mut v = CVector::zeros(self.element_count());
        self.steering_into(params, v.as_mut_slice());
        v
    }
}
