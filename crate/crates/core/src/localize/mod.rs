//! The three estimators and what they share.

mod music;
mod neef;
mod nemo;

pub use music::{grid_axes, music_localize, music_spectrum, pick_peaks, GridSize, Spectrum};
pub use neef::{neef_de, NeefConfig};
pub use nemo::{nemo_de, NemoConfig};

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid_arg, Error, Result};
use crate::geometry::{ArrayResponse, SourceLocation};

/// Box of admissible source locations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchDomain {
    /// Azimuth interval, radians.
    pub phi: (f64, f64),
    /// Elevation interval, radians; planar arrays only.
    pub psi: Option<(f64, f64)>,
    /// Range interval, meters.
    pub range: (f64, f64),
}

impl SearchDomain {
    /// Azimuth ±60°, elevation ±30° for planar arrays, range from twice the
    /// aperture to half the Fraunhofer distance.
    pub fn for_response(response: &ArrayResponse) -> Result<Self> {
        let g = response.geometry();
        let d = g.aperture();
        let dfa = g.fraunhofer_distance(response.lambda())?;
        let dom = Self {
            phi: (-60f64.to_radians(), 60f64.to_radians()),
            psi: g.is_planar().then(|| (-30f64.to_radians(), 30f64.to_radians())),
            range: (2.0 * d, dfa / 2.0),
        };
        dom.validate().map_err(|_| {
            invalid_arg(format!(
                "array too small for a near-field region: 2·D = {} m, d_FA/2 = {} m",
                2.0 * d,
                dfa / 2.0
            ))
        })?;
        Ok(dom)
    }

    pub fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let angle = |(lo, hi): (f64, f64), name: &str| {
            if lo.is_finite() && hi.is_finite() && lo < hi && lo > -half_pi && hi < half_pi {
                Ok(())
            } else {
                Err(invalid_arg(format!("{name} interval ({lo}, {hi}) must be non-empty inside (-π/2, π/2)")))
            }
        };
        angle(self.phi, "azimuth")?;
        if let Some(p) = self.psi {
            angle(p, "elevation")?;
        }
        let (lo, hi) = self.range;
        if !(lo > 0.0 && hi.is_finite() && lo < hi) {
            return Err(invalid_arg(format!(
                "range interval ({lo}, {hi}) must be non-empty with a positive lower end"
            )));
        }
        Ok(())
    }

    pub(crate) fn check_response(&self, response: &ArrayResponse) -> Result<()> {
        self.validate()?;
        if self.psi.is_some() != response.geometry().is_planar() {
            return Err(invalid_arg("search domain needs an elevation interval exactly when the array is planar"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        if self.psi.is_some() {
            3
        } else {
            2
        }
    }

    /// Per-parameter bounds in `[φ, (ψ,) r]` order.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![self.phi];
        b.extend(self.psi);
        b.push(self.range);
        b
    }

    pub fn contains(&self, loc: &SourceLocation) -> bool {
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
        inside(loc.phi, self.phi)
            && inside(loc.range, self.range)
            && match (loc.psi, self.psi) {
                (Some(p), Some(b)) => inside(p, b),
                (None, None) => true,
                _ => false,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Nemo,
    Neef,
    Music,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Nemo, Method::Neef, Method::Music];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nemo => "nemo",
            Method::Neef => "neef",
            Method::Music => "music",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nemo" | "nemo-de" => Ok(Method::Nemo),
            "neef" | "neef-de" => Ok(Method::Neef),
            "music" => Ok(Method::Music),
            _ => Err(invalid_arg(format!("unknown method '{s}' (expected nemo, neef or music)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub method: Method,
    pub estimates: Vec<SourceLocation>,
    /// Objective value attached to each estimate: the RLS residual for
    /// NEMO-DE, the joint ESF residual (repeated) for NEEF-DE, the
    /// pseudospectrum peak for MUSIC.
    pub per_source_cost: Vec<f64>,
    /// Best-cost trace of every DE run, in run order.
    pub traces: Vec<Vec<f64>>,
    pub runtime_s: f64,
    /// Set when NEMO-DE stopped before reaching `K` detections.
    pub abort_reason: Option<String>,
    /// Set when MUSIC found fewer than `K` separable peaks.
    pub shortfall: bool,
}

impl LocalizationResult {
    pub(crate) fn new(method: Method) -> Self {
        Self {
            method,
            estimates: Vec::new(),
            per_source_cost: Vec::new(),
            traces: Vec::new(),
            runtime_s: 0.0,
            abort_reason: None,
            shortfall: false,
        }
    }

    /// Compact flag string for reports; empty when the run completed.
    pub fn flags(&self) -> String {
        let mut f = Vec::new();
        if self.abort_reason.is_some() {
            f.push("aborted");
        }
        if self.shortfall {
            f.push("shortfall");
        }
        f.join("|")
    }
}

/// Compass search polishing `x` inside `bounds`. Only accepts strict
/// improvements, so the returned cost never exceeds the starting one.
pub(crate) fn compass_refine<F>(f: F, x: &mut [f64], cost: &mut f64, bounds: &[(f64, f64)], max_evals: usize)
where
    F: Fn(&[f64]) -> f64,
{
    let mut step: Vec<f64> = bounds.iter().map(|(lo, hi)| 1e-3 * (hi - lo)).collect();
    let floor: Vec<f64> = bounds.iter().map(|(lo, hi)| 1e-12 * (hi - lo)).collect();
    let mut evals = 0;
    let mut trial = x.to_vec();
    while evals < max_evals && step.iter().zip(&floor).any(|(s, f)| s > f) {
        let mut improved = false;
        for j in 0..x.len() {
            for dir in [1.0, -1.0] {
                let cand = (x[j] + dir * step[j]).clamp(bounds[j].0, bounds[j].1);
                if cand == x[j] {
                    continue;
                }
                trial.copy_from_slice(x);
                trial[j] = cand;
                let c = f(&trial);
                evals += 1;
                if c < *cost {
                    *cost = c;
                    x[j] = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
}
