//! Source signals, LoS/Rician channels and noisy snapshot generation.
//!
//! Power bookkeeping: noise has unit variance per entry (unless a scenario
//! sets `noise_variance` explicitly), symbols have unit power, and the
//! channel of source `k` is scaled by `√β_k` with `β_k = 10^(SNR_k/10)`.
//! Because every steering entry has unit modulus, `SNR_k` is the per-antenna
//! SNR of that source.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid_arg, Error, Result};
use crate::geometry::{ArrayResponse, SourceLocation};
use crate::rng::{stream_rng, Rng as ChaRng};
use crate::subspace::hermitian_eigen;
use crate::{CMatrix, CVector, C64};

/// Spatial correlation of the scattered (NLoS) channel component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    /// Uncorrelated Rayleigh fading, `R = I`.
    Iid,
    /// Paths spread around the source azimuth with a Gaussian angular
    /// density of standard deviation `angular_spread` (radians).
    LocalScattering { angular_spread: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// `h = a(θ)`.
    PureLos,
    /// `h = √(κ/(κ+1))·a(θ) + √(1/(κ+1))·h_NLoS`.
    Rician { kappa: f64, correlation: Correlation },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelModel::PureLos => Ok(()),
            ChannelModel::Rician { kappa, correlation } => {
                if !(kappa >= 0.0) || kappa.is_nan() {
                    return Err(invalid_arg(format!("Rician factor must be >= 0, got {kappa}")));
                }
                if let Correlation::LocalScattering { angular_spread } = correlation {
                    if !(angular_spread > 0.0 && angular_spread.is_finite()) {
                        return Err(invalid_arg(format!("angular spread must be > 0, got {angular_spread}")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Draws one circularly-symmetric `CN(0, 1)` sample.
pub fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Spatial correlation matrix together with a square-root factor `L` such
/// that `L Lᴴ = R`.
#[derive(Debug, Clone)]
pub struct SpatialCorrelation {
    pub matrix: CMatrix,
    pub factor: CMatrix,
    /// Negative eigenvalues (from rounding) were floored at zero.
    pub clipped: bool,
}

const SCATTERING_NODES: usize = 401;

/// Local-scattering correlation `R = E_Δ[a(φ+Δ) a(φ+Δ)ᴴ]` around the source
/// azimuth, `Δ ~ N(0, σ²)` truncated to the visible half-space. The range
/// (and elevation) of the source are held fixed.
///
/// Evaluated with a midpoint rule on `[φ−4σ, φ+4σ] ∩ (−π/2, π/2)`.
pub fn local_scattering_correlation(
    response: &ArrayResponse,
    loc: &SourceLocation,
    angular_spread: f64,
) -> Result<SpatialCorrelation> {
    loc.validate()?;
    if !(angular_spread > 0.0 && angular_spread.is_finite()) {
        return Err(invalid_arg(format!("angular spread must be > 0, got {angular_spread}")));
    }
    let m = response.element_count();
    let lo = (loc.phi - 4.0 * angular_spread).max(-FRAC_PI_2);
    let hi = (loc.phi + 4.0 * angular_spread).min(FRAC_PI_2);
    let step = (hi - lo) / SCATTERING_NODES as f64;

    let mut params = loc.to_params();
    let mut a = vec![C64::new(0.0, 0.0); m];
    let mut r = CMatrix::zeros(m, m);
    let mut total = 0.0;
    for i in 0..SCATTERING_NODES {
        let phi = lo + (i as f64 + 0.5) * step;
        let z = (phi - loc.phi) / angular_spread;
        let w = (-0.5 * z * z).exp();
        total += w;
        params[0] = phi;
        response.steering_into(&params, &mut a);
        for col in 0..m {
            let c = a[col].conj() * w;
            for row in 0..m {
                r[(row, col)] += a[row] * c;
            }
        }
    }
    r.unscale_mut(total);
    correlation_factor(r)
}

/// Square-root factor of a Hermitian PSD matrix, flooring negative
/// eigenvalues at zero.
pub fn correlation_factor(matrix: CMatrix) -> Result<SpatialCorrelation> {
    let eig = hermitian_eigen(&matrix)?;
    let clipped = eig.values.iter().any(|&l| l < 0.0);
    let mut factor = eig.vectors;
    for (j, &l) in eig.values.iter().enumerate() {
        factor.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    let matrix = if clipped { &factor * factor.adjoint() } else { matrix };
    Ok(SpatialCorrelation { matrix, factor, clipped })
}

/// One channel realization (without the `√β` path-loss factor).
pub fn rician_channel(
    response: &ArrayResponse,
    loc: &SourceLocation,
    model: &ChannelModel,
    rng: &mut impl Rng,
) -> Result<CVector> {
    model.validate()?;
    let los = response.steering(loc)?;
    match *model {
        ChannelModel::PureLos => Ok(los),
        ChannelModel::Rician { kappa, correlation } => {
            let m = response.element_count();
            let w = CVector::from_fn(m, |_, _| complex_normal(rng));
            let nlos = match correlation {
                Correlation::Iid => w,
                Correlation::LocalScattering { angular_spread } => {
                    local_scattering_correlation(response, loc, angular_spread)?.factor * w
                }
            };
            let los_w = (kappa / (kappa + 1.0)).sqrt();
            let nlos_w = (1.0 / (kappa + 1.0)).sqrt();
            Ok(los * C64::from(los_w) + nlos * C64::from(nlos_w))
        }
    }
}

/// Linear power gain `β = 10^(SNR/10)`.
pub fn snr_gain(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub location: SourceLocation,
    pub snr_db: f64,
}

/// Everything needed to draw one snapshot matrix.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub response: ArrayResponse,
    pub sources: Vec<SourceSpec>,
    pub snapshots: usize,
    pub channel: ChannelModel,
    /// Per-entry noise variance; `0` gives noiseless data.
    pub noise_variance: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        response: ArrayResponse,
        sources: Vec<SourceSpec>,
        snapshots: usize,
        channel: ChannelModel,
        seed: u64,
    ) -> Self {
        Self { response, sources, snapshots, channel, noise_variance: 1.0, seed }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_variance = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.response.element_count();
        let k = self.sources.len();
        if k >= m {
            return Err(Error::InvalidScenario(format!("{k} sources need more than {m} antennas")));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidScenario("at least one snapshot is required".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidScenario(format!("noise variance must be >= 0, got {}", self.noise_variance)));
        }
        let planar = self.response.geometry().is_planar();
        for (i, s) in self.sources.iter().enumerate() {
            s.location.validate().map_err(|e| Error::InvalidScenario(format!("source {i}: {e}")))?;
            if s.location.psi.is_some() != planar {
                return Err(Error::InvalidScenario(format!("source {i}: elevation does not match the array")));
            }
            if !s.snr_db.is_finite() {
                return Err(Error::InvalidScenario(format!("source {i}: SNR must be finite")));
            }
            if self.sources[..i].iter().any(|o| o.location == s.location) {
                return Err(Error::InvalidScenario(format!("source {i} duplicates an earlier location")));
            }
        }
        self.channel.validate().map_err(|e| Error::InvalidScenario(e.to_string()))
    }

    pub fn truth(&self) -> Vec<SourceLocation> {
        self.sources.iter().map(|s| s.location).collect()
    }
}

/// Received data `Y` (`M×T`) plus the array description it was captured with.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub data: CMatrix,
    pub response: ArrayResponse,
    /// Ground truth, carried for evaluation only.
    pub truth: Option<Vec<SourceLocation>>,
}

impl SnapshotMatrix {
    pub fn new(data: CMatrix, response: ArrayResponse, truth: Option<Vec<SourceLocation>>) -> Result<Self> {
        if data.nrows() != response.element_count() {
            return Err(invalid_arg(format!(
                "data has {} rows but the array has {} elements",
                data.nrows(),
                response.element_count()
            )));
        }
        if data.ncols() == 0 {
            return Err(invalid_arg("snapshot matrix has no columns"));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid_arg("snapshot matrix has non-finite entries"));
        }
        Ok(Self { data, response, truth })
    }

    pub fn elements(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// `Y = Σ_k √β_k h_k s_kᵀ + N`, drawn from the scenario's seed.
pub fn simulate_snapshots(scenario: &Scenario) -> Result<SnapshotMatrix> {
    let mut rng = stream_rng(scenario.seed, 0);
    simulate_with_rng(scenario, &mut rng)
}

/// As [`simulate_snapshots`] with an explicit generator.
///
/// Draw order: for each source its channel, then its `T` symbols; noise last.
pub fn simulate_with_rng(scenario: &Scenario, rng: &mut ChaRng) -> Result<SnapshotMatrix> {
    scenario.validate()?;
    let m = scenario.response.element_count();
    let t = scenario.snapshots;
    let mut y = CMatrix::zeros(m, t);
    for src in &scenario.sources {
        let h = rician_channel(&scenario.response, &src.location, &scenario.channel, rng)?
            * C64::from(snr_gain(src.snr_db).sqrt());
        for col in 0..t {
            let s = complex_normal(rng);
            for row in 0..m {
                y[(row, col)] += h[row] * s;
            }
        }
    }
    if scenario.noise_variance > 0.0 {
        let sigma = scenario.noise_variance.sqrt();
        for z in y.iter_mut() {
            *z += complex_normal(rng) * sigma;
        }
    }
    SnapshotMatrix::new(y, scenario.response.clone(), Some(scenario.truth()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ArrayGeometry, PhaseModel};
    use crate::rng::stream_rng;

    fn ula(m: usize, spacing: f64) -> ArrayResponse {
        ArrayResponse::with_default_model(ArrayGeometry::ula(m, spacing).unwrap(), 0.02).unwrap()
    }

    fn rician(kappa: f64) -> ChannelModel {
        ChannelModel::Rician { kappa, correlation: Correlation::Iid }
    }

    #[test]
    fn pure_los_is_the_steering_vector() {
        let resp = ula(16, 0.005);
        let loc = SourceLocation::new(0.3, 2.0);
        let h = rician_channel(&resp, &loc, &ChannelModel::PureLos, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(h, resp.steering(&loc).unwrap());
    }

    #[test]
    fn rayleigh_channel_energy_is_m() {
        let resp = ula(16, 0.005);
        let loc = SourceLocation::new(0.3, 2.0);
        let mut rng = stream_rng(2, 0);
        let n = 10_000;
        let mean: f64 =
            (0..n).map(|_| rician_channel(&resp, &loc, &rician(0.0), &mut rng).unwrap().norm_squared()).sum::<f64>()
                / n as f64;
        assert!((mean / 16.0 - 1.0).abs() < 0.03, "mean energy {mean}");
    }

    #[test]
    fn rician_nlos_fraction() {
        let resp = ula(16, 0.005);
        let loc = SourceLocation::new(-0.2, 1.5);
        let a = resp.steering(&loc).unwrap();
        let los = &a * C64::from((10.0f64 / 11.0).sqrt());
        let mut rng = stream_rng(3, 0);
        let n = 10_000;
        let mut nlos_power = 0.0;
        for _ in 0..n {
            let h = rician_channel(&resp, &loc, &rician(10.0), &mut rng).unwrap();
            nlos_power += (&h - &los).norm_squared() / 16.0;
        }
        let frac = nlos_power / n as f64;
        assert!((frac * 11.0 - 1.0).abs() < 0.05, "NLoS fraction {frac}");
        // LoS/NLoS power ratio recovers κ.
        let ratio = (10.0 / 11.0) / frac;
        assert!((ratio / 10.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn noise_only_power() {
        let sc = Scenario::new(ula(64, 0.005), vec![], 200, ChannelModel::PureLos, 4);
        let y = simulate_snapshots(&sc).unwrap();
        let p = y.data.norm_squared() / (64.0 * 200.0);
        assert!((p - 1.0).abs() < 0.05, "noise power {p}");
    }

    #[test]
    fn noiseless_single_source_is_rank_one() {
        let resp = ula(16, 0.005);
        let loc = SourceLocation::new(0.1, 3.0);
        let sc =
            Scenario::new(resp.clone(), vec![SourceSpec { location: loc, snr_db: 20.0 }], 12, ChannelModel::PureLos, 5)
                .noiseless();
        let y = simulate_snapshots(&sc).unwrap();
        let a = resp.steering(&loc).unwrap();
        // Every column is a multiple of 10·a.
        for col in y.data.column_iter() {
            let c = a.dotc(&col) / C64::from(16.0);
            assert!((col - &a * c).norm() < 1e-10);
        }
        let sv = y.data.clone().svd(false, false).singular_values;
        assert!(sv[1] / sv[0] < 1e-10);
        // Average symbol power is ~1, so the mean column energy is ~100·M.
        assert!(y.data.norm_squared() / 12.0 > 0.0);
    }

    #[test]
    fn two_unit_snr_sources_plus_noise_have_power_three() {
        let sources = vec![
            SourceSpec { location: SourceLocation::new(-0.5, 2.0), snr_db: 0.0 },
            SourceSpec { location: SourceLocation::new(0.4, 4.0), snr_db: 0.0 },
        ];
        let sc = Scenario::new(ula(32, 0.005), sources, 10_000, ChannelModel::PureLos, 6);
        let y = simulate_snapshots(&sc).unwrap();
        let p = y.data.norm_squared() / (32.0 * 10_000.0);
        assert!((p - 3.0).abs() < 0.15, "power {p}");
    }

    #[test]
    fn noiseless_rank_equals_source_count() {
        let sources = (0..3)
            .map(|i| SourceSpec { location: SourceLocation::new(-0.6 + 0.5 * i as f64, 2.0 + i as f64), snr_db: 10.0 })
            .collect();
        let sc = Scenario::new(ula(32, 0.005), sources, 50, ChannelModel::PureLos, 7).noiseless();
        let sv = simulate_snapshots(&sc).unwrap().data.svd(false, false).singular_values;
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!(sv[2] / sv[0] > 1e-6);
        assert!(sv[3] / sv[0] < 1e-10);
    }

    #[test]
    fn same_seed_same_bits() {
        let sources = vec![SourceSpec { location: SourceLocation::new(0.2, 3.0), snr_db: 5.0 }];
        let sc = Scenario::new(ula(16, 0.005), sources, 20, rician(10.0), 99);
        let a = simulate_snapshots(&sc).unwrap();
        let b = simulate_snapshots(&sc).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn scenario_validation() {
        let resp = ula(4, 0.005);
        let src = |phi| SourceSpec { location: SourceLocation::new(phi, 1.0), snr_db: 0.0 };
        let too_many =
            Scenario::new(resp.clone(), (0..4).map(|i| src(0.1 * i as f64)).collect(), 10, ChannelModel::PureLos, 0);
        assert!(matches!(simulate_snapshots(&too_many), Err(Error::InvalidScenario(_))));
        let dup = Scenario::new(resp.clone(), vec![src(0.1), src(0.1)], 10, ChannelModel::PureLos, 0);
        assert!(dup.validate().is_err());
        let bad_kappa = Scenario::new(resp, vec![src(0.1)], 10, rician(-1.0), 0);
        assert!(bad_kappa.validate().is_err());
    }

    #[test]
    fn pure_los_snr_bookkeeping_is_exact() {
        let resp = ula(32, 0.005);
        let a = resp.steering(&SourceLocation::new(0.2, 2.0)).unwrap();
        for snr in [-10.0, 0.0, 13.0, 20.0] {
            let beta = snr_gain(snr);
            let per_antenna = beta * a.norm_squared() / 32.0;
            assert!((per_antenna / 10f64.powf(snr / 10.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn narrow_scattering_collapses_to_los() {
        let resp = ula(16, 0.005);
        let loc = SourceLocation::new(0.25, 2.0);
        let c = local_scattering_correlation(&resp, &loc, 1e-9).unwrap();
        let a = resp.steering(&loc).unwrap();
        let los = &a * a.adjoint();
        assert!((&c.matrix - los).norm() < 1e-6);
        let eig = hermitian_eigen(&c.matrix).unwrap();
        assert!((eig.values[0] - 16.0).abs() < 1e-6);
    }

    /// Independent quadrature of the correlation integral: composite Simpson
    /// over the truncated Gaussian density, evaluating the Fresnel phase
    /// difference between elements directly.
    fn correlation_oracle(m: usize, spacing: f64, lambda: f64, phi0: f64, r: f64, sigma: f64) -> CMatrix {
        let lo = (phi0 - 4.0 * sigma).max(-FRAC_PI_2);
        let hi = (phi0 + 4.0 * sigma).min(FRAC_PI_2);
        let n = 4000;
        let h = (hi - lo) / n as f64;
        let k = 2.0 * std::f64::consts::PI / lambda;
        let phase = |i: usize, phi: f64| {
            let x = i as f64 * spacing;
            k * (x * phi.sin() - x * x / (2.0 * r))
        };
        let mut out = CMatrix::zeros(m, m);
        let mut norm = 0.0;
        for j in 0..=n {
            let phi = lo + j as f64 * h;
            let wq = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let w = wq * (-0.5 * ((phi - phi0) / sigma).powi(2)).exp();
            norm += w;
            for p in 0..m {
                for q in 0..m {
                    out[(p, q)] += C64::cis(phase(p, phi) - phase(q, phi)) * w;
                }
            }
        }
        out.unscale(norm)
    }

    #[test]
    fn scattering_matches_quadrature_oracle() {
        let m = 12;
        for (phi0, sigma) in [(0.3, 10f64.to_radians()), (0.0, 1e3)] {
            let resp = ula(m, 0.01);
            let c = local_scattering_correlation(&resp, &SourceLocation::new(phi0, 5.0), sigma).unwrap();
            let oracle = correlation_oracle(m, 0.01, 0.02, phi0, 5.0, sigma);
            let worst = (&c.matrix - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(worst < 0.1, "max entry deviation {worst}");
        }
    }

    #[test]
    fn scattering_is_psd_unit_diagonal() {
        let g = ArrayGeometry::upa(4, 4, 0.01).unwrap();
        let resp = ArrayResponse::new(g, 0.02, PhaseModel::Exact).unwrap();
        let loc = SourceLocation::with_elevation(0.2, -0.1, 1.0);
        let c = local_scattering_correlation(&resp, &loc, 0.2).unwrap();
        let eig = hermitian_eigen(&c.matrix).unwrap();
        assert!(eig.values.iter().all(|&l| l > -1e-10));
        for i in 0..16 {
            assert!((c.matrix[(i, i)].re - 1.0).abs() < 1e-9);
        }
        assert!((&c.factor * c.factor.adjoint() - &c.matrix).norm() < 1e-8);
        let trace: f64 = (0..16).map(|i| c.matrix[(i, i)].re).sum();
        assert!((trace - 16.0).abs() < 1e-8);
    }

    #[test]
    fn correlated_rayleigh_energy_is_m() {
        let resp = ula(8, 0.005);
        let loc = SourceLocation::new(0.1, 1.0);
        let model =
            ChannelModel::Rician { kappa: 0.0, correlation: Correlation::LocalScattering { angular_spread: 0.17 } };
        let mut rng = stream_rng(8, 0);
        let n = 4000;
        let mean: f64 =
            (0..n).map(|_| rician_channel(&resp, &loc, &model, &mut rng).unwrap().norm_squared()).sum::<f64>()
                / n as f64;
        assert!((mean / 8.0 - 1.0).abs() < 0.05);
    }
}
