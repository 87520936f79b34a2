//! JSON configuration documents. Angles are in degrees, distances in
//! meters and powers in dB at this boundary; everything is converted to
//! radians on the way in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, Correlation, Scenario, SourceSpec};
use crate::de::DeSettings;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ArrayResponse, PhaseModel, SourceLocation};
use crate::localize::{GridSize, Method, NeefConfig, NemoConfig, SearchDomain};
use crate::objectives::PenaltyConfig;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), source: e })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.into(), source: e })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayConfig {
    Ula { elements: usize, spacing: f64 },
    Upa { mx: usize, my: usize, spacing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModelConfig {
    Exact,
    Fresnel,
}

impl From<PhaseModelConfig> for PhaseModel {
    fn from(p: PhaseModelConfig) -> Self {
        match p {
            PhaseModelConfig::Exact => PhaseModel::Exact,
            PhaseModelConfig::Fresnel => PhaseModel::Fresnel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationConfig {
    Iid,
    LocalScattering { angular_spread_deg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    PureLos,
    Rician {
        kappa: f64,
        #[serde(default = "default_correlation")]
        correlation: CorrelationConfig,
    },
}

fn default_correlation() -> CorrelationConfig {
    CorrelationConfig::Iid
}

impl From<ChannelConfig> for ChannelModel {
    fn from(c: ChannelConfig) -> Self {
        match c {
            ChannelConfig::PureLos => ChannelModel::PureLos,
            ChannelConfig::Rician { kappa, correlation } => ChannelModel::Rician {
                kappa,
                correlation: match correlation {
                    CorrelationConfig::Iid => Correlation::Iid,
                    CorrelationConfig::LocalScattering { angular_spread_deg } => {
                        Correlation::LocalScattering { angular_spread: angular_spread_deg.to_radians() }
                    }
                },
            },
        }
    }
}

/// Array, carrier and propagation settings shared by scenarios and sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySetup {
    pub array: ArrayConfig,
    /// Carrier wavelength, meters.
    pub lambda: f64,
    /// Defaults to Fresnel for linear and exact for planar arrays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_model: Option<PhaseModelConfig>,
    pub snapshots: usize,
    pub channel: ChannelConfig,
    #[serde(default = "one")]
    pub noise_variance: f64,
}

fn one() -> f64 {
    1.0
}

impl ArraySetup {
    pub fn response(&self) -> Result<ArrayResponse> {
        let geometry = match self.array {
            ArrayConfig::Ula { elements, spacing } => ArrayGeometry::ula(elements, spacing)?,
            ArrayConfig::Upa { mx, my, spacing } => ArrayGeometry::upa(mx, my, spacing)?,
        };
        match self.phase_model {
            Some(p) => ArrayResponse::new(geometry, self.lambda, p.into()),
            None => ArrayResponse::with_default_model(geometry, self.lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub phi_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_deg: Option<f64>,
    pub range_m: f64,
    pub snr_db: f64,
}

impl SourceConfig {
    pub fn location(&self) -> SourceLocation {
        SourceLocation::from_degrees(self.phi_deg, self.psi_deg, self.range_m)
    }
}

/// A single fixed scenario, as consumed by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub setup: ArraySetup,
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let sources = self.sources.iter().map(|s| SourceSpec { location: s.location(), snr_db: s.snr_db }).collect();
        let mut sc =
            Scenario::new(self.setup.response()?, sources, self.setup.snapshots, self.setup.channel.into(), self.seed);
        sc.noise_variance = self.setup.noise_variance;
        sc.validate()?;
        Ok(sc)
    }
}

/// How random sources are drawn for each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDraw {
    pub count: usize,
    /// Azimuth interval; defaults to the search domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_deg: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_deg: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_m: Option<(f64, f64)>,
    /// Base SNR.
    pub snr_db: f64,
    /// Spread of the per-source SNRs: source `i` of `K` gets
    /// `snr_db + δ·(2i/(K−1) − 1)`, i.e. `{base−δ, base, base+δ}` for `K = 3`.
    #[serde(default)]
    pub snr_deviation_db: f64,
    /// Reject draws with two sources closer than this normalized distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<f64>,
}

impl SourceDraw {
    /// Per-source SNRs for `k` sources.
    pub fn snrs(base: f64, deviation: f64, k: usize) -> Vec<f64> {
        if k == 1 {
            return vec![base];
        }
        (0..k).map(|i| base + deviation * (2.0 * i as f64 / (k - 1) as f64 - 1.0)).collect()
    }

    /// Domain the sources are drawn from, defaulting to the search domain.
    pub fn domain(&self, search: &SearchDomain) -> SearchDomain {
        let rad = |(a, b): (f64, f64)| (a.to_radians(), b.to_radians());
        SearchDomain {
            phi: self.phi_deg.map(rad).unwrap_or(search.phi),
            psi: search.psi.map(|p| self.psi_deg.map(rad).unwrap_or(p)),
            range: self.range_m.unwrap_or(search.range),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    Snr(Vec<f64>),
    K(Vec<usize>),
    SnrDeviation(Vec<f64>),
    GridSize(Vec<String>),
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::Snr(v) | Sweep::SnrDeviation(v) => v.len(),
            Sweep::K(v) => v.len(),
            Sweep::GridSize(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Snr(_) => "snr",
            Sweep::K(_) => "k",
            Sweep::SnrDeviation(_) => "snr_deviation",
            Sweep::GridSize(_) => "grid_size",
        }
    }

    /// Text label of point `i`, as written to the results.
    pub fn label(&self, i: usize) -> String {
        match self {
            Sweep::Snr(v) | Sweep::SnrDeviation(v) => v[i].to_string(),
            Sweep::K(v) => v[i].to_string(),
            Sweep::GridSize(v) => v[i].clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NemoParams {
    pub population_size: usize,
    pub max_generations: usize,
    pub f: f64,
    pub cr: f64,
    pub alpha: f64,
    pub delta_min: f64,
    pub quality_gate: f64,
    pub refine: bool,
}

impl Default for NemoParams {
    fn default() -> Self {
        let c = NemoConfig::default();
        Self {
            population_size: c.de.population_size,
            max_generations: c.de.max_generations,
            f: c.de.f,
            cr: c.de.cr,
            alpha: c.penalty.alpha,
            delta_min: c.penalty.delta_min,
            quality_gate: c.quality_gate,
            refine: c.refine,
        }
    }
}

impl NemoParams {
    pub fn config(&self, seed: u64) -> NemoConfig {
        NemoConfig {
            de: DeSettings {
                population_size: self.population_size,
                max_generations: self.max_generations,
                f: self.f,
                cr: self.cr,
                seed,
                convergence: None,
            },
            penalty: PenaltyConfig { alpha: self.alpha, delta_min: self.delta_min, ..PenaltyConfig::default() },
            quality_gate: self.quality_gate,
            ..NemoConfig::default()
        }
        .with_refine(self.refine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeefParams {
    pub population_per_source: usize,
    pub max_generations: usize,
    pub f: f64,
    pub cr: f64,
}

impl Default for NeefParams {
    fn default() -> Self {
        let c = NeefConfig::for_sources(1);
        Self {
            population_per_source: c.de.population_size,
            max_generations: c.de.max_generations,
            f: c.de.f,
            cr: c.de.cr,
        }
    }
}

impl NeefParams {
    pub fn config(&self, k: usize, seed: u64) -> NeefConfig {
        NeefConfig {
            de: DeSettings {
                population_size: (self.population_per_source * k).max(4),
                max_generations: self.max_generations,
                f: self.f,
                cr: self.cr,
                seed,
                convergence: None,
            },
        }
    }
}

/// A Monte-Carlo sweep, as consumed by `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub setup: ArraySetup,
    pub sources: SourceDraw,
    pub sweep: Sweep,
    pub trials: usize,
    pub methods: Vec<String>,
    #[serde(default = "default_grid")]
    pub music_grid: String,
    #[serde(default)]
    pub nemo: NemoParams,
    #[serde(default)]
    pub neef: NeefParams,
    #[serde(default)]
    pub seed: u64,
    /// Run trials on the rayon pool.
    #[serde(default)]
    pub parallel: bool,
    /// Record wall-clock runtimes. Disable for byte-reproducible output.
    #[serde(default = "yes")]
    pub timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_grid() -> String {
    "200x1000".into()
}

fn yes() -> bool {
    true
}

impl BenchmarkConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse::<Method>().map_err(|e| bad(e.to_string()))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(bad("trials must be >= 1"));
        }
        if self.sweep.is_empty() {
            return Err(bad("sweep values must not be empty"));
        }
        if self.methods.is_empty() {
            return Err(bad("at least one method is required"));
        }
        let methods = self.methods()?;
        self.setup.response().map_err(|e| bad(e.to_string()))?;
        if methods.contains(&Method::Music) {
            self.setup.music_grid_check(&self.music_grid)?;
        }
        if let Sweep::GridSize(v) = &self.sweep {
            for g in v {
                self.setup.music_grid_check(g)?;
            }
        }
        if let Sweep::K(v) = &self.sweep {
            if v.contains(&0) {
                return Err(bad("source counts must be >= 1"));
            }
        } else if self.sources.count == 0 {
            return Err(bad("source count must be >= 1"));
        }
        Ok(())
    }
}

impl ArraySetup {
    fn music_grid_check(&self, g: &str) -> Result<GridSize> {
        let grid: GridSize = g.parse().map_err(|e: Error| bad(e.to_string()))?;
        let planar = matches!(self.array, ArrayConfig::Upa { .. });
        if grid.psi.is_some() != planar {
            return Err(bad(format!("grid {g} does not match the array dimensionality")));
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENARIO: &str = r#"{
        "array": {"kind": "ula", "elements": 16, "spacing": 0.005},
        "lambda": 0.02,
        "snapshots": 20,
        "channel": {"model": "rician", "kappa": 10},
        "sources": [{"phi_deg": 10, "range_m": 0.5, "snr_db": 20}],
        "seed": 4
    }"#;

    #[test]
    fn scenario_round_trip() {
        let cfg: ScenarioConfig = serde_json::from_str(SCENARIO).unwrap();
        assert_eq!(cfg.setup.noise_variance, 1.0);
        assert_eq!(cfg.setup.channel, ChannelConfig::Rician { kappa: 10.0, correlation: CorrelationConfig::Iid });
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.sources[0].location.phi, 10f64.to_radians());
        let back: ScenarioConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = SCENARIO.replace("\"seed\"", "\"sed\"");
        assert!(serde_json::from_str::<ScenarioConfig>(&text).is_err());
    }

    #[test]
    fn local_scattering_channel() {
        let c: ChannelConfig = serde_json::from_str(
            r#"{"model": "rician", "kappa": 3, "correlation": {"local_scattering": {"angular_spread_deg": 10}}}"#,
        )
        .unwrap();
        let ChannelModel::Rician { correlation: Correlation::LocalScattering { angular_spread }, .. } = c.into() else {
            panic!("wrong channel");
        };
        assert!((angular_spread - 10f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn imbalance_rule() {
        assert_eq!(SourceDraw::snrs(20.0, 5.0, 3), vec![15.0, 20.0, 25.0]);
        assert_eq!(SourceDraw::snrs(20.0, 5.0, 1), vec![20.0]);
        assert_eq!(SourceDraw::snrs(10.0, 0.0, 2), vec![10.0, 10.0]);
    }

    #[test]
    fn sweep_tags() {
        let s: Sweep = serde_json::from_str(r#"{"axis": "grid_size", "values": ["20x30", "40x60"]}"#).unwrap();
        assert_eq!(s.label(1), "40x60");
        assert_eq!(s.name(), "grid_size");
        let s: Sweep = serde_json::from_str(r#"{"axis": "k", "values": [1, 2]}"#).unwrap();
        assert_eq!(s, Sweep::K(vec![1, 2]));
    }
}
