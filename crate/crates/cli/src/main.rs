use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use nfde_core::channel::simulate_snapshots;
use nfde_core::eval::{report, run_benchmark, BenchmarkConfig, ScenarioConfig};
use nfde_core::localize::{
    grid_axes, music_localize, music_spectrum, neef_de, nemo_de, GridSize, LocalizationResult, Method, NeefConfig,
    NemoConfig, SearchDomain,
};
use nfde_core::subspace::{sample_covariance, split_subspaces};
use nfde_core::{nfsn, ArrayGeometry, ArrayResponse, PenaltyConfig, PhaseModel, SourceLocation};

#[derive(Parser)]
#[command(name = "nfde", version, about = "Near-field source localization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a steering vector as CSV (m,re,im).
    Steer {
        /// `ula:M:SPACING` or `upa:MX:MY:SPACING` (spacing in meters).
        #[arg(long)]
        geometry: String,
        /// Azimuth, degrees.
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        /// Elevation, degrees (planar arrays).
        #[arg(long, allow_hyphen_values = true)]
        psi: Option<f64>,
        /// Range, meters.
        #[arg(long)]
        r: f64,
        /// Wavelength, meters.
        #[arg(long)]
        lambda: f64,
        /// `exact` or `fresnel`; defaults by geometry.
        #[arg(long)]
        model: Option<String>,
    },
    /// Draw snapshots for a scenario file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate source locations from a snapshot file.
    Localize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        k: usize,
        /// MUSIC grid, `PHIxR` or `PHIxPSIxR`.
        #[arg(long, default_value = "200x1000")]
        grid: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the MUSIC pseudospectrum as CSV.
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "200x1000")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte-Carlo sweep.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-aggregate a results directory into a summary.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_geometry(spec: &str) -> Result<ArrayGeometry> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.parse::<f64>().with_context(|| format!("bad number '{s}' in geometry '{spec}'"));
    let int = |s: &str| s.parse::<usize>().with_context(|| format!("bad count '{s}' in geometry '{spec}'"));
    Ok(match parts.as_slice() {
        ["ula", m, d] => ArrayGeometry::ula(int(m)?, num(d)?)?,
        ["upa", mx, my, d] => ArrayGeometry::upa(int(mx)?, int(my)?, num(d)?)?,
        _ => bail!("geometry must be ula:M:SPACING or upa:MX:MY:SPACING, got '{spec}'"),
    })
}

fn parse_model(s: &str) -> Result<PhaseModel> {
    match s {
        "exact" => Ok(PhaseModel::Exact),
        "fresnel" => Ok(PhaseModel::Fresnel),
        _ => bail!("phase model must be 'exact' or 'fresnel', got '{s}'"),
    }
}

#[derive(Serialize)]
struct EstimateOut {
    phi_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_deg: Option<f64>,
    range_m: f64,
}

#[derive(Serialize)]
struct ResultOut {
    method: String,
    k: usize,
    estimates: Vec<EstimateOut>,
    per_source_cost: Vec<f64>,
    runtime_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    abort_reason: Option<String>,
    shortfall: bool,
}

impl ResultOut {
    fn new(r: &LocalizationResult, k: usize) -> Self {
        Self {
            method: r.method.name().into(),
            k,
            estimates: r
                .estimates
                .iter()
                .map(|e| EstimateOut {
                    phi_deg: e.phi.to_degrees(),
                    psi_deg: e.psi.map(f64::to_degrees),
                    range_m: e.range,
                })
                .collect(),
            per_source_cost: r.per_source_cost.clone(),
            runtime_s: r.runtime_s,
            abort_reason: r.abort_reason.clone(),
            shortfall: r.shortfall,
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Steer { geometry, phi, psi, r, lambda, model } => {
            let g = parse_geometry(&geometry)?;
            let resp = match model {
                Some(m) => ArrayResponse::new(g, lambda, parse_model(&m)?)?,
                None => ArrayResponse::with_default_model(g, lambda)?,
            };
            let a = resp.steering(&SourceLocation::from_degrees(phi, psi, r))?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "m,re,im")?;
            for (m, z) in a.iter().enumerate() {
                writeln!(out, "{},{},{}", m + 1, z.re, z.im)?;
            }
        }
        Command::Simulate { config, out } => {
            let sc = ScenarioConfig::load(&config)?.scenario()?;
            nfsn::save(&out, &simulate_snapshots(&sc)?)?;
        }
        Command::Localize { input, method, k, grid, seed, out } => {
            let snap = nfsn::load(&input)?;
            let dom = SearchDomain::for_response(&snap.response)?;
            let res = match method {
                Method::Nemo => nemo_de(&snap, k, &dom, &NemoConfig::default().with_seed(seed))?,
                Method::Neef => neef_de(&snap, k, &dom, &NeefConfig::for_sources(k).with_seed(seed))?,
                Method::Music => music_localize(&snap, k, &dom, grid.parse()?, &PenaltyConfig::default())?,
            };
            write_json(&out, &ResultOut::new(&res, k))?;
        }
        Command::Spectrum { input, k, grid, out } => {
            let snap = nfsn::load(&input)?;
            let dom = SearchDomain::for_response(&snap.response)?;
            let axes = grid_axes(&dom, grid.parse::<GridSize>()?)?;
            let sub = split_subspaces(&sample_covariance(&snap.data)?, k)?;
            let spec = music_spectrum(&sub.noise, &snap.response, &axes)?;
            let mut w = create(&out)?;
            spec.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Bench { config, out } => {
            let cfg = BenchmarkConfig::load(&config)?;
            let dir = out.or_else(|| cfg.output.clone()).context("no output directory (use --out)")?;
            let res = run_benchmark(&cfg, &dir)?;
            eprintln!("{} rows written to {}", res.records.len(), dir.display());
        }
        Command::Report { input, out } => {
            write_json(&out, &report(&input)?)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
