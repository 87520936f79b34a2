use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::{LocalizationResult, Method, SearchDomain};
use crate::channel::SnapshotMatrix;
use crate::error::{invalid_arg, Error, Result};
use crate::geometry::{ArrayResponse, SourceLocation};
use crate::objectives::PenaltyConfig;
use crate::subspace::{dotc, sample_covariance, split_subspaces};
use crate::{CMatrix, C64};

/// Node counts per axis, written `PHIxR` or `PHIxPSIxR`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub phi: usize,
    pub psi: Option<usize>,
    pub range: usize,
}

impl GridSize {
    pub fn linear(phi: usize, range: usize) -> Self {
        Self { phi, psi: None, range }
    }

    pub fn planar(phi: usize, psi: usize, range: usize) -> Self {
        Self { phi, psi: Some(psi), range }
    }

    pub fn nodes(&self) -> usize {
        self.phi * self.psi.unwrap_or(1) * self.range
    }
}

impl FromStr for GridSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(['x', 'X'])
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| invalid_arg(format!("grid '{s}' is not of the form AxB or AxBxC")))?;
        match parts[..] {
            [a, b] => Ok(Self::linear(a, b)),
            [a, b, c] => Ok(Self::planar(a, b, c)),
            _ => Err(invalid_arg(format!("grid '{s}' must have 2 or 3 axes"))),
        }
    }
}

impl fmt::Display for GridSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.psi {
            Some(p) => write!(f, "{}x{}x{}", self.phi, p, self.range),
            None => write!(f, "{}x{}", self.phi, self.range),
        }
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect()
}

/// Uniform axes over the domain, endpoints included, in `[φ, (ψ,) r]` order.
pub fn grid_axes(domain: &SearchDomain, grid: GridSize) -> Result<Vec<Vec<f64>>> {
    domain.validate()?;
    if domain.psi.is_some() != grid.psi.is_some() {
        return Err(invalid_arg("grid needs an elevation axis exactly when the domain has one"));
    }
    let counts: Vec<usize> = [Some(grid.phi), grid.psi, Some(grid.range)].into_iter().flatten().collect();
    if counts.iter().any(|&n| n < 2) {
        return Err(invalid_arg(format!("grid {grid} needs at least 2 nodes per axis")));
    }
    Ok(domain.bounds().into_iter().zip(counts).map(|(b, n)| linspace(b, n)).collect())
}

/// Pseudospectrum sampled on a tensor grid. Values are stored with the last
/// axis (range) varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Per-axis indices of flat node `i`.
    pub fn unravel(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (d, ax) in self.axes.iter().enumerate().rev() {
            idx[d] = i % ax.len();
            i /= ax.len();
        }
        idx
    }

    /// Parameters `[φ, (ψ,) r]` of flat node `i`.
    pub fn params(&self, i: usize) -> Vec<f64> {
        self.unravel(i).iter().zip(&self.axes).map(|(&j, ax)| ax[j]).collect()
    }

    pub fn location(&self, i: usize) -> SourceLocation {
        SourceLocation::from_params(&self.params(i))
    }

    /// Writes `phi_deg,r_m[,psi_deg],value` rows.
    pub fn write_csv(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        let planar = self.axes.len() == 3;
        writeln!(out, "{}", if planar { "phi_deg,r_m,psi_deg,value" } else { "phi_deg,r_m,value" })?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.params(i);
            let r = p[p.len() - 1];
            if planar {
                writeln!(out, "{},{},{},{:e}", p[0].to_degrees(), r, p[1].to_degrees(), v)?;
            } else {
                writeln!(out, "{},{},{:e}", p[0].to_degrees(), r, v)?;
            }
        }
        Ok(())
    }
}

/// `1 / (‖U_nᴴ a(θ)‖² + 1e-12·M)` on every grid node.
pub fn music_spectrum(noise: &CMatrix, response: &ArrayResponse, axes: &[Vec<f64>]) -> Result<Spectrum> {
    let m = response.element_count();
    if noise.nrows() != m {
        return Err(invalid_arg(format!("noise basis has {} rows, array has {m} elements", noise.nrows())));
    }
    if axes.len() != response.param_dim() {
        return Err(invalid_arg("grid dimension does not match the array"));
    }
    let eps = 1e-12 * m as f64;
    let inner: usize = axes[1..].iter().map(Vec::len).product();
    let mut values = vec![0.0; axes[0].len() * inner];
    let cols = noise.as_slice();

    values.par_chunks_mut(inner).zip(&axes[0]).for_each(|(row, &phi)| {
        let mut a = vec![C64::new(0.0, 0.0); m];
        let mut p = vec![phi; axes.len()];
        for (i, v) in row.iter_mut().enumerate() {
            let mut rem = i;
            for d in (1..axes.len()).rev() {
                p[d] = axes[d][rem % axes[d].len()];
                rem /= axes[d].len();
            }
            response.steering_into(&p, &mut a);
            let leak: f64 = cols.chunks_exact(m).map(|u| dotc(u, &a).norm_sqr()).sum();
            *v = 1.0 / (leak + eps);
        }
    });
    Ok(Spectrum { axes: axes.to_vec(), values })
}

/// Greedy peak picking: repeatedly takes the largest remaining local
/// maximum and discards every node within `radius` of it, measured with
/// `metric`'s normalized distance. Returns the chosen flat indices and
/// whether fewer than `k` were found.
pub fn pick_peaks(spectrum: &Spectrum, k: usize, radius: f64, metric: &PenaltyConfig) -> (Vec<usize>, bool) {
    let shape = spectrum.shape();
    let mut candidates: Vec<usize> =
        (0..spectrum.values.len()).filter(|&i| is_local_max(&spectrum.values, &shape, &spectrum.unravel(i))).collect();
    candidates.sort_by(|&a, &b| spectrum.values[b].total_cmp(&spectrum.values[a]).then(a.cmp(&b)));

    let mut picked: Vec<usize> = Vec::new();
    let mut picked_params: Vec<Vec<f64>> = Vec::new();
    for i in candidates {
        if picked.len() == k {
            break;
        }
        let p = spectrum.params(i);
        if picked_params.iter().all(|q| metric.normalized_distance(&p, q) > radius) {
            picked.push(i);
            picked_params.push(p);
        }
    }
    let short = picked.len() < k;
    (picked, short)
}

fn is_local_max(values: &[f64], shape: &[usize], idx: &[usize]) -> bool {
    let flat = |ix: &[usize]| ix.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i);
    let v = values[flat(idx)];
    let d = shape.len();
    let mut nb = idx.to_vec();
    let mut above_some = false;
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let mut centre = true;
        let mut valid = true;
        for j in 0..d {
            let off = (c % 3) as isize - 1;
            c /= 3;
            centre &= off == 0;
            let x = idx[j] as isize + off;
            if x < 0 || x >= shape[j] as isize {
                valid = false;
                break;
            }
            nb[j] = x as usize;
        }
        if !centre && valid {
            let w = values[flat(&nb)];
            if w > v {
                return false;
            }
            above_some |= w < v;
        }
    }
    above_some
}

/// Grid-search MUSIC with `k` peaks, exclusion radius `metric.delta_min`.
pub fn music_localize(
    snap: &SnapshotMatrix,
    k: usize,
    domain: &SearchDomain,
    grid: GridSize,
    metric: &PenaltyConfig,
) -> Result<LocalizationResult> {
    let start = Instant::now();
    let response = &snap.response;
    domain.check_response(response)?;
    let m = response.element_count();
    if k == 0 || k >= m {
        return Err(invalid_arg(format!("MUSIC needs 1 <= K < M, got K={k}, M={m}")));
    }
    let axes = grid_axes(domain, grid)?;
    let sub = split_subspaces(&sample_covariance(&snap.data)?, k)?;
    let spec = music_spectrum(&sub.noise, response, &axes)?;
    let (peaks, short) = pick_peaks(&spec, k, metric.delta_min, metric);

    let mut out = LocalizationResult::new(Method::Music);
    out.estimates = peaks.iter().map(|&i| spec.location(i)).collect();
    out.per_source_cost = peaks.iter().map(|&i| spec.values[i]).collect();
    out.shortfall = short;
    out.runtime_s = start.elapsed().as_secs_f64();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{simulate_snapshots, ChannelModel, Scenario, SourceSpec};
    use crate::geometry::ArrayGeometry;
    use crate::rng::stream_rng;
    use crate::subspace::tests::random_matrix;

    fn response() -> ArrayResponse {
        ArrayResponse::with_default_model(ArrayGeometry::ula(32, 0.005).unwrap(), 0.02).unwrap()
    }

    fn snap(locs: &[SourceLocation], seed: u64) -> SnapshotMatrix {
        let src = locs.iter().map(|&location| SourceSpec { location, snr_db: 20.0 }).collect();
        simulate_snapshots(&Scenario::new(response(), src, 100, ChannelModel::PureLos, seed).noiseless()).unwrap()
    }

    fn small_domain() -> SearchDomain {
        SearchDomain { phi: (-0.5, 0.5), psi: None, range: (0.4, 1.2) }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("200x1000".parse::<GridSize>().unwrap(), GridSize::linear(200, 1000));
        assert_eq!("100x100x200".parse::<GridSize>().unwrap(), GridSize::planar(100, 100, 200));
        assert!("200".parse::<GridSize>().is_err());
        assert!("ax3".parse::<GridSize>().is_err());
        assert_eq!(GridSize::planar(2, 3, 4).to_string(), "2x3x4");
        assert_eq!(GridSize::planar(2, 3, 4).nodes(), 24);
    }

    #[test]
    fn axes_include_endpoints() {
        let axes = grid_axes(&small_domain(), GridSize::linear(11, 9)).unwrap();
        assert_eq!(axes[0][0], -0.5);
        assert_eq!(axes[0][10], 0.5);
        assert!((axes[1][1] - 0.5).abs() < 1e-15);
        assert!(grid_axes(&small_domain(), GridSize::linear(1, 9)).is_err());
        assert!(grid_axes(&small_domain(), GridSize::planar(3, 3, 3)).is_err());
    }

    #[test]
    fn on_grid_sources_are_recovered_exactly() {
        let grid = GridSize::linear(21, 17);
        let axes = grid_axes(&small_domain(), grid).unwrap();
        let a = SourceLocation::new(axes[0][4], axes[1][3]);
        let b = SourceLocation::new(axes[0][15], axes[1][12]);
        let res = music_localize(&snap(&[a, b], 1), 2, &small_domain(), grid, &PenaltyConfig::default()).unwrap();
        assert!(!res.shortfall);
        let mut got = res.estimates.clone();
        got.sort_by(|x, y| x.phi.total_cmp(&y.phi));
        assert_eq!(got, vec![a, b]);
    }

    #[test]
    fn single_on_grid_source_is_the_argmax() {
        let grid = GridSize::linear(41, 33);
        let axes = grid_axes(&small_domain(), grid).unwrap();
        let truth = SourceLocation::new(axes[0][30], axes[1][7]);
        let s = snap(&[truth], 2);
        let sub = split_subspaces(&sample_covariance(&s.data).unwrap(), 1).unwrap();
        let spec = music_spectrum(&sub.noise, &s.response, &axes).unwrap();
        let arg = (0..spec.values.len()).max_by(|&i, &j| spec.values[i].total_cmp(&spec.values[j])).unwrap();
        assert_eq!(spec.location(arg), truth);
        assert!(spec.values.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn off_grid_source_lands_on_best_correlated_node() {
        // Noiseless single source: U_n spans the complement of a(θ), so the
        // peak is the node whose steering vector correlates best with a(θ).
        let grid = GridSize::linear(41, 33);
        let axes = grid_axes(&small_domain(), grid).unwrap();
        let (dphi, dr) = (axes[0][1] - axes[0][0], axes[1][1] - axes[1][0]);
        let resp = response();
        for (fp, fr) in [(0.3, -0.2), (-0.45, 0.1), (0.1, 0.4)] {
            let truth = SourceLocation::new(axes[0][12] + fp * dphi, axes[1][20] + fr * dr);
            let at = resp.steering(&truth).unwrap();
            let mut best = (f64::MIN, SourceLocation::new(0.0, 1.0));
            for &phi in &axes[0] {
                for &r in &axes[1] {
                    let loc = SourceLocation::new(phi, r);
                    let c = resp.steering(&loc).unwrap().dotc(&at).norm();
                    if c > best.0 {
                        best = (c, loc);
                    }
                }
            }
            let res = music_localize(&snap(&[truth], 3), 1, &small_domain(), grid, &PenaltyConfig::default()).unwrap();
            assert_eq!(res.estimates[0], best.1);
            assert!((res.estimates[0].phi - truth.phi).abs() <= 1.5 * dphi);
        }
    }

    #[test]
    fn pure_noise_spectrum_is_flat() {
        let resp = ArrayResponse::with_default_model(ArrayGeometry::ula(16, 0.005).unwrap(), 0.02).unwrap();
        let y = random_matrix(&mut stream_rng(7, 0), 16, 10_000);
        let sub = split_subspaces(&sample_covariance(&y).unwrap(), 0).unwrap();
        let dom = SearchDomain { phi: (-1.0, 1.0), psi: None, range: (0.1, 1.0) };
        let spec = music_spectrum(&sub.noise, &resp, &grid_axes(&dom, GridSize::linear(30, 20)).unwrap()).unwrap();
        let max = spec.values.iter().cloned().fold(f64::MIN, f64::max);
        let min = spec.values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 3.0, "{}", max / min);
    }

    fn two_spikes(gap: usize) -> Spectrum {
        let axes = vec![(0..20).map(|i| i as f64 * 0.01).collect(), (0..20).map(|i| 1.0 + i as f64 * 0.01).collect()];
        let mut values = vec![1.0; 400];
        values[5 * 20 + 5] = 10.0;
        values[(5 + gap) * 20 + 5] = 10.0;
        Spectrum { axes, values }
    }

    #[test]
    fn peak_picking_separation() {
        let cfg = PenaltyConfig::default();
        let (p, short) = pick_peaks(&two_spikes(12), 2, 0.08, &cfg);
        assert_eq!(p, vec![105, 345]);
        assert!(!short);
        let (p, short) = pick_peaks(&two_spikes(3), 2, 0.08, &cfg);
        assert_eq!(p, vec![105]);
        assert!(short);
        let (p, _) = pick_peaks(&two_spikes(12), 1, 0.08, &cfg);
        assert_eq!(p, vec![105]);
    }

    #[test]
    fn csv_columns() {
        let mut buf = Vec::new();
        two_spikes(3).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "phi_deg,r_m,value");
        assert_eq!(text.lines().count(), 401);
    }
}
