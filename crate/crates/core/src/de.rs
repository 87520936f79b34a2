//! DE/rand/1/bin over box-constrained real vectors.
//!
//! Randomness: generation 0 (initialization) draws from substream 0 of the
//! run seed and generation `g` from substream `g`. All random decisions of a
//! generation (donor indices, forced crossover index, crossover coins) are
//! drawn serially before any objective evaluation, so evaluations can be
//! spread over threads without changing the result.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Rng as ChaRng};

/// Hyperparameters independent of the search box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeSettings {
    pub population_size: usize,
    pub max_generations: usize,
    /// Mutation scale `F`.
    pub f: f64,
    /// Crossover probability `Cr`.
    pub cr: f64,
    pub seed: u64,
    pub convergence: Option<Convergence>,
}

impl Default for DeSettings {
    /// `Np = 50`, `Gmax = 300`, `F = 0.5`, `Cr = 0.8`, no early stop.
    fn default() -> Self {
        Self { population_size: 50, max_generations: 300, f: 0.5, cr: 0.8, seed: 0, convergence: None }
    }
}

impl DeSettings {
    pub fn with_bounds(self, bounds: Vec<(f64, f64)>) -> DeConfig {
        DeConfig { settings: self, bounds }
    }
}

/// Stop once the best cost improved by less than `tol` over the last
/// `patience` generations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub tol: f64,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeConfig {
    pub settings: DeSettings,
    /// Per-dimension `(low, high)`.
    pub bounds: Vec<(f64, f64)>,
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.settings;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if s.population_size < 4 {
            return bad(format!("population size must be >= 4, got {}", s.population_size));
        }
        if !(0.0..=2.0).contains(&s.f) {
            return bad(format!("F must lie in [0, 2], got {}", s.f));
        }
        if !(0.0..=1.0).contains(&s.cr) {
            return bad(format!("Cr must lie in [0, 1], got {}", s.cr));
        }
        if self.bounds.is_empty() {
            return bad("at least one search dimension is required".into());
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("dimension {j}: bounds ({lo}, {hi}) are not a proper interval"));
            }
        }
        if let Some(c) = s.convergence {
            if !(c.tol >= 0.0) || c.patience == 0 {
                return bad("convergence needs tol >= 0 and patience >= 1".into());
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeRunResult {
    pub best_vector: Vec<f64>,
    pub best_cost: f64,
    /// Best cost after initialization and after every generation.
    pub trace: Vec<f64>,
    /// Mean of the finite population costs, aligned with `trace`.
    pub mean_trace: Vec<f64>,
    pub evaluations: usize,
}

impl DeRunResult {
    /// Writes `generation,best_cost,mean_cost` rows.
    pub fn write_trace_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "generation,best_cost,mean_cost")?;
        for (g, (b, m)) in self.trace.iter().zip(&self.mean_trace).enumerate() {
            writeln!(out, "{g},{b:e},{m:e}")?;
        }
        Ok(())
    }
}

/// Uniform samples inside the box, one row per individual.
pub fn init_population(config: &DeConfig, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..config.settings.population_size)
        .map(|_| config.bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
        .collect()
}

/// Three mutually distinct indices, all different from `i`, by rejection.
pub fn pick_donors(np: usize, i: usize, rng: &mut impl Rng) -> [usize; 3] {
    debug_assert!(np >= 4);
    let mut draw = |taken: &[usize]| loop {
        let r = rng.random_range(0..np);
        if r != i && !taken.contains(&r) {
            break r;
        }
    };
    let r1 = draw(&[]);
    let r2 = draw(&[r1]);
    let r3 = draw(&[r1, r2]);
    [r1, r2, r3]
}

/// `x_r1 + F·(x_r2 − x_r3)`, without bound repair.
pub fn rand1_mutant(population: &[Vec<f64>], donors: [usize; 3], f: f64) -> Vec<f64> {
    let [a, b, c] = donors.map(|r| &population[r]);
    a.iter().zip(b).zip(c).map(|((a, b), c)| a + f * (b - c)).collect()
}

/// Folds `x` back into `[lo, hi]` by mirror reflection at the violated
/// bound, repeated as often as needed.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    if (lo..=hi).contains(&x) {
        return x;
    }
    let w = hi - lo;
    let t = (x - lo).rem_euclid(2.0 * w);
    let y = if t <= w { lo + t } else { hi - (t - w) };
    y.clamp(lo, hi)
}

pub fn repair(v: &mut [f64], bounds: &[(f64, f64)]) {
    for (x, &(lo, hi)) in v.iter_mut().zip(bounds) {
        *x = reflect(*x, lo, hi);
    }
}

/// Rand/1 mutant for target `i`, reflected into the box.
pub fn mutate_rand1(population: &[Vec<f64>], i: usize, f: f64, bounds: &[(f64, f64)], rng: &mut impl Rng) -> Vec<f64> {
    let donors = pick_donors(population.len(), i, rng);
    let mut v = rand1_mutant(population, donors, f);
    repair(&mut v, bounds);
    v
}

/// Pre-drawn crossover decisions for one individual.
#[derive(Debug, Clone)]
pub struct CrossoverMask {
    pub forced: usize,
    pub coins: Vec<f64>,
}

impl CrossoverMask {
    pub fn draw(dim: usize, rng: &mut impl Rng) -> Self {
        let forced = rng.random_range(0..dim);
        let coins = (0..dim).map(|_| rng.random::<f64>()).collect();
        Self { forced, coins }
    }

    pub fn apply(&self, target: &[f64], mutant: &[f64], cr: f64) -> Vec<f64> {
        target
            .iter()
            .zip(mutant)
            .zip(&self.coins)
            .enumerate()
            .map(|(j, ((&x, &v), &u))| if u <= cr || j == self.forced { v } else { x })
            .collect()
    }
}

/// Binomial crossover: component `j` comes from the mutant iff
/// `rand_j ≤ Cr` or `j` is the forced index.
pub fn binomial_crossover(target: &[f64], mutant: &[f64], cr: f64, rng: &mut impl Rng) -> Vec<f64> {
    assert_eq!(target.len(), mutant.len());
    CrossoverMask::draw(target.len(), rng).apply(target, mutant, cr)
}

/// Greedy replacement; ties go to the trial, NaN counts as `+∞`.
pub fn select_greedy(target: Vec<f64>, trial: Vec<f64>, cost_target: f64, cost_trial: f64) -> (Vec<f64>, f64) {
    let ct = sanitize(cost_target);
    let cu = sanitize(cost_trial);
    if cu <= ct {
        (trial, cu)
    } else {
        (target, ct)
    }
}

fn sanitize(c: f64) -> f64 {
    if c.is_nan() {
        f64::INFINITY
    } else {
        c
    }
}

fn evaluate<F>(objective: &F, xs: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    xs.par_iter().map(|x| sanitize(objective(x))).collect()
}

fn best_and_mean(costs: &[f64]) -> (usize, f64, f64) {
    let (mut bi, mut bc) = (0, f64::INFINITY);
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, &c) in costs.iter().enumerate() {
        if c < bc {
            bi = i;
            bc = c;
        }
        if c.is_finite() {
            sum += c;
            n += 1;
        }
    }
    (bi, bc, if n > 0 { sum / n as f64 } else { f64::NAN })
}

/// Runs DE/rand/1/bin to minimize `objective` over the configured box.
pub fn run_de<F>(objective: F, config: &DeConfig) -> Result<DeRunResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let s = &config.settings;
    let np = s.population_size;
    let dim = config.dim();

    let mut pop = init_population(config, &mut stream_rng(s.seed, 0));
    let mut costs = evaluate(&objective, &pop);
    let mut evaluations = np;
    let (mut best_i, mut best, mean) = best_and_mean(&costs);
    let mut trace = vec![best];
    let mut mean_trace = vec![mean];

    for g in 1..=s.max_generations {
        let mut rng: ChaRng = stream_rng(s.seed, g as u64);
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let v = mutate_rand1(&pop, i, s.f, &config.bounds, &mut rng);
                CrossoverMask::draw(dim, &mut rng).apply(&pop[i], &v, s.cr)
            })
            .collect();
        let trial_costs = evaluate(&objective, &trials);
        evaluations += np;

        for (i, (u, cu)) in trials.into_iter().zip(trial_costs).enumerate() {
            if cu <= costs[i] {
                pop[i] = u;
                costs[i] = cu;
            }
        }
        let (bi, bc, mean) = best_and_mean(&costs);
        best_i = bi;
        best = bc;
        trace.push(best);
        mean_trace.push(mean);

        if let Some(c) = s.convergence {
            if g >= c.patience && trace[g - c.patience] - best < c.tol {
                break;
            }
        }
    }

    Ok(DeRunResult { best_vector: pop[best_i].clone(), best_cost: best, trace, mean_trace, evaluations })
}
