//! Equilibrium fixed points, the planner objective, and oracle checks.
//!
//! An equilibrium pairs increasing weights `w₁ < … < wₙ` with thresholds
//! `0 = θ₀ < θ₁ < … < θₙ = 1` such that
//!
//! - each interior threshold is an indifference point,
//!   `L(w_m | θ_m) = L(w_{m+1} | θ_m)`, and
//! - each weight is the prior mean of its cell, `w_m = E[Θ | θ_{m−1} < Θ < θ_m]`.
//!
//! Because `L(w | θ)` is linear in `θ`, the indifference point of two weights
//! has the closed form `ΔH / (ΔH − ΔG)`. [`lloyd_solve`] alternates the two
//! conditions from several starts and keeps the fixed point with the lowest
//! ex-ante loss. The ex-ante (planner) loss integrates the lower envelope of
//! the lines `θ ↦ L(w_m | θ)` against the prior.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::{GameSpec, PreferencePrior};
use crate::error::{Error, Result};
use crate::kernels::{unit_grid, KernelCache, KernelValues};
use crate::policies::{MppdPolicy, WqdPolicy, ORDER_TOLERANCE};

/// Smallest `ΔH − ΔG` accepted when forming an indifference threshold.
pub const PLATEAU_TOLERANCE: f64 = 1e-14;

/// Residual bound a converged solve must meet on both fixed-point conditions.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    /// Stop once the largest weight change in a sweep falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Perturbed starts tried after the equal-mass start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
            restarts: 8,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                field: "tolerance",
                value: self.tolerance,
                requirement: "finite and > 0",
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                field: "max_iterations",
                value: 0.0,
                requirement: ">= 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Equilibrium {
    pub weights: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub kernel_values: Vec<KernelValues>,
    pub planner_loss: f64,
    /// `max_m |L(w_m | θ_m) − L(w_{m+1} | θ_m)|` over interior thresholds.
    pub residual_c1: f64,
    /// `max_m |w_m − E[Θ | θ_{m−1} < Θ < θ_m]|`.
    pub residual_c2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Start that produced this solution; 0 is the equal-mass start.
    pub start: usize,
}

impl Equilibrium {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn wqd(&self) -> Result<WqdPolicy> {
        WqdPolicy::new(self.weights.clone())
    }

    pub fn mppd(&self) -> Result<MppdPolicy> {
        MppdPolicy::new(self.thresholds.clone())
    }

    /// Whether `θ_{m−1} < w_m < θ_m` for every cell.
    pub fn is_interleaved(&self) -> bool {
        self.weights
            .iter()
            .enumerate()
            .all(|(m, &w)| self.thresholds[m] < w && w < self.thresholds[m + 1])
    }
}

/// Indifference threshold between two weights.
pub fn threshold_between(spec: &GameSpec, w_lo: f64, w_hi: f64) -> Result<f64> {
    if !(w_lo < w_hi) {
        return Err(Error::WeightsNotIncreasing {
            index: 1,
            value: w_hi,
        });
    }
    indifference(
        &KernelValues::at(spec, w_lo),
        &KernelValues::at(spec, w_hi),
        (w_lo, w_hi),
    )
}

fn indifference(lo: &KernelValues, hi: &KernelValues, weights: (f64, f64)) -> Result<f64> {
    let dh = hi.h - lo.h;
    let dg = hi.g - lo.g;
    let denom = dh - dg;
    if !(denom >= PLATEAU_TOLERANCE) || dh < 0.0 || dg > 0.0 {
        return Err(Error::KernelPlateau {
            lo: weights.0,
            hi: weights.1,
        });
    }
    Ok(dh / denom)
}

/// Indifference thresholds `(0, θ₁, …, θ_{n−1}, 1)` for strictly increasing weights.
pub fn thresholds_from_weights(spec: &GameSpec, weights: &[f64]) -> Result<Vec<f64>> {
    thresholds_cached(&KernelCache::new(*spec), weights)
}

fn thresholds_cached(cache: &KernelCache, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    let mut thresholds = Vec::with_capacity(weights.len() + 1);
    thresholds.push(0.0);
    for (i, pair) in weights.windows(2).enumerate() {
        if pair[1] - pair[0] <= ORDER_TOLERANCE {
            return Err(Error::WeightsNotIncreasing {
                index: i + 1,
                value: pair[1],
            });
        }
        let t = indifference(
            &cache.values(pair[0]),
            &cache.values(pair[1]),
            (pair[0], pair[1]),
        )?;
        let prev = *thresholds.last().expect("starts with 0");
        if t - prev <= ORDER_TOLERANCE || t >= 1.0 {
            return Err(Error::InvalidThresholds {
                index: i + 1,
                value: t,
            });
        }
        thresholds.push(t);
    }
    thresholds.push(1.0);
    Ok(thresholds)
}

/// Prior conditional mean of every threshold cell.
pub fn weights_from_thresholds(prior: &PreferencePrior, thresholds: &[f64]) -> Result<Vec<f64>> {
    if thresholds.len() < 2 {
        return Err(Error::EmptyAlphabet);
    }
    let last = thresholds.len() - 1;
    if thresholds[0] != 0.0 || thresholds[last] != 1.0 {
        let (index, value) = if thresholds[0] != 0.0 {
            (0, thresholds[0])
        } else {
            (last, thresholds[last])
        };
        return Err(Error::InvalidThresholds { index, value });
    }
    thresholds
        .windows(2)
        .enumerate()
        .map(|(i, cell)| {
            if cell[1] <= cell[0] {
                return Err(Error::InvalidThresholds {
                    index: i + 1,
                    value: cell[1],
                });
            }
            prior.conditional_mean(cell[0], cell[1])
        })
        .collect()
}

/// Lower envelope of lines `θ ↦ a_k + b_k θ` on `[0, 1]`, as
/// `(line index, from, to)` segments in increasing `θ`.
fn lower_envelope(lines: &[(f64, f64)]) -> Vec<(usize, f64, f64)> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    // largest slope first (it wins as θ → −∞); equal slopes keep the lowest intercept
    order.sort_by(|&i, &j| {
        lines[j]
            .1
            .total_cmp(&lines[i].1)
            .then(lines[i].0.total_cmp(&lines[j].0))
    });
    order.dedup_by(|j, i| lines[*i].1 == lines[*j].1);

    let cross = |i: usize, j: usize| (lines[j].0 - lines[i].0) / (lines[i].1 - lines[j].1);
    let mut hull: Vec<usize> = Vec::with_capacity(order.len());
    for k in order {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if cross(a, k) <= cross(a, b) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }

    let mut segments = Vec::with_capacity(hull.len());
    for (pos, &k) in hull.iter().enumerate() {
        let from = if pos == 0 {
            f64::NEG_INFINITY
        } else {
            cross(hull[pos - 1], k)
        };
        let to = if pos + 1 == hull.len() {
            f64::INFINITY
        } else {
            cross(k, hull[pos + 1])
        };
        let (from, to) = (from.max(0.0), to.min(1.0));
        if to > from {
            segments.push((k, from, to));
        }
    }
    segments
}

fn envelope_loss(prior: &PreferencePrior, values: &[KernelValues]) -> f64 {
    let lines: Vec<(f64, f64)> = values.iter().map(|k| (k.h, k.g - k.h)).collect();
    lower_envelope(&lines)
        .into_iter()
        .map(|(k, a, b)| lines[k].0 * prior.mass(a, b) + lines[k].1 * prior.first_moment(a, b))
        .sum()
}

/// Ex-ante receiver loss `∫ min_m L(w_m | θ) π(θ) dθ`.
///
/// Weights may be unordered or repeated.
pub fn planner_loss(spec: &GameSpec, weights: &[f64]) -> f64 {
    let values: Vec<KernelValues> = weights.iter().map(|&w| KernelValues::at(spec, w)).collect();
    envelope_loss(&spec.prior, &values)
}

fn planner_loss_cached(cache: &KernelCache, weights: &[f64]) -> f64 {
    let values: Vec<KernelValues> = weights.iter().map(|&w| cache.values(w)).collect();
    envelope_loss(&cache.spec().prior, &values)
}

struct Attempt {
    weights: Vec<f64>,
    thresholds: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn iterate(cache: &KernelCache, start: Vec<f64>, cfg: &SolverConfig) -> Result<Attempt> {
    let prior = &cache.spec().prior;
    let mut weights = weights_from_thresholds(prior, &start)?;
    let mut thresholds = start;
    for iteration in 1..=cfg.max_iterations {
        thresholds = thresholds_cached(cache, &weights)?;
        let next = weights_from_thresholds(prior, &thresholds)?;
        let change = next
            .iter()
            .zip(&weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        weights = next;
        if change < cfg.tolerance {
            let thresholds = thresholds_cached(cache, &weights)?;
            return Ok(Attempt {
                weights,
                thresholds,
                iterations: iteration,
                converged: true,
            });
        }
    }
    Ok(Attempt {
        weights,
        thresholds,
        iterations: cfg.max_iterations,
        converged: false,
    })
}

fn equal_mass_thresholds(prior: &PreferencePrior, n: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=n)
        .map(|m| prior.quantile(m as f64 / n as f64))
        .collect();
    t[0] = 0.0;
    t[n] = 1.0;
    t
}

fn jitter(thresholds: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = thresholds.len() - 1;
    let mut out = thresholds.to_vec();
    for m in 1..n {
        let width = (thresholds[m + 1] - thresholds[m - 1]) / 2.0;
        let shift: f64 = rng.random_range(-0.1..0.1);
        out[m] = thresholds[m] + shift * width;
    }
    out
}

fn residuals(cache: &KernelCache, weights: &[f64], thresholds: &[f64]) -> Result<(f64, f64)> {
    let prior = &cache.spec().prior;
    let c1 = weights
        .windows(2)
        .zip(&thresholds[1..])
        .map(|(pair, &t)| (cache.values(pair[0]).loss(t) - cache.values(pair[1]).loss(t)).abs())
        .fold(0.0, f64::max);
    let c2 = weights_from_thresholds(prior, thresholds)?
        .iter()
        .zip(weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((c1, c2))
}

fn finish(cache: &KernelCache, attempt: Attempt, start: usize) -> Result<Equilibrium> {
    let (residual_c1, residual_c2) = residuals(cache, &attempt.weights, &attempt.thresholds)?;
    Ok(Equilibrium {
        kernel_values: attempt.weights.iter().map(|&w| cache.values(w)).collect(),
        planner_loss: planner_loss_cached(cache, &attempt.weights),
        converged: attempt.converged
            && residual_c1 <= RESIDUAL_TOLERANCE
            && residual_c2 <= RESIDUAL_TOLERANCE,
        weights: attempt.weights,
        thresholds: attempt.thresholds,
        residual_c1,
        residual_c2,
        iterations: attempt.iterations,
        start,
    })
}

/// Ranks candidates: converged first, then lower planner loss, then weights.
fn better(a: &Equilibrium, b: &Equilibrium) -> bool {
    if a.converged != b.converged {
        return a.converged;
    }
    match a.planner_loss.total_cmp(&b.planner_loss) {
        core::cmp::Ordering::Less => true,
        core::cmp::Ordering::Greater => false,
        core::cmp::Ordering::Equal => {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                match x.total_cmp(y) {
                    core::cmp::Ordering::Less => return true,
                    core::cmp::Ordering::Greater => return false,
                    core::cmp::Ordering::Equal => {}
                }
            }
            false
        }
    }
}

/// Solves for an equilibrium with `spec.n` messages.
///
/// Starts from equal-prior-mass cells, then from `cfg.restarts` jittered
/// copies of them. A start that hits a weight collision or a kernel plateau
/// is dropped. When no start converges the best non-converged state is
/// returned with `converged = false`; if every start failed outright, the
/// last error is returned.
pub fn lloyd_solve(spec: &GameSpec, cfg: &SolverConfig) -> Result<Equilibrium> {
    cfg.validate()?;
    let cache = KernelCache::new(*spec);
    let prior = &spec.prior;
    if spec.n == 1 {
        let attempt = Attempt {
            weights: vec![prior.mean()],
            thresholds: vec![0.0, 1.0],
            iterations: 0,
            converged: true,
        };
        return finish(&cache, attempt, 0);
    }

    let base = equal_mass_thresholds(prior, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Equilibrium> = None;
    let mut last_error = None;
    for start in 0..=cfg.restarts {
        let init = if start == 0 {
            base.clone()
        } else {
            jitter(&base, &mut rng)
        };
        let outcome = iterate(&cache, init, cfg).and_then(|a| finish(&cache, a, start));
        match outcome {
            Ok(eq) => {
                if best.as_ref().is_none_or(|b| better(&eq, b)) {
                    best = Some(eq);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    match (best, last_error) {
        (Some(eq), _) => Ok(eq),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one start runs"),
    }
}

/// `max_m |∂ℒ/∂w_m|` by central differences of the planner loss.
pub fn stationarity_residual(spec: &GameSpec, weights: &[f64]) -> f64 {
    const STEP: f64 = 1e-6;
    let mut probe = weights.to_vec();
    let mut worst = 0.0_f64;
    for m in 0..weights.len() {
        probe[m] = weights[m] + STEP;
        let up = planner_loss(spec, &probe);
        probe[m] = weights[m] - STEP;
        let down = planner_loss(spec, &probe);
        probe[m] = weights[m];
        worst = worst.max(((up - down) / (2.0 * STEP)).abs());
    }
    worst
}

/// Outcome of the exhaustive grid comparison.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimalityReport {
    pub points_per_dim: usize,
    pub evaluated: usize,
    pub grid_min: f64,
    pub grid_argmin: Vec<f64>,
    pub equilibrium_loss: f64,
    /// `equilibrium_loss − grid_min`; non-positive when the equilibrium wins.
    pub gap: f64,
    pub passed: bool,
}

/// Slack allowed when comparing the equilibrium to the grid minimum.
pub const GRID_SLACK: f64 = 1e-6;

/// Compares the equilibrium's planner loss with its minimum over a uniform
/// grid on `[0, 1]ⁿ`. Only sorted tuples are visited, since the planner loss
/// does not depend on the order of the weights.
pub fn verify_planner_optimality(
    spec: &GameSpec,
    equilibrium: &Equilibrium,
    points_per_dim: usize,
) -> Result<OptimalityReport> {
    let n = equilibrium.n();
    if n == 0 {
        return Err(Error::EmptyAlphabet);
    }
    if n > 3 {
        return Err(Error::GridTooLarge(n));
    }
    if points_per_dim < 2 {
        return Err(Error::GridTooCoarse(points_per_dim));
    }
    let grid = unit_grid(points_per_dim);
    let table: Vec<KernelValues> = grid.iter().map(|&w| KernelValues::at(spec, w)).collect();

    let mut idx = vec![0usize; n];
    let mut picked = vec![table[0]; n];
    let mut best = (f64::INFINITY, vec![0usize; n]);
    let mut evaluated = 0;
    loop {
        for (slot, &i) in picked.iter_mut().zip(&idx) {
            *slot = table[i];
        }
        let value = envelope_loss(&spec.prior, &picked);
        evaluated += 1;
        if value < best.0 {
            best = (value, idx.clone());
        }
        // next non-decreasing index tuple
        let mut k = n;
        loop {
            if k == 0 {
                let grid_min = best.0;
                let gap = equilibrium.planner_loss - grid_min;
                return Ok(OptimalityReport {
                    points_per_dim,
                    evaluated,
                    grid_min,
                    grid_argmin: best.1.iter().map(|&i| grid[i]).collect(),
                    equilibrium_loss: equilibrium.planner_loss,
                    gap,
                    passed: gap <= GRID_SLACK,
                });
            }
            k -= 1;
            if idx[k] + 1 < points_per_dim {
                idx[k] += 1;
                let v = idx[k];
                for slot in &mut idx[k + 1..] {
                    *slot = v;
                }
                break;
            }
        }
    }
}
