//! Expected-loss kernels of the weighted-quadratic disclosure rule.
//!
//! For a disclosure weight `w` the platform forwards source 1 when
//! `w (X₁ − μ₁)² > (1 − w)(X₂ − μ₂)²`. With `r = √(w / (1 − w))` that is
//! `|X₂ − μ₂| < r |X₁ − μ₁|`, so both kernels reduce to a one-dimensional
//! integral over `x = |X₁ − μ₁|` of a band query on `X₂`:
//!
//! ```text
//! H(w) = E[(X₂−μ₂)² 1(source 1 forwarded)] = 2∫ f₁(x) band_m2₂(r x) dx
//! G(w) = E[(X₁−μ₁)² 1(source 2 forwarded)] = 2∫ x² f₁(x) band_tail₂(r x) dx
//! ```
//!
//! The receiver's expected loss for weight `w` and preference `θ` is
//! `L(w | θ) = θ G(w) + (1 − θ) H(w)`, linear in `θ`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::distributions::GameSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate_pieces, QuadOptions};

/// `H(w)` and `G(w)` at one weight.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelValues {
    pub h: f64,
    pub g: f64,
}

impl KernelValues {
    pub fn at(spec: &GameSpec, w: f64) -> Self {
        Self {
            h: kernel_h(spec, w),
            g: kernel_g(spec, w),
        }
    }

    /// `L(w | θ)`.
    pub fn loss(&self, theta: f64) -> f64 {
        theta * self.g + (1.0 - theta) * self.h
    }
}

fn quad_options() -> QuadOptions {
    QuadOptions::default()
}

fn ratio(w: f64) -> f64 {
    libm::sqrt(w / (1.0 - w))
}

/// Outer integration range over `x = |X₁ − μ₁|` and the point beyond which
/// the band on `X₂` covers its effective support.
fn outer_range(spec: &GameSpec, r: f64) -> (f64, f64) {
    (
        spec.density1.effective_half_width(),
        spec.density2.effective_half_width() / r,
    )
}

/// `H(w) = E[(X₂ − μ₂)² 1((1 − w)(X₂ − μ₂)² < w (X₁ − μ₁)²)]`.
pub fn kernel_h(spec: &GameSpec, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w >= 1.0 {
        return spec.density2.variance();
    }
    let (d1, d2) = (&spec.density1, &spec.density2);
    let r = ratio(w);
    let (outer, saturate) = outer_range(spec, r);
    let integral = integrate_pieces(
        |x| d1.centered_pdf(x) * d2.band_m2(r * x),
        0.0,
        outer,
        &[saturate],
        &quad_options(),
    );
    2.0 * integral.value
}

/// `G(w) = E[(X₁ − μ₁)² 1((1 − w)(X₂ − μ₂)² ≥ w (X₁ − μ₁)²)]`.
pub fn kernel_g(spec: &GameSpec, w: f64) -> f64 {
    if w <= 0.0 {
        return spec.density1.variance();
    }
    if w >= 1.0 {
        return 0.0;
    }
    let (d1, d2) = (&spec.density1, &spec.density2);
    let r = ratio(w);
    let (outer, saturate) = outer_range(spec, r);
    // the tail of X₂ vanishes past `saturate`
    let integral = integrate_pieces(
        |x| x * x * d1.centered_pdf(x) * d2.band_tail(r * x),
        0.0,
        outer.min(saturate),
        &[],
        &quad_options(),
    );
    2.0 * integral.value
}

/// `L(w | θ) = θ G(w) + (1 − θ) H(w)`.
pub fn loss(spec: &GameSpec, w: f64, theta: f64) -> f64 {
    KernelValues::at(spec, w).loss(theta)
}

/// Probability that source 1 is forwarded under weight `w`.
pub fn disclosure_prob(spec: &GameSpec, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w >= 1.0 {
        return 1.0;
    }
    let (d1, d2) = (&spec.density1, &spec.density2);
    let r = ratio(w);
    let (outer, saturate) = outer_range(spec, r);
    let integral = integrate_pieces(
        |x| d1.centered_pdf(x) * d2.band_prob(r * x),
        0.0,
        outer,
        &[saturate],
        &quad_options(),
    );
    2.0 * integral.value
}

/// `(H′(w), G′(w))` from the differentiated band integrals.
///
/// Both derivatives share `J(w) = E[|X₁ − μ₁|³ f₂(μ₂ + r |X₁ − μ₁|)]`:
/// `H′ = J √w / (1 − w)^{5/2}` and `G′ = −J / (√w (1 − w)^{3/2})`.
pub fn kernel_derivatives(spec: &GameSpec, w: f64) -> Result<(f64, f64)> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::DerivativeAtEndpoint(w));
    }
    let (d1, d2) = (&spec.density1, &spec.density2);
    let r = ratio(w);
    let (outer, saturate) = outer_range(spec, r);
    let j = 2.0
        * integrate_pieces(
            |x| x * x * x * d1.centered_pdf(x) * d2.centered_pdf(r * x),
            0.0,
            outer.min(saturate),
            &[],
            &quad_options(),
        )
        .value;
    let sw = libm::sqrt(w);
    let ow = 1.0 - w;
    let h_prime = j * sw / (ow * ow * libm::sqrt(ow));
    let g_prime = -j / (sw * ow * libm::sqrt(ow));
    Ok((h_prime, g_prime))
}

/// Memoised kernel evaluations for one game.
///
/// Keys are the exact bit patterns of `w`. The memo uses a `RefCell`, so a
/// cache belongs to one thread; build one per worker.
#[derive(Debug)]
pub struct KernelCache {
    spec: GameSpec,
    memo: RefCell<BTreeMap<u64, KernelValues>>,
}

impl KernelCache {
    pub fn new(spec: GameSpec) -> Self {
        Self {
            spec,
            memo: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn values(&self, w: f64) -> KernelValues {
        let key = w.to_bits();
        if let Some(v) = self.memo.borrow().get(&key) {
            return *v;
        }
        let v = KernelValues::at(&self.spec, w);
        self.memo.borrow_mut().insert(key, v);
        v
    }

    pub fn len(&self) -> usize {
        self.memo.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Kernel values along a sorted weight grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelTable {
    pub weights: Vec<f64>,
    pub h_values: Vec<f64>,
    pub g_values: Vec<f64>,
}

impl KernelTable {
    pub fn build(spec: &GameSpec, weights: &[f64]) -> Result<Self> {
        check_unit_grid("weights", weights)?;
        for (i, pair) in weights.windows(2).enumerate() {
            if pair[1] < pair[0] {
                return Err(Error::WeightsNotIncreasing {
                    index: i + 1,
                    value: pair[1],
                });
            }
        }
        let (h_values, g_values) = weights
            .iter()
            .map(|&w| (kernel_h(spec, w), kernel_g(spec, w)))
            .unzip();
        Ok(Self {
            weights: weights.to_vec(),
            h_values,
            g_values,
        })
    }

    /// Whether `H` rises and `G` falls along the grid, strictly if asked.
    pub fn is_monotone(&self, strict: bool) -> bool {
        let up = |a: f64, b: f64| if strict { b > a } else { b >= a };
        self.h_values.windows(2).all(|p| up(p[0], p[1]))
            && self.g_values.windows(2).all(|p| up(p[1], p[0]))
    }
}

/// `L(w | θ)` on a weight × preference grid; `values[i][j] = L(weights[i] | thetas[j])`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossCurve {
    pub weights: Vec<f64>,
    pub thetas: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl LossCurve {
    /// Grid weight minimising `L(· | thetas[j])`; the first one on ties.
    pub fn argmin(&self, j: usize) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for (w, row) in self.weights.iter().zip(&self.values) {
            let v = row[j];
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((*w, v));
            }
        }
        best.map(|(w, _)| w)
    }
}

pub fn loss_curve(spec: &GameSpec, thetas: &[f64], w_grid: &[f64]) -> Result<LossCurve> {
    check_unit_grid("thetas", thetas)?;
    check_unit_grid("weights", w_grid)?;
    let values = w_grid
        .iter()
        .map(|&w| {
            let k = KernelValues::at(spec, w);
            thetas.iter().map(|&t| k.loss(t)).collect()
        })
        .collect();
    Ok(LossCurve {
        weights: w_grid.to_vec(),
        thetas: thetas.to_vec(),
        values,
    })
}

fn check_unit_grid(field: &'static str, grid: &[f64]) -> Result<()> {
    match grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(&value) => Err(Error::OutsideUnitInterval { field, value }),
        None => Ok(()),
    }
}

/// `n` evenly spaced points from 0 to 1 inclusive.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
