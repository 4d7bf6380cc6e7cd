//! Content densities, the preference prior, and the game instance that ties
//! them together.
//!
//! Every content density is symmetric about its mean. Band queries are taken
//! on centred variables: `band_prob(a) = P(|X − μ| < a)` and
//! `band_m2(a) = E[(X − μ)² 1(|X − μ| < a)]`.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::special::{inc_beta, ln_beta};

/// Effective Gaussian support in standard deviations (tail mass ~1e-23).
pub const GAUSSIAN_SUPPORT_SCALES: f64 = 10.0;

/// Effective Laplace support in diversities (tail mass e⁻⁵⁰ ~ 2e-22).
pub const LAPLACE_SUPPORT_SCALES: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DensityFamily {
    /// `scale` is the standard deviation.
    Gaussian,
    /// `scale` is the half-width of the support.
    UniformInterval,
    /// `scale` is the diversity `b` in `exp(−|x − μ|/b) / 2b`.
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawDensity"))]
pub struct SymmetricDensity {
    family: DensityFamily,
    mean: f64,
    scale: f64,
}

/// Unvalidated wire form; deserialization goes through [`SymmetricDensity::new`].
#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensity {
    family: DensityFamily,
    mean: f64,
    scale: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<RawDensity> for SymmetricDensity {
    type Error = Error;

    fn try_from(raw: RawDensity) -> Result<Self> {
        Self::new(raw.family, raw.mean, raw.scale)
    }
}

impl SymmetricDensity {
    pub fn new(family: DensityFamily, mean: f64, scale: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidParameter {
                field: "mean",
                value: mean,
                requirement: "finite",
            });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter {
                field: "scale",
                value: scale,
                requirement: "finite and > 0",
            });
        }
        Ok(Self {
            family,
            mean,
            scale,
        })
    }

    pub fn gaussian(mean: f64, std_dev: f64) -> Result<Self> {
        Self::new(DensityFamily::Gaussian, mean, std_dev)
    }

    pub fn uniform(mean: f64, half_width: f64) -> Result<Self> {
        Self::new(DensityFamily::UniformInterval, mean, half_width)
    }

    pub fn laplace(mean: f64, diversity: f64) -> Result<Self> {
        Self::new(DensityFamily::Laplace, mean, diversity)
    }

    pub fn family(&self) -> DensityFamily {
        self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Whether the density is positive on the whole real line.
    pub fn has_full_support(&self) -> bool {
        !matches!(self.family, DensityFamily::UniformInterval)
    }

    /// Half-width of the interval around the mean used for quadrature.
    pub fn effective_half_width(&self) -> f64 {
        match self.family {
            DensityFamily::Gaussian => GAUSSIAN_SUPPORT_SCALES * self.scale,
            DensityFamily::UniformInterval => self.scale,
            DensityFamily::Laplace => LAPLACE_SUPPORT_SCALES * self.scale,
        }
    }

    pub fn variance(&self) -> f64 {
        let s = self.scale;
        match self.family {
            DensityFamily::Gaussian => s * s,
            DensityFamily::UniformInterval => s * s / 3.0,
            DensityFamily::Laplace => 2.0 * s * s,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.centered_pdf(x - self.mean)
    }

    /// Density of `X − μ` at `t`.
    pub fn centered_pdf(&self, t: f64) -> f64 {
        let s = self.scale;
        let t = t.abs();
        match self.family {
            DensityFamily::Gaussian => {
                let z = t / s;
                libm::exp(-0.5 * z * z) / (s * libm::sqrt(2.0 * PI))
            }
            DensityFamily::UniformInterval => {
                if t <= s {
                    0.5 / s
                } else {
                    0.0
                }
            }
            DensityFamily::Laplace => libm::exp(-t / s) / (2.0 * s),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = x - self.mean;
        let s = self.scale;
        match self.family {
            DensityFamily::Gaussian => 0.5 * libm::erfc(-t / s * FRAC_1_SQRT_2),
            DensityFamily::UniformInterval => ((t + s) / (2.0 * s)).clamp(0.0, 1.0),
            DensityFamily::Laplace => {
                if t < 0.0 {
                    0.5 * libm::exp(t / s)
                } else {
                    1.0 - 0.5 * libm::exp(-t / s)
                }
            }
        }
    }

    /// `P(|X − μ| < a)`.
    pub fn band_prob(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        if a == f64::INFINITY {
            return 1.0;
        }
        let s = self.scale;
        match self.family {
            DensityFamily::Gaussian => libm::erf(a / s * FRAC_1_SQRT_2),
            DensityFamily::UniformInterval => (a / s).min(1.0),
            DensityFamily::Laplace => -libm::expm1(-a / s),
        }
    }

    /// `P(|X − μ| ≥ a)`, accurate where `band_prob` is close to one.
    pub fn band_tail(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 1.0;
        }
        if a == f64::INFINITY {
            return 0.0;
        }
        let s = self.scale;
        match self.family {
            DensityFamily::Gaussian => libm::erfc(a / s * FRAC_1_SQRT_2),
            DensityFamily::UniformInterval => (1.0 - a / s).max(0.0),
            DensityFamily::Laplace => libm::exp(-a / s),
        }
    }

    /// `E[(X − μ)² 1(|X − μ| < a)]`.
    pub fn band_m2(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        if a == f64::INFINITY {
            return self.variance();
        }
        let s = self.scale;
        match self.family {
            DensityFamily::Gaussian => gaussian_band_m2(a / s) * s * s,
            DensityFamily::UniformInterval => {
                let b = a.min(s);
                b * b * b / (3.0 * s)
            }
            DensityFamily::Laplace => {
                let z = a / s;
                s * s * laplace_band_m2(z)
            }
        }
    }

    /// `band_prob` by adaptive quadrature of the pdf; used to validate closed forms.
    pub fn band_prob_by_quadrature(&self, a: f64) -> f64 {
        let a = a.min(self.effective_half_width());
        2.0 * integrate(|t| self.centered_pdf(t), 0.0, a, &fine_quad()).value
    }

    /// `band_m2` by adaptive quadrature of the pdf; used to validate closed forms.
    pub fn band_m2_by_quadrature(&self, a: f64) -> f64 {
        let a = a.min(self.effective_half_width());
        2.0 * integrate(|t| t * t * self.centered_pdf(t), 0.0, a, &fine_quad()).value
    }
}

fn fine_quad() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_subdivisions: 2000,
    }
}

/// `E[Z² 1(|Z| < z)]` for a standard normal `Z`.
fn gaussian_band_m2(z: f64) -> f64 {
    if z < 0.5 {
        // termwise integral of z² φ(z); the closed form cancels badly here
        let mut sum = 0.0;
        let mut term = 1.0; // (−1)^k / (2^k k!)
        let z2 = z * z;
        let mut power = z2 * z; // z^(2k+3)
        for k in 0..30 {
            let kf = f64::from(k);
            sum += term * power / (2.0 * kf + 3.0);
            term *= -0.5 / (kf + 1.0);
            power *= z2;
        }
        2.0 * sum / libm::sqrt(2.0 * PI)
    } else {
        libm::erf(z * FRAC_1_SQRT_2) - z * libm::sqrt(2.0 / PI) * libm::exp(-0.5 * z * z)
    }
}

/// `E[Z² 1(|Z| < z)]` for a unit-diversity Laplace `Z`.
fn laplace_band_m2(z: f64) -> f64 {
    if z < 1.0 {
        // Σ (−1)^k z^(k+3) / (k! (k+3)), avoiding the cancellation near zero
        let mut sum = 0.0;
        let mut term = z * z * z;
        for k in 0..30 {
            let kf = f64::from(k);
            sum += term / (kf + 3.0);
            term *= -z / (kf + 1.0);
        }
        sum
    } else {
        2.0 - libm::exp(-z) * (z * z + 2.0 * z + 2.0)
    }
}

impl Distribution<f64> for SymmetricDensity {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            DensityFamily::Gaussian => Normal::new(self.mean, self.scale)
                .expect("scale validated at construction")
                .sample(rng),
            DensityFamily::UniformInterval => {
                let u: f64 = rng.random();
                self.mean + self.scale * (2.0 * u - 1.0)
            }
            DensityFamily::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                let tail = -libm::log1p(-2.0 * u.abs());
                self.mean + self.scale * if u < 0.0 { -tail } else { tail }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum PriorFamily {
    Uniform01,
    Beta { alpha: f64, beta: f64 },
}

/// Smooth density of the receiver preference `Θ` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(into = "PriorFamily", try_from = "PriorFamily")
)]
pub struct PreferencePrior {
    family: PriorFamily,
    ln_norm: f64,
}

impl PreferencePrior {
    pub fn uniform() -> Self {
        Self {
            family: PriorFamily::Uniform01,
            ln_norm: 0.0,
        }
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        for (field, value) in [("alpha", alpha), ("beta", beta)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    value,
                    requirement: "finite and > 0",
                });
            }
        }
        Ok(Self {
            family: PriorFamily::Beta { alpha, beta },
            ln_norm: -ln_beta(alpha, beta),
        })
    }

    pub fn from_family(family: PriorFamily) -> Result<Self> {
        match family {
            PriorFamily::Uniform01 => Ok(Self::uniform()),
            PriorFamily::Beta { alpha, beta } => Self::beta(alpha, beta),
        }
    }

    pub fn family(&self) -> PriorFamily {
        self.family
    }

    /// Law of `1 − Θ`.
    pub fn reflected(&self) -> Self {
        match self.family {
            PriorFamily::Uniform01 => *self,
            PriorFamily::Beta { alpha, beta } => Self {
                family: PriorFamily::Beta {
                    alpha: beta,
                    beta: alpha,
                },
                ln_norm: self.ln_norm,
            },
        }
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        if !(0.0..=1.0).contains(&theta) {
            return 0.0;
        }
        match self.family {
            PriorFamily::Uniform01 => 1.0,
            PriorFamily::Beta { alpha, beta } => libm::exp(
                self.ln_norm
                    + (alpha - 1.0) * libm::log(theta)
                    + (beta - 1.0) * libm::log1p(-theta),
            ),
        }
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        let t = theta.clamp(0.0, 1.0);
        match self.family {
            PriorFamily::Uniform01 => t,
            PriorFamily::Beta { alpha, beta } => inc_beta(t, alpha, beta),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            PriorFamily::Uniform01 => 0.5,
            PriorFamily::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }

    /// `∫ₐᵇ π(θ) dθ`, with `a, b` clamped to `[0, 1]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        match self.family {
            PriorFamily::Uniform01 => b - a,
            PriorFamily::Beta { alpha, beta } => {
                // subtract on the less saturated side
                if a > 0.5 {
                    inc_beta(1.0 - a, beta, alpha) - inc_beta(1.0 - b, beta, alpha)
                } else {
                    inc_beta(b, alpha, beta) - inc_beta(a, alpha, beta)
                }
            }
        }
    }

    /// `∫ₐᵇ θ π(θ) dθ`, with `a, b` clamped to `[0, 1]`.
    pub fn first_moment(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        match self.family {
            PriorFamily::Uniform01 => 0.5 * (b - a) * (b + a),
            PriorFamily::Beta { alpha, beta } => {
                let shifted = if a > 0.5 {
                    inc_beta(1.0 - a, beta, alpha + 1.0) - inc_beta(1.0 - b, beta, alpha + 1.0)
                } else {
                    inc_beta(b, alpha + 1.0, beta) - inc_beta(a, alpha + 1.0, beta)
                };
                alpha / (alpha + beta) * shifted
            }
        }
    }

    /// `E[Θ | a < Θ < b]`.
    pub fn conditional_mean(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) || a < 0.0 || b > 1.0 {
            return Err(Error::ZeroMassInterval { lo: a, hi: b });
        }
        let mass = self.mass(a, b);
        if !(mass > 0.0) {
            return Err(Error::ZeroMassInterval { lo: a, hi: b });
        }
        let mean = match self.family {
            PriorFamily::Uniform01 => 0.5 * (a + b),
            PriorFamily::Beta { .. } => self.first_moment(a, b) / mass,
        };
        // rounding can nudge the ratio onto the boundary of a tiny cell
        Ok(mean.clamp(a, b))
    }

    /// Smallest `θ` with `cdf(θ) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self.family {
            PriorFamily::Uniform01 => p,
            PriorFamily::Beta { .. } => {
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }
}

impl From<PreferencePrior> for PriorFamily {
    fn from(p: PreferencePrior) -> Self {
        p.family
    }
}

impl TryFrom<PriorFamily> for PreferencePrior {
    type Error = Error;

    fn try_from(f: PriorFamily) -> Result<Self> {
        Self::from_family(f)
    }
}

impl Distribution<f64> for PreferencePrior {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            PriorFamily::Uniform01 => rng.random(),
            PriorFamily::Beta { alpha, beta } => Beta::new(alpha, beta)
                .expect("parameters validated at construction")
                .sample(rng),
        }
    }
}

/// One game instance: the two content sources, the preference prior and the
/// number of messages available to the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GameSpec {
    pub density1: SymmetricDensity,
    pub density2: SymmetricDensity,
    pub prior: PreferencePrior,
    pub n: usize,
}

impl GameSpec {
    pub fn new(
        density1: SymmetricDensity,
        density2: SymmetricDensity,
        prior: PreferencePrior,
        n: usize,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            density1,
            density2,
            prior,
            n,
        })
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.density1, self.density2, self.prior, n)
    }

    pub fn means(&self) -> (f64, f64) {
        (self.density1.mean(), self.density2.mean())
    }

    /// Sources exchanged and the prior reflected, i.e. the same game seen
    /// with the roles of `X₁` and `X₂` swapped.
    pub fn exchanged(&self) -> Self {
        Self {
            density1: self.density2,
            density2: self.density1,
            prior: self.prior.reflected(),
            n: self.n,
        }
    }

    /// `true` when a content density has compact support, where the kernel
    /// monotonicity results only hold in the non-strict sense.
    pub fn has_compact_support(&self) -> bool {
        !(self.density1.has_full_support() && self.density2.has_full_support())
    }
}
