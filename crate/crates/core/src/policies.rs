//! Executable forms of the three equilibrium strategies and a single round of play.
//!
//! Messages are 1-based throughout, matching `m ∈ {1, …, n}`.

use alloc::vec::Vec;

use crate::distributions::GameSpec;
use crate::error::{Error, Result};
use crate::kernels::KernelCache;

/// Gap below which two consecutive weights or thresholds count as equal.
pub const ORDER_TOLERANCE: f64 = 1e-12;

/// Which content source the platform forwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "u8", try_from = "u8"))]
pub enum Source {
    One,
    Two,
}

impl Source {
    pub fn index(self) -> usize {
        match self {
            Source::One => 1,
            Source::Two => 2,
        }
    }
}

impl From<Source> for u8 {
    fn from(s: Source) -> u8 {
        s.index() as u8
    }
}

impl TryFrom<u8> for Source {
    type Error = &'static str;

    fn try_from(v: u8) -> core::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Source::One),
            2 => Ok(Source::Two),
            _ => Err("source must be 1 or 2"),
        }
    }
}

/// Weighted-quadratic disclosure: after message `m` forward source 1 iff
/// `w_m (x₁ − μ₁)² > (1 − w_m)(x₂ − μ₂)²`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WqdPolicy {
    weights: Vec<f64>,
}

impl WqdPolicy {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::OutsideUnitInterval {
                    field: "weights",
                    value: w,
                });
            }
            if i > 0 && w - weights[i - 1] <= ORDER_TOLERANCE {
                return Err(Error::WeightsNotIncreasing { index: i, value: w });
            }
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, message: usize) -> Result<f64> {
        message
            .checked_sub(1)
            .and_then(|i| self.weights.get(i).copied())
            .ok_or(Error::MessageOutOfRange {
                message,
                n: self.n(),
            })
    }

    /// Source forwarded after `message` for the realisation `(x1, x2)`.
    /// Ties go to source 2.
    pub fn select(&self, message: usize, x1: f64, x2: f64, means: (f64, f64)) -> Result<Source> {
        let w = self.weight(message)?;
        let (d1, d2) = (x1 - means.0, x2 - means.1);
        Ok(if w * d1 * d1 > (1.0 - w) * d2 * d2 {
            Source::One
        } else {
            Source::Two
        })
    }
}

/// Monotone partition of `[0, 1]` into `n` message cells.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MppdPolicy {
    thresholds: Vec<f64>,
}

impl MppdPolicy {
    /// `thresholds` runs `0 = θ₀ < θ₁ < … < θₙ = 1`.
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() < 2 {
            return Err(Error::EmptyAlphabet);
        }
        let last = thresholds.len() - 1;
        if thresholds[0] != 0.0 {
            return Err(Error::InvalidThresholds {
                index: 0,
                value: thresholds[0],
            });
        }
        if thresholds[last] != 1.0 {
            return Err(Error::InvalidThresholds {
                index: last,
                value: thresholds[last],
            });
        }
        for i in 1..thresholds.len() {
            if thresholds[i] - thresholds[i - 1] <= ORDER_TOLERANCE {
                return Err(Error::InvalidThresholds {
                    index: i,
                    value: thresholds[i],
                });
            }
        }
        Ok(Self { thresholds })
    }

    pub fn n(&self) -> usize {
        self.thresholds.len() - 1
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Message sent by a receiver with preference `theta`. A preference
    /// exactly on an interior threshold takes the lower cell.
    pub fn message(&self, theta: f64) -> usize {
        let interior = &self.thresholds[1..self.n()];
        1 + interior.partition_point(|&t| t < theta)
    }
}

/// What the receiver observes: the forwarded source and its realised value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Signal {
    pub source: Source,
    pub value: f64,
}

/// Equilibrium estimate `(x̂₁, x̂₂)`: the forwarded coordinate is exact and
/// the other is its prior mean.
pub fn estimate(signal: Signal, means: (f64, f64)) -> (f64, f64) {
    match signal.source {
        Source::One => (signal.value, means.1),
        Source::Two => (means.0, signal.value),
    }
}

/// Best message for preference `theta` given strictly increasing weights.
///
/// `L(· | θ)` is quasi-convex with its minimum at `θ`, so only the two
/// weights bracketing `θ` need comparing. Ties go to the smaller index.
pub fn receiver_best_message(cache: &KernelCache, weights: &[f64], theta: f64) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    for i in 1..weights.len() {
        if weights[i] - weights[i - 1] <= ORDER_TOLERANCE {
            return Err(Error::WeightsNotIncreasing {
                index: i,
                value: weights[i],
            });
        }
    }
    let above = weights.partition_point(|&w| w <= theta);
    if above == 0 {
        return Ok(1);
    }
    if above == weights.len() {
        return Ok(weights.len());
    }
    let lower = cache.values(weights[above - 1]).loss(theta);
    let upper = cache.values(weights[above]).loss(theta);
    Ok(if upper < lower { above + 1 } else { above })
}

/// Everything realised in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundOutcome {
    pub theta: f64,
    pub x1: f64,
    pub x2: f64,
    pub message: usize,
    pub signal: Signal,
    pub estimates: (f64, f64),
    pub loss: f64,
}

/// Message, disclosure, estimate and realised loss for one draw.
pub fn play_round(
    spec: &GameSpec,
    wqd: &WqdPolicy,
    mppd: &MppdPolicy,
    theta: f64,
    x1: f64,
    x2: f64,
) -> Result<RoundOutcome> {
    let means = spec.means();
    let message = mppd.message(theta);
    let source = wqd.select(message, x1, x2, means)?;
    let value = match source {
        Source::One => x1,
        Source::Two => x2,
    };
    let signal = Signal { source, value };
    let estimates = estimate(signal, means);
    let (e1, e2) = (x1 - estimates.0, x2 - estimates.1);
    Ok(RoundOutcome {
        theta,
        x1,
        x2,
        message,
        signal,
        estimates,
        loss: theta * e1 * e1 + (1.0 - theta) * e2 * e2,
    })
}
