//! Seeded simulation of the full game.
//!
//! Rounds are grouped into fixed-size batches. Batch `b` draws from a ChaCha8
//! stream keyed by `(seed, b)`, so any subset of batches can run on any
//! thread. Merging the per-batch tallies in batch order gives the same report
//! however the work was split.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::distributions::GameSpec;
use crate::error::{Error, Result};
use crate::kernels::KernelValues;
use crate::policies::{play_round, MppdPolicy, Source, WqdPolicy};

/// Rounds per generator stream.
pub const BATCH_ROUNDS: u64 = 1 << 14;

/// Strata with fewer samples are flagged in the estimator diagnostics.
pub const MIN_STRATUM_SAMPLES: u64 = 100;

/// Minimum rounds for estimator diagnostics.
pub const MIN_DIAGNOSTIC_ROUNDS: u64 = 10_000;

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn estimate(&self) -> Estimate {
        let std_err = if self.count > 1 {
            let var = self.m2 / (self.count - 1) as f64;
            libm::sqrt(var / self.count as f64)
        } else {
            f64::NAN
        };
        Estimate {
            mean: if self.count > 0 { self.mean } else { f64::NAN },
            std_err,
            count: self.count,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub count: u64,
}

impl Estimate {
    /// `|mean − target| / std_err`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_err
    }

    pub fn within(&self, target: f64, standard_errors: f64) -> bool {
        (self.mean - target).abs() <= standard_errors * self.std_err
    }
}

/// Raw sums for one batch of rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTally {
    total: RunningStats,
    per_message: Vec<RunningStats>,
    source_one: Vec<u64>,
    /// `[m][s]`: the variable that was *not* forwarded when source `s + 1` was.
    undisclosed: Vec<[RunningStats; 2]>,
}

impl BatchTally {
    pub fn new(n: usize) -> Self {
        Self {
            total: RunningStats::default(),
            per_message: vec![RunningStats::default(); n],
            source_one: vec![0; n],
            undisclosed: vec![[RunningStats::default(); 2]; n],
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.total.merge(&other.total);
        for (a, b) in self.per_message.iter_mut().zip(&other.per_message) {
            a.merge(b);
        }
        for (a, b) in self.source_one.iter_mut().zip(&other.source_one) {
            *a += b;
        }
        for (a, b) in self.undisclosed.iter_mut().zip(&other.undisclosed) {
            a[0].merge(&b[0]);
            a[1].merge(&b[1]);
        }
    }

    pub fn rounds(&self) -> u64 {
        self.total.count()
    }
}

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn batch_count(n_rounds: u64) -> u64 {
    n_rounds.div_ceil(BATCH_ROUNDS)
}

fn batch_len(n_rounds: u64, batch: u64) -> u64 {
    (n_rounds - batch * BATCH_ROUNDS).min(BATCH_ROUNDS)
}

fn check_policies(spec: &GameSpec, wqd: &WqdPolicy, mppd: &MppdPolicy) -> Result<()> {
    if wqd.n() != mppd.n() {
        return Err(Error::MessageOutOfRange {
            message: mppd.n(),
            n: wqd.n(),
        });
    }
    if wqd.n() != spec.n {
        return Err(Error::MessageOutOfRange {
            message: wqd.n(),
            n: spec.n,
        });
    }
    Ok(())
}

/// Plays batch `batch` of an `n_rounds` simulation.
pub fn simulate_batch(
    spec: &GameSpec,
    wqd: &WqdPolicy,
    mppd: &MppdPolicy,
    n_rounds: u64,
    seed: u64,
    batch: u64,
) -> Result<BatchTally> {
    check_policies(spec, wqd, mppd)?;
    let mut rng = stream_rng(seed, batch);
    let mut tally = BatchTally::new(wqd.n());
    for _ in 0..batch_len(n_rounds, batch) {
        let theta = spec.prior.sample(&mut rng);
        let x1 = spec.density1.sample(&mut rng);
        let x2 = spec.density2.sample(&mut rng);
        let round = play_round(spec, wqd, mppd, theta, x1, x2)?;
        let m = round.message - 1;
        tally.total.push(round.loss);
        tally.per_message[m].push(round.loss);
        match round.signal.source {
            Source::One => {
                tally.source_one[m] += 1;
                tally.undisclosed[m][0].push(x2);
            }
            Source::Two => tally.undisclosed[m][1].push(x1),
        }
    }
    Ok(tally)
}

/// Mean of the variable the receiver did not see, within one
/// (message, forwarded source) stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StratumMean {
    pub message: usize,
    pub disclosed: Source,
    pub prior_mean: f64,
    pub estimate: Estimate,
    /// Fewer than [`MIN_STRATUM_SAMPLES`] observations.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationReport {
    pub n_rounds: u64,
    pub seed: u64,
    pub empirical_loss: Estimate,
    pub per_message_loss: Vec<Estimate>,
    pub per_message_count: Vec<u64>,
    /// Fraction of rounds with message `m` in which source 1 was forwarded.
    pub per_message_disclosure_rate: Vec<f64>,
    pub undisclosed_conditional_means: Vec<StratumMean>,
}

impl SimulationReport {
    pub fn from_tally(spec: &GameSpec, tally: &BatchTally, seed: u64) -> Self {
        let (mu1, mu2) = spec.means();
        let per_message_count: Vec<u64> = tally.per_message.iter().map(|s| s.count()).collect();
        let per_message_disclosure_rate = tally
            .source_one
            .iter()
            .zip(&per_message_count)
            .map(|(&k, &c)| if c > 0 { k as f64 / c as f64 } else { f64::NAN })
            .collect();
        let mut strata = Vec::with_capacity(2 * tally.undisclosed.len());
        for (m, pair) in tally.undisclosed.iter().enumerate() {
            for (disclosed, stats, prior_mean) in
                [(Source::One, &pair[0], mu2), (Source::Two, &pair[1], mu1)]
            {
                strata.push(StratumMean {
                    message: m + 1,
                    disclosed,
                    prior_mean,
                    estimate: stats.estimate(),
                    flagged: stats.count() < MIN_STRATUM_SAMPLES,
                });
            }
        }
        Self {
            n_rounds: tally.rounds(),
            seed,
            empirical_loss: tally.total.estimate(),
            per_message_loss: tally
                .per_message
                .iter()
                .map(RunningStats::estimate)
                .collect(),
            per_message_count,
            per_message_disclosure_rate,
            undisclosed_conditional_means: strata,
        }
    }
}

/// Simulates `n_rounds` independent rounds: `θ ~ π`, `X₁ ~ f₁`, `X₂ ~ f₂`.
pub fn simulate(
    spec: &GameSpec,
    wqd: &WqdPolicy,
    mppd: &MppdPolicy,
    n_rounds: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if n_rounds == 0 {
        return Err(Error::TooFewRounds { got: 0, need: 1 });
    }
    check_policies(spec, wqd, mppd)?;
    let mut tally = BatchTally::new(wqd.n());
    for batch in 0..batch_count(n_rounds) {
        tally.merge(&simulate_batch(spec, wqd, mppd, n_rounds, seed, batch)?);
    }
    Ok(SimulationReport::from_tally(spec, &tally, seed))
}

/// Undisclosed-variable means per (message, forwarded source) stratum.
pub fn estimator_diagnostics(
    spec: &GameSpec,
    wqd: &WqdPolicy,
    mppd: &MppdPolicy,
    n_rounds: u64,
    seed: u64,
) -> Result<Vec<StratumMean>> {
    if n_rounds < MIN_DIAGNOSTIC_ROUNDS {
        return Err(Error::TooFewRounds {
            got: n_rounds,
            need: MIN_DIAGNOSTIC_ROUNDS,
        });
    }
    Ok(simulate(spec, wqd, mppd, n_rounds, seed)?.undisclosed_conditional_means)
}

/// Empirical `L(w_m | θ)` at a fixed preference, sampling only the content.
pub fn empirical_message_loss(
    spec: &GameSpec,
    wqd: &WqdPolicy,
    message: usize,
    theta: f64,
    rounds: u64,
    seed: u64,
    stream: u64,
) -> Result<Estimate> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::OutsideUnitInterval {
            field: "theta",
            value: theta,
        });
    }
    if rounds == 0 {
        return Err(Error::TooFewRounds { got: 0, need: 1 });
    }
    wqd.weight(message)?;
    let means = spec.means();
    let mut rng = stream_rng(seed, stream);
    let mut stats = RunningStats::default();
    for _ in 0..rounds {
        let x1 = spec.density1.sample(&mut rng);
        let x2 = spec.density2.sample(&mut rng);
        let (e1, e2) = match wqd.select(message, x1, x2, means)? {
            Source::One => (0.0, x2 - means.1),
            Source::Two => (x1 - means.0, 0.0),
        };
        stats.push(theta * e1 * e1 + (1.0 - theta) * e2 * e2);
    }
    Ok(stats.estimate())
}

/// One point of an empirical loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub theta: f64,
    pub message: usize,
    pub empirical: Estimate,
    pub analytic: f64,
}

/// Empirical per-type loss along `theta_grid`, each point with the message
/// the receiver policy prescribes and the analytic `L(w_m | θ)` beside it.
/// Grid point `i` uses stream `i`.
pub fn empirical_loss_curve(
    spec: &GameSpec,
    wqd: &WqdPolicy,
    mppd: &MppdPolicy,
    theta_grid: &[f64],
    rounds_per_point: u64,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    check_policies(spec, wqd, mppd)?;
    theta_grid
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let message = mppd.message(theta);
            let empirical = empirical_message_loss(
                spec,
                wqd,
                message,
                theta,
                rounds_per_point,
                seed,
                i as u64,
            )?;
            let analytic = KernelValues::at(spec, wqd.weight(message)?).loss(theta);
            Ok(CurvePoint {
                theta,
                message,
                empirical,
                analytic,
            })
        })
        .collect()
}
