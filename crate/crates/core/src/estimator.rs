//! Monte Carlo estimates of the acceptance probability and of |Ω|.
//!
//! Draws are grouped into fixed-size chunks; chunk `k` always uses the
//! stream [`rng::task_rng`]`(seed, k)`. Tallies are integer sums over
//! chunks, so a result depends on `(seed, sample plan)` and not on the
//! thread count.
//!
//! Counting rests on `|Ω| = p * N! / (prod r_i! prod c_j!)` where `p` is the
//! probability that a draw is binary. [`estimate_count`] samples in doubling
//! batches until at least `ceil(3 ln(2/δ) / ε²)` draws were accepted. With
//! `n` draws and success probability `p`, the multiplicative Chernoff bound
//! gives `Pr[|p̂ - p| > εp] <= 2 exp(-n p ε² / 3)`, which is at most δ once
//! `n p >= 3 ln(2/δ) / ε²`; the accepted count is the observable proxy for
//! `n p`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

use crate::margins::{factorial, Margins};
use crate::rng;
use crate::sampler::ConfigurationModel;

/// Draws per chunk; each chunk has its own derived stream.
pub const CHUNK_SIZE: u64 = 4096;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_MAX_SAMPLES: u64 = 1 << 26;
/// Totals up to this size also get an exact-rational count reconstruction.
pub const EXACT_RECONSTRUCTION_MAX_TOTAL: u64 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no binary table has these margins")]
    Infeasible,
    #[error("acceptance too low: {accepted} of {samples} draws binary (p <= {p_upper:.3e} at the requested confidence)")]
    AcceptanceTooLow { samples: u64, accepted: u64, p_upper: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy)]
pub struct SamplingOptions {
    pub threads: usize,
    pub max_samples: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            threads: 1,
            max_samples: DEFAULT_MAX_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub accepted: u64,
    pub samples_used: u64,
    /// log2 of `p_hat * N! / prod r_i! c_j!`; `None` when nothing was accepted.
    pub log2_count: Option<f64>,
    /// Nearest integer to the estimate, for totals small enough to compute
    /// exactly.
    pub count_rounded: Option<String>,
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub seed: u64,
    pub batches: u32,
}

impl CountEstimate {
    pub fn count_f64(&self) -> Option<f64> {
        self.log2_count.map(f64::exp2)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    draws: u64,
    accepted: u64,
    double_edges: u64,
    double_edges_sq: u128,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        Tally {
            draws: self.draws + other.draws,
            accepted: self.accepted + other.accepted,
            double_edges: self.double_edges + other.double_edges,
            double_edges_sq: self.double_edges_sq + other.double_edges_sq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// binary / not binary, stopping each draw at the first doubled entry
    Acceptance,
    /// full scan for F
    DoubleEdges,
}

fn run_chunk(margins: &Margins, seed: u64, chunk: u64, draws: u64, mode: Mode) -> Tally {
    let mut model = ConfigurationModel::new(margins);
    let mut rng = rng::task_rng(seed, chunk);
    let mut tally = Tally::default();
    for _ in 0..draws {
        tally.draws += 1;
        match mode {
            Mode::Acceptance => tally.accepted += u64::from(model.draw_is_binary(&mut rng)),
            Mode::DoubleEdges => {
                let stats = model.draw_stats(&mut rng);
                tally.accepted += u64::from(stats.is_binary());
                tally.double_edges += stats.double_edges;
                tally.double_edges_sq += u128::from(stats.double_edges).pow(2);
            }
        }
    }
    tally
}

/// Runs `samples` draws in chunks `first_chunk..`, returning the merged tally
/// and the number of chunks consumed.
fn run_plan(
    margins: &Margins,
    seed: u64,
    first_chunk: u64,
    samples: u64,
    mode: Mode,
    threads: usize,
) -> (Tally, u64) {
    let chunks = samples.div_ceil(CHUNK_SIZE);
    let size_of = |k: u64| (samples - k * CHUNK_SIZE).min(CHUNK_SIZE);
    let tally = if threads <= 1 {
        (0..chunks)
            .map(|k| run_chunk(margins, seed, first_chunk + k, size_of(k), mode))
            .fold(Tally::default(), Tally::merge)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|k| run_chunk(margins, seed, first_chunk + k, size_of(k), mode))
                .reduce(Tally::default, Tally::merge)
        })
    };
    (tally, chunks)
}

/// Normal quantile for a two-sided `1 - delta` interval.
pub fn two_sided_z(delta: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - delta / 2.0)
}

/// Wilson score interval for `successes / trials` at level `1 - delta`.
pub fn wilson_interval(successes: u64, trials: u64, delta: f64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = two_sided_z(delta);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = (center - half).clamp(0.0, 1.0).min(p);
    let high = (center + half).clamp(0.0, 1.0).max(p);
    (low, high)
}

/// `log2(N! / prod r_i! prod c_j!)`.
pub fn log2_pairings_per_table_ratio(margins: &Margins) -> f64 {
    let ln = ln_factorial(margins.total())
        - margins
            .rows()
            .iter()
            .chain(margins.cols())
            .map(|&x| ln_factorial(x))
            .sum::<f64>();
    ln / std::f64::consts::LN_2
}

fn build_estimate(
    margins: &Margins,
    tally: Tally,
    epsilon: Option<f64>,
    delta: f64,
    seed: u64,
    batches: u32,
) -> CountEstimate {
    let p_hat = tally.accepted as f64 / tally.draws as f64;
    let (ci_low, ci_high) = wilson_interval(tally.accepted, tally.draws, delta);
    let log2_count = (tally.accepted > 0).then(|| p_hat.log2() + log2_pairings_per_table_ratio(margins));
    let count_rounded = (margins.total() <= EXACT_RECONSTRUCTION_MAX_TOTAL).then(|| {
        let ratio = BigRational::new(
            BigInt::from(factorial(margins.total())) * BigInt::from(tally.accepted),
            BigInt::from(margins.margin_factorial_product()) * BigInt::from(tally.draws),
        );
        ratio.round().to_integer().to_string()
    });
    CountEstimate {
        p_hat,
        ci_low,
        ci_high,
        accepted: tally.accepted,
        samples_used: tally.draws,
        log2_count,
        count_rounded,
        epsilon,
        delta,
        seed,
        batches,
    }
}

/// Fraction of `samples` independent draws that are binary, with a Wilson
/// interval at level `1 - delta`.
pub fn estimate_acceptance(
    margins: &Margins,
    samples: u64,
    delta: f64,
    seed: u64,
    opts: SamplingOptions,
) -> Result<CountEstimate, EstimateError> {
    if samples == 0 {
        return Err(EstimateError::InvalidParameter("samples must be positive".into()));
    }
    check_probability("delta", delta)?;
    let (tally, _) = run_plan(margins, seed, 0, samples, Mode::Acceptance, opts.threads);
    Ok(build_estimate(margins, tally, None, delta, seed, 1))
}

/// Accepted draws required before [`estimate_count`] stops.
pub fn accepted_target(epsilon: f64, delta: f64) -> u64 {
    (3.0 * (2.0 / delta).ln() / (epsilon * epsilon)).ceil() as u64
}

/// Estimates |Ω| to relative error `epsilon` with probability `1 - delta`.
pub fn estimate_count(
    margins: &Margins,
    epsilon: f64,
    delta: f64,
    seed: u64,
    opts: SamplingOptions,
) -> Result<CountEstimate, EstimateError> {
    check_probability("epsilon", epsilon)?;
    check_probability("delta", delta)?;
    if !margins.is_feasible() {
        return Err(EstimateError::Infeasible);
    }
    let target = accepted_target(epsilon, delta);
    let mut batch = target.div_ceil(CHUNK_SIZE) * CHUNK_SIZE;
    let mut tally = Tally::default();
    let mut next_chunk = 0u64;
    let mut batches = 0u32;
    loop {
        let budget_left = opts.max_samples.saturating_sub(tally.draws);
        if budget_left == 0 {
            let (_, p_upper) = wilson_interval(tally.accepted, tally.draws.max(1), delta);
            return Err(EstimateError::AcceptanceTooLow {
                samples: tally.draws,
                accepted: tally.accepted,
                p_upper,
            });
        }
        let this_batch = batch.min(budget_left);
        let (t, used) = run_plan(margins, seed, next_chunk, this_batch, Mode::Acceptance, opts.threads);
        tally = tally.merge(t);
        next_chunk += used;
        batches += 1;
        if tally.accepted >= target {
            return Ok(build_estimate(margins, tally, Some(epsilon), delta, seed, batches));
        }
        batch *= 2;
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoubleEdgeMean {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

/// Mean number of matched double edges F over independent full draws.
pub fn empirical_double_edge_mean(
    margins: &Margins,
    samples: u64,
    seed: u64,
    opts: SamplingOptions,
) -> Result<DoubleEdgeMean, EstimateError> {
    if samples == 0 {
        return Err(EstimateError::InvalidParameter("samples must be positive".into()));
    }
    let (tally, _) = run_plan(margins, seed, 0, samples, Mode::DoubleEdges, opts.threads);
    let n = tally.draws as f64;
    let mean = tally.double_edges as f64 / n;
    let var = if tally.draws > 1 {
        ((tally.double_edges_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(DoubleEdgeMean {
        mean,
        std_err: (var / n).sqrt(),
        samples: tally.draws,
    })
}

fn check_probability(name: &str, v: f64) -> Result<(), EstimateError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(EstimateError::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Exact count implied by an estimate, as a rational (small totals only).
pub fn estimate_as_rational(margins: &Margins, est: &CountEstimate) -> Option<BigRational> {
    if margins.total() > EXACT_RECONSTRUCTION_MAX_TOTAL || est.samples_used == 0 {
        return None;
    }
    let num = BigInt::from(factorial(margins.total())) * BigInt::from(est.accepted);
    let den = BigInt::from(margins.margin_factorial_product()) * BigInt::from(est.samples_used);
    Some(BigRational::new(num, den))
}

/// Relative error of an estimate against a known count.
pub fn relative_error(est: &CountEstimate, truth: &BigUint) -> Option<f64> {
    if truth.is_zero() {
        return None;
    }
    let truth = truth.to_f64()?;
    est.count_f64().map(|c| (c - truth).abs() / truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn margins(r: &str, c: &str) -> Margins {
        Margins::from_strs(r, c).unwrap()
    }

    #[test]
    fn always_binary_instance() {
        let m = margins("1 1 1", "1 1 1");
        let e = estimate_acceptance(&m, 1000, DEFAULT_DELTA, 1, SamplingOptions::default()).unwrap();
        assert_eq!(e.p_hat, 1.0);
        assert_eq!(e.ci_high, 1.0);
        assert!(e.ci_low > 0.99);
        assert_eq!(e.count_rounded.as_deref(), Some("6"));
    }

    #[test]
    fn never_binary_instance() {
        let m = margins("2", "2");
        let e = estimate_acceptance(&m, 1000, DEFAULT_DELTA, 1, SamplingOptions::default()).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.ci_low, 0.0);
        assert!(e.log2_count.is_none());
    }

    #[test]
    fn two_by_two_acceptance() {
        let m = margins("2 2", "2 2");
        let e = estimate_acceptance(&m, 100_000, DEFAULT_DELTA, 2024, SamplingOptions::default()).unwrap();
        assert!((e.p_hat - 2.0 / 3.0).abs() < 0.01, "{}", e.p_hat);
        assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let m = margins("3 2 1 1", "2 2 1 1 1");
        let one = estimate_acceptance(&m, 20_000, 0.05, 9, SamplingOptions::default()).unwrap();
        let four = estimate_acceptance(
            &m,
            20_000,
            0.05,
            9,
            SamplingOptions {
                threads: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(one.accepted, four.accepted);
    }

    #[test]
    fn permutation_count_is_exact_after_one_batch() {
        let m = margins("1 1 1 1 1", "1 1 1 1 1");
        let e = estimate_count(&m, 0.1, 0.05, 3, SamplingOptions::default()).unwrap();
        assert_eq!(e.batches, 1);
        assert_eq!(e.count_rounded.as_deref(), Some("120"));
        assert!((e.count_f64().unwrap() - 120.0).abs() < 1e-9);
    }

    #[test]
    fn zero_acceptance_gives_up() {
        let m = margins("2", "2");
        let err = estimate_count(
            &m,
            0.1,
            0.1,
            0,
            SamplingOptions {
                threads: 1,
                max_samples: 50_000,
            },
        );
        assert!(matches!(err, Err(EstimateError::Infeasible)));
        // a feasible instance with a tiny cap trips the give-up path
        let m = margins("3 3 3", "3 3 3");
        let err = estimate_count(
            &m,
            0.01,
            0.01,
            0,
            SamplingOptions {
                threads: 1,
                max_samples: 1000,
            },
        );
        assert!(matches!(err, Err(EstimateError::AcceptanceTooLow { samples: 1000, .. })));
    }

    #[test]
    fn parameter_validation() {
        let m = margins("1", "1");
        assert!(estimate_count(&m, 0.0, 0.1, 0, SamplingOptions::default()).is_err());
        assert!(estimate_count(&m, 0.1, 1.0, 0, SamplingOptions::default()).is_err());
        assert!(estimate_acceptance(&m, 0, 0.1, 0, SamplingOptions::default()).is_err());
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100, 0.05);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3, "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 10, 0.05);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.2 && hi < 0.35);
        assert_eq!(accepted_target(0.1, 0.1), 899);
    }

    #[test]
    fn double_edge_mean_edge_cases() {
        let m = margins("2", "2");
        let d = empirical_double_edge_mean(&m, 500, 1, SamplingOptions::default()).unwrap();
        assert_eq!(d.mean, 1.0);
        assert_eq!(d.std_err, 0.0);
        let m = margins("3 2", "1 1 1 1 1");
        let d = empirical_double_edge_mean(&m, 500, 1, SamplingOptions::default()).unwrap();
        assert_eq!(d.mean, 0.0);
    }
}
