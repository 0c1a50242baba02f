//! Diagnostics for when rejection sampling is fast.
//!
//! Single-instance statistics: the expected number of matched double edges
//! `mu = sum_{i,j} r_i(r_i-1) c_j(c_j-1) / (2 N(N-1))`, the condition-1
//! statistic `sum r_i(r_i-1) c_j(c_j-1) / N^2`, and the split of the index
//! set into entries with `(r_i-1)(c_j-1) >= eps N` and the rest.
//!
//! Family evaluation samples a margin family on a grid of totals and turns
//! the finite evidence into verdicts on the two optimality conditions:
//!
//! 1. `sum r_i(r_i-1) c_j(c_j-1) = O(N^2)`;
//! 2. with `kappa` the first row index whose sum is `o(N)`: the tail
//!    `sum_{i >= kappa} r_i / N` stays bounded away from zero, or
//!    `lim c_1 < kappa`.
//!
//! Condition 2 is checked in its single-sequence form (valid when the
//! entries are non-decreasing in N); non-monotone families that oscillate on
//! the grid are reported inconclusive. Every verdict carries the per-grid
//! values it came from.

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::family::{FamilyError, SequenceFamily};
use crate::margins::Margins;

fn falling2_sum(values: &[u64]) -> u128 {
    values.iter().map(|&v| u128::from(v) * u128::from(v.saturating_sub(1))).sum()
}

/// `mu(N) = [sum r_i(r_i-1)] [sum c_j(c_j-1)] / (2 N(N-1))`: the expected
/// number of matched double edges in a configuration-model draw.
pub fn mu_stat(m: &Margins) -> f64 {
    let n = m.total() as f64;
    if m.total() < 2 {
        return 0.0;
    }
    (falling2_sum(m.rows()) as f64) * (falling2_sum(m.cols()) as f64) / (2.0 * n * (n - 1.0))
}

/// [`mu_stat`] as an exact rational.
pub fn mu_exact(m: &Margins) -> BigRational {
    let n = u128::from(m.total());
    if n < 2 {
        return BigRational::from_integer(BigInt::from(0));
    }
    let num = BigInt::from(falling2_sum(m.rows())) * BigInt::from(falling2_sum(m.cols()));
    BigRational::new(num, BigInt::from(2 * n * (n - 1)))
}

/// `[sum_i r_i(r_i-1)] [sum_j c_j(c_j-1)] / N^2`; the double sum factorizes.
pub fn condition1_stat(m: &Margins) -> f64 {
    let n = m.total() as f64;
    (falling2_sum(m.rows()) as f64) * (falling2_sum(m.cols()) as f64) / (n * n)
}

/// Neumaier-compensated sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitDiagnostics {
    pub epsilon: f64,
    /// Entries `(i, j)` (0-based, sorted indices) with `(r_i-1)(c_j-1) >= eps N`.
    pub large_set: Vec<(usize, usize)>,
    pub large_set_size: usize,
    /// Prefix length of the large set in each row that has one.
    pub row_extents: Vec<usize>,
    /// `sum_{large} r_i c_j / N`.
    pub gamma: f64,
    /// `sum_{small} r_i(r_i-1) c_j(c_j-1) / (2 N^2)`.
    pub lambda: f64,
    pub mu: f64,
    /// `sum_{large} r_i(r_i-1) c_j(c_j-1) / (2 N(N-1))`.
    pub mu_large: f64,
}

impl SplitDiagnostics {
    /// `mu` reassembled from the large-set part and `lambda`.
    pub fn mu_from_parts(&self, total: u64) -> f64 {
        let n = total as f64;
        if total < 2 {
            return self.mu_large;
        }
        self.mu_large + self.lambda * n * n / (n * (n - 1.0))
    }
}

/// Partitions the entries by `(r_i-1)(c_j-1) >= eps N`.
///
/// Since both margins are sorted non-increasing, the large set is a
/// staircase: a prefix of columns in each row, with prefix lengths
/// non-increasing down the rows. It is traced with one pointer in
/// `O(m + n + |large set|)`.
pub fn split_diagnostics(m: &Margins, epsilon: f64) -> SplitDiagnostics {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let n = m.total() as f64;
    let threshold = epsilon * n;
    let rows = m.rows();
    let cols = m.cols();
    let large = |r: u64, c: u64| ((r - 1) as f64) * ((c - 1) as f64) >= threshold;

    let mut extents = Vec::new();
    let mut width = cols.len();
    for &r in rows {
        while width > 0 && !large(r, cols[width - 1]) {
            width -= 1;
        }
        if width == 0 {
            break;
        }
        extents.push(width);
    }
    assert!(
        extents.windows(2).all(|w| w[0] >= w[1]),
        "large set must be a staircase"
    );

    let mut large_set = Vec::new();
    let mut gamma = CompensatedSum::default();
    let mut large_falling = CompensatedSum::default();
    // prefix sums over columns are only needed up to the widest row
    let widest = extents.first().copied().unwrap_or(0);
    let mut col_prefix = vec![0u128; widest + 1];
    let mut col_falling_prefix = vec![0u128; widest + 1];
    for j in 0..widest {
        let c = u128::from(cols[j]);
        col_prefix[j + 1] = col_prefix[j] + c;
        col_falling_prefix[j + 1] = col_falling_prefix[j] + c * (c - 1);
    }
    for (i, &w) in extents.iter().enumerate() {
        let r = rows[i];
        large_set.extend((0..w).map(|j| (i, j)));
        gamma.add(r as f64 * col_prefix[w] as f64 / n);
        large_falling.add((r as f64) * ((r - 1) as f64) * col_falling_prefix[w] as f64);
    }

    let total_falling = (falling2_sum(rows) as f64) * (falling2_sum(cols) as f64);
    let small_falling = (total_falling - large_falling.value()).max(0.0);
    let lambda = small_falling / (2.0 * n * n);
    let mu_large = if m.total() < 2 {
        0.0
    } else {
        large_falling.value() / (2.0 * n * (n - 1.0))
    };
    SplitDiagnostics {
        epsilon,
        large_set_size: large_set.len(),
        large_set,
        row_extents: extents,
        gamma: gamma.value(),
        lambda,
        mu: mu_stat(m),
        mu_large,
    }
}

#[derive(Debug, Error)]
pub enum ConditionError {
    #[error("grid needs at least 4 points spanning 2 decades, got {0:?}")]
    Grid(Vec<u64>),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

#[derive(Debug, Clone, Copy)]
pub struct ConditionOptions {
    /// Ratios below this count as vanishing, at or above as linear in N.
    pub theta: f64,
    /// Largest fitted growth exponent still called bounded.
    pub growth_tolerance: f64,
    /// Rows and columns examined for kappa and kappa'.
    pub index_cap: usize,
    /// Relative jump between neighbouring grid points treated as oscillation.
    pub oscillation: f64,
    pub threads: usize,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            theta: 0.01,
            growth_tolerance: 0.1,
            index_cap: 64,
            oscillation: 0.5,
            threads: 1,
        }
    }
}

/// Nine geometric points from 10^3 to 10^7.
pub fn default_grid() -> Vec<u64> {
    (0..9).map(|k| 10f64.powf(3.0 + k as f64 / 2.0).round() as u64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    Bounded,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Limit {
    /// Omega(N): bounded below by theta on the upper half of the grid.
    Linear,
    /// o(N): ends below theta and decreasing.
    Vanishing,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overall {
    Optimal,
    NotOptimal,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kappa {
    /// 1-based row index.
    Index(usize),
    /// No row up to the cap was classified o(N); treated as infinite.
    BeyondCap,
}

impl std::fmt::Display for Kappa {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kappa::Index(k) => write!(f, "{k}"),
            Kappa::BeyondCap => write!(f, "beyond the index cap"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum C1Limit {
    Finite(f64),
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub n: u64,
    pub num_rows: usize,
    pub num_cols: usize,
    pub r1: u64,
    pub c1: u64,
    /// Rows and columns were exchanged to make r_1 >= c_1.
    pub swapped: bool,
    pub condition1: f64,
    pub mu: f64,
    #[serde(skip)]
    row_prefix: Vec<u64>,
    #[serde(skip)]
    col_head: Vec<u64>,
}

impl GridPoint {
    fn row(&self, i: usize) -> u64 {
        self.row_prefix[i + 1] - self.row_prefix[i]
    }

    /// `sum_{i >= k} r_i / N` for 1-based k; `None` means k is infinite.
    fn tail(&self, k: Option<usize>) -> f64 {
        match k {
            None => 0.0,
            Some(k) => (self.n - self.row_prefix[k - 1]) as f64 / self.n as f64,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub family: String,
    pub monotone: bool,
    pub grid: Vec<u64>,
    pub theta: f64,
    pub growth_tolerance: f64,
    pub index_cap: usize,
    pub points: Vec<GridPoint>,
    pub cond1_values: Vec<f64>,
    pub cond1_exponent: f64,
    pub cond1_verdict: Growth,
    /// Limit class of `r_i(N)/N` for i = 1..=cap.
    pub row_classes: Vec<Limit>,
    pub kappa_estimate: Kappa,
    /// First row not classified linear; kappa lies in [kappa_lower, kappa_estimate].
    pub kappa_lower: Kappa,
    /// First column j with limsup c_j <= 1 (auxiliary, not used in verdicts).
    pub kappa_prime: Option<usize>,
    /// `sum_{i >= kappa} r_i / N` per grid point.
    pub tail_mass: Vec<f64>,
    pub tail_limsup: f64,
    pub tail_class: Limit,
    pub c1_values: Vec<u64>,
    pub c1_limit: C1Limit,
    pub cond2_verdict: Verdict,
    pub overall: Overall,
    pub notes: Vec<String>,
}

fn evaluate_point(family: &SequenceFamily, n: u64, cap: usize) -> Result<GridPoint, FamilyError> {
    let (m, swapped) = family.generate(n)?.oriented();
    let mut row_prefix = Vec::with_capacity(cap + 2);
    row_prefix.push(0);
    for i in 0..=cap {
        row_prefix.push(row_prefix[i] + m.row(i));
    }
    Ok(GridPoint {
        n,
        num_rows: m.num_rows(),
        num_cols: m.num_cols(),
        r1: m.row(0),
        c1: m.col(0),
        swapped,
        condition1: condition1_stat(&m),
        mu: mu_stat(&m),
        row_prefix,
        col_head: (0..cap).map(|j| m.col(j)).collect(),
    })
}

/// Least-squares slope of ln(y) against ln(x) over points with y > 0.
fn log_log_slope(xs: &[u64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| ((x as f64).ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn upper_half<T>(values: &[T]) -> &[T] {
    &values[values.len() / 2..]
}

/// Classifies a ratio sequence as Omega(1) ("linear"), o(1) ("vanishing")
/// or neither.
fn classify(grid: &[u64], values: &[f64], theta: f64) -> Limit {
    let last = *values.last().expect("non-empty grid");
    if upper_half(values).iter().all(|&v| v >= theta) {
        return Limit::Linear;
    }
    if last < theta {
        if last == 0.0 {
            return Limit::Vanishing;
        }
        if log_log_slope(grid, values).is_some_and(|s| s < 0.0) {
            return Limit::Vanishing;
        }
    }
    Limit::Inconclusive
}

fn oscillates(values: &[f64], threshold: f64) -> bool {
    let scale = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    values.windows(3).any(|w| {
        let d1 = w[1] - w[0];
        let d2 = w[2] - w[1];
        d1 * d2 < 0.0 && d1.abs() / scale > threshold && d2.abs() / scale > threshold
    })
}

fn c1_limit(grid: &[u64], c1: &[u64], tol: f64) -> C1Limit {
    let upper = upper_half(c1);
    if upper.iter().all(|&c| c == upper[0]) {
        return C1Limit::Finite(upper[0] as f64);
    }
    let as_f: Vec<f64> = c1.iter().map(|&c| c as f64).collect();
    if log_log_slope(grid, &as_f).is_some_and(|s| s > tol) {
        return C1Limit::Unbounded;
    }
    C1Limit::Finite(upper.iter().copied().max().unwrap_or(0) as f64)
}

/// Condition 2 for one candidate kappa (`None` = infinite).
fn condition2_at(kappa: Option<usize>, tail: Limit, c1: C1Limit) -> Verdict {
    let c1_below = match (c1, kappa) {
        (C1Limit::Finite(c), Some(k)) => Some(c < k as f64),
        (C1Limit::Finite(_), None) => Some(true),
        (C1Limit::Unbounded, Some(_)) => Some(false),
        (C1Limit::Unbounded, None) => None,
    };
    match (tail, c1_below) {
        (Limit::Linear, _) | (_, Some(true)) => Verdict::Holds,
        (Limit::Vanishing, Some(false)) => Verdict::Violated,
        _ => Verdict::Inconclusive,
    }
}

/// Evaluates both optimality conditions for `family` over `grid`.
pub fn evaluate_family(
    family: &SequenceFamily,
    grid: &[u64],
    opts: &ConditionOptions,
) -> Result<ConditionReport, ConditionError> {
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let spans_two_decades = match (grid.first(), grid.last()) {
        (Some(&lo), Some(&hi)) => lo > 0 && hi as f64 / lo as f64 >= 100.0,
        _ => false,
    };
    if grid.len() < 4 || !spans_two_decades {
        return Err(ConditionError::Grid(grid));
    }
    let cap = opts.index_cap.max(1);

    let points: Vec<GridPoint> = if opts.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            grid.par_iter()
                .map(|&n| evaluate_point(family, n, cap))
                .collect::<Result<_, _>>()
        })?
    } else {
        grid.iter()
            .map(|&n| evaluate_point(family, n, cap))
            .collect::<Result<_, _>>()?
    };
    let mut notes = Vec::new();
    if points.iter().any(|p| p.swapped) {
        notes.push("rows and columns exchanged at some grid points so that r_1 >= c_1".into());
    }

    // condition 1
    let cond1_values: Vec<f64> = points.iter().map(|p| p.condition1).collect();
    let cond1_exponent = log_log_slope(&grid, &cond1_values).unwrap_or(0.0);
    let upper_exponent = log_log_slope(upper_half(&grid), upper_half(&cond1_values)).unwrap_or(0.0);
    let cond1_verdict = if cond1_values.iter().all(|&v| v == 0.0) || cond1_exponent <= opts.growth_tolerance {
        Growth::Bounded
    } else if upper_exponent > opts.growth_tolerance {
        Growth::Diverging
    } else {
        Growth::Inconclusive
    };

    // per-row limit classes and kappa
    let row_classes: Vec<Limit> = (0..cap)
        .map(|i| {
            let ratios: Vec<f64> = points.iter().map(|p| p.row(i) as f64 / p.n as f64).collect();
            classify(&grid, &ratios, opts.theta)
        })
        .collect();
    let first = |pred: &dyn Fn(Limit) -> bool| row_classes.iter().position(|&c| pred(c)).map(|i| i + 1);
    let kappa_hi = first(&|c| c == Limit::Vanishing);
    let kappa_lo = first(&|c| c != Limit::Linear);
    let to_kappa = |k: Option<usize>| k.map_or(Kappa::BeyondCap, Kappa::Index);

    let kappa_prime = (0..cap)
        .find(|&j| upper_half(&points).iter().all(|p| p.col_head[j] <= 1))
        .map(|j| j + 1);

    let c1_values: Vec<u64> = points.iter().map(|p| p.c1).collect();
    let c1_lim = c1_limit(&grid, &c1_values, opts.growth_tolerance);

    let tail_series = |k: Option<usize>| -> Vec<f64> { points.iter().map(|p| p.tail(k)).collect() };
    let tail_class_at = |k: Option<usize>| -> Limit {
        match k {
            None => Limit::Vanishing,
            Some(_) => classify(&grid, &tail_series(k), opts.theta),
        }
    };

    // kappa lies somewhere in [kappa_lo, kappa_hi]; the verdict stands only
    // if every candidate agrees
    let candidates: Vec<Option<usize>> = match (kappa_lo, kappa_hi) {
        (Some(lo), Some(hi)) => (lo..=hi).map(Some).collect(),
        (Some(lo), None) => (lo..=cap).map(Some).chain([None]).collect(),
        (None, _) => vec![None],
    };
    let verdicts: Vec<Verdict> = candidates
        .iter()
        .map(|&k| condition2_at(k, tail_class_at(k), c1_lim))
        .collect();
    let mut cond2_verdict = if verdicts.iter().all(|&v| v == Verdict::Holds) {
        Verdict::Holds
    } else if verdicts.iter().all(|&v| v == Verdict::Violated) {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    if candidates.len() > 1 {
        notes.push(format!(
            "kappa between {} and {}; condition 2 checked for each candidate",
            to_kappa(kappa_lo),
            to_kappa(kappa_hi)
        ));
    }

    if row_classes[0] == Limit::Vanishing {
        // r_1 = o(N): kappa = 1 and the tail is all of N
        cond2_verdict = Verdict::Holds;
        notes.push("r_1 = o(N): condition 2 holds automatically".into());
    } else if !family.is_monotone() && cond2_verdict != Verdict::Inconclusive {
        let tail = tail_series(kappa_hi);
        let c1f: Vec<f64> = c1_values.iter().map(|&c| c as f64).collect();
        if oscillates(&tail, opts.oscillation) || oscillates(&c1f, opts.oscillation) {
            cond2_verdict = Verdict::Inconclusive;
            notes.push("non-monotone family oscillates on the grid; condition 2 downgraded".into());
        }
    }

    let tail_mass = tail_series(kappa_hi);
    let tail_limsup = upper_half(&tail_mass).iter().copied().fold(0.0, f64::max);
    let tail_class = tail_class_at(kappa_hi);

    let overall = match (cond1_verdict, cond2_verdict) {
        (Growth::Bounded, Verdict::Holds) => Overall::Optimal,
        (Growth::Diverging, _) | (_, Verdict::Violated) => Overall::NotOptimal,
        _ => Overall::Inconclusive,
    };

    Ok(ConditionReport {
        family: family.name().to_string(),
        monotone: family.is_monotone(),
        grid,
        theta: opts.theta,
        growth_tolerance: opts.growth_tolerance,
        index_cap: cap,
        points,
        cond1_values,
        cond1_exponent,
        cond1_verdict,
        row_classes,
        kappa_estimate: to_kappa(kappa_hi),
        kappa_lower: to_kappa(kappa_lo),
        kappa_prime,
        tail_mass,
        tail_limsup,
        tail_class,
        c1_values,
        c1_limit: c1_lim,
        cond2_verdict,
        overall,
        notes,
    })
}
