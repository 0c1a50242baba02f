//! Exact ground truth for small instances.
//!
//! [`exact_count`] counts binary tables with a column-by-column dynamic
//! program over multisets of residual row sums. [`exact_acceptance_probability`]
//! turns the count into the probability that a configuration-model draw is
//! binary, using the fact that each binary table is induced by exactly
//! `prod r_i! prod c_j!` of the `N!` pairings. [`enumerate_matchings`] checks
//! that identity the slow way by walking every permutation.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::margins::{factorial, Margins};
use crate::sampler::{slot_owners, ContingencyTable};

pub const DEFAULT_STATE_BUDGET: u64 = 10_000_000;

/// Largest N accepted by [`enumerate_matchings`] (9! = 362 880 permutations).
pub const MAX_ENUMERATION_TOTAL: u64 = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("dynamic program exceeded its budget of {budget} states")]
    BudgetExceeded { budget: u64 },
    #[error("instance too large for exhaustive enumeration ({what})")]
    TooLarge { what: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCount {
    /// |Ω|, the number of binary tables.
    pub count: BigUint,
    /// Pr[a configuration-model draw is binary], reduced.
    pub acceptance: BigRational,
    /// Total memo entries created across all columns.
    pub dp_states: u64,
}

pub fn exact_count(margins: &Margins, budget: u64) -> Result<ExactCount, OracleError> {
    let (count, dp_states) = count_tables(margins, budget)?;
    let acceptance = acceptance_from_count(margins, &count);
    Ok(ExactCount {
        count,
        acceptance,
        dp_states,
    })
}

/// `count * prod r_i! * prod c_j! / N!` as a reduced rational.
pub fn acceptance_from_count(margins: &Margins, count: &BigUint) -> BigRational {
    let num = count * margins.margin_factorial_product();
    let den = factorial(margins.total());
    BigRational::new(num.into(), den.into())
}

pub fn exact_acceptance_probability(margins: &Margins, budget: u64) -> Result<BigRational, OracleError> {
    exact_count(margins, budget).map(|e| e.acceptance)
}

fn count_tables(margins: &Margins, budget: u64) -> Result<(BigUint, u64), OracleError> {
    let cols = margins.cols();
    let mut layer: HashMap<Vec<u64>, BigUint> = HashMap::new();
    layer.insert(margins.rows().to_vec(), BigUint::one());
    let mut states = 1u64;

    for (idx, &c) in cols.iter().enumerate() {
        let cols_left = (cols.len() - idx - 1) as u64;
        let mut next: HashMap<Vec<u64>, BigUint> = HashMap::new();
        for (state, weight) in &layer {
            let groups = group_runs(state);
            let mut picks = vec![0u64; groups.len()];
            for_each_split(&groups, 0, c, &mut picks, &mut |picks| {
                let successor = apply_picks(&groups, picks);
                // every remaining row needs a 1 in a distinct later column
                if successor.first().is_some_and(|&top| top > cols_left) {
                    return Ok(());
                }
                let ways = groups
                    .iter()
                    .zip(picks)
                    .fold(weight.clone(), |acc, (&(_, mult), &k)| acc * binomial(mult, k));
                match next.entry(successor) {
                    std::collections::hash_map::Entry::Occupied(mut e) => *e.get_mut() += ways,
                    std::collections::hash_map::Entry::Vacant(e) => {
                        states += 1;
                        if states > budget {
                            return Err(OracleError::BudgetExceeded { budget });
                        }
                        e.insert(ways);
                    }
                }
                Ok(())
            })?;
        }
        layer = next;
    }
    let count = layer.remove(&Vec::new()).unwrap_or_default();
    Ok((count, states))
}

/// Runs of equal values in a non-increasing vector: (value, multiplicity).
fn group_runs(state: &[u64]) -> Vec<(u64, u64)> {
    let mut runs: Vec<(u64, u64)> = Vec::new();
    for &v in state {
        match runs.last_mut() {
            Some((value, mult)) if *value == v => *mult += 1,
            _ => runs.push((v, 1)),
        }
    }
    runs
}

fn for_each_split<F>(
    groups: &[(u64, u64)],
    at: usize,
    remaining: u64,
    picks: &mut [u64],
    visit: &mut F,
) -> Result<(), OracleError>
where
    F: FnMut(&[u64]) -> Result<(), OracleError>,
{
    if at == groups.len() {
        return if remaining == 0 { visit(picks) } else { Ok(()) };
    }
    let capacity_after: u64 = groups[at + 1..].iter().map(|&(_, m)| m).sum();
    let lo = remaining.saturating_sub(capacity_after);
    let hi = groups[at].1.min(remaining);
    for k in lo..=hi {
        picks[at] = k;
        for_each_split(groups, at + 1, remaining - k, picks, visit)?;
    }
    picks[at] = 0;
    Ok(())
}

fn apply_picks(groups: &[(u64, u64)], picks: &[u64]) -> Vec<u64> {
    // groups are strictly decreasing, so emitting untouched copies of v
    // before decremented copies (v - 1) keeps the result sorted
    let mut out = Vec::new();
    for (&(value, mult), &k) in groups.iter().zip(picks) {
        out.extend(std::iter::repeat_n(value, (mult - k) as usize));
        if value > 1 {
            out.extend(std::iter::repeat_n(value - 1, k as usize));
        }
    }
    out
}

fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for t in 0..k {
        acc *= n - t;
        acc /= t + 1;
    }
    acc
}

/// Walks all `N!` pairings and returns the exact fraction that induce a
/// binary table. Independent of [`exact_count`].
pub fn enumerate_matchings(margins: &Margins) -> Result<BigRational, OracleError> {
    let n = margins.total();
    if n > MAX_ENUMERATION_TOTAL {
        return Err(OracleError::TooLarge {
            what: format!("N = {n} > {MAX_ENUMERATION_TOTAL}"),
        });
    }
    let n = n as usize;
    let row_of = slot_owners(margins.rows());
    let col_of = slot_owners(margins.cols());
    let width = margins.num_cols();
    let is_binary = |perm: &[usize]| {
        let mut seen: u128 = 0;
        for k in 0..n {
            let cell = row_of[k] as usize * width + col_of[perm[k]] as usize;
            if seen >> cell & 1 == 1 {
                return false;
            }
            seen |= 1 << cell;
        }
        true
    };

    // Heap's algorithm, iterative
    let mut perm: Vec<usize> = (0..n).collect();
    let mut stack = vec![0usize; n];
    let mut binary = u64::from(is_binary(&perm));
    let mut total = 1u64;
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            let swap_with = if i % 2 == 0 { 0 } else { stack[i] };
            perm.swap(swap_with, i);
            binary += u64::from(is_binary(&perm));
            total += 1;
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    debug_assert_eq!(BigUint::from(total), factorial(n as u64));
    Ok(BigRational::new(binary.into(), total.into()))
}

/// Lists every binary table with these margins (row-wise backtracking), in
/// lexicographic order of row subsets. Fails once more than `limit` tables
/// have been found.
pub fn enumerate_tables(margins: &Margins, limit: usize) -> Result<Vec<ContingencyTable<'_>>, OracleError> {
    let m = margins.num_rows();
    let mut residual: Vec<u64> = margins.cols().to_vec();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut found: Vec<Vec<Vec<usize>>> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn choose(
        margins: &Margins,
        i: usize,
        start: usize,
        need: u64,
        residual: &mut Vec<u64>,
        rows: &mut Vec<Vec<usize>>,
        found: &mut Vec<Vec<Vec<usize>>>,
        limit: usize,
    ) -> Result<(), OracleError> {
        let m = margins.num_rows();
        let n = margins.num_cols();
        if need == 0 {
            let rows_left = (m - i - 1) as u64;
            if residual.iter().any(|&c| c > rows_left) {
                return Ok(());
            }
            if i + 1 == m {
                found.push(rows.clone());
                if found.len() > limit {
                    return Err(OracleError::TooLarge {
                        what: format!("more than {limit} tables"),
                    });
                }
                return Ok(());
            }
            return choose(margins, i + 1, 0, margins.row(i + 1), residual, rows, found, limit);
        }
        for j in start..n {
            if (n - j) as u64 >= need && residual[j] > 0 {
                residual[j] -= 1;
                rows[i].push(j);
                choose(margins, i, j + 1, need - 1, residual, rows, found, limit)?;
                rows[i].pop();
                residual[j] += 1;
            }
        }
        Ok(())
    }

    choose(margins, 0, 0, margins.row(0), &mut residual, &mut rows, &mut found, limit)?;
    Ok(found
        .into_iter()
        .map(|table| {
            let entries = table
                .into_iter()
                .enumerate()
                .flat_map(|(i, cols)| cols.into_iter().map(move |j| (i, j, 1)));
            ContingencyTable::from_entries(margins, entries).expect("enumerated table respects margins")
        })
        .collect())
}
