#![allow(dead_code)]

use bct_core::rng::{rng_from_seed, uniform_below, BctRng};
use bct_core::Margins;
use num_bigint::BigUint;
use proptest::prelude::*;

/// Counts 0/1 matrices with the given row and column sums by trying all
/// 2^(m n) matrices. Zero sums are allowed.
pub fn naive_count(rows: &[u64], cols: &[u64]) -> u64 {
    let (m, n) = (rows.len(), cols.len());
    assert!(m * n <= 20, "naive enumeration limited to 20 cells");
    let mut count = 0;
    for mask in 0u64..(1 << (m * n)) {
        let row_ok = (0..m).all(|i| ((mask >> (i * n)) & ((1 << n) - 1)).count_ones() as u64 == rows[i]);
        if !row_ok {
            continue;
        }
        let col_ok = (0..n).all(|j| (0..m).filter(|&i| mask >> (i * n + j) & 1 == 1).count() as u64 == cols[j]);
        if col_ok {
            count += 1;
        }
    }
    count
}

pub fn factorial(k: u64) -> BigUint {
    (1..=k).fold(BigUint::from(1u32), |acc, x| acc * x)
}

/// Margins of a random 0/1 matrix with at most `max_m` x `max_n` cells,
/// a random density and total in `1..=max_total`. Always feasible.
pub fn random_feasible(rng: &mut BctRng, max_m: usize, max_n: usize, max_total: u64) -> Margins {
    loop {
        let m = 1 + uniform_below(rng, max_m as u64) as usize;
        let n = 1 + uniform_below(rng, max_n as u64) as usize;
        let density = 20 + uniform_below(rng, 60);
        let mut rows = vec![0u64; m];
        let mut cols = vec![0u64; n];
        for r in rows.iter_mut() {
            for c in cols.iter_mut() {
                if uniform_below(rng, 100) < density {
                    *r += 1;
                    *c += 1;
                }
            }
        }
        rows.retain(|&v| v > 0);
        cols.retain(|&v| v > 0);
        let total: u64 = rows.iter().sum();
        if total == 0 || total > max_total {
            continue;
        }
        return Margins::new(rows, cols).expect("sums of a matrix agree");
    }
}

pub fn feasible_suite(seed: u64, count: usize, max_m: usize, max_n: usize, max_total: u64) -> Vec<Margins> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| random_feasible(&mut rng, max_m, max_n, max_total)).collect()
}

/// Positive row and column vectors with equal sums, feasible or not.
pub fn margin_pair(max_len: usize, max_val: u64, max_total: u64) -> impl Strategy<Value = (Vec<u64>, Vec<u64>)> {
    prop::collection::vec(1..=max_val, 1..=max_len)
        .prop_filter("total too large", move |r| r.iter().sum::<u64>() <= max_total)
        .prop_flat_map(move |r| {
            let total: u64 = r.iter().sum();
            let parts = (max_len as u64).min(total) as usize;
            (Just(r), 1..=parts)
        })
        .prop_flat_map(|(r, k)| {
            let total: u64 = r.iter().sum();
            let cuts = prop::sample::subsequence((1..total).collect::<Vec<_>>(), k - 1);
            (Just(r), cuts)
        })
        .prop_map(|(r, cuts)| {
            let total: u64 = r.iter().sum();
            let mut c = Vec::with_capacity(cuts.len() + 1);
            let mut prev = 0;
            for cut in cuts.into_iter().chain(std::iter::once(total)) {
                c.push(cut - prev);
                prev = cut;
            }
            (r, c)
        })
}

pub fn example_margins() -> Margins {
    Margins::from_strs("3 2 1 1", "2 2 1 1 1").unwrap()
}
