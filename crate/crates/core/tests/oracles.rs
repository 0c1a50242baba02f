mod common;

use bct_core::margins::factorial;
use bct_core::oracle::{self, DEFAULT_STATE_BUDGET};
use bct_core::{falling_factorial, Margins};
use common::{margin_pair, naive_count};
use num_bigint::BigUint;
use num_rational::BigRational;
use proptest::prelude::*;

fn count(m: &Margins) -> BigUint {
    oracle::exact_count(m, DEFAULT_STATE_BUDGET).unwrap().count
}

#[test]
fn dp_matches_naive_on_random_suite() {
    let suite = common::feasible_suite(11, 250, 4, 4, 12);
    for m in &suite {
        assert_eq!(count(m), BigUint::from(naive_count(m.rows(), m.cols())), "{m}");
    }
}

#[test]
fn matchings_match_dp_acceptance() {
    for m in common::feasible_suite(5, 60, 4, 5, 9) {
        let by_matchings = oracle::enumerate_matchings(&m).unwrap();
        let by_dp = oracle::exact_acceptance_probability(&m, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(by_matchings, by_dp, "{m}");
    }
}

#[test]
fn enumerated_tables_are_distinct_and_complete() {
    for m in common::feasible_suite(8, 40, 4, 4, 10) {
        let tables = oracle::enumerate_tables(&m, 100_000).unwrap();
        let mut codes: Vec<String> = tables.iter().map(|t| t.canonical_code()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), tables.len());
        assert_eq!(BigUint::from(tables.len()), count(&m));
        assert!(tables.iter().all(|t| t.is_binary() && t.row_sums() == m.rows() && t.col_sums() == m.cols()));
    }
}

#[test]
fn counting_identity_holds() {
    for m in common::feasible_suite(21, 50, 5, 5, 16) {
        let c = count(&m);
        let p = oracle::exact_acceptance_probability(&m, DEFAULT_STATE_BUDGET).unwrap();
        let lhs = BigRational::from_integer((c * m.margin_factorial_product()).into());
        let rhs = p * BigRational::from_integer(factorial(m.total()).into());
        assert_eq!(lhs, rhs, "{m}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn gale_ryser_agrees_with_count((r, c) in margin_pair(5, 5, 14)) {
        let m = Margins::new(r, c).unwrap();
        prop_assert_eq!(m.is_feasible(), count(&m) > BigUint::from(0u32));
    }

    #[test]
    fn dp_agrees_with_naive((r, c) in margin_pair(4, 4, 12)) {
        let m = Margins::new(r.clone(), c.clone()).unwrap();
        prop_assert_eq!(count(&m), BigUint::from(naive_count(&r, &c)));
    }

    #[test]
    fn zero_rows_do_not_change_count((r, c) in margin_pair(3, 4, 10)) {
        let m = Margins::new(r.clone(), c.clone()).unwrap();
        let mut padded = r.clone();
        padded.push(0);
        prop_assert_eq!(count(&m), BigUint::from(naive_count(&padded, &c)));
    }

    #[test]
    fn transpose_invariance((r, c) in margin_pair(5, 5, 16)) {
        let m = Margins::new(r, c).unwrap();
        prop_assert_eq!(count(&m), count(&m.transposed()));
    }

    #[test]
    fn input_order_does_not_matter((r, c) in margin_pair(5, 5, 16), rot in 0usize..5) {
        let m = Margins::new(r.clone(), c.clone()).unwrap();
        let mut r2 = r;
        let k = rot % r2.len();
        r2.rotate_left(k);
        let mut c2 = c;
        c2.reverse();
        let shuffled = Margins::new(r2, c2).unwrap();
        prop_assert_eq!(shuffled.rows(), m.rows());
        prop_assert_eq!(count(&shuffled), count(&m));
        let resorted = Margins::new(m.rows().to_vec(), m.cols().to_vec()).unwrap();
        prop_assert_eq!(resorted.rows(), m.rows());
        prop_assert_eq!(resorted.cols(), m.cols());
    }

    #[test]
    fn falling_factorial_identity(x in 0u64..60, k in 0u64..60) {
        prop_assume!(k <= x);
        prop_assert_eq!(falling_factorial(x, k) * factorial(x - k), factorial(x));
    }
}
