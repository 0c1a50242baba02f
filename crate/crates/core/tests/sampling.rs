mod common;

use std::collections::HashMap;

use bct_core::estimator::{self, SamplingOptions};
use bct_core::oracle::{self, DEFAULT_STATE_BUDGET};
use bct_core::rng::rng_from_seed;
use bct_core::sampler::{ConfigurationModel, ContingencyTable, DEFAULT_MAX_ATTEMPTS};
use bct_core::stats::{self, GraphProperty};
use bct_core::{sample_binary_rejection, sample_pairing, table_from_pairing, Margins};
use common::margin_pair;
use num_traits::ToPrimitive;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_pairing_conserves_margins((r, c) in margin_pair(8, 9, 60), seed in any::<u64>()) {
        let m = Margins::new(r, c).unwrap();
        let mut rng = rng_from_seed(seed);
        let pairing = sample_pairing(&m, &mut rng);
        let table = table_from_pairing(&pairing);
        prop_assert_eq!(table.row_sums(), m.rows());
        prop_assert_eq!(table.col_sums(), m.cols());
        let mut model = ConfigurationModel::new(&m);
        let t = model.draw_table(&mut rng);
        prop_assert_eq!(t.row_sums(), m.rows());
        prop_assert_eq!(t.col_sums(), m.cols());
        let stats = model.draw_stats(&mut rng);
        prop_assert!(stats.double_edges >= stats.nonbinary_entries);
    }
}

#[test]
fn sampler_is_uniform_on_small_instances() {
    let suite = common::feasible_suite(2024, 6, 4, 4, 10);
    for (k, m) in suite.iter().enumerate() {
        let r = stats::uniformity_test(m, 100_000, 100 + k as u64, 1).unwrap();
        assert!(r.passes(0.001), "{m}: chi2 = {}, dof = {}, p = {}", r.chi2, r.dof, r.p_value);
    }
}

fn swap_rows<'a>(m: &'a Margins, t: &ContingencyTable<'_>, a: usize, b: usize) -> ContingencyTable<'a> {
    let relabel = |i: usize| if i == a { b } else if i == b { a } else { i };
    ContingencyTable::from_entries(m, t.entries().map(|(i, j, v)| (relabel(i), j, v)).collect::<Vec<_>>()).unwrap()
}

#[test]
fn equal_rows_are_exchangeable() {
    let m = Margins::from_strs("2 1 1 1", "2 2 1").unwrap();
    let samples = 60_000;
    let mut rng = rng_from_seed(9);
    let mut model = ConfigurationModel::new(&m);
    let mut freq: HashMap<String, u64> = HashMap::new();
    for _ in 0..samples {
        let (t, _) = model.sample_binary(&mut rng, DEFAULT_MAX_ATTEMPTS).unwrap();
        *freq.entry(t.canonical_code()).or_default() += 1;
    }
    let mut compared = 0;
    for t in oracle::enumerate_tables(&m, 1000).unwrap() {
        let image = swap_rows(&m, &t, 1, 3);
        let (a, b) = (freq[&t.canonical_code()] as f64, freq[&image.canonical_code()] as f64);
        let se = (a + b).sqrt();
        assert!((a - b).abs() <= 3.0 * se, "{} vs {}: {a} vs {b}", t.canonical_code(), image.canonical_code());
        compared += 1;
    }
    assert!(compared > 1);
}

#[test]
fn acceptance_frequency_converges() {
    let m = Margins::from_strs("2 2", "2 2").unwrap();
    let est = estimator::estimate_acceptance(&m, 100_000, 0.05, 17, SamplingOptions::default()).unwrap();
    assert!((est.p_hat - 2.0 / 3.0).abs() < 0.01, "{}", est.p_hat);
}

#[test]
fn unit_columns_give_identical_streams() {
    let m = Margins::from_strs("3 2 2 1", "1 1 1 1 1 1 1 1").unwrap();
    let mut a = rng_from_seed(77);
    let mut b = rng_from_seed(77);
    let mut model = ConfigurationModel::new(&m);
    for _ in 0..500 {
        let (accepted, attempts) = sample_binary_rejection(&m, &mut a, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_eq!(attempts, 1);
        let raw = model.draw_table(&mut b);
        assert_eq!(accepted, raw);
    }
}

#[test]
fn harness_catches_planted_bias() {
    let m = common::example_margins();
    let omega = oracle::enumerate_tables(&m, 1000).unwrap();
    let fallback = omega[0].clone();
    let samples = 100 * omega.len() as u64;
    let honest = stats::uniformity_test(&m, samples, 3, 1).unwrap();
    assert!(honest.passes(0.001));
    let biased = stats::uniformity_test_with(&m, samples, 3, 1, |model, rng| {
        let t = model.draw_table(rng);
        Ok(if t.is_binary() {
            t
        } else {
            ContingencyTable::from_entries(model.margins(), fallback.entries().collect::<Vec<_>>()).unwrap()
        })
    })
    .unwrap();
    assert!(!biased.passes(0.001), "p = {}", biased.p_value);
}

#[test]
fn wilson_interval_covers_exact_acceptance() {
    let suite = common::feasible_suite(31, 220, 4, 4, 12);
    let mut covered = 0;
    for (k, m) in suite.iter().enumerate() {
        let exact = oracle::exact_acceptance_probability(m, DEFAULT_STATE_BUDGET).unwrap().to_f64().unwrap();
        let est = estimator::estimate_acceptance(m, 2000, 0.05, 1000 + k as u64, SamplingOptions::default()).unwrap();
        if est.ci_low <= exact && exact <= est.ci_high {
            covered += 1;
        }
    }
    assert!(covered * 10 >= suite.len() * 9, "covered {covered} of {}", suite.len());
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let m = common::example_margins();
    let one = estimator::estimate_count(&m, 0.1, 0.1, 5, SamplingOptions::default()).unwrap();
    let four = estimator::estimate_count(&m, 0.1, 0.1, 5, SamplingOptions { threads: 4, ..Default::default() }).unwrap();
    assert_eq!(one.accepted, four.accepted);
    assert_eq!(one.samples_used, four.samples_used);
    assert_eq!(one.p_hat.to_bits(), four.p_hat.to_bits());
}

#[test]
fn double_edge_mean_error_scales_like_clt() {
    let m = Margins::from_strs("4 3 2 2 1", "3 3 2 2 1 1").unwrap();
    let mu = bct_core::asymptotics::mu_stat(&m);
    for seed in 0..8 {
        let d = estimator::empirical_double_edge_mean(&m, 20_000, seed, SamplingOptions::default()).unwrap();
        let z = (d.mean - mu).abs() / d.std_err;
        assert!(z < 4.0, "seed {seed}: mean {} vs mu {mu}, z = {z}", d.mean);
    }
}

#[test]
fn property_transfer_bound_holds() {
    let m = Margins::from_strs("3 3 2 2 2", "3 3 2 2 2").unwrap();
    for property in [GraphProperty::Connected, GraphProperty::GiantComponent, GraphProperty::MaxDegreeAtMost(2)] {
        let r = stats::property_transfer(&m, property, 20_000, 4).unwrap();
        assert!(r.bound_check, "{r:?}");
    }
}
