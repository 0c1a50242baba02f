mod common;

use bct_core::asymptotics::{
    condition1_stat, default_grid, evaluate_family, mu_stat, split_diagnostics, ConditionOptions, Limit, Verdict,
};
use bct_core::family::SequenceFamily;
use bct_core::Margins;
use common::margin_pair;
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn condition1_is_rescaled_mu((r, c) in margin_pair(12, 40, 300)) {
        let m = Margins::new(r, c).unwrap();
        let n = m.total() as f64;
        let expected = 2.0 * mu_stat(&m) * n * (n - 1.0) / (n * n);
        prop_assert!(close(condition1_stat(&m), expected, 1e-12), "{} vs {}", condition1_stat(&m), expected);
    }

    #[test]
    fn split_partitions_mu((r, c) in margin_pair(12, 40, 300), eps in 0.01f64..3.0) {
        let m = Margins::new(r, c).unwrap();
        let d = split_diagnostics(&m, eps);
        prop_assert!(close(d.mu_from_parts(m.total()), mu_stat(&m), 1e-9));
        prop_assert_eq!(d.large_set.len(), d.large_set_size);
        for &(i, j) in &d.large_set {
            prop_assert!(((m.row(i) - 1) * (m.col(j) - 1)) as f64 >= eps * m.total() as f64);
            for (a, b) in [(i.saturating_sub(1), j), (i, j.saturating_sub(1))] {
                prop_assert!(d.large_set.contains(&(a, b)));
            }
        }
    }
}

fn sparse_grid() -> Vec<u64> {
    vec![1_000, 10_000, 100_000, 1_000_000]
}

#[test]
fn kappa_is_non_increasing_in_theta() {
    for name in ["halving-rows", "dominant-row", "unit-margins"] {
        let fam = SequenceFamily::builtin(name).unwrap();
        let mut last = None;
        for theta in [0.001, 0.005, 0.01, 0.05, 0.1, 0.3] {
            let opts = ConditionOptions { theta, ..Default::default() };
            let k = evaluate_family(&fam, &sparse_grid(), &opts).unwrap().kappa_estimate;
            if let Some(prev) = last {
                assert!(k <= prev, "{name}: theta {theta} gives {k:?} after {prev:?}");
            }
            last = Some(k);
        }
    }
}

#[test]
fn sublinear_first_row_means_condition_two_holds() {
    let families = [
        r#"{"name": "sqrt-rows", "monotone": true,
            "rows": [{"expr": "floor(sqrt(N))", "range": [1, "floor(sqrt(N))"]}],
            "cols": [{"expr": "5", "range": [1, 3]}]}"#,
        r#"{"name": "log-rows", "monotone": true,
            "rows": [{"expr": "floor(log2(N))^2", "range": [1, 4]}],
            "cols": [{"expr": "floor(N^(1/3))", "range": [1, 2]}]}"#,
    ];
    for json in families {
        let fam = SequenceFamily::from_json(json).unwrap();
        let report = evaluate_family(&fam, &default_grid(), &ConditionOptions::default()).unwrap();
        assert_eq!(report.row_classes[0], Limit::Vanishing, "{}", fam.name());
        assert_eq!(report.cond2_verdict, Verdict::Holds, "{}", fam.name());
    }
}

#[test]
fn threads_do_not_change_reports() {
    let fam = SequenceFamily::builtin("power-blocks").unwrap();
    let one = evaluate_family(&fam, &sparse_grid(), &ConditionOptions::default()).unwrap();
    let many = evaluate_family(&fam, &sparse_grid(), &ConditionOptions { threads: 3, ..Default::default() }).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
}
