//! Statistical checks on the sampler: chi-square uniformity against the
//! enumerated set of binary tables, and the transfer of graph properties
//! from configuration-model draws to uniform binary tables.

use std::collections::HashMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::margins::Margins;
use crate::oracle::{self, OracleError};
use crate::rng::{self, BctRng};
use crate::sampler::{ConfigurationModel, ContingencyTable, SampleError, DEFAULT_MAX_ATTEMPTS};

/// Largest |Ω| the uniformity test will enumerate.
pub const MAX_UNIFORMITY_TABLES: usize = 100_000;
/// Accepted draws per independently seeded chunk.
const CHUNK: u64 = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("no binary table has these margins")]
    Infeasible,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("need at least {needed} samples (10 per table), got {samples}")]
    TooFewSamples { samples: u64, needed: u64 },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("sampler produced a table outside the enumerated set: {0}")]
    UnknownTable(String),
    #[error("unknown property {0:?} (expected connected, has-giant-component or max-degree-<=-K)")]
    UnknownProperty(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformityResult {
    pub table_count: usize,
    /// Frequency of each enumerated table, in enumeration order.
    pub observed: Vec<u64>,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    pub samples: u64,
    pub seed: u64,
}

impl UniformityResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// Chi-square statistic, degrees of freedom and p-value of `observed`
/// against equal expected counts. One category gives `dof = 0`, `p = 1`.
pub fn chi_square_uniform(observed: &[u64]) -> (f64, usize, f64) {
    let k = observed.len();
    let total: u64 = observed.iter().sum();
    if k <= 1 || total == 0 {
        return (0.0, 0, 1.0);
    }
    let expected = total as f64 / k as f64;
    let chi2: f64 = observed
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = k - 1;
    let p = ChiSquared::new(dof as f64).expect("dof > 0").sf(chi2);
    (chi2, dof, p)
}

/// Draws `samples` tables with the rejection sampler and tests them for
/// uniformity over the enumerated binary tables.
pub fn uniformity_test(margins: &Margins, samples: u64, seed: u64, threads: usize) -> Result<UniformityResult, StatsError> {
    uniformity_test_with(margins, samples, seed, threads, |model, rng| {
        model.sample_binary(rng, DEFAULT_MAX_ATTEMPTS).map(|(t, _)| t)
    })
}

/// [`uniformity_test`] with a caller-supplied sampler, so the harness can be
/// checked against deliberately broken samplers.
pub fn uniformity_test_with<F>(
    margins: &Margins,
    samples: u64,
    seed: u64,
    threads: usize,
    draw: F,
) -> Result<UniformityResult, StatsError>
where
    F: for<'m> Fn(&mut ConfigurationModel<'m>, &mut BctRng) -> Result<ContingencyTable<'m>, SampleError> + Sync,
{
    if !margins.is_feasible() {
        return Err(StatsError::Infeasible);
    }
    let omega = oracle::enumerate_tables(margins, MAX_UNIFORMITY_TABLES)?;
    let needed = 10 * omega.len() as u64;
    if samples < needed {
        return Err(StatsError::TooFewSamples { samples, needed });
    }
    let index: HashMap<String, usize> = omega
        .iter()
        .enumerate()
        .map(|(k, t)| (t.canonical_code(), k))
        .collect();

    let chunks = samples.div_ceil(CHUNK);
    let run = |chunk: u64| -> Result<Vec<u64>, StatsError> {
        let mut model = ConfigurationModel::new(margins);
        let mut rng = rng::task_rng(seed, chunk);
        let mut counts = vec![0u64; omega.len()];
        let draws = (samples - chunk * CHUNK).min(CHUNK);
        for _ in 0..draws {
            let table = draw(&mut model, &mut rng)?;
            let code = table.canonical_code();
            let k = *index.get(&code).ok_or(StatsError::UnknownTable(code))?;
            counts[k] += 1;
        }
        Ok(counts)
    };
    let merge = |mut a: Vec<u64>, b: Vec<u64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    let observed = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(run)
                .try_reduce(|| vec![0u64; omega.len()], |a, b| Ok(merge(a, b)))
        })?
    } else {
        (0..chunks).try_fold(vec![0u64; omega.len()], |acc, c| run(c).map(|v| merge(acc, v)))?
    };

    let (chi2, dof, p_value) = chi_square_uniform(&observed);
    Ok(UniformityResult {
        table_count: omega.len(),
        observed,
        chi2,
        dof,
        p_value,
        samples,
        seed,
    })
}

/// Graph predicates on the bipartite (multi)graph of a table: rows and
/// columns are vertices, nonzero entries are edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphProperty {
    Connected,
    /// Some component holds at least half of the `m + n` vertices.
    GiantComponent,
    /// Every vertex has at most `k` distinct neighbours.
    MaxDegreeAtMost(u64),
}

impl FromStr for GraphProperty {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "connected" => Ok(GraphProperty::Connected),
            "has-giant-component" | "giant-component" => Ok(GraphProperty::GiantComponent),
            _ => s
                .strip_prefix("max-degree-<=-")
                .or_else(|| s.strip_prefix("max-degree-"))
                .and_then(|k| k.parse().ok())
                .map(GraphProperty::MaxDegreeAtMost)
                .ok_or_else(|| StatsError::UnknownProperty(s.to_string())),
        }
    }
}

impl std::fmt::Display for GraphProperty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphProperty::Connected => write!(f, "connected"),
            GraphProperty::GiantComponent => write!(f, "has-giant-component"),
            GraphProperty::MaxDegreeAtMost(k) => write!(f, "max-degree-<=-{k}"),
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl GraphProperty {
    pub fn holds(&self, table: &ContingencyTable<'_>) -> bool {
        let m = table.margins().num_rows();
        let n = table.margins().num_cols();
        match *self {
            GraphProperty::Connected | GraphProperty::GiantComponent => {
                let mut parent: Vec<usize> = (0..m + n).collect();
                for (i, j, _) in table.entries() {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
                    if a != b {
                        parent[a] = b;
                    }
                }
                let mut sizes = vec![0usize; m + n];
                for v in 0..m + n {
                    let root = find(&mut parent, v);
                    sizes[root] += 1;
                }
                let largest = sizes.into_iter().max().unwrap_or(0);
                if *self == GraphProperty::Connected {
                    largest == m + n
                } else {
                    2 * largest >= m + n
                }
            }
            GraphProperty::MaxDegreeAtMost(k) => {
                let mut row_deg = vec![0u64; m];
                let mut col_deg = vec![0u64; n];
                for (i, j, _) in table.entries() {
                    row_deg[i] += 1;
                    col_deg[j] += 1;
                }
                row_deg.into_iter().chain(col_deg).all(|d| d <= k)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyTransfer {
    pub property: String,
    pub samples: u64,
    pub accepted: u64,
    /// Empirical acceptance rate.
    pub rho_hat: f64,
    /// Rate of the property over all configuration-model draws.
    pub p_config: f64,
    /// Rate over accepted (binary, hence uniform) draws; `None` if none accepted.
    pub p_uniform: Option<f64>,
    /// `1 - (1 - p_config) / rho_hat`.
    pub bound: f64,
    /// Combined standard error of `p_uniform` and `bound`.
    pub combined_se: f64,
    /// `p_uniform >= bound - 3 * combined_se`.
    pub bound_check: bool,
    pub seed: u64,
}

/// Estimates the property rate under the configuration model and under the
/// uniform law on binary tables from the same draws, and checks the lower
/// bound `p >= 1 - (1 - p') / rho` within three standard errors.
pub fn property_transfer(
    margins: &Margins,
    property: GraphProperty,
    samples: u64,
    seed: u64,
) -> Result<PropertyTransfer, StatsError> {
    if !margins.is_feasible() {
        return Err(StatsError::Infeasible);
    }
    let mut model = ConfigurationModel::new(margins);
    let mut rng = rng::rng_from_seed(seed);
    let (mut with_property, mut accepted, mut accepted_with_property) = (0u64, 0u64, 0u64);
    for _ in 0..samples {
        let table = model.draw_table(&mut rng);
        let has = property.holds(&table);
        with_property += u64::from(has);
        if table.is_binary() {
            accepted += 1;
            accepted_with_property += u64::from(has);
        }
    }
    let n = samples.max(1) as f64;
    let p_config = with_property as f64 / n;
    let rho_hat = accepted as f64 / n;
    let q = 1.0 - p_config;
    let se_q = (p_config * q / n).sqrt();
    let se_rho = (rho_hat * (1.0 - rho_hat) / n).sqrt();

    let (p_uniform, bound, combined_se, bound_check) = if accepted == 0 {
        (None, f64::NEG_INFINITY, f64::INFINITY, false)
    } else {
        let p = accepted_with_property as f64 / accepted as f64;
        let se_p = (p * (1.0 - p) / accepted as f64).sqrt();
        let bound = 1.0 - q / rho_hat;
        // delta method for q / rho
        let se_bound = ((se_q / rho_hat).powi(2) + (q * se_rho / (rho_hat * rho_hat)).powi(2)).sqrt();
        let combined = (se_p * se_p + se_bound * se_bound).sqrt();
        (Some(p), bound, combined, p >= bound - 3.0 * combined)
    };
    Ok(PropertyTransfer {
        property: property.to_string(),
        samples,
        accepted,
        rho_hat,
        p_config,
        p_uniform,
        bound,
        combined_se,
        bound_check,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn margins(r: &str, c: &str) -> Margins {
        Margins::from_strs(r, c).unwrap()
    }

    #[test]
    fn two_permutation_matrices() {
        let m = margins("1 1", "1 1");
        let r = uniformity_test(&m, 10_000, 1, 1).unwrap();
        assert_eq!(r.table_count, 2);
        assert_eq!(r.observed.iter().sum::<u64>(), 10_000);
        assert_eq!(r.dof, 1);
        assert!(r.passes(0.001), "{r:?}");
    }

    #[test]
    fn single_table_is_degenerate() {
        let m = margins("2 2", "2 2");
        let r = uniformity_test(&m, 100, 1, 1).unwrap();
        assert_eq!(r.table_count, 1);
        assert_eq!(r.dof, 0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.passes(0.001));
    }

    #[test]
    fn errors() {
        assert_eq!(uniformity_test(&margins("3 1", "2 2"), 100, 0, 1).unwrap_err(), StatsError::Infeasible);
        assert!(matches!(
            uniformity_test(&margins("1 1", "1 1"), 5, 0, 1),
            Err(StatsError::TooFewSamples { needed: 20, .. })
        ));
        assert!("bogus".parse::<GraphProperty>().is_err());
    }

    #[test]
    fn threads_do_not_change_tallies() {
        let m = margins("2 2 1", "2 1 1 1");
        let a = uniformity_test(&m, 5000, 3, 1).unwrap();
        let b = uniformity_test(&m, 5000, 3, 3).unwrap();
        assert_eq!(a.observed, b.observed);
    }

    #[test]
    fn chi_square_values() {
        let (chi2, dof, p) = chi_square_uniform(&[50, 50]);
        assert_eq!((chi2, dof, p), (0.0, 1, 1.0));
        let (chi2, _, p) = chi_square_uniform(&[60, 40]);
        assert!((chi2 - 4.0).abs() < 1e-12);
        assert!((p - 0.0455).abs() < 1e-3);
    }

    #[test]
    fn property_parsing_and_evaluation() {
        assert_eq!("connected".parse::<GraphProperty>().unwrap(), GraphProperty::Connected);
        assert_eq!("max-degree-<=-3".parse::<GraphProperty>().unwrap(), GraphProperty::MaxDegreeAtMost(3));
        let m = margins("1 1", "1 1");
        let diag = ContingencyTable::from_entries(&m, vec![(0, 0, 1), (1, 1, 1)]).unwrap();
        assert!(!GraphProperty::Connected.holds(&diag));
        assert!(GraphProperty::GiantComponent.holds(&diag));
        assert!(GraphProperty::MaxDegreeAtMost(1).holds(&diag));
        let m = margins("2 1", "2 1");
        let t = ContingencyTable::from_entries(&m, vec![(0, 0, 1), (0, 1, 1), (1, 0, 1)]).unwrap();
        assert!(GraphProperty::Connected.holds(&t));
        assert!(!GraphProperty::MaxDegreeAtMost(1).holds(&t));
    }

    #[test]
    fn unit_columns_make_both_laws_equal() {
        let m = margins("2 1 1", "1 1 1 1");
        for property in [GraphProperty::Connected, GraphProperty::GiantComponent] {
            let r = property_transfer(&m, property, 2000, 5).unwrap();
            assert_eq!(r.rho_hat, 1.0);
            assert_eq!(r.p_uniform, Some(r.p_config));
            assert!(r.bound_check);
        }
    }

    #[test]
    fn trivial_property_holds_everywhere() {
        let m = margins("3 2 1 1", "2 2 1 1 1");
        let r = property_transfer(&m, GraphProperty::MaxDegreeAtMost(m.total()), 2000, 1).unwrap();
        assert_eq!(r.p_config, 1.0);
        assert_eq!(r.p_uniform, Some(1.0));
        assert!(r.bound_check);
    }
}
