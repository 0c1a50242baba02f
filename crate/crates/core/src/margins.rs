//! Row and column sum vectors: parsing, validation and feasibility.

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarginsError {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0} vector is empty")]
    Empty(&'static str),
    #[error("{which} vector contains a non-positive entry at position {index}")]
    NonPositive { which: &'static str, index: usize },
    #[error("row sums total {rows} but column sums total {cols}")]
    SumMismatch { rows: u64, cols: u64 },
    #[error("total {0} exceeds the supported maximum of {max}", max = u32::MAX)]
    TooLarge(u64),
}

/// A problem instance: row sums `r` and column sums `c` with a common total.
///
/// Both vectors are stored sorted non-increasing and without zero entries.
/// The permutation back to the caller's original order is kept so that
/// tables can be reported with the user's labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Margins {
    rows: Vec<u64>,
    cols: Vec<u64>,
    total: u64,
    // row_order[k] = original index of sorted row k
    row_order: Vec<usize>,
    col_order: Vec<usize>,
}

#[derive(Deserialize)]
struct JsonMargins {
    r: Vec<i64>,
    c: Vec<i64>,
}

impl Margins {
    pub fn new(rows: Vec<u64>, cols: Vec<u64>) -> Result<Self, MarginsError> {
        if rows.is_empty() {
            return Err(MarginsError::Empty("row"));
        }
        if cols.is_empty() {
            return Err(MarginsError::Empty("column"));
        }
        if let Some(index) = rows.iter().position(|&x| x == 0) {
            return Err(MarginsError::NonPositive { which: "row", index });
        }
        if let Some(index) = cols.iter().position(|&x| x == 0) {
            return Err(MarginsError::NonPositive { which: "column", index });
        }
        let row_total: u64 = rows.iter().sum();
        let col_total: u64 = cols.iter().sum();
        if row_total != col_total {
            return Err(MarginsError::SumMismatch {
                rows: row_total,
                cols: col_total,
            });
        }
        if row_total > u64::from(u32::MAX) {
            return Err(MarginsError::TooLarge(row_total));
        }
        let (rows, row_order) = sort_desc(rows);
        let (cols, col_order) = sort_desc(cols);
        Ok(Margins {
            rows,
            cols,
            total: row_total,
            row_order,
            col_order,
        })
    }

    /// Parses either the line format (`r: ...` / `c: ...`, `#` comments) or a
    /// JSON object `{"r": [...], "c": [...]}`.
    pub fn parse(text: &str) -> Result<Self, MarginsError> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let json: JsonMargins = serde_json::from_str(trimmed).map_err(|e| MarginsError::Parse {
                line: e.line(),
                msg: e.to_string(),
            })?;
            let rows = to_positive(&json.r, "row")?;
            let cols = to_positive(&json.c, "column")?;
            return Margins::new(rows, cols);
        }

        let mut rows = None;
        let mut cols = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(':').ok_or_else(|| MarginsError::Parse {
                line: line_no,
                msg: format!("expected `r:` or `c:` prefix, got {line:?}"),
            })?;
            let slot = match key.trim() {
                "r" => &mut rows,
                "c" => &mut cols,
                other => {
                    return Err(MarginsError::Parse {
                        line: line_no,
                        msg: format!("unknown key {other:?}"),
                    })
                }
            };
            if slot.is_some() {
                return Err(MarginsError::Parse {
                    line: line_no,
                    msg: format!("duplicate `{}:` line", key.trim()),
                });
            }
            *slot = Some(parse_int_list(rest).map_err(|msg| MarginsError::Parse { line: line_no, msg })?);
        }
        let rows = rows.ok_or(MarginsError::Parse {
            line: 0,
            msg: "missing `r:` line".into(),
        })?;
        let cols = cols.ok_or(MarginsError::Parse {
            line: 0,
            msg: "missing `c:` line".into(),
        })?;
        Margins::new(
            to_positive(&rows, "row")?,
            to_positive(&cols, "column")?,
        )
    }

    /// Builds margins from two whitespace-separated integer lists.
    pub fn from_strs(rows: &str, cols: &str) -> Result<Self, MarginsError> {
        let r = parse_int_list(rows).map_err(|msg| MarginsError::Parse { line: 1, msg })?;
        let c = parse_int_list(cols).map_err(|msg| MarginsError::Parse { line: 2, msg })?;
        Margins::new(to_positive(&r, "row")?, to_positive(&c, "column")?)
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn cols(&self) -> &[u64] {
        &self.cols
    }

    /// N, the common total.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    /// Row sum at sorted index `i`; zero past the end.
    pub fn row(&self, i: usize) -> u64 {
        self.rows.get(i).copied().unwrap_or(0)
    }

    /// Column sum at sorted index `j`; zero past the end.
    pub fn col(&self, j: usize) -> u64 {
        self.cols.get(j).copied().unwrap_or(0)
    }

    /// Original (input) index of the sorted row `i`.
    pub fn original_row(&self, i: usize) -> usize {
        self.row_order[i]
    }

    pub fn original_col(&self, j: usize) -> usize {
        self.col_order[j]
    }

    /// Row sums in the order the caller supplied them.
    pub fn rows_in_input_order(&self) -> Vec<u64> {
        unsort(&self.rows, &self.row_order)
    }

    pub fn cols_in_input_order(&self) -> Vec<u64> {
        unsort(&self.cols, &self.col_order)
    }

    /// The same instance with rows and columns exchanged.
    pub fn transposed(&self) -> Margins {
        Margins {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            total: self.total,
            row_order: self.col_order.clone(),
            col_order: self.row_order.clone(),
        }
    }

    /// Returns the instance oriented so that `r_1 >= c_1`, and whether a swap
    /// was needed.
    pub fn oriented(&self) -> (Margins, bool) {
        if self.row(0) >= self.col(0) {
            (self.clone(), false)
        } else {
            (self.transposed(), true)
        }
    }

    /// Gale–Ryser: a 0/1 table exists iff for every k the k largest row sums
    /// fit into `sum_j min(c_j, k)`.
    pub fn is_feasible(&self) -> bool {
        let m = self.rows.len();
        if self.rows[0] as usize > self.cols.len() || self.cols[0] as usize > m {
            return false;
        }
        // conjugate[t] = #{j : c_j > t}, for t < m
        let mut conjugate = vec![0u64; m];
        for &c in &self.cols {
            let top = (c as usize).min(m);
            for slot in conjugate.iter_mut().take(top) {
                *slot += 1;
            }
        }
        let mut row_prefix = 0u64;
        let mut cap_prefix = 0u64;
        for (&r, &cap) in self.rows.iter().zip(&conjugate) {
            row_prefix += r;
            cap_prefix += cap;
            if row_prefix > cap_prefix {
                return false;
            }
        }
        row_prefix == cap_prefix
    }

    /// `prod_i r_i! * prod_j c_j!`, the number of token permutations that
    /// induce any fixed binary table.
    pub fn margin_factorial_product(&self) -> BigUint {
        self.rows
            .iter()
            .chain(&self.cols)
            .fold(BigUint::one(), |acc, &x| acc * factorial(x))
    }
}

/// Human-readable `r: ... / c: ...` in sorted order.
impl std::fmt::Display for Margins {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        write!(f, "r: {} / c: {}", join(&self.rows), join(&self.cols))
    }
}

#[derive(Serialize)]
struct MarginsJson<'a> {
    r: &'a [u64],
    c: &'a [u64],
    total: u64,
}

impl Serialize for Margins {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MarginsJson {
            r: &self.rows,
            c: &self.cols,
            total: self.total,
        }
        .serialize(s)
    }
}

/// x!/(x-k)!, and zero when k > x.
pub fn falling_factorial(x: u64, k: u64) -> BigUint {
    if k > x {
        return BigUint::default();
    }
    (x - k + 1..=x).fold(BigUint::one(), |acc, f| acc * f)
}

pub fn factorial(x: u64) -> BigUint {
    falling_factorial(x, x)
}

fn sort_desc(values: Vec<u64>) -> (Vec<u64>, Vec<usize>) {
    if values.windows(2).all(|w| w[0] >= w[1]) {
        let order = (0..values.len()).collect();
        return (values, order);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable: equal sums keep input order
    order.sort_by(|&a, &b| values[b].cmp(&values[a]));
    let sorted = order.iter().map(|&k| values[k]).collect();
    (sorted, order)
}

fn unsort(sorted: &[u64], order: &[usize]) -> Vec<u64> {
    let mut out = vec![0; sorted.len()];
    for (k, &orig) in order.iter().enumerate() {
        out[orig] = sorted[k];
    }
    out
}

fn parse_int_list(text: &str) -> Result<Vec<i64>, String> {
    text.split(|ch: char| ch.is_whitespace() || ch == ',')
        .filter(|tok| !tok.is_empty())
        .map(|tok| tok.parse::<i64>().map_err(|e| format!("bad integer {tok:?}: {e}")))
        .collect()
}

fn to_positive(values: &[i64], which: &'static str) -> Result<Vec<u64>, MarginsError> {
    values
        .iter()
        .enumerate()
        .map(|(index, &v)| {
            if v <= 0 {
                Err(MarginsError::NonPositive { which, index })
            } else {
                Ok(v as u64)
            }
        })
        .collect()
}
