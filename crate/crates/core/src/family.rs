//! Parametrized margin families `N -> (r(N), c(N))`.

use serde::Deserialize;
use thiserror::Error;

use crate::expr::{Bindings, Expr, ExprError};
use crate::margins::{Margins, MarginsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("unknown built-in family {0:?}")]
    UnknownBuiltin(String),
    #[error("bad family file: {0}")]
    Format(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("family {family} undefined at N = {n}: {msg}")]
    Undefined { family: String, n: u64, msg: String },
    #[error("family {family} at N = {n}: {source}")]
    Margins {
        family: String,
        n: u64,
        #[source]
        source: MarginsError,
    },
}

pub const BUILTIN_FAMILIES: &[&str] = &["unit-margins", "dominant-row", "halving-rows", "power-blocks"];

#[derive(Debug, Clone)]
enum Rule {
    /// r = c = [1; N]
    UnitMargins,
    /// r = [N - floor(sqrt N), 1, ...], c = [2, 1, ...]
    DominantRow,
    /// r_i = floor(N / 2^i) for i <= floor(log2 N), c = [2, 2, 1, ...], unit padded
    HalvingRows,
    /// floor(N/b) blocks of size b = floor(N^(2/3)) on both sides, unit padded
    PowerBlocks,
    Custom { rows: Vec<Piece>, cols: Vec<Piece>, pad_unit: bool },
}

#[derive(Debug, Clone)]
struct Piece {
    value: Expr,
    from: Expr,
    to: Expr,
}

/// A named rule producing valid margins with total `N` for each `N`.
#[derive(Debug, Clone)]
pub struct SequenceFamily {
    name: String,
    /// Every r_i(N) and c_j(N) is non-decreasing in N.
    monotone: bool,
    rule: Rule,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    name: String,
    rows: Vec<PieceFile>,
    cols: Vec<PieceFile>,
    #[serde(default = "default_pad")]
    pad: String,
    #[serde(default)]
    monotone: bool,
}

fn default_pad() -> String {
    "unit".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceFile {
    expr: String,
    range: [Bound; 2],
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Bound {
    Int(u64),
    Expr(String),
}

impl Bound {
    fn to_expr(&self) -> Result<Expr, ExprError> {
        match self {
            Bound::Int(v) => Ok(Expr::Num(*v as f64)),
            Bound::Expr(s) => Expr::parse(s),
        }
    }
}

impl SequenceFamily {
    pub fn builtin(name: &str) -> Result<Self, FamilyError> {
        let rule = match name {
            "unit-margins" => Rule::UnitMargins,
            "dominant-row" => Rule::DominantRow,
            "halving-rows" => Rule::HalvingRows,
            "power-blocks" => Rule::PowerBlocks,
            other => return Err(FamilyError::UnknownBuiltin(other.to_string())),
        };
        Ok(SequenceFamily {
            name: name.to_string(),
            monotone: true,
            rule,
        })
    }

    /// Parses a JSON family definition:
    ///
    /// ```json
    /// {"name": "halving", "monotone": true, "pad": "unit",
    ///  "rows": [{"expr": "floor(N / 2^i)", "range": [1, "floor(log2(N))"]}],
    ///  "cols": [{"expr": "2", "range": [1, 2]}]}
    /// ```
    ///
    /// Row expressions see `i` (1-based) and `N`, column expressions `j` and
    /// `N`; range ends are integers or expressions in `N`, inclusive. Values
    /// are floored and zero entries dropped. With `"pad": "unit"` each side
    /// is topped up with 1s to total `N`; `"none"` requires an exact total.
    pub fn from_json(text: &str) -> Result<Self, FamilyError> {
        let file: FamilyFile = serde_json::from_str(text).map_err(|e| FamilyError::Format(e.to_string()))?;
        let pad_unit = match file.pad.as_str() {
            "unit" => true,
            "none" => false,
            other => return Err(FamilyError::Format(format!("unknown pad {other:?}"))),
        };
        let pieces = |list: Vec<PieceFile>| -> Result<Vec<Piece>, FamilyError> {
            list.into_iter()
                .map(|p| {
                    Ok(Piece {
                        value: Expr::parse(&p.expr)?,
                        from: p.range[0].to_expr()?,
                        to: p.range[1].to_expr()?,
                    })
                })
                .collect()
        };
        Ok(SequenceFamily {
            name: file.name,
            monotone: file.monotone,
            rule: Rule::Custom {
                rows: pieces(file.rows)?,
                cols: pieces(file.cols)?,
                pad_unit,
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn generate(&self, n: u64) -> Result<Margins, FamilyError> {
        let undefined = |msg: String| FamilyError::Undefined {
            family: self.name.clone(),
            n,
            msg,
        };
        if n == 0 {
            return Err(undefined("N must be positive".into()));
        }
        let (rows, cols) = match &self.rule {
            Rule::UnitMargins => (vec![1; n as usize], vec![1; n as usize]),
            Rule::DominantRow => {
                let s = isqrt(n);
                if n < 3 {
                    return Err(undefined("needs N >= 3".into()));
                }
                let mut rows = vec![n - s];
                rows.extend(std::iter::repeat_n(1, s as usize));
                let mut cols = vec![2];
                cols.extend(std::iter::repeat_n(1, (n - 2) as usize));
                (rows, cols)
            }
            Rule::HalvingRows => {
                if n < 4 {
                    return Err(undefined("needs N >= 4".into()));
                }
                let levels = 63 - n.leading_zeros() as u64;
                let rows: Vec<u64> = (1..=levels).map(|i| n >> i).filter(|&v| v > 0).collect();
                (pad_units(rows, n).map_err(undefined)?, pad_units(vec![2, 2], n).map_err(undefined)?)
            }
            Rule::PowerBlocks => {
                let b = icbrt_square(n).max(1);
                let blocks = n / b;
                let side = vec![b; blocks as usize];
                (pad_units(side.clone(), n).map_err(undefined)?, pad_units(side, n).map_err(undefined)?)
            }
            Rule::Custom { rows, cols, pad_unit } => {
                let r = eval_pieces(rows, n, true).map_err(undefined)?;
                let c = eval_pieces(cols, n, false).map_err(undefined)?;
                if *pad_unit {
                    (pad_units(r, n).map_err(undefined)?, pad_units(c, n).map_err(undefined)?)
                } else {
                    (r, c)
                }
            }
        };
        Margins::new(rows, cols).map_err(|source| FamilyError::Margins {
            family: self.name.clone(),
            n,
            source,
        })
    }
}

fn eval_pieces(pieces: &[Piece], n: u64, is_row: bool) -> Result<Vec<u64>, String> {
    let nf = n as f64;
    let mut out = Vec::new();
    for piece in pieces {
        let at_n = Bindings { i: 0.0, j: 0.0, n: nf };
        let from = to_index(piece.from.eval(at_n))?;
        let to = to_index(piece.to.eval(at_n))?;
        if to >= from && to - from > 4 * n + 4 {
            return Err(format!("range {from}..={to} is larger than the total"));
        }
        for idx in from..=to {
            let b = if is_row {
                Bindings { i: idx as f64, j: 0.0, n: nf }
            } else {
                Bindings { i: 0.0, j: idx as f64, n: nf }
            };
            let v = piece.value.eval(b);
            if !v.is_finite() || v < 0.0 {
                return Err(format!("entry {idx} evaluates to {v}"));
            }
            // absorb float noise such as 99.99999999 for an exact 100
            let v = (v + 1e-9).floor() as u64;
            if v > 0 {
                out.push(v);
            }
        }
    }
    Ok(out)
}

fn to_index(v: f64) -> Result<u64, String> {
    if !v.is_finite() || v < 0.0 {
        return Err(format!("range bound evaluates to {v}"));
    }
    Ok((v + 1e-9).floor() as u64)
}

fn pad_units(mut values: Vec<u64>, n: u64) -> Result<Vec<u64>, String> {
    let sum: u64 = values.iter().sum();
    if sum > n {
        return Err(format!("entries sum to {sum} > N"));
    }
    values.extend(std::iter::repeat_n(1, (n - sum) as usize));
    Ok(values)
}

fn isqrt(n: u64) -> u64 {
    let mut s = (n as f64).sqrt() as u64;
    while s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    s
}

/// Largest b with b^3 <= n^2, i.e. floor(n^(2/3)).
fn icbrt_square(n: u64) -> u64 {
    let target = u128::from(n) * u128::from(n);
    let mut b = (n as f64).powf(2.0 / 3.0) as u128;
    while b > 0 && b * b * b > target {
        b -= 1;
    }
    while (b + 1).pow(3) <= target {
        b += 1;
    }
    b as u64
}
