//! Configuration-model draws and rejection sampling of binary tables.
//!
//! Row `i` owns `r_i` type-1 token slots and column `j` owns `c_j` type-2
//! token slots, both laid out contiguously in sorted order. A draw is a
//! uniformly random permutation of the type-2 slots; type-1 slot `k` is
//! matched to type-2 slot `perm[k]`. Conditioned on the induced table being
//! binary, the table is uniform over all binary tables with these margins.

use std::fmt::Write as _;

use rand_core::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::margins::Margins;
use crate::rng;

pub const DEFAULT_MAX_ATTEMPTS: u64 = 1000;

/// Largest `m * n` for which [`ContingencyTable::to_dense`] materializes.
pub const DENSE_CELL_LIMIT: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SampleError {
    #[error("no binary table has these margins")]
    Infeasible,
    #[error("no binary table after {attempts} attempts")]
    Exhausted { attempts: u64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("pairing has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("pairing is not a permutation (slot {0} repeated or out of range)")]
    NotPermutation(u32),
    #[error("entry ({0}, {1}) is out of range")]
    OutOfRange(usize, usize),
    #[error("row {0} does not sum to its margin")]
    RowSum(usize),
    #[error("column {0} does not sum to its margin")]
    ColSum(usize),
}

/// Slot-to-owner map: `sums[i]` consecutive slots labeled `i`.
pub fn slot_owners(sums: &[u64]) -> Vec<u32> {
    let total: u64 = sums.iter().sum();
    let mut out = token_vec(total as usize);
    for (owner, &s) in sums.iter().enumerate() {
        out.extend(std::iter::repeat_n(owner as u32, s as usize));
    }
    out
}

fn identity_perm(n: usize) -> Vec<u32> {
    let mut perm = token_vec(n);
    perm.extend(0..n as u32);
    perm
}

/// Empty vector with room for `len` slots. Large buffers are backed by
/// transparent huge pages where available, which cuts page faults and TLB
/// misses during the shuffle's random accesses.
fn token_vec(len: usize) -> Vec<u32> {
    let v = Vec::with_capacity(len);
    #[cfg(target_os = "linux")]
    advise_huge_pages(&v);
    v
}

#[cfg(target_os = "linux")]
fn advise_huge_pages(v: &Vec<u32>) {
    const HUGE_PAGE: usize = 2 << 20;
    let bytes = v.capacity() * std::mem::size_of::<u32>();
    if bytes < 4 * HUGE_PAGE {
        return;
    }
    let start = v.as_ptr() as usize;
    let lo = (start + HUGE_PAGE - 1) & !(HUGE_PAGE - 1);
    let hi = (start + bytes) & !(HUGE_PAGE - 1);
    if hi > lo {
        // SAFETY: [lo, hi) lies inside the vector's allocation and MADV_HUGEPAGE
        // only changes paging policy; failure is harmless and ignored.
        unsafe {
            libc::madvise(lo as *mut libc::c_void, hi - lo, libc::MADV_HUGEPAGE);
        }
    }
}

/// One configuration-model draw: type-1 slot `k` is matched to type-2 slot
/// `perm[k]`.
#[derive(Debug, Clone)]
pub struct TokenPairing<'a> {
    margins: &'a Margins,
    perm: Vec<u32>,
    row_of: Vec<u32>,
    col_of: Vec<u32>,
}

impl<'a> TokenPairing<'a> {
    /// Wraps an explicit permutation, checking that it is a bijection on
    /// `[0, N)`.
    pub fn new(margins: &'a Margins, perm: Vec<u32>) -> Result<Self, TableError> {
        let n = margins.total() as usize;
        if perm.len() != n {
            return Err(TableError::Length {
                got: perm.len(),
                expected: n,
            });
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            let slot = seen.get_mut(p as usize).ok_or(TableError::NotPermutation(p))?;
            if *slot {
                return Err(TableError::NotPermutation(p));
            }
            *slot = true;
        }
        Ok(TokenPairing {
            margins,
            perm,
            row_of: slot_owners(margins.rows()),
            col_of: slot_owners(margins.cols()),
        })
    }

    pub fn margins(&self) -> &'a Margins {
        self.margins
    }

    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    pub fn row_of(&self) -> &[u32] {
        &self.row_of
    }

    pub fn col_of(&self) -> &[u32] {
        &self.col_of
    }

    /// The `(row, column)` edge formed by type-1 slot `k`.
    pub fn edge(&self, k: usize) -> (u32, u32) {
        (self.row_of[k], self.col_of[self.perm[k] as usize])
    }

    pub fn to_table(&self) -> ContingencyTable<'a> {
        let mut builder = TableBuilder::new(self.margins.num_cols());
        builder
            .build(self.margins, &self.perm, &self.row_of, &self.col_of, false)
            .expect("full build never aborts")
    }
}

/// Draws a uniformly random pairing (Fisher–Yates, Θ(N)).
pub fn sample_pairing<'a, R: RngCore + ?Sized>(margins: &'a Margins, rng: &mut R) -> TokenPairing<'a> {
    let mut perm = identity_perm(margins.total() as usize);
    rng::shuffle(rng, &mut perm);
    TokenPairing {
        margins,
        perm,
        row_of: slot_owners(margins.rows()),
        col_of: slot_owners(margins.cols()),
    }
}

pub fn table_from_pairing<'a>(pairing: &TokenPairing<'a>) -> ContingencyTable<'a> {
    pairing.to_table()
}

/// Summary of a single draw without materializing the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DrawStats {
    /// Z, entries with count >= 2.
    pub nonbinary_entries: u64,
    /// F, matched double edges: sum of C(T[i,j], 2).
    pub double_edges: u64,
}

impl DrawStats {
    pub fn is_binary(&self) -> bool {
        self.nonbinary_entries == 0
    }
}

/// Reusable configuration-model state for one instance: slot maps plus the
/// permutation and scratch buffers, so repeated attempts do not reallocate.
pub struct ConfigurationModel<'a> {
    margins: &'a Margins,
    perm: Vec<u32>,
    row_of: Vec<u32>,
    col_of: Vec<u32>,
    builder: TableBuilder,
}

impl<'a> ConfigurationModel<'a> {
    pub fn new(margins: &'a Margins) -> Self {
        let n = margins.total() as usize;
        ConfigurationModel {
            margins,
            perm: identity_perm(n),
            row_of: slot_owners(margins.rows()),
            col_of: slot_owners(margins.cols()),
            builder: TableBuilder::new(margins.num_cols()),
        }
    }

    pub fn margins(&self) -> &'a Margins {
        self.margins
    }

    fn shuffle<R: RngCore + ?Sized>(&mut self, rng: &mut R) {
        // restart from the identity so a draw depends only on the rng stream
        for (k, p) in self.perm.iter_mut().enumerate() {
            *p = k as u32;
        }
        rng::shuffle(rng, &mut self.perm);
    }

    /// Draws a pairing and returns the full table (no early exit).
    pub fn draw_table<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> ContingencyTable<'a> {
        self.shuffle(rng);
        self.builder
            .build(self.margins, &self.perm, &self.row_of, &self.col_of, false)
            .expect("full build never aborts")
    }

    /// One rejection attempt: `Some(table)` iff the draw is binary. Table
    /// construction stops at the first entry that reaches 2.
    pub fn try_binary<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Option<ContingencyTable<'a>> {
        self.shuffle(rng);
        self.builder
            .build(self.margins, &self.perm, &self.row_of, &self.col_of, true)
    }

    /// Draws and reports only whether the table is binary (early exit).
    pub fn draw_is_binary<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> bool {
        self.shuffle(rng);
        self.builder
            .scan(&self.perm, &self.row_of, &self.col_of, true)
            .is_binary()
    }

    /// Draws and reports Z and F (no early exit).
    pub fn draw_stats<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> DrawStats {
        self.shuffle(rng);
        self.builder.scan(&self.perm, &self.row_of, &self.col_of, false)
    }

    /// Repeats independent draws until one is binary.
    pub fn sample_binary<R: RngCore + ?Sized>(
        &mut self,
        rng: &mut R,
        max_attempts: u64,
    ) -> Result<(ContingencyTable<'a>, u64), SampleError> {
        for attempt in 1..=max_attempts {
            if let Some(table) = self.try_binary(rng) {
                return Ok((table, attempt));
            }
        }
        Err(SampleError::Exhausted {
            attempts: max_attempts,
        })
    }
}

/// Rejection sampler: returns a table uniform over the binary tables with
/// the given margins and the number of attempts used.
pub fn sample_binary_rejection<'a, R: RngCore + ?Sized>(
    margins: &'a Margins,
    rng: &mut R,
    max_attempts: u64,
) -> Result<(ContingencyTable<'a>, u64), SampleError> {
    if !margins.is_feasible() {
        return Err(SampleError::Infeasible);
    }
    ConfigurationModel::new(margins).sample_binary(rng, max_attempts)
}

/// Column-stamp scratch space for building tables row by row in Θ(N).
struct TableBuilder {
    // stamp[j] == epoch  <=>  column j already seen in the current row
    stamp: Vec<u64>,
    // position of column j's entry in the current row (valid when stamped)
    slot: Vec<u32>,
    epoch: u64,
}

impl TableBuilder {
    fn new(num_cols: usize) -> Self {
        TableBuilder {
            stamp: vec![0; num_cols],
            slot: vec![0; num_cols],
            epoch: 0,
        }
    }

    fn build<'a>(
        &mut self,
        margins: &'a Margins,
        perm: &[u32],
        row_of: &[u32],
        col_of: &[u32],
        early_exit: bool,
    ) -> Option<ContingencyTable<'a>> {
        let m = margins.num_rows();
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut cols = Vec::new();
        let mut counts: Vec<u32> = Vec::new();
        row_ptr.push(0);
        let mut k = 0;
        for i in 0..m {
            self.epoch += 1;
            let start = cols.len();
            while k < row_of.len() && row_of[k] as usize == i {
                let j = col_of[perm[k] as usize] as usize;
                if self.stamp[j] == self.epoch {
                    if early_exit {
                        return None;
                    }
                    counts[self.slot[j] as usize] += 1;
                } else {
                    self.stamp[j] = self.epoch;
                    self.slot[j] = cols.len() as u32;
                    cols.push(j as u32);
                    counts.push(1);
                }
                k += 1;
            }
            // canonical column order within each row; rows are short on average
            let row_cols = &mut cols[start..];
            let row_counts = &mut counts[start..];
            if row_cols.windows(2).any(|w| w[0] > w[1]) {
                let mut pairs: Vec<(u32, u32)> =
                    row_cols.iter().copied().zip(row_counts.iter().copied()).collect();
                pairs.sort_unstable();
                for (idx, (c, n)) in pairs.into_iter().enumerate() {
                    row_cols[idx] = c;
                    row_counts[idx] = n;
                }
            }
            row_ptr.push(cols.len());
        }
        Some(ContingencyTable {
            margins,
            row_ptr,
            cols,
            counts,
        })
    }

    fn scan(&mut self, perm: &[u32], row_of: &[u32], col_of: &[u32], early_exit: bool) -> DrawStats {
        let mut stats = DrawStats::default();
        let mut current_row = u32::MAX;
        // counts per column for the current row live in `slot`
        for k in 0..perm.len() {
            if row_of[k] != current_row {
                current_row = row_of[k];
                self.epoch += 1;
            }
            let j = col_of[perm[k] as usize] as usize;
            if self.stamp[j] == self.epoch {
                let before = self.slot[j];
                if before == 1 {
                    stats.nonbinary_entries += 1;
                    if early_exit {
                        return stats;
                    }
                }
                // adding a token to an entry holding `before` tokens creates
                // `before` new double edges
                stats.double_edges += u64::from(before);
                self.slot[j] = before + 1;
            } else {
                self.stamp[j] = self.epoch;
                self.slot[j] = 1;
            }
        }
        stats
    }
}

/// Sparse `m x n` table in compressed-row form over the sorted indices of
/// its margins. Absent entries are zero; stored counts are positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable<'a> {
    margins: &'a Margins,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    counts: Vec<u32>,
}

impl<'a> ContingencyTable<'a> {
    /// Builds a table from `(row, col, count)` triples over sorted indices,
    /// checking both margin-conservation constraints. Zero counts are dropped.
    pub fn from_entries(
        margins: &'a Margins,
        entries: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self, TableError> {
        let (m, n) = (margins.num_rows(), margins.num_cols());
        let mut per_row: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m];
        for (i, j, c) in entries {
            if i >= m || j >= n {
                return Err(TableError::OutOfRange(i, j));
            }
            if c > 0 {
                per_row[i].push((j as u32, c));
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut counts = Vec::new();
        let mut col_sums = vec![0u64; n];
        for (i, mut row) in per_row.into_iter().enumerate() {
            row.sort_unstable();
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            let sum: u64 = row.iter().map(|&(_, c)| u64::from(c)).sum();
            if sum != margins.row(i) {
                return Err(TableError::RowSum(i));
            }
            for (j, c) in row {
                col_sums[j as usize] += u64::from(c);
                cols.push(j);
                counts.push(c);
            }
            row_ptr.push(cols.len());
        }
        if let Some(j) = (0..n).find(|&j| col_sums[j] != margins.col(j)) {
            return Err(TableError::ColSum(j));
        }
        Ok(ContingencyTable {
            margins,
            row_ptr,
            cols,
            counts,
        })
    }

    pub fn margins(&self) -> &'a Margins {
        self.margins
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&(j as u32)) {
            Ok(pos) => self.counts[range.start + pos],
            Err(_) => 0,
        }
    }

    /// Nonzero entries `(row, col, count)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (0..self.row_ptr.len() - 1).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k] as usize, self.counts[k]))
        })
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Z: number of entries that are at least 2.
    pub fn count_nonbinary(&self) -> u64 {
        self.counts.iter().filter(|&&c| c >= 2).count() as u64
    }

    /// F: number of matched double edges, `sum C(T[i,j], 2)`.
    pub fn count_double_edges(&self) -> u64 {
        self.counts
            .iter()
            .map(|&c| u64::from(c) * u64::from(c.saturating_sub(1)) / 2)
            .sum()
    }

    pub fn is_binary(&self) -> bool {
        self.counts.iter().all(|&c| c == 1)
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.row_ptr.len() - 1)
            .map(|i| self.counts[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(|&c| u64::from(c)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.margins.num_cols()];
        for (_, j, c) in self.entries() {
            sums[j] += u64::from(c);
        }
        sums
    }

    /// Dense matrix over sorted indices, or `None` past [`DENSE_CELL_LIMIT`].
    pub fn to_dense(&self) -> Option<Vec<Vec<u32>>> {
        let (m, n) = (self.margins.num_rows(), self.margins.num_cols());
        if m.checked_mul(n)? > DENSE_CELL_LIMIT {
            return None;
        }
        let mut dense = vec![vec![0u32; n]; m];
        for (i, j, c) in self.entries() {
            dense[i][j] = c;
        }
        Some(dense)
    }

    /// Dense matrix with rows and columns in the caller's input order.
    pub fn to_dense_input_order(&self) -> Option<Vec<Vec<u32>>> {
        let (m, n) = (self.margins.num_rows(), self.margins.num_cols());
        if m.checked_mul(n)? > DENSE_CELL_LIMIT {
            return None;
        }
        let mut dense = vec![vec![0u32; n]; m];
        for (i, j, c) in self.entries() {
            dense[self.margins.original_row(i)][self.margins.original_col(j)] = c;
        }
        Some(dense)
    }

    /// Row-major run-length code of the dense table (sorted indices), e.g.
    /// `1*2,0*1,1*1` for rows `[1 1 0] [1 ...]`. Stable and hashable.
    pub fn canonical_code(&self) -> String {
        let n = self.margins.num_cols();
        let mut out = String::new();
        let mut run: Option<(u32, usize)> = None;
        let push = |out: &mut String, v: u32, len: usize| {
            if !out.is_empty() {
                out.push(',');
            }
            let _ = write!(out, "{v}*{len}");
        };
        for i in 0..self.margins.num_rows() {
            let mut next = self.row_ptr[i];
            for j in 0..n {
                let v = if next < self.row_ptr[i + 1] && self.cols[next] as usize == j {
                    next += 1;
                    self.counts[next - 1]
                } else {
                    0
                };
                run = match run {
                    Some((rv, len)) if rv == v => Some((rv, len + 1)),
                    Some((rv, len)) => {
                        push(&mut out, rv, len);
                        Some((v, 1))
                    }
                    None => Some((v, 1)),
                };
            }
        }
        if let Some((rv, len)) = run {
            push(&mut out, rv, len);
        }
        out
    }

    /// Dense CSV, one line per row, in input order.
    pub fn to_csv(&self) -> Option<String> {
        let dense = self.to_dense_input_order()?;
        let mut out = String::new();
        for row in dense {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        Some(out)
    }

    /// Sparse edge list `i,j,count` (0-based input-order indices), sorted.
    pub fn to_edge_list(&self) -> String {
        let mut rows: Vec<(usize, usize, u32)> = self
            .entries()
            .map(|(i, j, c)| (self.margins.original_row(i), self.margins.original_col(j), c))
            .collect();
        rows.sort_unstable();
        let mut out = String::new();
        for (i, j, c) in rows {
            let _ = writeln!(out, "{i},{j},{c}");
        }
        out
    }

    pub fn summary(&self) -> TableSummary {
        TableSummary {
            nnz: self.nnz(),
            nonbinary_entries: self.count_nonbinary(),
            double_edges: self.count_double_edges(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableSummary {
    pub nnz: usize,
    pub nonbinary_entries: u64,
    pub double_edges: u64,
}

/// Parses an `i,j,count` edge list into `(row, col, count)` triples.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize, u32)>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(format!("expected i,j,count: {line:?}"));
            }
            let i = parts[0].parse().map_err(|e| format!("{line:?}: {e}"))?;
            let j = parts[1].parse().map_err(|e| format!("{line:?}: {e}"))?;
            let c = parts[2].parse().map_err(|e| format!("{line:?}: {e}"))?;
            Ok((i, j, c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn margins(r: &str, c: &str) -> Margins {
        Margins::from_strs(r, c).unwrap()
    }

    #[test]
    fn single_token_instance() {
        let m = margins("1", "1");
        let p = sample_pairing(&m, &mut rng_from_seed(9));
        assert_eq!(p.perm(), &[0]);
        let t = p.to_table();
        assert_eq!(t.to_dense().unwrap(), vec![vec![1]]);
    }

    #[test]
    fn slot_maps_follow_margins() {
        let m = margins("3 2 1 1", "2 2 1 1 1");
        let p = sample_pairing(&m, &mut rng_from_seed(1));
        assert_eq!(p.row_of(), &[0, 0, 0, 1, 1, 2, 3]);
        assert_eq!(p.col_of(), &[0, 0, 1, 1, 2, 3, 4]);
    }

    #[test]
    fn pairing_is_replayable() {
        let m = margins("3 2 1 1", "2 2 1 1 1");
        let a = sample_pairing(&m, &mut rng_from_seed(42));
        let b = sample_pairing(&m, &mut rng_from_seed(42));
        assert_eq!(a.perm(), b.perm());
        // frozen: any change to the rng or shuffle breaks replay
        assert_eq!(a.perm(), &[0, 6, 3, 2, 4, 1, 5]);
    }

    #[test]
    fn explicit_pairing_builds_expected_table() {
        // rows: 3 2 1 1; cols: 2 2 1 1 1 (type-2 slots 0,1 -> col 0; 2,3 -> col 1; 4,5,6 -> cols 2,3,4)
        // row 0 slots 0..3 -> cols 0,1,2; row 1 -> cols 0,1; row 2 -> col 3; row 3 -> col 4
        let m = margins("3 2 1 1", "2 2 1 1 1");
        let p = TokenPairing::new(&m, vec![0, 2, 4, 1, 3, 5, 6]).unwrap();
        let t = table_from_pairing(&p);
        assert_eq!(
            t.to_dense().unwrap(),
            vec![
                vec![1, 1, 1, 0, 0],
                vec![1, 1, 0, 0, 0],
                vec![0, 0, 0, 1, 0],
                vec![0, 0, 0, 0, 1],
            ]
        );
        assert_eq!(t.count_nonbinary(), 0);
        assert_eq!(t.count_double_edges(), 0);
    }

    #[test]
    fn forced_doubled_entries() {
        let m = margins("2 2", "2 2");
        // both row-0 tokens land in column 0
        let p = TokenPairing::new(&m, vec![0, 1, 2, 3]).unwrap();
        let t = p.to_table();
        assert_eq!(t.get(0, 0), 2);
        assert_eq!(t.get(1, 1), 2);
        assert_eq!(t.get(0, 1), 0);
        assert_eq!(t.count_nonbinary(), 2);
        assert_eq!(t.count_double_edges(), 2);
    }

    #[test]
    fn double_edge_counts() {
        let m = margins("3 1", "3 1");
        let t = ContingencyTable::from_entries(&m, vec![(0, 0, 3), (1, 1, 1)]).unwrap();
        assert_eq!(t.count_double_edges(), 3);
        assert_eq!(t.count_nonbinary(), 1);
        let m = margins("2 1", "2 1");
        let t = ContingencyTable::from_entries(&m, vec![(0, 0, 2), (1, 1, 1)]).unwrap();
        assert_eq!(t.count_double_edges(), 1);
        let m = margins("2 2", "2 2");
        let ones = ContingencyTable::from_entries(&m, (0..2).flat_map(|i| (0..2).map(move |j| (i, j, 1)))).unwrap();
        assert_eq!(ones.count_nonbinary(), 0);
        assert!(ones.is_binary());
    }

    #[test]
    fn bad_pairings_and_tables_rejected() {
        let m = margins("2 2", "2 2");
        assert!(matches!(TokenPairing::new(&m, vec![0, 1, 2]), Err(TableError::Length { .. })));
        assert!(matches!(TokenPairing::new(&m, vec![0, 1, 1, 3]), Err(TableError::NotPermutation(1))));
        assert!(matches!(TokenPairing::new(&m, vec![0, 1, 2, 9]), Err(TableError::NotPermutation(9))));
        assert!(matches!(
            ContingencyTable::from_entries(&m, vec![(0, 0, 2), (1, 0, 2)]),
            Err(TableError::ColSum(0))
        ));
        assert!(matches!(
            ContingencyTable::from_entries(&m, vec![(0, 0, 1)]),
            Err(TableError::RowSum(0))
        ));
    }

    #[test]
    fn stats_scan_matches_table() {
        let m = margins("4 3 3 2", "5 4 2 1");
        let mut model = ConfigurationModel::new(&m);
        for seed in 0..50 {
            let t = model.draw_table(&mut rng_from_seed(seed));
            let s = model.draw_stats(&mut rng_from_seed(seed));
            assert_eq!(s.nonbinary_entries, t.count_nonbinary());
            assert_eq!(s.double_edges, t.count_double_edges());
            assert_eq!(model.draw_is_binary(&mut rng_from_seed(seed)), t.is_binary());
            assert_eq!(model.try_binary(&mut rng_from_seed(seed)).is_some(), t.is_binary());
        }
    }

    #[test]
    fn rejection_examples() {
        let m = margins("1 1 1", "1 1 1");
        for seed in 0..20 {
            let (t, attempts) = sample_binary_rejection(&m, &mut rng_from_seed(seed), 1000).unwrap();
            assert_eq!(attempts, 1);
            assert!(t.is_binary());
        }
        let bad = margins("3 1", "2 2");
        assert_eq!(
            sample_binary_rejection(&bad, &mut rng_from_seed(0), 10),
            Err(SampleError::Infeasible)
        );
        let m = margins("2 2", "2 2");
        let (t, _) = sample_binary_rejection(&m, &mut rng_from_seed(5), 1000).unwrap();
        assert_eq!(t.to_dense().unwrap(), vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn exhaustion_reported() {
        // acceptance is 2/3 per attempt, so single-attempt budgets fail often
        let m = margins("2 2", "2 2");
        let mut rng = rng_from_seed(0);
        let mut model = ConfigurationModel::new(&m);
        let exhausted = (0..200).any(|_| model.sample_binary(&mut rng, 1).is_err());
        assert!(exhausted);
        assert_eq!(
            model.sample_binary(&mut rng, 0),
            Err(SampleError::Exhausted { attempts: 0 })
        );
    }

    #[test]
    fn output_formats_use_input_order() {
        let m = margins("1 2", "2 1");
        // sorted rows [2,1] (orig 1,0), cols [2,1] (orig 0,1)
        let t = ContingencyTable::from_entries(&m, vec![(0, 0, 1), (0, 1, 1), (1, 0, 1)]).unwrap();
        assert_eq!(t.to_csv().unwrap(), "1,0\n1,1\n");
        assert_eq!(t.to_edge_list(), "0,0,1\n1,0,1\n1,1,1\n");
        let parsed = parse_edge_list(&t.to_edge_list()).unwrap();
        let mut rs = vec![0u64; 2];
        let mut cs = vec![0u64; 2];
        for (i, j, c) in parsed {
            rs[i] += u64::from(c);
            cs[j] += u64::from(c);
        }
        assert_eq!(rs, m.rows_in_input_order());
        assert_eq!(cs, m.cols_in_input_order());
    }

    #[test]
    fn canonical_code_distinguishes_tables() {
        let m = margins("1 1", "1 1");
        let a = ContingencyTable::from_entries(&m, vec![(0, 0, 1), (1, 1, 1)]).unwrap();
        let b = ContingencyTable::from_entries(&m, vec![(0, 1, 1), (1, 0, 1)]).unwrap();
        assert_eq!(a.canonical_code(), "1*1,0*2,1*1");
        assert_eq!(b.canonical_code(), "0*1,1*2,0*1");
    }
}
