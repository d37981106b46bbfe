//! Transition matrices on the mobility graph: validation, the controlled
//! matrix, irreducibility, and stationary mass distributions.
//!
//! The matrix convention is *left stochastic* (column-stochastic): entry
//! `(i, j)` is the probability of jumping from node `j` to node `i`, so every
//! column sums to one.

use std::fmt;

/// Residual below which power iteration declares the stationary density found.
pub const STATIONARY_RESIDUAL: f64 = 1e-12;
/// Column-sum tolerance for matrices given in exact arithmetic.
pub const EXACT_COLUMN_TOL: f64 = 1e-12;
/// Column-sum tolerance for matrices ingested from finite-precision files.
pub const INGEST_COLUMN_TOL: f64 = 1e-9;

const MAX_POWER_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    EmptyMatrix,
    NotSquare { rows: usize, row: usize, len: usize },
    NegativeEntry { row: usize, col: usize, value: f64 },
    NonStochastic { col: usize, sum: f64, tol: f64 },
    OutOfRangeControl { node: usize, value: f64 },
    Reducible,
    NoConvergence { iterations: usize },
    DimensionMismatch { expected: usize, got: usize },
    BadMatrixText { line: usize, msg: String },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyMatrix => write!(f, "matrix has no rows"),
            Self::NotSquare { rows, row, len } => {
                write!(f, "matrix with {rows} rows has row {row} of length {len}")
            }
            Self::NegativeEntry { row, col, value } => {
                write!(f, "negative entry {value} at ({row}, {col})")
            }
            Self::NonStochastic { col, sum, tol } => {
                write!(f, "column {col} sums to {sum}, off by more than {tol}")
            }
            Self::OutOfRangeControl { node, value } => {
                write!(f, "control {value} at node {node} outside [0, 1]")
            }
            Self::Reducible => write!(f, "matrix is reducible (graph not strongly connected)"),
            Self::NoConvergence { iterations } => {
                write!(f, "power iteration did not converge in {iterations} iterations")
            }
            Self::DimensionMismatch { expected, got } => {
                write!(f, "expected a vector of length {expected}, got {got}")
            }
            Self::BadMatrixText { line, msg } => write!(f, "matrix file line {line}: {msg}"),
        }
    }
}

impl std::error::Error for GraphError {}

/// Column-stochastic transition matrix with cached irreducibility.
///
/// Immutable after construction; all operations return fresh values.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    /// Row-major entries; `entries[i * n + j]` is the probability of j -> i.
    entries: Vec<f64>,
    irreducible: bool,
}

impl TransitionMatrix {
    /// Validates a raw square matrix as column-stochastic.
    ///
    /// Columns whose sums deviate from one by less than `tol` are
    /// renormalized; a larger deviation is a [`GraphError::NonStochastic`]
    /// error. Irreducibility (strong connectivity of the positive-entry
    /// digraph) is checked and cached.
    pub fn from_rows(rows: &[Vec<f64>], tol: f64) -> Result<Self, GraphError> {
        let n = rows.len();
        if n == 0 {
            return Err(GraphError::EmptyMatrix);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GraphError::NotSquare { rows: n, row: i, len: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v >= 0.0) {
                    return Err(GraphError::NegativeEntry { row: i, col: j, value: v });
                }
            }
        }
        let mut entries = vec![0.0; n * n];
        for j in 0..n {
            let sum: f64 = (0..n).map(|i| rows[i][j]).sum();
            if (sum - 1.0).abs() >= tol {
                return Err(GraphError::NonStochastic { col: j, sum, tol });
            }
            for i in 0..n {
                entries[i * n + j] = rows[i][j] / sum;
            }
        }
        let mut m = Self { n, entries, irreducible: false };
        m.irreducible = m.strongly_connected();
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries, irreducible: n == 1 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Smallest entry of the matrix (zero for any sparse graph).
    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Smallest strictly positive entry, if any.
    pub fn min_positive_entry(&self) -> Option<f64> {
        self.entries
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    /// Matrix-vector product `P v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, GraphError> {
        if v.len() != self.n {
            return Err(GraphError::DimensionMismatch { expected: self.n, got: v.len() });
        }
        let mut out = vec![0.0; self.n];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = P v` without allocation; lengths must already match.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(v).map(|(p, x)| p * x).sum();
        }
    }

    /// Cumulative distribution of column `j`, for sampling the jump target.
    pub fn column_cdf(&self, j: usize) -> Vec<f64> {
        let mut acc = 0.0;
        (0..self.n)
            .map(|i| {
                acc += self.get(i, j);
                acc
            })
            .collect()
    }

    /// Builds the controlled matrix from per-node mobility controls.
    ///
    /// Off-diagonal entries shrink to `P_ij (1 - u[i])`; the diagonal absorbs
    /// the blocked mass, `P_ii + sum_{k != i} u[k] P_ki`, which keeps every
    /// column summing to one and all entries in `[0, 1]`. With every
    /// `u[i] < 1` the result inherits irreducibility.
    pub fn controlled(&self, u_chi: &[f64]) -> Result<Self, GraphError> {
        if u_chi.len() != self.n {
            return Err(GraphError::DimensionMismatch { expected: self.n, got: u_chi.len() });
        }
        for (i, &u) in u_chi.iter().enumerate() {
            if !(0.0..=1.0).contains(&u) {
                return Err(GraphError::OutOfRangeControl { node: i, value: u });
            }
        }
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    entries[i * n + j] = self.get(i, j) * (1.0 - u_chi[i]);
                }
            }
        }
        for i in 0..n {
            let mut diag = self.get(i, i);
            for k in 0..n {
                if k != i {
                    diag += u_chi[k] * self.get(k, i);
                }
            }
            entries[i * n + i] = diag.min(1.0);
        }
        let mut m = Self { n, entries, irreducible: false };
        m.irreducible = if self.irreducible && u_chi.iter().all(|&u| u < 1.0) {
            true
        } else {
            m.strongly_connected()
        };
        Ok(m)
    }

    /// Unique nonnegative fixed point of `P` scaled to `total_mass`.
    ///
    /// Power iteration with l1 renormalization; the dominant eigenvalue of a
    /// column-stochastic matrix is one, so plain iteration converges for any
    /// irreducible `P` (period-2 cycles excepted, which the damped fallback
    /// below handles).
    pub fn stationary_density(&self, total_mass: f64) -> Result<StationaryDensity, GraphError> {
        if !self.irreducible {
            return Err(GraphError::Reducible);
        }
        let n = self.n;
        let mut v = vec![1.0 / n as f64; n];
        let mut pv = vec![0.0; n];
        for iter in 0..MAX_POWER_ITERATIONS {
            self.apply_into(&v, &mut pv);
            let residual = v.iter().zip(&pv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if residual < STATIONARY_RESIDUAL {
                let sum: f64 = pv.iter().sum();
                let scale = total_mass / sum;
                return Ok(StationaryDensity { values: pv.iter().map(|x| x * scale).collect() });
            }
            // Damping breaks periodic cycles of bipartite-like chains without
            // moving the fixed point: (P + I)/2 has the same eigenvectors.
            if iter > 1000 {
                for i in 0..n {
                    pv[i] = 0.5 * (pv[i] + v[i]);
                }
            }
            let sum: f64 = pv.iter().sum();
            for i in 0..n {
                v[i] = pv[i] / sum;
            }
        }
        Err(GraphError::NoConvergence { iterations: MAX_POWER_ITERATIONS })
    }

    /// Row-sum condition `P_ii >= sum_{k != i} P_ik - 1` for every `i`.
    ///
    /// When it holds, the mass system stays globally asymptotically stable
    /// under any admissible time-varying mobility control. Any right
    /// stochastic matrix satisfies it.
    pub fn satisfies_metzler_condition(&self) -> bool {
        (0..self.n).all(|i| {
            let off: f64 = (0..self.n).filter(|&k| k != i).map(|k| self.get(i, k)).sum();
            self.get(i, i) >= off - 1.0
        })
    }

    /// Strong connectivity of the positive-entry digraph, by breadth-first
    /// search from node 0 on the graph and on its transpose.
    fn strongly_connected(&self) -> bool {
        if self.n == 1 {
            return true;
        }
        let fwd = self.reachable(false);
        let bwd = self.reachable(true);
        fwd.iter().all(|&r| r) && bwd.iter().all(|&r| r)
    }

    fn reachable(&self, transpose: bool) -> Vec<bool> {
        let n = self.n;
        let mut seen = vec![false; n];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(j) = queue.pop() {
            for i in 0..n {
                // edge j -> i iff P_ij > 0
                let p = if transpose { self.get(j, i) } else { self.get(i, j) };
                if p > 0.0 && !seen[i] {
                    seen[i] = true;
                    queue.push(i);
                }
            }
        }
        seen
    }
}

/// Stationary mass distribution: nonnegative, summing to the conserved total.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDensity {
    values: Vec<f64>,
}

impl StationaryDensity {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Parses a plain-text delimited matrix: one row per line, entries separated
/// by commas or whitespace, `#` comments and blank lines skipped.
pub fn parse_delimited_matrix(text: &str) -> Result<Vec<Vec<f64>>, GraphError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(|tok| {
                tok.parse::<f64>().map_err(|e| GraphError::BadMatrixText {
                    line: lineno + 1,
                    msg: format!("bad entry {tok:?}: {e}"),
                })
            })
            .collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(GraphError::EmptyMatrix);
    }
    Ok(rows)
}

/// Transposes raw rows, for matrices stored in row-stochastic orientation.
pub fn transpose_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    (0..m).map(|j| (0..n).map(|i| rows[i][j]).collect()).collect()
}
