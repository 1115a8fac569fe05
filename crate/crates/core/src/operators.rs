//! Dense finite-dimensional realizations of the forward operator `K`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::serde_ext;
use crate::vecops;

/// Default number of subsets `fbi_check` may enumerate.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 50_000;
/// Default iteration cap for the power method.
pub const DEFAULT_POWER_ITERATIONS: usize = 100_000;

/// A real `rows × cols` matrix stored row-major. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "operator must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "operator entries",
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite operator entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "operator row length",
                    expected: cols,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for k in 0..n {
            entries[k * n + k] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut entries = vec![0.0; n * n];
        for (k, d) in diag.iter().enumerate() {
            entries[k * n + k] = *d;
        }
        Self::new(n, n, entries)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut entries = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push(m[(i, j)]);
            }
        }
        Self::new(m.nrows(), m.ncols(), entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// `Ku`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "apply: input length vs operator columns",
                expected: self.cols,
                found: u.len(),
            });
        }
        Ok((0..self.rows).map(|i| vecops::dot(self.row(i), u)).collect())
    }

    /// `K*y`.
    pub fn adjoint_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "adjoint_apply: input length vs operator rows",
                expected: self.rows,
                found: y.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, k) in out.iter_mut().zip(self.row(i)) {
                *o += k * yi;
            }
        }
        Ok(out)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    /// Column submatrix `K|_I` for the given column indices.
    pub fn column_submatrix(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, cols.len(), |i, j| self.get(i, cols[j]))
    }

    /// Gram matrix `(K|_I)* K|_I`.
    pub fn gram_submatrix(&self, cols: &[usize]) -> DMatrix<f64> {
        let sub = self.column_submatrix(cols);
        sub.transpose() * sub
    }

    /// `‖K‖² = λ_max(K*K)` by the power method started from the normalized
    /// all-ones vector.
    pub fn operator_norm_sq(&self, tol: f64) -> Result<f64> {
        self.operator_norm_sq_with_budget(tol, DEFAULT_POWER_ITERATIONS)
    }

    pub fn operator_norm_sq_with_budget(&self, tol: f64, max_iters: usize) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let n = self.cols;
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut estimate = 0.0;
        for _ in 0..max_iters {
            let kx = self.apply(&x)?;
            let y = self.adjoint_apply(&kx)?;
            // Rayleigh quotient of K*K at the unit vector x.
            let theta = vecops::norm_sq(&kx);
            estimate = theta;
            let ny = vecops::norm(&y);
            if ny == 0.0 {
                return Ok(0.0);
            }
            let residual = vecops::norm(&vecops::sub_scaled(&y, theta, &x));
            if residual <= tol * theta {
                return Ok(theta);
            }
            x = y.iter().map(|v| v / ny).collect();
        }
        Err(Error::NoConvergence {
            iterations: max_iters,
            estimate,
        })
    }

    /// `‖K‖²` from a full symmetric eigendecomposition of `K*K`.
    pub fn operator_norm_sq_dense(&self) -> f64 {
        let all: Vec<usize> = (0..self.cols).collect();
        max_eigenvalue(&self.gram_submatrix(&all))
    }

    /// Head infima `σ_k` and tail suprema `μ_k` of `‖Ku‖²/‖u‖²` for
    /// `k = 1..=k_max` (1-based, as in the compact-operator rate bound).
    ///
    /// `σ_k` ranges over vectors supported on the first `k-1` coordinates,
    /// so `σ_1` is an infimum over the empty set and reported as `+∞`.
    /// `μ_k` ranges over vectors supported on coordinates `k..=cols`.
    pub fn spectral_report(&self, k_max: usize, tol: f64) -> Result<SpectralReport> {
        if k_max == 0 || k_max > self.cols {
            return Err(Error::InvalidArgument(format!(
                "k_max must lie in 1..={}, got {k_max}",
                self.cols
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let gram = {
            let all: Vec<usize> = (0..self.cols).collect();
            self.gram_submatrix(&all)
        };
        let mut sigma = Vec::with_capacity(k_max);
        let mut mu = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let head = k - 1;
            if head == 0 {
                sigma.push(f64::INFINITY);
            } else {
                let g = gram.view((0, 0), (head, head)).into_owned();
                sigma.push(min_eigenvalue(&g).max(0.0));
            }
            let tail = self.cols - head;
            let g = gram.view((head, head), (tail, tail)).into_owned();
            mu.push(max_eigenvalue(&g).max(0.0));
        }
        Ok(SpectralReport {
            operator_norm_sq: mu[0],
            sigma,
            mu,
            tolerance: tol,
        })
    }

    /// Finite basis injectivity check of order `order`: records the smallest
    /// singular value of every column submatrix `K|_I` with `1 ≤ |I| ≤ order`
    /// (or of the explicitly supplied index sets).
    pub fn fbi_check(&self, options: &FbiOptions) -> Result<FbiReport> {
        if options.order == 0 {
            return Err(Error::InvalidArgument("FBI order must be at least 1".into()));
        }
        if !(options.threshold > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "FBI threshold must be positive, got {}",
                options.threshold
            )));
        }
        let supports: Vec<Vec<usize>> = match &options.supports {
            Some(list) => {
                let mut out = Vec::with_capacity(list.len());
                for s in list {
                    let mut s = s.clone();
                    s.sort_unstable();
                    s.dedup();
                    if s.is_empty() {
                        return Err(Error::InvalidArgument("empty support in FBI check".into()));
                    }
                    if let Some(&bad) = s.iter().find(|&&k| k >= self.cols) {
                        return Err(Error::InvalidArgument(format!(
                            "support index {bad} out of range for {} columns",
                            self.cols
                        )));
                    }
                    out.push(s);
                }
                out
            }
            None => {
                let order = options.order.min(self.cols);
                let total: u128 = (1..=order).map(|j| binomial(self.cols, j)).sum();
                if total > options.budget {
                    return Err(Error::EnumerationBudget {
                        subsets: total,
                        budget: options.budget,
                    });
                }
                (1..=order)
                    .flat_map(|j| Combinations::new(self.cols, j))
                    .collect()
            }
        };

        let mut records = Vec::with_capacity(supports.len());
        for support in supports {
            let smin = self.smallest_singular_value(&support);
            records.push(SupportRecord {
                support,
                min_singular: smin,
            });
        }
        let passes = records.iter().all(|r| r.min_singular > options.threshold);
        Ok(FbiReport {
            order: options.order,
            records,
            passes,
            threshold: options.threshold,
        })
    }

    /// Smallest singular value of `K|_I`; zero when `|I|` exceeds the row count.
    pub fn smallest_singular_value(&self, cols: &[usize]) -> f64 {
        if cols.is_empty() {
            return f64::INFINITY;
        }
        if cols.len() > self.rows {
            return 0.0;
        }
        let sub = self.column_submatrix(cols);
        sub.singular_values().iter().fold(f64::INFINITY, |m, &s| m.min(s))
    }
}

fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((0..k).collect()) } else { None };
        Self { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Head/tail spectral quantities of `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    #[serde(serialize_with = "serde_ext::f64")]
    pub operator_norm_sq: f64,
    /// `sigma[k-1] = σ_k`; `σ_1 = +∞`.
    #[serde(serialize_with = "serde_ext::vec_f64")]
    pub sigma: Vec<f64>,
    /// `mu[k-1] = μ_k`.
    #[serde(serialize_with = "serde_ext::vec_f64")]
    pub mu: Vec<f64>,
    pub tolerance: f64,
}

impl SpectralReport {
    pub fn k_max(&self) -> usize {
        self.sigma.len()
    }

    /// `σ_k`, 1-based.
    pub fn sigma(&self, k: usize) -> f64 {
        self.sigma[k - 1]
    }

    /// `μ_k`, 1-based.
    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k - 1]
    }

    /// Checks the monotonicity and ordering relations the quantities obey.
    pub fn consistency_violations(&self) -> Vec<String> {
        let tol = self.tolerance;
        let mut out = Vec::new();
        for k in 1..self.k_max() {
            if self.sigma[k] > self.sigma[k - 1] + tol {
                out.push(format!("sigma increases at k={}", k + 1));
            }
            if self.mu[k] > self.mu[k - 1] + tol {
                out.push(format!("mu increases at k={}", k + 1));
            }
        }
        for (k, s) in self.sigma.iter().enumerate().skip(1) {
            if *s > self.mu[0] + tol {
                out.push(format!("sigma_{} exceeds mu_1", k + 1));
            }
        }
        if self.mu[0] > self.operator_norm_sq + tol {
            out.push("mu_1 exceeds operator norm".into());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FbiOptions {
    pub order: usize,
    pub supports: Option<Vec<Vec<usize>>>,
    pub threshold: f64,
    pub budget: u128,
}

impl FbiOptions {
    pub fn order(order: usize) -> Self {
        Self {
            order,
            supports: None,
            threshold: 1e-8,
            budget: DEFAULT_ENUMERATION_BUDGET,
        }
    }

    pub fn supports(supports: Vec<Vec<usize>>) -> Self {
        let order = supports.iter().map(Vec::len).max().unwrap_or(1).max(1);
        Self {
            order,
            supports: Some(supports),
            threshold: 1e-8,
            budget: DEFAULT_ENUMERATION_BUDGET,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportRecord {
    pub support: Vec<usize>,
    pub min_singular: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FbiReport {
    pub order: usize,
    pub records: Vec<SupportRecord>,
    pub passes: bool,
    pub threshold: f64,
}

impl FbiReport {
    /// Recorded smallest singular value for exactly this index set.
    pub fn min_singular(&self, support: &[usize]) -> Option<f64> {
        let mut key = support.to_vec();
        key.sort_unstable();
        self.records
            .iter()
            .find(|r| r.support == key)
            .map(|r| r.min_singular)
    }

    pub fn min_over_all(&self) -> f64 {
        self.records
            .iter()
            .fold(f64::INFINITY, |m, r| m.min(r.min_singular))
    }
}
