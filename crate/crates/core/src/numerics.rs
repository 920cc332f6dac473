//! Dense numeric kernels shared by the rest of the crate: symmetric
//! eigendecomposition, interlacing predicates, tolerant multiset
//! cancellation and the trace-of-inverse functional.

use std::ops::Deref;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix, column-major storage.
pub type Matrix = DMatrix<f64>;

/// Absolute threshold below which an eigenvalue counts as zero.
pub const TOL_EIG: f64 = 1e-9;
/// Slack allowed in interlacing inequalities.
pub const TOL_INT: f64 = 1e-9;
/// Maximum absolute asymmetry accepted by [`sym_eig`].
pub const TOL_SYM: f64 = 1e-10;
/// Default tolerance for matching eigenvalues in [`multiset_diff_tol`].
pub const TOL_CANCEL: f64 = 1e-9;

/// Nonincreasing list of nonnegative eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Sorts `values` nonincreasing and clamps entries in `[-TOL_EIG, 0)` to zero.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
            if *v < -TOL_EIG {
                return Err(Error::NegativeEigenvalue { value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum(values))
    }

    pub fn zeros(len: usize) -> Self {
        Spectrum(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Largest eigenvalue (the optimal upper frame bound).
    pub fn max(&self) -> f64 {
        self.0.first().copied().unwrap_or(0.0)
    }

    /// Smallest eigenvalue (the optimal lower frame bound).
    pub fn min(&self) -> f64 {
        self.0.last().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Spectrum::new(self.0.iter().map(|v| v * factor).collect())
    }
}

impl Deref for Spectrum {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Spectrum::new(values)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.0
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// `values` are nonincreasing and column `k` of `vectors` is the unit
/// eigenvector for `values[k]`. Values may be negative for indefinite input;
/// use [`SymEig::spectrum`] when the input is known to be positive
/// semidefinite.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEig {
    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::new(self.values.clone())
    }
}

pub fn max_asymmetry(g: &Matrix) -> f64 {
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((g[(i, j)] - g[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_finite(g: &Matrix) -> Result<()> {
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            if !g[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Symmetric eigendecomposition with eigenvalues sorted nonincreasing.
///
/// Eigenvectors belonging to numerically equal eigenvalues are ordered by the
/// row index of their largest-magnitude component; every eigenvector is
/// signed so that this component is positive.
pub fn sym_eig(g: &Matrix) -> Result<SymEig> {
    if g.nrows() != g.ncols() {
        return Err(Error::NotSquare {
            rows: g.nrows(),
            cols: g.ncols(),
        });
    }
    check_finite(g)?;
    let asym = max_asymmetry(g);
    if asym > TOL_SYM {
        return Err(Error::Asymmetric {
            max_asymmetry: asym,
        });
    }
    let n = g.nrows();
    if n == 0 {
        return Ok(SymEig {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let dominant: Vec<usize> = (0..n)
        .map(|k| {
            let col = eig.eigenvectors.column(k);
            let mut best = 0;
            for i in 1..n {
                if col[i].abs() > col[best].abs() + 1e-12 {
                    best = i;
                }
            }
            best
        })
        .collect();

    let scale = eig.eigenvalues.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let tie = TOL_EIG * scale;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| b_desc(eig.eigenvalues[a], eig.eigenvalues[b]));
    // group numerically equal eigenvalues and order each group by dominant index
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]]).abs() <= tie
        {
            end += 1;
        }
        order[start..end].sort_by_key(|&k| dominant[k]);
        start = end;
    }

    let mut values = Vec::with_capacity(n);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let sign = if eig.eigenvectors[(dominant[k], k)] < 0.0 {
            -1.0
        } else {
            1.0
        };
        vectors.set_column(dst, &(eig.eigenvectors.column(k) * sign));
    }
    Ok(SymEig { values, vectors })
}

fn b_desc(a: f64, b: f64) -> std::cmp::Ordering {
    b.total_cmp(&a)
}

/// `alpha` (length n-1) interlaces on `beta` (length n):
/// `beta[m+1] <= alpha[m] <= beta[m]`.
pub fn interlaces_grow(alpha: &[f64], beta: &[f64]) -> Result<bool> {
    interlaces_grow_tol(alpha, beta, TOL_INT)
}

pub fn interlaces_grow_tol(alpha: &[f64], beta: &[f64], tol: f64) -> Result<bool> {
    if beta.len() != alpha.len() + 1 {
        return Err(Error::LengthMismatch {
            context: "interlaces_grow",
            expected: alpha.len() + 1,
            found: beta.len(),
        });
    }
    Ok(alpha
        .iter()
        .enumerate()
        .all(|(m, &a)| beta[m + 1] <= a + tol && a <= beta[m] + tol))
}

/// Equal-length interlacing: the spectrum before and after a rank-one
/// positive semidefinite update.
pub fn interlaces_eq(alpha: &[f64], beta: &[f64]) -> Result<bool> {
    interlaces_eq_tol(alpha, beta, TOL_INT)
}

pub fn interlaces_eq_tol(alpha: &[f64], beta: &[f64], tol: f64) -> Result<bool> {
    if alpha.len() != beta.len() {
        return Err(Error::LengthMismatch {
            context: "interlaces_eq",
            expected: alpha.len(),
            found: beta.len(),
        });
    }
    let m = alpha.len();
    if m == 0 {
        return Ok(true);
    }
    if alpha[m - 1] > beta[m - 1] + tol {
        return Ok(false);
    }
    Ok((0..m - 1).all(|i| beta[i + 1] <= alpha[i] + tol && alpha[i] <= beta[i] + tol))
}

/// Greedy tolerant multiset difference of two nonincreasing lists.
///
/// Scans `e1` in order; each entry that matches a live entry of `e2` (within
/// `tol`) cancels the first live match in `e2` together with the first live
/// matching entry of `e1`. Returns the 0-based indices of the survivors in
/// each list, in ascending order. Both index lists have the same length.
pub fn multiset_diff_tol(e1: &[f64], e2: &[f64], tol: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if e1.len() != e2.len() {
        return Err(Error::LengthMismatch {
            context: "multiset_diff_tol",
            expected: e1.len(),
            found: e2.len(),
        });
    }
    let m = e1.len();
    let mut live1 = vec![true; m];
    let mut live2 = vec![true; m];
    for i in 0..m {
        let value = e1[i];
        let Some(j) = (0..m).find(|&j| live2[j] && (e2[j] - value).abs() <= tol) else {
            continue;
        };
        if let Some(k) = (0..m).find(|&k| live1[k] && (e1[k] - value).abs() <= tol) {
            live1[k] = false;
            live2[j] = false;
        }
    }
    let survivors1: Vec<usize> = (0..m).filter(|&i| live1[i]).collect();
    let survivors2: Vec<usize> = (0..m).filter(|&j| live2[j]).collect();
    debug_assert_eq!(survivors1.len(), survivors2.len());
    Ok((survivors1, survivors2))
}

/// Sum of reciprocal eigenvalues, the trace of the inverse operator.
pub fn trace_inverse(lambda: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &l in lambda {
        if l <= TOL_EIG {
            return Err(Error::Singular { min_eigenvalue: l });
        }
        total += 1.0 / l;
    }
    Ok(total)
}

/// Largest entry of `|A^T A - I|`.
pub fn orthogonality_defect(u: &Matrix) -> f64 {
    let gram = u.transpose() * u;
    let n = gram.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Nearest orthogonal matrix in Frobenius norm (polar factor).
pub fn nearest_orthogonal(u: &Matrix) -> Matrix {
    let svd = u.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(left), Some(right)) => left * right,
        _ => u.clone(),
    }
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}
