//! Outer and inner eigenstep tables: validation, conversion between the two
//! forms, and seeded sampling of outer tables for a prescribed spectrum and
//! norm sequence.
//!
//! An outer table holds the spectra of the frame operators `F_n F_n^*` of the
//! partial sequences `f_1..f_n` (each of length M, rows n = 0..N). An inner
//! table holds the spectra of the partial Gram matrices `F_n^* F_n` (row n has
//! n entries). The two carry the same information up to zero padding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Spectrum, TOL_EIG};
use crate::report::ValidationReport;

/// Squared norms `mu_n = ||f_n||^2` of the frame vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NormSequence(Vec<f64>);

impl NormSequence {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        for (i, &v) in mu.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
            if v < 0.0 {
                return Err(Error::InvalidInput(format!("negative squared norm mu_{} = {v}", i + 1)));
            }
        }
        Ok(NormSequence(mu))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.0.windows(2).all(|w| w[1] <= w[0])
    }

    /// `partial_sums()[n] = mu_1 + ... + mu_n`, with `partial_sums()[0] = 0`.
    pub fn partial_sums(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &v in &self.0 {
            acc += v;
            out.push(acc);
        }
        out
    }
}

impl TryFrom<Vec<f64>> for NormSequence {
    type Error = Error;

    fn try_from(mu: Vec<f64>) -> Result<Self> {
        NormSequence::new(mu)
    }
}

impl From<NormSequence> for Vec<f64> {
    fn from(n: NormSequence) -> Self {
        n.0
    }
}

/// Absolute tolerance used for the equality clauses of both validators.
pub fn table_tolerance(mu: &NormSequence) -> f64 {
    1e-8 * mu.sum().max(1.0)
}

/// Outer eigensteps `lambda_{n;m}`, n = 0..N, m = 1..M.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterEigenstepTable {
    rows: Vec<Vec<f64>>,
    mu: NormSequence,
    lambda: Spectrum,
}

impl OuterEigenstepTable {
    /// `rows` must contain N + 1 rows of length M, starting with the n = 0 row.
    pub fn new(rows: Vec<Vec<f64>>, mu: NormSequence, lambda: Spectrum) -> Result<Self> {
        let m = lambda.len();
        if m == 0 {
            return Err(Error::Dimension("outer table needs M >= 1".into()));
        }
        if rows.len() != mu.len() + 1 {
            return Err(Error::Dimension(format!(
                "outer table has {} rows but mu has {} entries (expected rows = N + 1)",
                rows.len(),
                mu.len()
            )));
        }
        for (n, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!(
                    "outer row n={n} has {} entries, expected M={m}",
                    row.len()
                )));
            }
            if let Some(k) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: n, col: k });
            }
        }
        Ok(OuterEigenstepTable { rows, mu, lambda })
    }

    /// Builds a table from the spectra after n = 1..N vectors; the zero row is
    /// prepended and `mu` is read off the trace increments.
    pub fn from_steps(steps: Vec<Vec<f64>>) -> Result<Self> {
        let Some(last) = steps.last() else {
            return Err(Error::Dimension("outer table needs N >= 1".into()));
        };
        let m = last.len();
        let lambda = Spectrum::new(last.clone())?;
        let mut prev_sum = 0.0;
        let mut mu = Vec::with_capacity(steps.len());
        for row in &steps {
            let s: f64 = row.iter().sum();
            let inc = s - prev_sum;
            mu.push(if inc < 0.0 && inc > -TOL_EIG { 0.0 } else { inc });
            prev_sum = s;
        }
        let mu = NormSequence::new(mu)?;
        let mut rows = Vec::with_capacity(steps.len() + 1);
        rows.push(vec![0.0; m]);
        rows.extend(steps);
        OuterEigenstepTable::new(rows, mu, lambda)
    }

    /// Ambient dimension M.
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Number of vectors N.
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Row n (0..=N).
    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn mu(&self) -> &NormSequence {
        &self.mu
    }

    pub fn lambda(&self) -> &Spectrum {
        &self.lambda
    }
}

/// Inner eigensteps: row n (1..N) holds the n eigenvalues of the n x n
/// Gram matrix of the first n vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerEigenstepTable {
    rows: Vec<Vec<f64>>,
    mu: NormSequence,
    lambda: Vec<f64>,
}

impl InnerEigenstepTable {
    /// `rows[k]` must have exactly `k + 1` entries and `lambda` must have N.
    pub fn new(rows: Vec<Vec<f64>>, mu: NormSequence, lambda: Vec<f64>) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::Dimension("inner table needs N >= 1".into()));
        }
        if rows.len() != n {
            return Err(Error::Dimension(format!(
                "inner table has {} rows but mu has {n} entries",
                rows.len()
            )));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(Error::Dimension(format!(
                    "inner row n={} has {} entries, expected {}",
                    k + 1,
                    row.len(),
                    k + 1
                )));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: k + 1, col: c });
            }
        }
        if lambda.len() != n {
            return Err(Error::Dimension(format!(
                "inner lambda has {} entries, expected N={n}",
                lambda.len()
            )));
        }
        Ok(InnerEigenstepTable { rows, mu, lambda })
    }

    /// Builds a table whose final spectrum is its last row and whose norms are
    /// the trace increments.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut prev = 0.0;
        let mut mu = Vec::with_capacity(rows.len());
        for row in &rows {
            let s: f64 = row.iter().sum();
            let inc = s - prev;
            mu.push(if inc < 0.0 && inc > -TOL_EIG { 0.0 } else { inc });
            prev = s;
        }
        let lambda = rows.last().cloned().unwrap_or_default();
        InnerEigenstepTable::new(rows, NormSequence::new(mu)?, lambda)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Row n (1..=N).
    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n - 1]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn mu(&self) -> &NormSequence {
        &self.mu
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
}

/// First index m (0-based) where `row` fails to be nonincreasing or nonnegative.
fn ordering_violation(row: &[f64], tol: f64) -> Option<(usize, String)> {
    for (m, &v) in row.iter().enumerate() {
        if v < -tol {
            return Some((m, format!("negative eigenvalue {v}")));
        }
        if m + 1 < row.len() && row[m + 1] > v + tol {
            return Some((m + 1, format!("row not nonincreasing: {} > {v}", row[m + 1])));
        }
    }
    None
}

/// First 0-based index where equal-length interlacing `prev ⊑ next` fails.
fn eq_interlacing_violation(prev: &[f64], next: &[f64], tol: f64) -> Option<(usize, String)> {
    let m = prev.len();
    for i in 0..m {
        if prev[i] > next[i] + tol {
            return Some((i, format!("previous {} exceeds next {}", prev[i], next[i])));
        }
        if i + 1 < m && next[i + 1] > prev[i] + tol {
            return Some((i, format!("next {} exceeds previous {}", next[i + 1], prev[i])));
        }
    }
    None
}

/// First 0-based index where growing interlacing `prev ⊑ next` fails
/// (`next` one entry longer).
fn grow_interlacing_violation(prev: &[f64], next: &[f64], tol: f64) -> Option<(usize, String)> {
    for (i, &p) in prev.iter().enumerate() {
        if p > next[i] + tol {
            return Some((i, format!("previous {p} exceeds next {}", next[i])));
        }
        if next[i + 1] > p + tol {
            return Some((i, format!("next {} exceeds previous {p}", next[i + 1])));
        }
    }
    None
}

pub fn validate_outer(table: &OuterEigenstepTable) -> ValidationReport {
    validate_outer_tol(table, table_tolerance(table.mu()))
}

/// Checks clauses (i) zero start, (ii) final spectrum, (iii) interlacing and
/// (iv) trace, reporting the first violation in that order.
pub fn validate_outer_tol(table: &OuterEigenstepTable, tol: f64) -> ValidationReport {
    let n_vec = table.len();
    if let Some(m) = table.row(0).iter().position(|v| v.abs() > tol) {
        return ValidationReport::fail("i", 0, Some(m + 1), format!("lambda_0;{} = {}", m + 1, table.row(0)[m]));
    }
    let last = table.row(n_vec);
    if let Some(m) = (0..table.dim()).find(|&m| (last[m] - table.lambda()[m]).abs() > tol) {
        return ValidationReport::fail(
            "ii",
            n_vec,
            Some(m + 1),
            format!("final row entry {} != lambda {}", last[m], table.lambda()[m]),
        );
    }
    for n in 1..=n_vec {
        if let Some((m, detail)) = ordering_violation(table.row(n), tol) {
            return ValidationReport::fail("iii", n, Some(m + 1), detail);
        }
        if let Some((m, detail)) = eq_interlacing_violation(table.row(n - 1), table.row(n), tol) {
            return ValidationReport::fail("iii", n, Some(m + 1), detail);
        }
    }
    let sums = table.mu().partial_sums();
    for n in 1..=n_vec {
        let s: f64 = table.row(n).iter().sum();
        if (s - sums[n]).abs() > tol {
            return ValidationReport::fail("iv", n, None, format!("row sum {s} != partial norm sum {}", sums[n]));
        }
    }
    ValidationReport::pass()
}

pub fn validate_inner(table: &InnerEigenstepTable) -> ValidationReport {
    validate_inner_tol(table, table_tolerance(table.mu()))
}

/// Checks clauses (i) final spectrum, (ii) interlacing and (iii) trace.
pub fn validate_inner_tol(table: &InnerEigenstepTable, tol: f64) -> ValidationReport {
    let n_vec = table.len();
    let last = table.row(n_vec);
    if let Some(m) = (0..n_vec).find(|&m| (last[m] - table.lambda()[m]).abs() > tol) {
        return ValidationReport::fail(
            "i",
            n_vec,
            Some(m + 1),
            format!("final row entry {} != lambda {}", last[m], table.lambda()[m]),
        );
    }
    for n in 1..=n_vec {
        if let Some((m, detail)) = ordering_violation(table.row(n), tol) {
            return ValidationReport::fail("ii", n, Some(m + 1), detail);
        }
        if n >= 2 {
            if let Some((m, detail)) = grow_interlacing_violation(table.row(n - 1), table.row(n), tol) {
                return ValidationReport::fail("ii", n, Some(m + 1), detail);
            }
        }
    }
    let sums = table.mu().partial_sums();
    for n in 1..=n_vec {
        let s: f64 = table.row(n).iter().sum();
        if (s - sums[n]).abs() > tol {
            return ValidationReport::fail("iii", n, None, format!("row sum {s} != partial norm sum {}", sums[n]));
        }
    }
    ValidationReport::pass()
}

/// Outer to inner form: row n keeps its first min(n, M) entries, padded with
/// zeros to length n. No arithmetic is performed on the entries.
pub fn outer_to_inner(table: &OuterEigenstepTable) -> Result<InnerEigenstepTable> {
    let report = validate_outer(table);
    if !report.passed {
        return Err(Error::Precondition(format!("outer table invalid: {report}")));
    }
    let m_dim = table.dim();
    let n_vec = table.len();
    let tol = table_tolerance(table.mu());
    let mut rows = Vec::with_capacity(n_vec);
    for n in 1..=n_vec {
        let src = table.row(n);
        if let Some(m) = (n..m_dim).find(|&m| src[m].abs() > tol) {
            return Err(Error::Precondition(format!(
                "outer entry lambda_{n};{} = {} should vanish (rank exceeds n)",
                m + 1,
                src[m]
            )));
        }
        let keep = n.min(m_dim);
        let mut row = src[..keep].to_vec();
        row.resize(n, 0.0);
        rows.push(row);
    }
    let mut lambda = table.lambda().values()[..n_vec.min(m_dim)].to_vec();
    lambda.resize(n_vec, 0.0);
    InnerEigenstepTable::new(rows, table.mu().clone(), lambda)
}

/// Inner to outer form in dimension `m_dim`: row n is truncated or
/// zero-padded to length M and a zero row n = 0 is prepended.
pub fn inner_to_outer(table: &InnerEigenstepTable, m_dim: usize) -> Result<OuterEigenstepTable> {
    if m_dim == 0 {
        return Err(Error::Dimension("M must be at least 1".into()));
    }
    let report = validate_inner(table);
    if !report.passed {
        return Err(Error::Precondition(format!("inner table invalid: {report}")));
    }
    let n_vec = table.len();
    let mut rows = Vec::with_capacity(n_vec + 1);
    rows.push(vec![0.0; m_dim]);
    for n in 1..=n_vec {
        let src = table.row(n);
        if let Some(m) = (m_dim..n).find(|&m| src[m] > TOL_EIG) {
            return Err(Error::Truncation {
                n,
                m: m + 1,
                value: src[m],
                dim: m_dim,
            });
        }
        let keep = n.min(m_dim);
        let mut row = src[..keep].to_vec();
        row.resize(m_dim, 0.0);
        rows.push(row);
    }
    let mut lambda = table.lambda()[..n_vec.min(m_dim)].to_vec();
    lambda.resize(m_dim, 0.0);
    let lambda = Spectrum::new(lambda)?;
    OuterEigenstepTable::new(rows, table.mu().clone(), lambda)
}

/// Draws a valid outer eigenstep table for the pair (`lambda`, `mu`).
///
/// Rows are drawn backwards from row N. Row n-1 must interlace row n, carry
/// trace `mu_1 + .. + mu_{n-1}`, and majorize `(mu_1, .., mu_{n-1})` so that
/// the remaining rows can still be completed. Coordinates are drawn one at a
/// time, each uniformly on the interval left feasible by these constraints.
pub fn sample_eigensteps(lambda: &Spectrum, mu: &NormSequence, seed: u64) -> Result<OuterEigenstepTable> {
    let m_dim = lambda.len();
    let n_vec = mu.len();
    if m_dim == 0 || n_vec == 0 {
        return Err(Error::Dimension("need M >= 1 and N >= 1".into()));
    }
    if !mu.is_nonincreasing() {
        return Err(Error::Precondition("mu must be nonincreasing".into()));
    }
    let tol = table_tolerance(mu);
    let (ls, ms) = (lambda.sum(), mu.sum());
    if (ls - ms).abs() > tol {
        return Err(Error::TraceMismatch {
            spectrum_sum: ls,
            norm_sum: ms,
        });
    }
    // majorization of mu by lambda, both zero-padded to a common length
    let width = m_dim.max(n_vec);
    let (mut pl, mut pm) = (0.0, 0.0);
    for k in 0..width {
        pl += lambda.get(k).copied().unwrap_or(0.0);
        pm += mu.values().get(k).copied().unwrap_or(0.0);
        if pl < pm - tol {
            return Err(Error::Infeasible(format!(
                "lambda does not majorize mu: partial sum {} of lambda is {pl} < {pm}",
                k + 1
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sums = mu.partial_sums();
    let mut rows = vec![vec![0.0; m_dim]; n_vec + 1];
    rows[n_vec] = lambda.values().to_vec();
    for n in (1..n_vec).rev() {
        rows[n] = sample_previous_row(&rows[n + 1], n, mu.values(), sums[n], tol, &mut rng)
            .map_err(|(m, lo, hi)| {
                Error::Infeasible(format!(
                    "empty feasible interval [{lo}, {hi}] for lambda_{n};{}",
                    m + 1
                ))
            })?;
    }
    OuterEigenstepTable::new(rows, mu.clone(), lambda.clone())
}

/// Samples row `n` given row `n + 1` (`next`). Errors carry the coordinate
/// and its empty interval.
fn sample_previous_row(
    next: &[f64],
    n: usize,
    mu: &[f64],
    target: f64,
    tol: f64,
    rng: &mut impl Rng,
) -> std::result::Result<Vec<f64>, (usize, f64, f64)> {
    let m_dim = next.len();
    let box_lo: Vec<f64> = (0..m_dim).map(|m| next.get(m + 1).copied().unwrap_or(0.0)).collect();
    let box_hi: Vec<f64> = next.to_vec();
    // required prefix sums: the row must majorize (mu_1, .., mu_n)
    let mut required = Vec::with_capacity(m_dim);
    let mut acc = 0.0;
    for k in 0..m_dim {
        if k < n {
            acc += mu[k];
        }
        required.push(acc);
    }
    // suffix sums of the box bounds
    let mut lo_after = vec![0.0; m_dim + 1];
    let mut hi_after = vec![0.0; m_dim + 1];
    for m in (0..m_dim).rev() {
        lo_after[m] = lo_after[m + 1] + box_lo[m];
        hi_after[m] = hi_after[m + 1] + box_hi[m];
    }

    let mut row = vec![0.0; m_dim];
    let mut prefix = 0.0;
    let mut remaining = target;
    for m in 0..m_dim {
        if m >= n {
            // rank of the first n vectors is at most n
            if box_lo[m] > tol {
                return Err((m, box_lo[m], 0.0));
            }
            row[m] = 0.0;
            continue;
        }
        let hi = box_hi[m].min(remaining - lo_after[m + 1]);
        let mut lo = box_lo[m].max(remaining - hi_after[m + 1]);
        let mut cap = 0.0;
        for k in m..m_dim {
            if k > m {
                cap += box_hi[k];
            }
            lo = lo.max(required[k] - prefix - cap);
        }
        let value = if lo > hi {
            if lo > hi + tol {
                return Err((m, lo, hi));
            }
            0.5 * (lo + hi)
        } else if lo == hi {
            lo
        } else {
            lo + rng.random::<f64>() * (hi - lo)
        };
        let value = value.max(0.0);
        row[m] = value;
        prefix += value;
        remaining -= value;
    }
    Ok(row)
}
