//! Frame synthesis from outer eigensteps and verification of a frame against
//! its table.
//!
//! Each step adds one vector: given the spectra before (`prev`) and after
//! (`next`) the rank-one update, [`construct_u`] returns the new vector in the
//! current eigenbasis together with the orthogonal change of eigenbasis.
//! [`construct_frame`] chains these steps starting from an orthonormal basis.

use nalgebra::DVector;

use crate::eigensteps::{validate_outer, OuterEigenstepTable};
use crate::error::{Error, Result};
use crate::numerics::{
    interlaces_eq_tol, max_abs, multiset_diff_tol, nearest_orthogonal, orthogonality_defect, sym_eig, Matrix,
    TOL_CANCEL, TOL_INT,
};
use crate::report::ValidationReport;

/// Radicands in `[-RADICAND_FLOOR, 0)` are treated as zero.
const RADICAND_FLOOR: f64 = 1e-10;
/// Accumulated eigenbases are re-orthogonalized past this defect.
const REORTHO_TRIGGER: f64 = 1e-8;
/// Default tolerance of [`verify_frame`].
pub const VERIFY_TOL: f64 = 1e-7;

/// Synthesis operator: an M x N matrix whose columns are the frame vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    matrix: Matrix,
}

impl Frame {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.nrows() == 0 {
            return Err(Error::Dimension("frame needs M >= 1".into()));
        }
        crate::numerics::check_finite(&matrix)?;
        Ok(Frame { matrix })
    }

    pub fn from_columns(dim: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut matrix = Matrix::zeros(dim, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::Dimension(format!(
                    "column {} has length {}, expected {dim}",
                    j + 1,
                    col.len()
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                matrix[(i, j)] = v;
            }
        }
        Frame::new(matrix)
    }

    /// Ambient dimension M.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of vectors N.
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.matrix.column(j).into_owned()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| self.matrix.column(j).iter().copied().collect()).collect()
    }

    /// Frame operator `F F^*` of the first `n` vectors.
    pub fn partial_frame_operator(&self, n: usize) -> Matrix {
        let part = self.matrix.columns(0, n);
        part * part.transpose()
    }

    pub fn frame_operator(&self) -> Matrix {
        &self.matrix * self.matrix.transpose()
    }

    pub fn squared_norms(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.matrix.column(j).norm_squared()).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Frame> {
        Frame::new(&self.matrix * c)
    }

    /// This frame followed by `extra` as additional columns.
    pub fn with_columns(&self, extra: &[DVector<f64>]) -> Result<Frame> {
        let mut matrix = Matrix::zeros(self.dim(), self.len() + extra.len());
        matrix.columns_mut(0, self.len()).copy_from(&self.matrix);
        for (k, v) in extra.iter().enumerate() {
            if v.len() != self.dim() {
                return Err(Error::Dimension(format!("appended vector has length {}", v.len())));
            }
            matrix.set_column(self.len() + k, v);
        }
        Frame::new(matrix)
    }
}

/// One synthesis step: the new vector expressed in the current eigenbasis
/// (`f_rel`) and the orthogonal map from the next eigenbasis to the current
/// one (`u_rel`).
#[derive(Debug, Clone)]
pub struct EigenbasisStep {
    pub u_rel: Matrix,
    pub f_rel: DVector<f64>,
}

pub fn construct_u(prev: &[f64], next: &[f64]) -> Result<EigenbasisStep> {
    construct_u_tol(prev, next, TOL_CANCEL)
}

/// Builds the step from `prev` to `next` (both nonincreasing, length M).
///
/// Shared eigenvalues are cancelled with tolerance `cancel_tol`; on the
/// surviving, mutually distinct lists `r1` (from `prev`) and `r2` (from
/// `next`), the new vector has component `p_i` on the eigenvector of `r1_i`,
/// with `p_i^2 = -prod_j (r1_i - r2_j) / prod_{j != i} (r1_i - r1_j)`, and the
/// change of basis on the surviving block is
/// `w_ij = p_i q_j / (r2_j - r1_i)`.
pub fn construct_u_tol(prev: &[f64], next: &[f64], cancel_tol: f64) -> Result<EigenbasisStep> {
    let m = prev.len();
    let scale = next.iter().chain(prev).fold(1.0_f64, |a, v| a.max(v.abs()));
    if !interlaces_eq_tol(prev, next, TOL_INT * scale)? {
        return Err(Error::Interlacing(format!("{prev:?} does not interlace {next:?}")));
    }
    let added: f64 = next.iter().sum::<f64>() - prev.iter().sum::<f64>();
    if added < -TOL_INT * scale {
        return Err(Error::Interlacing(format!("trace decreases by {}", -added)));
    }

    let (keep1, keep2) = multiset_diff_tol(prev, next, cancel_tol)?;
    let r1: Vec<f64> = keep1.iter().map(|&i| prev[i]).collect();
    let r2: Vec<f64> = keep2.iter().map(|&j| next[j]).collect();
    let k = r1.len();

    let mut p = vec![0.0; k];
    let mut q = vec![0.0; k];
    for i in 0..k {
        let num: f64 = r2.iter().map(|&b| r1[i] - b).product();
        let den: f64 = (0..k).filter(|&j| j != i).map(|j| r1[i] - r1[j]).product();
        p[i] = checked_sqrt(-num / den)?;
        let num: f64 = r1.iter().map(|&a| r2[i] - a).product();
        let den: f64 = (0..k).filter(|&j| j != i).map(|j| r2[i] - r2[j]).product();
        q[i] = checked_sqrt(num / den)?;
    }

    let mut u_rel = Matrix::zeros(m, m);
    for (a, &row) in keep1.iter().enumerate() {
        for (b, &col) in keep2.iter().enumerate() {
            u_rel[(row, col)] = p[a] * q[b] / (r2[b] - r1[a]);
        }
    }
    // cancelled eigenvalues keep their eigenvectors, paired in sorted order
    let rest1 = (0..m).filter(|i| !keep1.contains(i));
    let rest2 = (0..m).filter(|j| !keep2.contains(j));
    for (row, col) in rest1.zip(rest2) {
        u_rel[(row, col)] = 1.0;
    }
    let mut f_rel = DVector::zeros(m);
    for (a, &row) in keep1.iter().enumerate() {
        f_rel[row] = p[a];
    }

    let ortho = orthogonality_defect(&u_rel);
    let lhs = &u_rel * Matrix::from_diagonal(&DVector::from_column_slice(next)) * u_rel.transpose();
    let rhs = Matrix::from_diagonal(&DVector::from_column_slice(prev)) + &f_rel * f_rel.transpose();
    let resid = max_abs(&(lhs - rhs));
    if ortho > 1e-7 || resid > 1e-7 * scale {
        return Err(Error::Tolerance(format!(
            "eigenbasis step inaccurate: orthogonality defect {ortho:e}, rank-one residual {resid:e}"
        )));
    }
    Ok(EigenbasisStep { u_rel, f_rel })
}

fn checked_sqrt(radicand: f64) -> Result<f64> {
    if radicand.is_nan() {
        return Err(Error::NegativeRadicand { value: radicand });
    }
    if radicand < -RADICAND_FLOOR {
        return Err(Error::NegativeRadicand { value: radicand });
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Synthesizes a frame realizing `table`, starting from the orthonormal
/// basis `u1`: `f_1 = sqrt(mu_1) u1 e_1`, and each later vector is the
/// accumulated eigenbasis applied to the step's `f_rel`.
pub fn construct_frame(table: &OuterEigenstepTable, u1: &Matrix) -> Result<Frame> {
    construct_frame_tol(table, u1, TOL_CANCEL)
}

pub fn construct_frame_tol(table: &OuterEigenstepTable, u1: &Matrix, cancel_tol: f64) -> Result<Frame> {
    let m = table.dim();
    let n_vec = table.len();
    if u1.nrows() != m || u1.ncols() != m {
        return Err(Error::Dimension(format!(
            "initial basis is {}x{}, expected {m}x{m}",
            u1.nrows(),
            u1.ncols()
        )));
    }
    let defect = orthogonality_defect(u1);
    if defect > 1e-8 {
        return Err(Error::NotOrthogonal { deviation: defect });
    }
    let report = validate_outer(table);
    if !report.passed {
        return Err(Error::Precondition(format!("outer table invalid: {report}")));
    }

    let mu = table.mu().values();
    let mut frame = Matrix::zeros(m, n_vec);
    frame.set_column(0, &(u1.column(0) * mu[0].sqrt()));
    let mut basis = u1.clone();
    for n in 1..n_vec {
        let step = construct_u_tol(table.row(n), table.row(n + 1), cancel_tol)?;
        frame.set_column(n, &(&basis * &step.f_rel));
        basis = &basis * &step.u_rel;
        if orthogonality_defect(&basis) > REORTHO_TRIGGER {
            basis = nearest_orthogonal(&basis);
        }
    }
    Frame::new(frame)
}

/// Target squared projection of the next vector onto one eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueTarget {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub target: f64,
}

pub fn residue_norm_targets(prev: &[f64], next: &[f64]) -> Result<Vec<ResidueTarget>> {
    residue_norm_targets_tol(prev, next, TOL_CANCEL)
}

/// For each distinct eigenvalue `l` of `prev`, the value
/// `-lim_{x -> l} (x - l) p_next(x) / p_prev(x)` where `p_prev`, `p_next` are
/// the monic polynomials with roots `prev`, `next`. Roots within `tol` of `l`
/// are cancelled symbolically before evaluating.
pub fn residue_norm_targets_tol(prev: &[f64], next: &[f64], tol: f64) -> Result<Vec<ResidueTarget>> {
    if prev.len() != next.len() {
        return Err(Error::LengthMismatch {
            context: "residue_norm_targets",
            expected: prev.len(),
            found: next.len(),
        });
    }
    let scale = next.iter().chain(prev).fold(1.0_f64, |a, v| a.max(v.abs()));
    if !interlaces_eq_tol(prev, next, TOL_INT * scale)? {
        return Err(Error::Interlacing(format!("{prev:?} does not interlace {next:?}")));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < prev.len() {
        let value = prev[start];
        let mut end = start + 1;
        while end < prev.len() && (prev[end] - value).abs() <= tol {
            end += 1;
        }
        let mult_prev = end - start;
        let mult_next = next.iter().filter(|&&v| (v - value).abs() <= tol).count();
        let target = if mult_next >= mult_prev {
            0.0
        } else if mult_next + 1 == mult_prev {
            let num: f64 = next.iter().filter(|&&v| (v - value).abs() > tol).map(|&v| value - v).product();
            let den: f64 = prev.iter().filter(|&&v| (v - value).abs() > tol).map(|&v| value - v).product();
            let r = -num / den;
            if r < -RADICAND_FLOOR {
                return Err(Error::NegativeRadicand { value: r });
            }
            r.max(0.0)
        } else {
            return Err(Error::Interlacing(format!(
                "eigenvalue {value} has multiplicity {mult_prev} before but {mult_next} after a rank-one update"
            )));
        };
        out.push(ResidueTarget {
            eigenvalue: value,
            multiplicity: mult_prev,
            target,
        });
        start = end;
    }
    Ok(out)
}

pub fn verify_frame(frame: &Frame, table: &OuterEigenstepTable) -> Result<ValidationReport> {
    verify_frame_tol(frame, table, VERIFY_TOL)
}

/// Checks a frame against an outer table: partial spectra, squared norms, and
/// for every step the squared projections of the next vector onto the
/// eigenspaces of the current frame operator.
///
/// Eigenvalues of a table row closer than `tol` share an eigenspace for the
/// projection check; their residue targets are summed.
pub fn verify_frame_tol(frame: &Frame, table: &OuterEigenstepTable, tol: f64) -> Result<ValidationReport> {
    if frame.dim() != table.dim() || frame.len() != table.len() {
        return Err(Error::Dimension(format!(
            "frame is {}x{} but table has M={}, N={}",
            frame.dim(),
            frame.len(),
            table.dim(),
            table.len()
        )));
    }
    let mu = table.mu().values();
    for (n, norm) in frame.squared_norms().into_iter().enumerate() {
        if (norm - mu[n]).abs() > tol {
            return Ok(ValidationReport::fail(
                "norm",
                n + 1,
                None,
                format!("squared norm {norm} != mu {}", mu[n]),
            ));
        }
    }
    for n in 1..=frame.len() {
        let eig = sym_eig(&frame.partial_frame_operator(n))?;
        let row = table.row(n);
        if let Some(m) = (0..row.len()).find(|&m| (eig.values[m] - row[m]).abs() > tol) {
            return Ok(ValidationReport::fail(
                "spectrum",
                n,
                Some(m + 1),
                format!("eigenvalue {} != table entry {}", eig.values[m], row[m]),
            ));
        }
        if n == frame.len() {
            break;
        }
        let targets = residue_norm_targets(row, table.row(n + 1))?;
        let coords = eig.vectors.transpose() * frame.column(n);
        let mut start = 0;
        while start < row.len() {
            let mut end = start + 1;
            while end < row.len() && (row[end] - row[end - 1]).abs() <= tol {
                end += 1;
            }
            let projected: f64 = (start..end).map(|k| coords[k] * coords[k]).sum();
            let (lo, hi) = (row[end - 1] - tol, row[start] + tol);
            let target: f64 = targets
                .iter()
                .filter(|t| t.eigenvalue >= lo && t.eigenvalue <= hi)
                .map(|t| t.target)
                .sum();
            if (projected - target).abs() > tol {
                return Ok(ValidationReport::fail(
                    "projection",
                    n,
                    Some(start + 1),
                    format!(
                        "squared projection of f_{} onto eigenspace of {} is {projected}, residue target {target}",
                        n + 1,
                        row[start]
                    ),
                ));
            }
            start = end;
        }
    }
    Ok(ValidationReport::pass())
}
