//! Dense real-matrix kernel: sub-intensity validation, the matrix
//! exponential, spectral decomposition and functional calculus.

mod expm;
mod spectral;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub use expm::matrix_exp;
pub use spectral::{apply_analytic, SpectralDecomposition};

/// Default tolerance for repairing rows whose sums are slightly positive.
pub const DEFAULT_REPAIR_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("sign pattern violated at ({row}, {col}): {value}")]
    SignPattern { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, above the repair tolerance {tolerance}")]
    RowSumViolation { row: usize, sum: f64, tolerance: f64 },
    #[error("eigenvalue {0} does not have a strictly negative real part")]
    NotTransient(Complex64),
    #[error("matrix has a non-finite entry")]
    NonFinite,
    #[error("matrix exponential overflowed the floating range")]
    Overflow,
    #[error("spectrum is repeated or clustered; evaluate by quadrature instead")]
    FallbackRequired,
    #[error("function is not finite at eigenvalue {0}")]
    NonAnalytic(Complex64),
    #[error("matrix is singular")]
    Singular,
    #[error("imaginary residue {residue:e} of a real matrix function exceeds tolerance")]
    ComplexResidue { residue: f64 },
}

/// A diagonal entry that was lowered so that its row sum became zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowRepair {
    pub row: usize,
    pub original_diagonal: f64,
    pub repaired_diagonal: f64,
}

/// Transient block `T` of a Markov generator with one absorbing state.
///
/// Off-diagonal entries are nonnegative, diagonal entries negative, row sums
/// nonpositive and every eigenvalue lies in the open left half-plane. The
/// exit vector `t = -T e` holds the absorption rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SubIntensity {
    matrix: DMatrix<f64>,
    exit: DVector<f64>,
    repairs: Vec<RowRepair>,
}

impl SubIntensity {
    /// Validates `raw`, repairing rows whose sum lies in `(0, tolerance]`.
    pub fn new(raw: DMatrix<f64>, tolerance: f64) -> Result<Self, MatrixError> {
        validate_subintensity(raw, tolerance)
    }

    /// Builds from row slices with the default repair tolerance.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let p = rows.len();
        for r in rows {
            if r.len() != p {
                return Err(MatrixError::NonSquare {
                    rows: p,
                    cols: r.len(),
                });
            }
        }
        let raw = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
        validate_subintensity(raw, DEFAULT_REPAIR_TOLERANCE)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn exit(&self) -> &DVector<f64> {
        &self.exit
    }

    pub fn repairs(&self) -> &[RowRepair] {
        &self.repairs
    }

    /// Max-row-sum norm, used as the scale for spectral tolerances.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// The full `(p+1)x(p+1)` generator with the absorbing state appended.
    pub fn full_generator(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut g = DMatrix::zeros(p + 1, p + 1);
        g.view_mut((0, 0), (p, p)).copy_from(&self.matrix);
        for i in 0..p {
            g[(i, p)] = self.exit[i];
        }
        g
    }

    /// `exp(T s)`.
    pub fn exp(&self, s: f64) -> Result<DMatrix<f64>, MatrixError> {
        matrix_exp(&(&self.matrix * s))
    }

    pub fn spectral(&self) -> SpectralDecomposition {
        SpectralDecomposition::new(self)
    }

    /// The Green matrix `(-T)^{-1}` by direct LU solve.
    pub fn green(&self) -> Result<DMatrix<f64>, MatrixError> {
        green_matrix(self)
    }
}

/// Checks the sub-intensity structure of `raw` and returns the validated
/// matrix, lowering diagonals of rows whose sum lies in `(0, tolerance]`.
pub fn validate_subintensity(
    mut raw: DMatrix<f64>,
    tolerance: f64,
) -> Result<SubIntensity, MatrixError> {
    let (rows, cols) = raw.shape();
    if rows != cols || rows == 0 {
        return Err(MatrixError::NonSquare { rows, cols });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::NonFinite);
    }
    for i in 0..rows {
        for j in 0..cols {
            let v = raw[(i, j)];
            let bad = if i == j { v >= 0.0 } else { v < 0.0 };
            if bad {
                return Err(MatrixError::SignPattern {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    let mut repairs = Vec::new();
    for i in 0..rows {
        let sum: f64 = raw.row(i).iter().sum();
        if sum > tolerance {
            return Err(MatrixError::RowSumViolation {
                row: i,
                sum,
                tolerance,
            });
        }
        if sum > 0.0 {
            let original = raw[(i, i)];
            // Recompute the diagonal from the off-diagonals so the row sum is
            // exactly zero in floating point.
            let off: f64 = (0..cols).filter(|&j| j != i).map(|j| raw[(i, j)]).sum();
            raw[(i, i)] = -off;
            repairs.push(RowRepair {
                row: i,
                original_diagonal: original,
                repaired_diagonal: raw[(i, i)],
            });
        }
    }
    let exit = DVector::from_fn(rows, |i, _| {
        let s: f64 = raw.row(i).iter().sum();
        (-s).max(0.0)
    });
    let eigen = raw.clone().complex_eigenvalues();
    if let Some(bad) = eigen.iter().find(|e| e.re >= 0.0 || !e.re.is_finite()) {
        return Err(MatrixError::NotTransient(*bad));
    }
    Ok(SubIntensity {
        matrix: raw,
        exit,
        repairs,
    })
}

/// `(-T)^{-1}` by LU decomposition.
pub fn green_matrix(t: &SubIntensity) -> Result<DMatrix<f64>, MatrixError> {
    let neg = -t.matrix();
    neg.lu().try_inverse().ok_or(MatrixError::Singular)
}

/// Entrywise max-abs of a matrix.
#[cfg(test)]
pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
