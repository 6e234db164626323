use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{MatrixError, SubIntensity};

const SEPARATION_TOL: f64 = 1e-8;
const CONDITION_LIMIT: f64 = 1e8;
const IMAG_GUARD: f64 = 1e-10;

/// Eigen-decomposition `T = P diag(eta) P^{-1}` in complex arithmetic.
///
/// Eigenvalues are sorted by descending real part, so `eigenvalues()[0]`
/// governs the tail of the absorption time. When two eigenvalues coincide
/// (a nontrivial Jordan block) or `P` is badly conditioned the decomposition
/// is kept but flagged; functional calculus then refuses to use it.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<Complex64>,
    vectors: DMatrix<Complex64>,
    inverse: DMatrix<Complex64>,
    condition: f64,
    well_conditioned: bool,
}

impl SpectralDecomposition {
    pub fn new(t: &SubIntensity) -> Self {
        let m = t.matrix();
        let p = m.nrows();
        let scale = t.norm_inf().max(f64::MIN_POSITIVE);
        let mut eigenvalues: Vec<Complex64> = m
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|c| Complex64::new(c.re, c.im))
            .collect();
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));

        let min_gap = eigenvalues
            .iter()
            .enumerate()
            .flat_map(|(i, a)| eigenvalues[i + 1..].iter().map(move |b| (a - b).norm()))
            .fold(f64::INFINITY, f64::min);

        let mc: DMatrix<Complex64> = m.map(|v| Complex64::new(v, 0.0));
        let mut vectors = DMatrix::<Complex64>::zeros(p, p);
        for (k, eta) in eigenvalues.iter().enumerate() {
            let v = eigenvector(&mc, *eta, scale);
            vectors.set_column(k, &v);
        }
        let inverse = vectors.clone().lu().try_inverse();
        let (inverse, condition) = match inverse {
            Some(inv) => {
                let c = cnorm1(&vectors) * cnorm1(&inv);
                (inv, if c.is_finite() { c } else { f64::INFINITY })
            }
            None => (DMatrix::zeros(p, p), f64::INFINITY),
        };
        let well_conditioned = (p == 1 || min_gap > SEPARATION_TOL * scale)
            && condition < CONDITION_LIMIT;
        Self {
            eigenvalues,
            vectors,
            inverse,
            condition,
            well_conditioned,
        }
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// Right eigenvectors as columns, each of unit Euclidean norm.
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn inverse(&self) -> &DMatrix<Complex64> {
        &self.inverse
    }

    /// `||P||_1 ||P^{-1}||_1`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn well_conditioned(&self) -> bool {
        self.well_conditioned
    }

    /// Eigenvalue with the largest real part.
    pub fn dominant(&self) -> Complex64 {
        self.eigenvalues[0]
    }

    /// Weights `w_i = (x P)_i (P^{-1} y)_i`, so that
    /// `x f(T) y = sum_i w_i f(eta_i)`.
    pub fn bilinear_weights(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Result<Vec<Complex64>, MatrixError> {
        if !self.well_conditioned {
            return Err(MatrixError::FallbackRequired);
        }
        let p = self.eigenvalues.len();
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let yc = y.map(|v| Complex64::new(v, 0.0));
        let left = self.vectors.transpose() * xc;
        let right = &self.inverse * yc;
        Ok((0..p).map(|i| left[i] * right[i]).collect())
    }

    /// `f(T) = P diag(f(eta_i)) P^{-1}` for an analytic `f`.
    pub fn apply<F>(&self, mut f: F) -> Result<DMatrix<f64>, MatrixError>
    where
        F: FnMut(Complex64) -> Complex64,
    {
        self.try_apply(|z| Ok::<_, MatrixError>(f(z)))
    }

    /// Like [`apply`](Self::apply) for a fallible scalar function. Values are
    /// requested once per eigenvalue; conjugate pairs are not deduplicated.
    pub fn try_apply<F, E>(&self, mut f: F) -> Result<DMatrix<f64>, E>
    where
        F: FnMut(Complex64) -> Result<Complex64, E>,
        E: From<MatrixError>,
    {
        if !self.well_conditioned {
            return Err(MatrixError::FallbackRequired.into());
        }
        let p = self.eigenvalues.len();
        let mut scaled = self.vectors.clone();
        for (k, eta) in self.eigenvalues.iter().enumerate() {
            let v = f(*eta)?;
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(MatrixError::NonAnalytic(*eta).into());
            }
            for i in 0..p {
                scaled[(i, k)] *= v;
            }
        }
        Ok(realify(&(scaled * &self.inverse))?)
    }

    /// Maximum reconstruction error `max |P diag(eta) P^{-1} - T|`.
    pub fn reconstruction_error(&self, t: &SubIntensity) -> f64 {
        let p = self.eigenvalues.len();
        let d = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues.clone()));
        let rec = &self.vectors * d * &self.inverse;
        let mut err: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                err = err.max((rec[(i, j)] - Complex64::new(t.matrix()[(i, j)], 0.0)).norm());
            }
        }
        err
    }
}

/// Evaluates an analytic `f` on `T` spectrally.
pub fn apply_analytic<F>(f: F, t: &SubIntensity) -> Result<DMatrix<f64>, MatrixError>
where
    F: FnMut(Complex64) -> Complex64,
{
    SpectralDecomposition::new(t).apply(f)
}

pub(crate) fn realify(m: &DMatrix<Complex64>) -> Result<DMatrix<f64>, MatrixError> {
    let re = m.map(|c| c.re);
    let scale = re.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let residue = m.iter().fold(0.0f64, |a, c| a.max(c.im.abs()));
    if residue > IMAG_GUARD * scale.max(1e-300) && residue > 1e-300 {
        return Err(MatrixError::ComplexResidue { residue });
    }
    Ok(re)
}

fn cnorm1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Inverse iteration with a slightly perturbed shift.
fn eigenvector(m: &DMatrix<Complex64>, eta: Complex64, scale: f64) -> DVector<Complex64> {
    let p = m.nrows();
    let shift = eta + Complex64::new(1e-11 * scale, 0.7e-11 * scale);
    let mut shifted = m.clone();
    for i in 0..p {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();
    let mut v = DVector::from_fn(p, |i, _| Complex64::new(1.0 + 0.37 * i as f64, 0.05 * i as f64));
    for _ in 0..4 {
        match lu.solve(&v) {
            Some(w) if w.iter().all(|c| c.re.is_finite() && c.im.is_finite()) => {
                let n = w.norm();
                if n == 0.0 {
                    break;
                }
                v = w / Complex64::new(n, 0.0);
            }
            _ => break,
        }
    }
    // Fix the phase so that the largest component is real and positive.
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bn), (i, c)| if c.norm() > bn { (i, c.norm()) } else { (bi, bn) });
    let phase = v[imax] / Complex64::new(v[imax].norm(), 0.0);
    if phase.norm() > 0.0 {
        v /= phase;
    }
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}
