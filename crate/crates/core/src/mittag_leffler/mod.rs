//! Two-parameter Mittag-Leffler function `E_{a,b}(z) = sum_k z^k / Gamma(a k + b)`
//! for scalar and matrix arguments.

mod contour;
mod reference;
mod series;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use libm::{lgamma as ln_gamma, tgamma as gamma};
use thiserror::Error;

use crate::matrix::{matrix_exp, MatrixError, SpectralDecomposition, SubIntensity};

pub use reference::{ml_reference, MAX_REFERENCE_BITS};

/// Largest `|z|` handled by the power series.
pub const Z_SWITCH: f64 = 5.0;
/// Smallest `|z|` at which the asymptotic expansion is attempted.
pub const ASYMPTOTIC_MIN: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("invalid Mittag-Leffler parameters alpha = {alpha}, beta = {beta}")]
    InvalidParameters { alpha: f64, beta: f64 },
    #[error("Mittag-Leffler evaluation did not converge: {detail}")]
    Unconverged { detail: String },
    #[error("non-finite argument or result")]
    NonFinite,
    #[error("scale must be finite and nonnegative, got {0}")]
    InvalidScale(f64),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Order `alpha` in `(0, 1]` and second parameter `beta > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlParams {
    alpha: f64,
    beta: f64,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, MlError> {
        if !(alpha > 0.0 && alpha <= 1.0 && beta > 0.0 && beta.is_finite()) {
            return Err(MlError::InvalidParameters { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    /// The one-parameter function `E_a = E_{a,1}`.
    pub fn one(alpha: f64) -> Result<Self, MlError> {
        Self::new(alpha, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn is_exponential(&self) -> bool {
        self.alpha == 1.0 && self.beta == 1.0
    }
}

/// `1 / Gamma(x)`, zero at the poles.
pub(crate) fn rgamma(x: f64) -> f64 {
    if x > 0.0 && x < 170.0 {
        return 1.0 / gamma(x);
    }
    ln_abs_rgamma(x).map_or(0.0, |(s, l)| s * l.exp())
}

/// Sign and log-magnitude of `1 / Gamma(x)`; `None` at nonpositive integers.
pub(crate) fn ln_abs_rgamma(x: f64) -> Option<(f64, f64)> {
    if x > 0.0 {
        return Some((1.0, -ln_gamma(x)));
    }
    if x.fract() == 0.0 {
        return None;
    }
    // 1/Gamma(x) = Gamma(1 - x) sin(pi x) / pi.
    let s = series::sinpi(x);
    Some((s.signum(), ln_gamma(1.0 - x) + s.abs().ln() - std::f64::consts::PI.ln()))
}

/// `E_{a,b}(z)`.
///
/// Uses the compensated power series for `|z| <= Z_SWITCH` unless its terms
/// are large enough to cause cancellation, the asymptotic expansion for large
/// `|z|` when it converges to roundoff, and the contour integral otherwise.
pub fn ml_scalar(params: MlParams, z: Complex64) -> Result<Complex64, MlError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(MlError::NonFinite);
    }
    let (alpha, beta) = (params.alpha, params.beta);
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(rgamma(beta), 0.0));
    }
    if params.is_exponential() {
        return Ok(z.exp());
    }
    let r = z.norm();
    if r <= Z_SWITCH {
        if let Some(v) = series::power_series(alpha, beta, z) {
            return Ok(v);
        }
    }
    if r >= ASYMPTOTIC_MIN {
        if let Some(v) = series::asymptotic(alpha, beta, z) {
            return Ok(v);
        }
    }
    contour::contour(alpha, beta, z)
}

/// Real-argument convenience wrapper around [`ml_scalar`].
pub fn ml_real(params: MlParams, x: f64) -> Result<f64, MlError> {
    ml_scalar(params, Complex64::new(x, 0.0)).map(|v| v.re)
}

/// The power series alone; `None` if cancellation would spoil it.
pub fn ml_series(params: MlParams, z: Complex64) -> Option<Complex64> {
    series::power_series(params.alpha, params.beta, z)
}

/// The contour integral alone.
pub fn ml_contour(params: MlParams, z: Complex64) -> Result<Complex64, MlError> {
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(rgamma(params.beta), 0.0));
    }
    contour::contour(params.alpha, params.beta, z)
}

/// `E_{a,b}(T scale^a)`.
///
/// Applies [`ml_scalar`] to the spectrum when the eigenbasis is well
/// conditioned; otherwise evaluates on the dense matrix.
pub fn ml_matrix(params: MlParams, t: &SubIntensity, scale: f64) -> Result<DMatrix<f64>, MlError> {
    ml_matrix_with(params, t, &t.spectral(), scale)
}

/// [`ml_matrix`] with a precomputed decomposition of `T`.
pub fn ml_matrix_with(
    params: MlParams,
    t: &SubIntensity,
    spec: &SpectralDecomposition,
    scale: f64,
) -> Result<DMatrix<f64>, MlError> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(MlError::InvalidScale(scale));
    }
    let p = t.dim();
    if scale == 0.0 {
        return Ok(DMatrix::identity(p, p) * rgamma(params.beta));
    }
    let c = scale.powf(params.alpha);
    if params.is_exponential() {
        return Ok(matrix_exp(&(t.matrix() * c))?);
    }
    match spec.try_apply(|eta| ml_scalar(params, eta * c)) {
        Err(MlError::Matrix(MatrixError::FallbackRequired)) => ml_dense(params, &(t.matrix() * c)),
        other => other,
    }
}

/// `E_{a,b}(A)` for an arbitrary real square matrix without using its
/// eigenvectors: matrix series for small norms, resolvent contour otherwise.
pub fn ml_dense(params: MlParams, a: &DMatrix<f64>) -> Result<DMatrix<f64>, MlError> {
    if params.is_exponential() {
        return Ok(matrix_exp(a)?);
    }
    let norm = (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let (log_peak, _) = series::log_peak_term(params.alpha, params.beta, norm);
    if log_peak <= series::SERIES_MAX_TERM.ln() {
        if let Some(m) = series::matrix_series(params.alpha, params.beta, a) {
            return Ok(m);
        }
    }
    contour::contour_matrix(params.alpha, params.beta, a)
}

/// The scalar map `c -> x E_{a,b}(T c) y` for fixed vectors `x`, `y`.
///
/// With a well-conditioned eigenbasis this is `sum_i w_i E_{a,b}(eta_i c)`
/// with precomputed weights; otherwise the dense matrix function is formed at
/// every call.
#[derive(Debug, Clone)]
pub struct MlBilinear {
    params: MlParams,
    kind: BilinearKind,
}

#[derive(Debug, Clone)]
enum BilinearKind {
    Spectral {
        eigenvalues: Vec<Complex64>,
        weights: Vec<Complex64>,
    },
    Dense {
        t: DMatrix<f64>,
        x: DVector<f64>,
        y: DVector<f64>,
    },
}

impl MlBilinear {
    pub fn new(
        params: MlParams,
        t: &SubIntensity,
        spec: &SpectralDecomposition,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Result<Self, MlError> {
        let kind = match spec.bilinear_weights(x, y) {
            Ok(weights) => BilinearKind::Spectral {
                eigenvalues: spec.eigenvalues().to_vec(),
                weights,
            },
            Err(MatrixError::FallbackRequired) => BilinearKind::Dense {
                t: t.matrix().clone(),
                x: x.clone(),
                y: y.clone(),
            },
            Err(e) => return Err(e.into()),
        };
        Ok(Self { params, kind })
    }

    pub fn params(&self) -> MlParams {
        self.params
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.kind, BilinearKind::Spectral { .. })
    }

    /// `x E_{a,b}(T c) y` for `c >= 0`.
    pub fn eval(&self, c: f64) -> Result<f64, MlError> {
        match &self.kind {
            BilinearKind::Spectral { eigenvalues, weights } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (eta, w) in eigenvalues.iter().zip(weights) {
                    if *w != Complex64::new(0.0, 0.0) {
                        acc += w * ml_scalar(self.params, eta * c)?;
                    }
                }
                Ok(acc.re)
            }
            BilinearKind::Dense { t, x, y } => {
                let m = if c == 0.0 {
                    DMatrix::identity(t.nrows(), t.ncols()) * rgamma(self.params.beta)
                } else {
                    ml_dense(self.params, &(t * c))?
                };
                Ok(x.dot(&(m * y)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::erfc;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn coxian() -> SubIntensity {
        SubIntensity::from_rows(&[
            vec![-0.1722, 0.1585, 0.0],
            vec![0.0, -0.5663, 0.5664],
            vec![0.0, 0.0, -0.0052],
        ])
        .unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(MlParams::new(0.0, 1.0).is_err());
        assert!(MlParams::new(1.2, 1.0).is_err());
        assert!(MlParams::new(0.5, 0.0).is_err());
        assert!(MlParams::new(1.0, 0.3).is_ok());
    }

    #[test]
    fn exponential_case() {
        let p = MlParams::new(1.0, 1.0).unwrap();
        let v = ml_scalar(p, c(1.0)).unwrap();
        assert!((v.re - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn value_at_zero() {
        for &b in &[0.5, 1.0, 2.5] {
            let p = MlParams::new(0.7, b).unwrap();
            let v = ml_scalar(p, c(0.0)).unwrap();
            assert!((v.re - 1.0 / gamma(b)).abs() < 1e-15);
        }
    }

    #[test]
    fn half_order_erfc_identity() {
        let p = MlParams::one(0.5).unwrap();
        let v = ml_real(p, -1.0).unwrap();
        assert!((v - 1f64.exp() * erfc(1.0)).abs() < 1e-12);
        assert!((v - 0.4275836).abs() < 1e-7);
        for &x in &[0.3, 2.0, 4.0, 7.5, 12.0, 20.0] {
            let v = ml_real(p, -x).unwrap();
            let want = (x * x).exp() * erfc(x);
            assert!((v - want).abs() < 1e-12, "x = {x}: {v} vs {want}");
        }
    }

    #[test]
    fn contour_agrees_with_series_at_switch() {
        for &(a, b) in &[(0.96, 1.0), (0.96, 0.96), (0.8, 1.0), (0.8, 0.8), (0.9, 2.0)] {
            let p = MlParams::new(a, b).unwrap();
            for k in 0..12 {
                let z = Complex64::from_polar(Z_SWITCH, std::f64::consts::PI * k as f64 / 11.0);
                let Some(s) = ml_series(p, z) else { continue };
                let q = ml_contour(p, z).unwrap();
                assert!((s - q).norm() < 1e-10 * s.norm().max(1.0), "{a} {b} {z}: {s} {q}");
            }
        }
    }

    #[test]
    fn asymptotic_agrees_with_contour() {
        for &(a, b) in &[(0.96, 1.0), (0.96, 0.96), (0.6, 0.6), (0.8, 1.0)] {
            let p = MlParams::new(a, b).unwrap();
            for &x in &[-40.0, -300.0, -5000.0] {
                let q = ml_contour(p, c(x)).unwrap();
                match series::asymptotic(a, b, c(x)) {
                    Some(s) => assert!((s - q).norm() < 1e-15, "{a} {b} {x}: {s} {q}"),
                    None => assert!(x > -100.0, "{a} {b} {x}: expansion should converge"),
                }
            }
        }
        // Tail value of E_{a,a}, which decays like -z^-2 / Gamma(-a).
        let p = MlParams::new(0.6, 0.6).unwrap();
        let v = series::asymptotic(0.6, 0.6, c(-5000.0)).unwrap();
        assert!((v.re - 1.0821429437585443e-8).abs() < 1e-22);
        assert!((ml_real(p, -40.0).unwrap() - ml_reference(p, -40.0).unwrap()).abs() < 1e-17);
    }

    #[test]
    fn survival_shape_on_negative_axis() {
        for &a in &[0.4, 0.76, 0.96] {
            let p = MlParams::one(a).unwrap();
            let mut prev = 1.0;
            for i in 0..400 {
                let x = 0.05 * i as f64;
                let v = ml_real(p, -x.powf(a) * 2.0).unwrap();
                assert!(v > 0.0 && v <= 1.0 && v <= prev + 1e-13, "{a} {x} {v}");
                prev = v;
            }
        }
    }

    #[test]
    fn matrix_at_zero_scale_is_identity() {
        let p = MlParams::one(0.8).unwrap();
        let m = ml_matrix(p, &coxian(), 0.0).unwrap();
        assert_eq!(m, DMatrix::identity(3, 3));
    }

    #[test]
    fn matrix_exponential_case() {
        let p = MlParams::one(1.0).unwrap();
        let t = coxian();
        let m = ml_matrix(p, &t, 7.0).unwrap();
        let e = t.exp(7.0).unwrap();
        assert!((m - e).amax() < 1e-12);
    }

    #[test]
    fn matrix_spectral_matches_dense_paths() {
        let t = coxian();
        for &(a, b) in &[(0.96, 1.0), (0.8, 0.8), (0.5, 1.0)] {
            let p = MlParams::new(a, b).unwrap();
            for &s in &[0.5, 10.0, 200.0] {
                let spectral = ml_matrix(p, &t, s).unwrap();
                let a_mat = t.matrix() * s.powf(a);
                let dense = if s < 1.0 {
                    series::matrix_series(a, b, &a_mat).unwrap()
                } else {
                    contour::contour_matrix(a, b, &a_mat).unwrap()
                };
                assert!((&spectral - &dense).amax() < 1e-10, "{a} {b} {s}");
            }
        }
    }

    #[test]
    fn jordan_block_uses_fallback() {
        // E_a of [[-l, 1], [0, -l]] has off-diagonal derivative entry.
        let t = SubIntensity::from_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let p = MlParams::one(0.7).unwrap();
        for &s in &[0.8, 3.0, 40.0] {
            let m = ml_matrix(p, &t, s).unwrap();
            let c = s.powf(0.7);
            let diag = ml_real(p, -c).unwrap();
            let hstep = 1e-5;
            let deriv = (ml_real(p, -c + hstep).unwrap() - ml_real(p, -c - hstep).unwrap()) / (2.0 * hstep);
            assert!((m[(0, 0)] - diag).abs() < 1e-10);
            assert!((m[(1, 1)] - diag).abs() < 1e-10);
            assert!((m[(0, 1)] - c * deriv).abs() < 1e-7, "{s}: {} {}", m[(0, 1)], c * deriv);
            assert!(m[(1, 0)].abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_row_sums_nonincreasing() {
        let t = coxian();
        let p = MlParams::one(0.96).unwrap();
        let spec = t.spectral();
        let mut prev = 1.0;
        for i in 0..=200 {
            let s = 0.5 * i as f64;
            let m = ml_matrix_with(p, &t, &spec, s).unwrap();
            let surv: f64 = m.row(0).iter().sum();
            assert!(surv > 0.0 && surv < 1.0 + 1e-12 && surv <= prev + 1e-12, "{s} {surv}");
            prev = surv;
        }
    }

    #[test]
    fn bilinear_spectral_and_dense_agree() {
        let t = coxian();
        let spec = t.spectral();
        let x = DVector::from_vec(vec![0.6, 0.3, 0.1]);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let p = MlParams::new(0.8, 0.8).unwrap();
        let fast = MlBilinear::new(p, &t, &spec, &x, &y).unwrap();
        assert!(fast.is_spectral());
        for &c in &[0.0, 0.3, 4.0, 90.0] {
            let m = if c == 0.0 { DMatrix::identity(3, 3) * rgamma(0.8) } else { ml_dense(p, &(t.matrix() * c)).unwrap() };
            let want = x.dot(&(m * &y));
            assert!((fast.eval(c).unwrap() - want).abs() < 1e-11, "{c}");
        }
        let jordan = SubIntensity::from_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let xs = DVector::from_vec(vec![1.0, 0.0]);
        let ys = DVector::from_vec(vec![1.0, 1.0]);
        let dense = MlBilinear::new(MlParams::one(1.0).unwrap(), &jordan, &jordan.spectral(), &xs, &ys).unwrap();
        assert!(!dense.is_spectral());
        // Erlang(2) survival (1 + c) e^{-c}.
        assert!((dense.eval(2.0).unwrap() - 3.0 * (-2f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn reference_series_agrees_with_fast_paths() {
        let p = MlParams::new(0.96, 0.96).unwrap();
        for &x in &[-0.7, -4.0, -17.0, -63.0] {
            let r = ml_reference(p, x).unwrap();
            let f = ml_real(p, x).unwrap();
            assert!((r - f).abs() < 1e-12, "{x}: {r} {f}");
        }
    }
}
