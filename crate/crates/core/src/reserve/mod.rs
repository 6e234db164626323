//! Prospective reserves of multi-state contracts: Markov and inhomogeneous
//! reserves at any time, time-0 forms through dual densities, closed forms
//! for the Pareto and Gompertz clocks, fractional reserves, fair premiums
//! and liability curves.

mod closed;
mod fractional;
mod markov;
mod premium;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::distributions::{DistError, PhaseModel};
use crate::matrix::MatrixError;
use crate::mittag_leffler::MlError;
use crate::quadrature::QuadError;

pub use closed::{
    generalized_exp_integral, generalized_exp_integral_matrix, reserve_closed_gompertz, reserve_closed_pareto,
    scaled_exp_integral,
};
pub use fractional::{
    liability_curve, reserve_at_issue, reserve_fractional_conditional, reserve_fractional_time0, LiabilityPoint,
};
pub use markov::{reserve_markov, reserve_markov_with, reserve_time0_dual, MarkovPath};
pub use premium::{fair_premium, PremiumProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReserveError {
    #[error("invalid contract: {0}")]
    InvalidContract(String),
    #[error("valuation time {t} is not before the horizon {n}")]
    HorizonBeforeT { t: f64, n: f64 },
    #[error("quadrature did not converge (estimate {estimate}, error {error:e})")]
    QuadratureUnconverged { estimate: f64, error: f64 },
    #[error("conditioning values inconsistent: g(u) = {gu} is before t = {t}")]
    InconsistentConditioning { t: f64, gu: f64 },
    #[error("this form needs an infinite horizon and a positive interest rate")]
    RequiresPerpetuity,
    #[error("premiums on the collectible states cannot fund the liabilities")]
    Unfundable,
    #[error("invalid premium profile: {0}")]
    InvalidProfile(String),
    #[error("state {state} out of range for {dim} phases")]
    StateOutOfRange { state: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

impl<E: Into<ReserveError>> From<QuadError<E>> for ReserveError {
    fn from(e: QuadError<E>) -> Self {
        match e {
            QuadError::Unconverged { values, error } => ReserveError::QuadratureUnconverged {
                estimate: values.iter().sum(),
                error,
            },
            QuadError::NonFinite(x) => ReserveError::QuadratureUnconverged {
                estimate: f64::NAN,
                error: x,
            },
            QuadError::Integrand(e) => e.into(),
        }
    }
}

/// Contract term: a finite calendar time or no expiry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn value(&self) -> f64 {
        match self {
            Horizon::Finite(n) => *n,
            Horizon::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Horizon::Infinite)
    }
}

/// Payment stream of a multi-state policy.
///
/// Annuities `a` and premiums `c` are paid continuously while in a state,
/// `B[i][j]` is paid on a jump from `i` to `j` and `b[i]` on death from `i`.
/// Interest is a constant force `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contract {
    a: DVector<f64>,
    c: DVector<f64>,
    b_jump: DMatrix<f64>,
    b_death: DVector<f64>,
    r: f64,
    horizon: Horizon,
}

impl Contract {
    pub fn new(
        a: DVector<f64>,
        c: DVector<f64>,
        b_jump: DMatrix<f64>,
        b_death: DVector<f64>,
        r: f64,
        horizon: Horizon,
    ) -> Result<Self, ReserveError> {
        let p = a.len();
        let bad = |m: String| Err(ReserveError::InvalidContract(m));
        if c.len() != p || b_death.len() != p || b_jump.nrows() != p || b_jump.ncols() != p {
            return bad(format!("payment vectors and lump matrix must all have dimension {p}"));
        }
        let finite = a.iter().chain(c.iter()).chain(b_jump.iter()).chain(b_death.iter()).all(|v| v.is_finite());
        if !finite {
            return bad("payments must be finite".into());
        }
        if let Some(i) = (0..p).find(|&i| b_jump[(i, i)] != 0.0) {
            return bad(format!("transition lump matrix has nonzero diagonal entry at state {i}"));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return bad(format!("interest rate {r} must be a nonnegative number"));
        }
        match horizon {
            Horizon::Finite(n) if !(n > 0.0 && n.is_finite()) => return bad(format!("horizon {n} must be positive")),
            Horizon::Infinite if r == 0.0 => return bad("an infinite horizon needs a positive interest rate".into()),
            _ => {}
        }
        Ok(Self {
            a,
            c,
            b_jump,
            b_death,
            r,
            horizon,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn annuities(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn premiums(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn transition_lumps(&self) -> &DMatrix<f64> {
        &self.b_jump
    }

    pub fn death_lumps(&self) -> &DVector<f64> {
        &self.b_death
    }

    pub fn interest(&self) -> f64 {
        self.r
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    /// Net continuous payment rate `a - c`.
    pub fn net_rate(&self) -> DVector<f64> {
        &self.a - &self.c
    }

    /// Expected lump-sum rate per unit intensity, `(T * B) e + t * b` with
    /// entrywise products.
    pub fn lump_rate(&self, model: &PhaseModel) -> DVector<f64> {
        let t = model.sub_intensity().matrix();
        let exit = model.exit();
        DVector::from_fn(self.dim(), |i, _| {
            let jumps: f64 = (0..self.dim()).filter(|&j| j != i).map(|j| t[(i, j)] * self.b_jump[(i, j)]).sum();
            jumps + exit[i] * self.b_death[i]
        })
    }

    pub fn with_premiums(&self, c: DVector<f64>) -> Result<Self, ReserveError> {
        Self::new(self.a.clone(), c, self.b_jump.clone(), self.b_death.clone(), self.r, self.horizon)
    }

    pub fn without_premiums(&self) -> Self {
        let mut out = self.clone();
        out.c.fill(0.0);
        out
    }

    pub fn with_interest(&self, r: f64) -> Result<Self, ReserveError> {
        Self::new(self.a.clone(), self.c.clone(), self.b_jump.clone(), self.b_death.clone(), r, self.horizon)
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Result<Self, ReserveError> {
        Self::new(self.a.clone(), self.c.clone(), self.b_jump.clone(), self.b_death.clone(), self.r, horizon)
    }

    /// Every payment multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            a: &self.a * k,
            c: &self.c * k,
            b_jump: &self.b_jump * k,
            b_death: &self.b_death * k,
            r: self.r,
            horizon: self.horizon,
        }
    }

    pub(crate) fn check_model(&self, model: &PhaseModel) -> Result<(), ReserveError> {
        if model.dim() != self.dim() {
            return Err(ReserveError::DimensionMismatch {
                expected: model.dim(),
                got: self.dim(),
            });
        }
        Ok(())
    }
}

/// How a reserve value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReserveMethod {
    SpectralClosedForm,
    Quadrature,
    DualLaplace,
    FractionalQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReserveReport {
    pub value: f64,
    pub annuity_component: f64,
    pub lump_component: f64,
    pub method: ReserveMethod,
    pub quadrature_error_estimate: f64,
}

impl ReserveReport {
    pub(crate) fn new(annuity: f64, lump: f64, method: ReserveMethod, error: f64) -> Self {
        Self {
            value: annuity + lump,
            annuity_component: annuity,
            lump_component: lump,
            method,
            quadrature_error_estimate: error,
        }
    }
}

/// State information at the valuation time.
#[derive(Debug, Clone, PartialEq)]
pub enum CurrentState {
    Index(usize),
    Distribution(DVector<f64>),
}

impl CurrentState {
    pub(crate) fn row(&self, p: usize) -> Result<DVector<f64>, ReserveError> {
        match self {
            CurrentState::Index(i) if *i < p => Ok(DVector::from_fn(p, |k, _| if k == *i { 1.0 } else { 0.0 })),
            CurrentState::Index(i) => Err(ReserveError::StateOutOfRange { state: *i, dim: p }),
            CurrentState::Distribution(x) if x.len() == p => Ok(x.clone()),
            CurrentState::Distribution(x) => Err(ReserveError::DimensionMismatch {
                expected: p,
                got: x.len(),
            }),
        }
    }
}

impl From<usize> for CurrentState {
    fn from(i: usize) -> Self {
        CurrentState::Index(i)
    }
}

impl From<DVector<f64>> for CurrentState {
    fn from(x: DVector<f64>) -> Self {
        CurrentState::Distribution(x)
    }
}

pub(crate) fn require_perpetuity(contract: &Contract) -> Result<(), ReserveError> {
    if contract.horizon().is_infinite() && contract.interest() > 0.0 {
        Ok(())
    } else {
        Err(ReserveError::RequiresPerpetuity)
    }
}

/// Tolerances shared by the reserve quadratures.
pub(crate) fn quad_options() -> crate::quadrature::QuadOptions {
    crate::quadrature::QuadOptions::default()
        .with_rel_tol(1e-11)
        .with_abs_tol(1e-13)
}

/// `x exp(T s)` as a column vector.
pub(crate) fn row_exp(x: &DVector<f64>, t: &DMatrix<f64>, s: f64) -> Result<DVector<f64>, MatrixError> {
    let e = crate::matrix::matrix_exp(&(t * s))?;
    Ok(e.transpose() * x)
}

/// `e^{-r (g(y) - t)} g'(y)` without forming `0 * inf` far in the tail.
pub(crate) fn discounted_speed(g: &crate::distributions::InhomogeneityTransform, r: f64, t: f64, y: f64) -> (f64, f64) {
    let d = (-r * (g.g(y) - t)).exp();
    if d == 0.0 {
        (0.0, 0.0)
    } else {
        (d, d * g.g_prime(y))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::distributions::InhomogeneityTransform;

    pub fn coxian() -> PhaseModel {
        PhaseModel::from_rows(
            &[1.0, 0.0, 0.0],
            &[
                vec![-0.1722, 0.1585, 0.0],
                vec![0.0, -0.5663, 0.5664],
                vec![0.0, 0.0, -0.0052],
            ],
        )
        .unwrap()
    }

    /// Unit annuity in every state and unit lumps on every move.
    pub fn c1(horizon: Horizon) -> Contract {
        let mut b = DMatrix::from_element(3, 3, 1.0);
        b.fill_diagonal(0.0);
        Contract::new(
            DVector::from_element(3, 1.0),
            DVector::zeros(3),
            b,
            DVector::from_element(3, 1.0),
            0.03,
            horizon,
        )
        .unwrap()
    }

    pub fn c2(horizon: Horizon) -> Contract {
        let mut b = DMatrix::zeros(3, 3);
        b[(1, 2)] = 1.0;
        Contract::new(
            DVector::from_element(3, 0.5),
            DVector::zeros(3),
            b,
            DVector::from_element(3, 50.0),
            0.03,
            horizon,
        )
        .unwrap()
    }

    pub fn families() -> Vec<InhomogeneityTransform> {
        vec![
            InhomogeneityTransform::Identity,
            InhomogeneityTransform::power_weibull(0.7).unwrap(),
            InhomogeneityTransform::pareto_exp(10.0).unwrap(),
            InhomogeneityTransform::gompertz_log(0.1383).unwrap(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn contract_validation() {
        let p = 2;
        let z = DVector::zeros(p);
        let mut b = DMatrix::zeros(p, p);
        assert!(Contract::new(z.clone(), z.clone(), b.clone(), z.clone(), 0.0, Horizon::Infinite).is_err());
        assert!(Contract::new(z.clone(), z.clone(), b.clone(), z.clone(), -0.1, Horizon::Finite(1.0)).is_err());
        assert!(Contract::new(z.clone(), z.clone(), b.clone(), z.clone(), 0.0, Horizon::Finite(0.0)).is_err());
        b[(1, 1)] = 1.0;
        assert!(Contract::new(z.clone(), z.clone(), b, z.clone(), 0.03, Horizon::Finite(1.0)).is_err());
        assert!(Contract::new(z.clone(), DVector::zeros(3), DMatrix::zeros(p, p), z, 0.03, Horizon::Finite(1.0)).is_err());
    }

    #[test]
    fn lump_rate_of_c1() {
        let m = coxian();
        let l = c1(Horizon::Infinite).lump_rate(&m);
        // With unit lumps everywhere the rate is the total outflow -T_ii.
        for i in 0..3 {
            assert!((l[i] + m.sub_intensity().matrix()[(i, i)]).abs() < 1e-15);
        }
    }

    #[test]
    fn current_state_rows() {
        assert_eq!(CurrentState::Index(1).row(3).unwrap(), DVector::from_vec(vec![0.0, 1.0, 0.0]));
        assert!(CurrentState::Index(3).row(3).is_err());
        assert!(CurrentState::Distribution(DVector::zeros(2)).row(3).is_err());
    }
}
