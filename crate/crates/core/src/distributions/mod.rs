//! Phase-type laws with an optional inhomogeneity transform and fractional
//! clock: distribution functions, densities, hazards, moments and samplers.

mod sampling;
mod transform;

use nalgebra::DVector;
use thiserror::Error;

use crate::matrix::{MatrixError, SpectralDecomposition, SubIntensity};
use crate::mittag_leffler::{MlBilinear, MlError, MlParams};
use crate::quadrature::{integrate_scalar, QuadError, QuadOptions, Range};

pub use sampling::{sample_lifetime, sample_one_sided_stable, JumpChain};
pub use transform::{dual_density_h1, dual_density_h2, CustomTransform, InhomogeneityTransform};

/// Survival probabilities below this are treated as exhausted.
pub const SURVIVAL_FLOOR: f64 = 1e-280;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("initial vector is not a probability vector: {0}")]
    InvalidProbability(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("transform fails its invariants: {0}")]
    TransformInvariant(String),
    #[error("survival probability underflows at x = {0}")]
    TailExhausted(f64),
    #[error("expectation integral does not converge: {0}")]
    Diverged(String),
    #[error("argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Initial distribution `pi` over the transient states together with the
/// sub-intensity `T`.
#[derive(Debug, Clone)]
pub struct PhaseModel {
    pi: DVector<f64>,
    t: SubIntensity,
    spec: SpectralDecomposition,
    chain: JumpChain,
}

impl PhaseModel {
    pub fn new(pi: DVector<f64>, t: SubIntensity) -> Result<Self, DistError> {
        if pi.len() != t.dim() {
            return Err(DistError::DimensionMismatch {
                expected: t.dim(),
                got: pi.len(),
            });
        }
        if pi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DistError::InvalidProbability("negative or non-finite entry".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DistError::InvalidProbability(format!("entries sum to {total}")));
        }
        let spec = t.spectral();
        let chain = JumpChain::new(&pi, &t);
        Ok(Self { pi, t, spec, chain })
    }

    pub fn from_rows(pi: &[f64], rows: &[Vec<f64>]) -> Result<Self, DistError> {
        let t = SubIntensity::from_rows(rows)?;
        Self::new(DVector::from_column_slice(pi), t)
    }

    pub fn dim(&self) -> usize {
        self.t.dim()
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn sub_intensity(&self) -> &SubIntensity {
        &self.t
    }

    pub fn exit(&self) -> &DVector<f64> {
        self.t.exit()
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spec
    }

    pub fn jump_chain(&self) -> &JumpChain {
        &self.chain
    }

    /// Mean `pi (-T)^{-1} e` of the untransformed absorption time.
    pub fn ph_mean(&self) -> Result<f64, DistError> {
        let u = self.t.green()?;
        Ok((self.pi.transpose() * u).sum())
    }

    /// The same sub-intensity started from a different initial vector.
    pub fn with_initial(&self, pi: DVector<f64>) -> Result<Self, DistError> {
        if pi.len() != self.dim() {
            return Err(DistError::DimensionMismatch {
                expected: self.dim(),
                got: pi.len(),
            });
        }
        let total: f64 = pi.iter().sum();
        if pi.iter().any(|v| !v.is_finite() || *v < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(DistError::InvalidProbability(format!("entries sum to {total}")));
        }
        let chain = JumpChain::new(&pi, &self.t);
        Ok(Self {
            pi,
            t: self.t.clone(),
            spec: self.spec.clone(),
            chain,
        })
    }
}

/// Fractional order of the clock; `alpha = 1` is the Markov case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalClock {
    alpha: f64,
}

impl FractionalClock {
    pub fn new(alpha: f64) -> Result<Self, DistError> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self { alpha })
        } else {
            Err(DistError::InvalidParameter { name: "alpha", value: alpha })
        }
    }

    pub fn markov() -> Self {
        Self { alpha: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_markov(&self) -> bool {
        self.alpha == 1.0
    }
}

/// Density value with a flag for the integrable singularity at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfValue {
    pub value: f64,
    /// Set when `alpha < 1` and the prefactor `(g^{-1}(x))^{alpha-1}`
    /// exceeds one, i.e. the density is in its singular left tail.
    pub singular: bool,
}

/// A fully specified law `tau = g(tau_Z)` with precomputed bilinear forms,
/// for repeated evaluation.
#[derive(Debug, Clone)]
pub struct IphLaw {
    model: PhaseModel,
    g: InhomogeneityTransform,
    clock: FractionalClock,
    survival_form: MlBilinear,
    density_form: MlBilinear,
}

impl IphLaw {
    pub fn new(model: PhaseModel, g: InhomogeneityTransform, clock: FractionalClock) -> Result<Self, DistError> {
        let a = clock.alpha();
        let e = DVector::from_element(model.dim(), 1.0);
        let survival_form = MlBilinear::new(MlParams::new(a, 1.0)?, &model.t, &model.spec, &model.pi, &e)?;
        let density_form = MlBilinear::new(MlParams::new(a, a)?, &model.t, &model.spec, &model.pi, model.exit())?;
        Ok(Self {
            model,
            g,
            clock,
            survival_form,
            density_form,
        })
    }

    pub fn model(&self) -> &PhaseModel {
        &self.model
    }

    pub fn transform(&self) -> &InhomogeneityTransform {
        &self.g
    }

    pub fn clock(&self) -> FractionalClock {
        self.clock
    }

    fn check(x: f64) -> Result<(), DistError> {
        if x >= 0.0 {
            Ok(())
        } else {
            Err(DistError::NegativeArgument(x))
        }
    }

    /// `pi E_alpha(T (g^{-1} x)^alpha) e`.
    pub fn survival(&self, x: f64) -> Result<f64, DistError> {
        Self::check(x)?;
        if x.is_infinite() {
            return Ok(0.0);
        }
        let y = self.g.g_inv(x);
        if y.is_infinite() {
            return Ok(0.0);
        }
        let s = self.survival_form.eval(y.powf(self.clock.alpha()))?;
        Ok(s.clamp(0.0, 1.0))
    }

    pub fn cdf(&self, x: f64) -> Result<f64, DistError> {
        Ok(1.0 - self.survival(x)?)
    }

    pub fn pdf(&self, x: f64) -> Result<PdfValue, DistError> {
        Self::check(x)?;
        let a = self.clock.alpha();
        let y = self.g.g_inv(x);
        let singular = a < 1.0 && y < 1.0;
        if a < 1.0 && y == 0.0 {
            return Ok(PdfValue {
                value: f64::INFINITY,
                singular,
            });
        }
        if y.is_infinite() {
            return Ok(PdfValue { value: 0.0, singular });
        }
        let core = self.density_form.eval(y.powf(a))?;
        let value = (y.powf(a - 1.0) * core * self.g.lambda(x)).max(0.0);
        Ok(PdfValue { value, singular })
    }

    pub fn hazard(&self, x: f64) -> Result<f64, DistError> {
        let s = self.survival(x)?;
        if s < SURVIVAL_FLOOR {
            return Err(DistError::TailExhausted(x));
        }
        Ok(self.pdf(x)?.value / s)
    }

    pub fn cumulative_hazard(&self, x: f64) -> Result<f64, DistError> {
        let s = self.survival(x)?;
        if s < SURVIVAL_FLOOR {
            return Err(DistError::TailExhausted(x));
        }
        Ok(-s.ln())
    }

    /// `E h(tau)` computed as `(1/alpha) int_0^inf h(g(s^{1/alpha})) pi E_{alpha,alpha}(T s) t ds`,
    /// which removes the density singularity at the origin.
    pub fn expectation<H: Fn(f64) -> f64>(&self, h: H) -> Result<f64, DistError> {
        let a = self.clock.alpha();
        let scale = 0.05 / self.model.t.norm_inf().max(1e-12);
        let opts = QuadOptions::default().with_rel_tol(1e-9).with_abs_tol(1e-13);
        let integrand = |s: f64| -> Result<f64, DistError> {
            let x = self.g.g(s.powf(1.0 / a));
            let hx = h(x);
            if hx == 0.0 {
                return Ok(0.0);
            }
            Ok(hx * self.density_form.eval(s)? / a)
        };
        match integrate_scalar(integrand, Range::ToInfinity { a: 0.0 }, scale, opts) {
            Ok((v, _)) => Ok(v),
            Err(QuadError::Integrand(e)) => Err(e),
            Err(QuadError::Unconverged { values, error }) => Err(DistError::Diverged(format!(
                "estimate {} with error {error:e}",
                values[0]
            ))),
            Err(QuadError::NonFinite(s)) => Err(DistError::Diverged(format!("integrand not finite at s = {s}"))),
        }
    }

    /// One draw of the lifetime.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_lifetime(&self.model, &self.g, self.clock, rng)
    }
}

/// Distribution function `1 - pi E_alpha(T (g^{-1} x)^alpha) e`.
pub fn iph_cdf(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    x: f64,
) -> Result<f64, DistError> {
    IphLaw::new(model.clone(), g.clone(), clock)?.cdf(x)
}

pub fn iph_survival(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    x: f64,
) -> Result<f64, DistError> {
    IphLaw::new(model.clone(), g.clone(), clock)?.survival(x)
}

/// Density `(g^{-1} x)^{alpha-1} pi E_{alpha,alpha}(T (g^{-1} x)^alpha) t lambda(x)`.
pub fn iph_pdf(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    x: f64,
) -> Result<PdfValue, DistError> {
    IphLaw::new(model.clone(), g.clone(), clock)?.pdf(x)
}

pub fn hazard(model: &PhaseModel, g: &InhomogeneityTransform, clock: FractionalClock, x: f64) -> Result<f64, DistError> {
    IphLaw::new(model.clone(), g.clone(), clock)?.hazard(x)
}

pub fn cumulative_hazard(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    x: f64,
) -> Result<f64, DistError> {
    IphLaw::new(model.clone(), g.clone(), clock)?.cumulative_hazard(x)
}

pub fn expectation<H: Fn(f64) -> f64>(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    h: H,
) -> Result<f64, DistError> {
    IphLaw::new(model.clone(), g.clone(), clock)?.expectation(h)
}
