use std::fmt;
use std::sync::Arc;

use super::DistError;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied clock: `g`, its inverse, `lambda = (g^{-1})'` and `g'`.
#[derive(Clone)]
pub struct CustomTransform {
    name: String,
    g: ScalarFn,
    g_inv: ScalarFn,
    lambda: ScalarFn,
    g_prime: ScalarFn,
}

impl fmt::Debug for CustomTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTransform").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Monotone time transform `g` with `g(0) = 0` mapping the Markov clock to
/// calendar time: the lifetime is `g(tau_Z)`.
#[derive(Debug, Clone)]
pub enum InhomogeneityTransform {
    Identity,
    /// `g(x) = x^(1/theta)`.
    PowerWeibull { theta: f64 },
    /// `g(x) = beta (e^x - 1)`.
    ParetoExp { beta: f64 },
    /// `g(u) = log(kappa u + 1) / kappa`.
    GompertzLog { kappa: f64 },
    Custom(CustomTransform),
}

impl PartialEq for InhomogeneityTransform {
    fn eq(&self, other: &Self) -> bool {
        use InhomogeneityTransform::*;
        match (self, other) {
            (Identity, Identity) => true,
            (PowerWeibull { theta: a }, PowerWeibull { theta: b }) => a == b,
            (ParetoExp { beta: a }, ParetoExp { beta: b }) => a == b,
            (GompertzLog { kappa: a }, GompertzLog { kappa: b }) => a == b,
            (Custom(a), Custom(b)) => Arc::ptr_eq(&a.g, &b.g),
            _ => false,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64, DistError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(DistError::InvalidParameter { name, value: v })
    }
}

impl InhomogeneityTransform {
    pub fn power_weibull(theta: f64) -> Result<Self, DistError> {
        Ok(Self::PowerWeibull { theta: positive("theta", theta)? })
    }

    pub fn pareto_exp(beta: f64) -> Result<Self, DistError> {
        Ok(Self::ParetoExp { beta: positive("beta", beta)? })
    }

    pub fn gompertz_log(kappa: f64) -> Result<Self, DistError> {
        Ok(Self::GompertzLog { kappa: positive("kappa", kappa)? })
    }

    /// Registers a user-defined clock after checking it on a grid.
    pub fn custom<G, H, L, D>(name: &str, g: G, g_inv: H, lambda: L, g_prime: D) -> Result<Self, DistError>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
        L: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let t = Self::Custom(CustomTransform {
            name: name.to_string(),
            g: Arc::new(g),
            g_inv: Arc::new(g_inv),
            lambda: Arc::new(lambda),
            g_prime: Arc::new(g_prime),
        });
        t.check_invariants()?;
        Ok(t)
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Identity => "identity",
            Self::PowerWeibull { .. } => "power-weibull",
            Self::ParetoExp { .. } => "pareto-exp",
            Self::GompertzLog { .. } => "gompertz-log",
            Self::Custom(c) => &c.name,
        }
    }

    /// The family parameter, if any.
    pub fn parameter(&self) -> Option<f64> {
        match *self {
            Self::PowerWeibull { theta } => Some(theta),
            Self::ParetoExp { beta } => Some(beta),
            Self::GompertzLog { kappa } => Some(kappa),
            _ => None,
        }
    }

    /// Markov time to calendar time.
    pub fn g(&self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::PowerWeibull { theta } => x.powf(1.0 / theta),
            Self::ParetoExp { beta } => beta * x.exp_m1(),
            Self::GompertzLog { kappa } => (kappa * x).ln_1p() / kappa,
            Self::Custom(c) => (c.g)(x),
        }
    }

    /// Calendar time to Markov time.
    pub fn g_inv(&self, t: f64) -> f64 {
        match self {
            Self::Identity => t,
            Self::PowerWeibull { theta } => t.powf(*theta),
            Self::ParetoExp { beta } => (t / beta).ln_1p(),
            Self::GompertzLog { kappa } => (kappa * t).exp_m1() / kappa,
            Self::Custom(c) => (c.g_inv)(t),
        }
    }

    /// Intensity `lambda(t) = d g^{-1}(t) / dt`.
    pub fn lambda(&self, t: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::PowerWeibull { theta } => theta * t.powf(theta - 1.0),
            Self::ParetoExp { beta } => 1.0 / (beta + t),
            Self::GompertzLog { kappa } => (kappa * t).exp(),
            Self::Custom(c) => (c.lambda)(t),
        }
    }

    /// Derivative of `g` in Markov time.
    pub fn g_prime(&self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::PowerWeibull { theta } => x.powf(1.0 / theta - 1.0) / theta,
            Self::ParetoExp { beta } => beta * x.exp(),
            Self::GompertzLog { kappa } => 1.0 / (kappa * x + 1.0),
            Self::Custom(c) => (c.g_prime)(x),
        }
    }

    /// Verifies `g(0) = 0`, strict monotonicity, the inverse pair and both
    /// derivatives against finite differences on a fixed grid.
    pub fn check_invariants(&self) -> Result<(), DistError> {
        let fail = |what: String| Err(DistError::TransformInvariant(format!("{}: {what}", self.name())));
        if self.g(0.0).abs() > 1e-12 || self.g_inv(0.0).abs() > 1e-12 {
            return fail("g(0) must be 0".into());
        }
        const GRID: [f64; 12] = [1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0, 100.0];
        let mut prev = 0.0;
        for &x in &GRID {
            let gx = self.g(x);
            if !(gx > prev) || !gx.is_finite() {
                return fail(format!("g not strictly increasing at {x}"));
            }
            prev = gx;
            let back = self.g(self.g_inv(x));
            if (back - x).abs() > 1e-10 * x {
                return fail(format!("g(g^-1({x})) = {back}"));
            }
            let h = 1e-5 * x;
            let fd = (self.g_inv(x + h) - self.g_inv(x - h)) / (2.0 * h);
            let lam = self.lambda(x);
            if !(lam > 0.0) || (fd - lam).abs() > 1e-6 * lam {
                return fail(format!("lambda({x}) = {lam}, finite difference {fd}"));
            }
            let y = self.g_inv(x);
            let hy = 1e-5 * y;
            let fd = (self.g(y + hy) - self.g(y - hy)) / (2.0 * hy);
            let gp = self.g_prime(y);
            if (fd - gp).abs() > 1e-6 * gp.abs() {
                return fail(format!("g'({y}) = {gp}, finite difference {fd}"));
            }
        }
        Ok(())
    }

    /// `h1(u) = r e^{-r g(u)} g'(u)`, a density in Markov time.
    pub fn dual_h1(&self, r: f64, u: f64) -> f64 {
        let decay = (-r * self.g(u)).exp();
        // Far in the tail g' may overflow while the exponential underflows.
        if decay == 0.0 {
            0.0
        } else {
            r * decay * self.g_prime(u)
        }
    }

    /// `h2(u) = w e^{-w g^{-1}(u)} lambda(u)`, a density in calendar time.
    pub fn dual_h2(&self, w: f64, u: f64) -> f64 {
        let decay = (-w * self.g_inv(u)).exp();
        if decay == 0.0 {
            0.0
        } else {
            w * decay * self.lambda(u)
        }
    }
}

/// Dual density `h1` of `g` with rate `r`.
pub fn dual_density_h1(g: &InhomogeneityTransform, r: f64, u: f64) -> f64 {
    g.dual_h1(r, u)
}

/// Dual density `h2` of `g` with rate `w`.
pub fn dual_density_h2(g: &InhomogeneityTransform, w: f64, u: f64) -> f64 {
    g.dual_h2(w, u)
}
