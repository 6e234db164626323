//! Reserves under the fractional clock: the conditional reserve given the
//! subordinator state, the perpetuity reserve at issue, and liability curves.

use nalgebra::DVector;
use rayon::prelude::*;

use super::{
    discounted_speed, quad_options, require_perpetuity, reserve_markov, Contract, CurrentState, Horizon,
    ReserveError, ReserveMethod, ReserveReport,
};
use crate::distributions::{FractionalClock, InhomogeneityTransform, PhaseModel};
use crate::mittag_leffler::{MlBilinear, MlParams};
use crate::quadrature::{integrate, Range};

/// `int_0^len e^{-r x} dx`.
fn discount_integral(r: f64, len: f64) -> f64 {
    if r == 0.0 {
        len
    } else {
        -(-r * len).exp_m1() / r
    }
}

/// Reserve at calendar time `t` conditional on the subordinator overshoot
/// `u` (Markov time reached by the first jump of the clock after `t`), the
/// inverse-subordinator value `v`, and the state occupied at Markov time `v`.
///
/// Until calendar time `g(u)` the process sits in its current state, so only
/// annuities accrue; afterwards the Mittag-Leffler kernels take over. Both
/// kernels are integrated in `s = (g^{-1}(x) - u)^alpha`, which removes the
/// singularity of the lump kernel at `x = g(u)`.
#[allow(clippy::too_many_arguments)]
pub fn reserve_fractional_conditional(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    contract: &Contract,
    t: f64,
    u: f64,
    v: f64,
    state_at_v: impl Into<CurrentState>,
) -> Result<ReserveReport, ReserveError> {
    contract.check_model(model)?;
    let n = contract.horizon().value();
    if !(t >= 0.0 && t < n) {
        return Err(ReserveError::HorizonBeforeT { t, n });
    }
    let gu = g.g(u);
    if !(u >= 0.0 && v >= 0.0) || gu < t {
        return Err(ReserveError::InconsistentConditioning { t, gu });
    }
    let x = state_at_v.into().row(model.dim())?;
    let r = contract.interest();
    let net = contract.net_rate();
    let lump = contract.lump_rate(model);
    let bracket = discount_integral(r, gu.min(n) - t) * x.dot(&net);
    if gu >= n {
        return Ok(ReserveReport::new(bracket, 0.0, ReserveMethod::FractionalQuadrature, 0.0));
    }

    let a = clock.alpha();
    let tsub = model.sub_intensity();
    let spec = model.spectral();
    let annuity = MlBilinear::new(MlParams::new(a, 1.0)?, tsub, spec, &x, &net)?;
    let lumps = MlBilinear::new(MlParams::new(a, a)?, tsub, spec, &x, &lump)?;
    let skip_ann = net.iter().all(|v| *v == 0.0);
    let skip_lump = lump.iter().all(|v| *v == 0.0);
    let range = match contract.horizon() {
        Horizon::Finite(n) => Range::Finite {
            a: 0.0,
            b: (g.g_inv(n) - u).max(0.0).powf(a),
        },
        Horizon::Infinite => Range::ToInfinity { a: 0.0 },
    };
    let scale = 0.05 * (tsub.norm_inf() + r).powf(-a);
    let out = integrate(
        |s, out: &mut [f64]| {
            out.fill(0.0);
            let y = s.powf(1.0 / a);
            let (d, dg) = discounted_speed(g, r, t, u + y);
            if d == 0.0 {
                return Ok(());
            }
            if !skip_ann {
                let jac = if a == 1.0 { dg } else { dg * s.powf(1.0 / a - 1.0) / a };
                if jac != 0.0 {
                    out[0] = jac * annuity.eval(s)?;
                }
            }
            if !skip_lump {
                out[1] = d / a * lumps.eval(s)?;
            }
            Ok::<_, ReserveError>(())
        },
        2,
        range,
        scale,
        quad_options(),
    )?;
    Ok(ReserveReport::new(
        bracket + out.values[0],
        out.values[1],
        ReserveMethod::FractionalQuadrature,
        out.error,
    ))
}

/// Perpetuity reserve at issue under the fractional clock.
///
/// With `J = int_0^inf e^{-r x} E_alpha(T (g^{-1} x)^alpha) dx` the annuity
/// part is `pi J (a - c)`, and integrating the lump kernel by parts gives
/// `pi (-T)^{-1} (I - r J) l`. Only one transform is integrated.
pub fn reserve_fractional_time0(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    contract: &Contract,
) -> Result<ReserveReport, ReserveError> {
    contract.check_model(model)?;
    require_perpetuity(contract)?;
    let a = clock.alpha();
    let r = contract.interest();
    let pi = model.pi();
    let tsub = model.sub_intensity();
    let spec = model.spectral();
    let resolved = tsub.green()? * contract.lump_rate(model);
    let params = MlParams::new(a, 1.0)?;
    let annuity = MlBilinear::new(params, tsub, spec, pi, &contract.net_rate())?;
    let lumps = MlBilinear::new(params, tsub, spec, pi, &resolved)?;
    let scale = 0.05 * (tsub.norm_inf() + r).powf(-a);
    let out = integrate(
        |s, out: &mut [f64]| {
            out.fill(0.0);
            let y = s.powf(1.0 / a);
            let (_, dg) = discounted_speed(g, r, 0.0, y);
            let jac = if a == 1.0 { dg } else { dg * s.powf(1.0 / a - 1.0) / a };
            if jac == 0.0 {
                return Ok(());
            }
            out[0] = jac * annuity.eval(s)?;
            out[1] = jac * lumps.eval(s)?;
            Ok::<_, ReserveError>(())
        },
        2,
        Range::ToInfinity { a: 0.0 },
        scale,
        quad_options(),
    )?;
    let lump = pi.dot(&resolved) - r * out.values[1];
    Ok(ReserveReport::new(
        out.values[0],
        lump,
        ReserveMethod::FractionalQuadrature,
        out.error * (1.0 + r),
    ))
}

/// Reserve at issue from the initial distribution, on the Markov path when
/// `alpha = 1` and the fractional path otherwise.
pub fn reserve_at_issue(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    contract: &Contract,
) -> Result<ReserveReport, ReserveError> {
    if clock.is_markov() {
        reserve_markov(model, g, contract, 0.0, model.pi().clone())
    } else {
        reserve_fractional_conditional(model, g, clock, contract, 0.0, 0.0, 0.0, model.pi().clone())
    }
}

/// One entry of a liability table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiabilityPoint {
    pub alpha: f64,
    pub horizon: Horizon,
    pub value: f64,
}

/// Expected discounted liabilities at issue with premiums removed, over a
/// grid of fractional orders and horizons. Rows are ordered by `alpha`
/// first, then horizon, whatever the thread count.
pub fn liability_curve(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    contract: &Contract,
    alphas: &[f64],
    horizons: &[Horizon],
) -> Result<Vec<LiabilityPoint>, ReserveError> {
    let base = contract.without_premiums();
    let grid: Vec<(f64, Horizon)> = alphas
        .iter()
        .flat_map(|&a| horizons.iter().map(move |&h| (a, h)))
        .collect();
    let pi: DVector<f64> = model.pi().clone();
    grid.par_iter()
        .map(|&(alpha, horizon)| {
            let clock = FractionalClock::new(alpha)?;
            let k = base.with_horizon(horizon)?;
            let rep = reserve_fractional_conditional(model, g, clock, &k, 0.0, 0.0, 0.0, pi.clone())?;
            Ok(LiabilityPoint {
                alpha,
                horizon,
                value: rep.value,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{reserve_time0_dual, MarkovPath};
    use super::*;
    use crate::distributions::IphLaw;
    use crate::quadrature::integrate_scalar;
    use nalgebra::DMatrix;

    #[test]
    fn markov_degeneration() {
        let m = coxian();
        for g in families() {
            for k in [c1(Horizon::Finite(60.0)), c2(Horizon::Infinite)] {
                let f = reserve_fractional_conditional(&m, &g, FractionalClock::markov(), &k, 0.0, 0.0, 0.0, m.pi().clone()).unwrap();
                let mk = super::super::reserve_markov_with(&m, &g, &k, 0.0, m.pi().clone(), MarkovPath::Quadrature).unwrap();
                assert!((f.value - mk.value).abs() < 1e-8 * mk.value.abs().max(1.0), "{} {} {}", g.name(), f.value, mk.value);
            }
        }
    }

    #[test]
    fn conditional_at_later_time_markov() {
        // With alpha = 1 the clock has no overshoot: u = g^{-1}(t).
        let m = coxian();
        let g = InhomogeneityTransform::gompertz_log(0.1383).unwrap();
        let k = c2(Horizon::Finite(80.0));
        let t = 12.0;
        let f = reserve_fractional_conditional(&m, &g, FractionalClock::markov(), &k, t, g.g_inv(t), 1.0, 1).unwrap();
        let mk = reserve_markov(&m, &g, &k, t, 1).unwrap();
        assert!((f.value - mk.value).abs() < 1e-8 * mk.value);
    }

    #[test]
    fn overshoot_accrues_current_annuity() {
        let m = coxian();
        let g = InhomogeneityTransform::Identity;
        let k = c1(Horizon::Finite(10.0));
        // Stuck in state 2 past the horizon: annuity only.
        let rep = reserve_fractional_conditional(&m, &g, FractionalClock::new(0.8).unwrap(), &k, 2.0, 50.0, 1.0, 2).unwrap();
        let want = (1.0 - (-0.03f64 * 8.0).exp()) / 0.03;
        assert!((rep.value - want).abs() < 1e-13);
        assert!(matches!(
            reserve_fractional_conditional(&m, &g, FractionalClock::new(0.8).unwrap(), &k, 2.0, 1.0, 1.0, 2),
            Err(ReserveError::InconsistentConditioning { .. })
        ));
    }

    #[test]
    fn time0_matches_conditional() {
        let m = coxian();
        for g in families() {
            for a in [1.0, 0.8] {
                let clock = FractionalClock::new(a).unwrap();
                let k = c2(Horizon::Infinite);
                let t0 = reserve_fractional_time0(&m, &g, clock, &k).unwrap();
                let cond = reserve_fractional_conditional(&m, &g, clock, &k, 0.0, 0.0, 0.0, m.pi().clone()).unwrap();
                assert!((t0.value - cond.value).abs() < 1e-7 * cond.value, "{} {a} {} {}", g.name(), t0.value, cond.value);
            }
        }
    }

    #[test]
    fn time0_markov_matches_dual() {
        let m = coxian();
        let g = InhomogeneityTransform::pareto_exp(10.0).unwrap();
        let k = c1(Horizon::Infinite);
        let t0 = reserve_fractional_time0(&m, &g, FractionalClock::markov(), &k).unwrap();
        let dual = reserve_time0_dual(&m, &g, &k).unwrap();
        assert!((t0.value - dual.value).abs() < 1e-8 * dual.value);
    }

    #[test]
    fn constant_annuity_is_discounted_survival() {
        let m = coxian();
        let g = InhomogeneityTransform::gompertz_log(0.1383).unwrap();
        let clock = FractionalClock::new(0.8).unwrap();
        let k = Contract::new(
            DVector::from_element(3, 2.5),
            DVector::from_element(3, 0.5),
            DMatrix::zeros(3, 3),
            DVector::zeros(3),
            0.03,
            Horizon::Infinite,
        )
        .unwrap();
        let rep = reserve_fractional_time0(&m, &g, clock, &k).unwrap();
        let law = IphLaw::new(m.clone(), g, clock).unwrap();
        let (want, _) = integrate_scalar(
            |x| Ok::<_, ReserveError>(2.0 * (-0.03 * x).exp() * law.survival(x)?),
            Range::ToInfinity { a: 0.0 },
            0.5,
            quad_options(),
        )
        .unwrap();
        assert!((rep.value - want).abs() < 1e-8 * want, "{} {want}", rep.value);
    }

    #[test]
    fn liability_curve_ordering() {
        let m = coxian();
        let g = InhomogeneityTransform::gompertz_log(0.1383).unwrap();
        let k = c1(Horizon::Infinite);
        // Under this clock almost nobody survives past 60, so use short terms.
        let hs = [Horizon::Finite(10.0), Horizon::Finite(20.0), Horizon::Finite(40.0)];
        let rows = liability_curve(&m, &g, &k, &[1.0, 0.9], &hs).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[3].alpha, 0.9);
        assert!(rows.windows(2).take(2).all(|w| w[0].value < w[1].value));
        assert!(rows[3..].windows(2).all(|w| w[0].value < w[1].value));
        let mk = reserve_markov(&m, &g, &k.with_horizon(hs[1]).unwrap(), 0.0, m.pi().clone()).unwrap();
        assert!((rows[1].value - mk.value).abs() < 1e-8 * mk.value);
    }
}
