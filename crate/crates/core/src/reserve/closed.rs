//! Generalized exponential integrals and the closed-form perpetuity
//! reserves of the Pareto and Gompertz clocks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{quad_options, require_perpetuity, Contract, ReserveError, ReserveMethod, ReserveReport};
use crate::distributions::PhaseModel;
use crate::matrix::{matrix_exp, MatrixError, SubIntensity};
use crate::quadrature::{integrate, integrate_complex, QuadOptions, Range};

/// `e^t E_a(t) = int_1^inf e^{-t (v - 1)} v^{-a} dv` for complex order and
/// argument with `Re t > 0`, together with an error estimate.
///
/// The factor `e^t` keeps the value representable when `E_a(t)` itself
/// would underflow.
pub fn scaled_exp_integral(a: Complex64, t: Complex64) -> Result<(Complex64, f64), ReserveError> {
    if !(t.re > 0.0) {
        return Err(ReserveError::QuadratureUnconverged {
            estimate: f64::NAN,
            error: f64::INFINITY,
        });
    }
    let scale = 0.05 / t.norm().min(1e6);
    let opts = QuadOptions::default().with_rel_tol(1e-12).with_abs_tol(1e-15);
    let (v, e) = integrate_complex(
        |s| {
            let decay = (-t * s).exp();
            if decay == Complex64::new(0.0, 0.0) {
                return Ok::<_, ReserveError>(decay);
            }
            Ok(decay * (-a * (1.0 + s).ln()).exp())
        },
        Range::ToInfinity { a: 0.0 },
        scale,
        opts,
    )?;
    Ok((v, e))
}

/// `E_a(t) = int_1^inf e^{-t v} v^{-a} dv` for real `a` and `t > 0`.
pub fn generalized_exp_integral(a: f64, t: f64) -> Result<f64, ReserveError> {
    let (v, _) = scaled_exp_integral(Complex64::new(a, 0.0), Complex64::new(t, 0.0))?;
    Ok(v.re * (-t).exp())
}

/// `E_{-T + shift I}(t)`: the integral with matrix order `-T + shift I`,
/// through the eigenbasis of `T` or, if that is ill conditioned, by
/// matrix-valued quadrature.
pub fn generalized_exp_integral_matrix(t_sub: &SubIntensity, shift: f64, t: f64) -> Result<DMatrix<f64>, ReserveError> {
    let spec = t_sub.spectral();
    let damp = (-t).exp();
    let arg = Complex64::new(t, 0.0);
    match spec.try_apply(|eta| scaled_exp_integral(shift - eta, arg).map(|(v, _)| v * damp)) {
        Err(ReserveError::Matrix(MatrixError::FallbackRequired)) => {}
        other => return other,
    }
    let p = t_sub.dim();
    let shifted = t_sub.matrix() - DMatrix::identity(p, p) * shift;
    let out = integrate(
        |s, out: &mut [f64]| {
            let decay = (-t * (1.0 + s)).exp();
            if decay == 0.0 {
                out.fill(0.0);
                return Ok::<_, ReserveError>(());
            }
            let m = matrix_exp(&(&shifted * (1.0 + s).ln()))?;
            for (o, v) in out.iter_mut().zip(m.iter()) {
                *o = decay * v;
            }
            Ok(())
        },
        p * p,
        Range::ToInfinity { a: 0.0 },
        0.05 / t.max(1e-6),
        quad_options(),
    )?;
    Ok(DMatrix::from_column_slice(p, p, &out.values))
}

/// Evaluates `pi phi(T) (a - c) + pi psi(T) l` where each scalar kernel is a
/// closed form in scaled exponential integrals, with a dense fallback.
fn closed_form<K, D>(model: &PhaseModel, contract: &Contract, kernels: K, dense: D) -> Result<ReserveReport, ReserveError>
where
    K: Fn(Complex64) -> Result<(Complex64, Complex64, f64), ReserveError>,
    D: Fn(&DVector<f64>, &DVector<f64>) -> Result<ReserveReport, ReserveError>,
{
    let spec = model.spectral();
    let pi = model.pi();
    let net = contract.net_rate();
    let lump = contract.lump_rate(model);
    let (w_ann, w_lump) = match (spec.bilinear_weights(pi, &net), spec.bilinear_weights(pi, &lump)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return dense(&net, &lump),
    };
    let zero = Complex64::new(0.0, 0.0);
    let (mut ann, mut lmp, mut err) = (zero, zero, 0.0);
    for (i, &eta) in spec.eigenvalues().iter().enumerate() {
        if w_ann[i] == zero && w_lump[i] == zero {
            continue;
        }
        let (phi, psi, e) = kernels(eta)?;
        ann += w_ann[i] * phi;
        lmp += w_lump[i] * psi;
        err += (w_ann[i].norm() + w_lump[i].norm()) * e;
    }
    Ok(ReserveReport::new(ann.re, lmp.re, ReserveMethod::SpectralClosedForm, err))
}

/// Quadrature over `v in [1, inf)` of `pi M(v) y` for the dense fallback.
fn dense_v_integral<F>(model: &PhaseModel, y: &DVector<f64>, arg: f64, weight: F) -> Result<(f64, f64), ReserveError>
where
    F: Fn(f64) -> (f64, DMatrix<f64>),
{
    let pi = model.pi();
    let out = integrate(
        |s, out: &mut [f64]| {
            let (w, m) = weight(1.0 + s);
            out[0] = if w == 0.0 { 0.0 } else { w * pi.dot(&(matrix_exp(&m)? * y)) };
            Ok::<_, ReserveError>(())
        },
        1,
        Range::ToInfinity { a: 0.0 },
        0.05 / arg.max(1e-6),
        quad_options(),
    )?;
    Ok((out.values[0], out.error))
}

/// Perpetuity reserve at issue under the Pareto clock `g(x) = beta (e^x - 1)`:
/// `pi { beta e^{r beta} E_{-T}(r beta) (a - c) + e^{r beta} E_{-T+1}(r beta) l }`
/// with `l = (T * B) e + t * b`.
pub fn reserve_closed_pareto(model: &PhaseModel, beta: f64, contract: &Contract) -> Result<ReserveReport, ReserveError> {
    contract.check_model(model)?;
    require_perpetuity(contract)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(crate::distributions::DistError::InvalidParameter { name: "beta", value: beta }.into());
    }
    let rb = Complex64::new(contract.interest() * beta, 0.0);
    let tm = model.sub_intensity().matrix().clone();
    closed_form(
        model,
        contract,
        |eta| {
            let (phi, e1) = scaled_exp_integral(-eta, rb)?;
            let (psi, e2) = scaled_exp_integral(1.0 - eta, rb)?;
            Ok((beta * phi, psi, beta * e1 + e2))
        },
        |net, lump| {
            let r = contract.interest();
            let (ann, e1) = dense_v_integral(model, net, r * beta, |v| {
                (beta * (-r * beta * (v - 1.0)).exp(), &tm * v.ln())
            })?;
            let (lmp, e2) = dense_v_integral(model, lump, r * beta, |v| ((-r * beta * (v - 1.0)).exp() / v, &tm * v.ln()))?;
            Ok(ReserveReport::new(ann, lmp, ReserveMethod::Quadrature, e1 + e2))
        },
    )
}

/// Perpetuity reserve at issue under the Gompertz clock
/// `g(u) = log(kappa u + 1) / kappa`:
/// `pi kappa^{-1} e^{-T/kappa} { E_{r/kappa+1}(-T/kappa) (a - c) + E_{r/kappa}(-T/kappa) l }`.
pub fn reserve_closed_gompertz(model: &PhaseModel, kappa: f64, contract: &Contract) -> Result<ReserveReport, ReserveError> {
    contract.check_model(model)?;
    require_perpetuity(contract)?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(crate::distributions::DistError::InvalidParameter { name: "kappa", value: kappa }.into());
    }
    let rk = contract.interest() / kappa;
    let tm = model.sub_intensity().matrix().clone();
    closed_form(
        model,
        contract,
        |eta| {
            let arg = -eta / kappa;
            let (phi, e1) = scaled_exp_integral(Complex64::new(rk + 1.0, 0.0), arg)?;
            let (psi, e2) = scaled_exp_integral(Complex64::new(rk, 0.0), arg)?;
            Ok((phi / kappa, psi / kappa, (e1 + e2) / kappa))
        },
        |net, lump| {
            let slow = model.sub_intensity().norm_inf() / kappa;
            let (ann, e1) = dense_v_integral(model, net, slow, |v| (v.powf(-rk - 1.0) / kappa, &tm * ((v - 1.0) / kappa)))?;
            let (lmp, e2) = dense_v_integral(model, lump, slow, |v| (v.powf(-rk) / kappa, &tm * ((v - 1.0) / kappa)))?;
            Ok(ReserveReport::new(ann, lmp, ReserveMethod::Quadrature, e1 + e2))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{reserve_time0_dual, Horizon};
    use super::*;
    use crate::distributions::InhomogeneityTransform;
    use std::convert::Infallible;

    #[test]
    fn order_zero_is_elementary() {
        for t in [0.1, 1.0, 7.5] {
            let v = generalized_exp_integral(0.0, t).unwrap();
            assert!((v - (-t).exp() / t).abs() < 1e-13 * v);
        }
    }

    #[test]
    fn e1_brute_force() {
        // Plain quadrature of e^{-v} / v on [1, inf) as an independent oracle.
        let (want, _) = crate::quadrature::integrate_scalar(
            |v: f64| Ok::<_, Infallible>((-v).exp() / v),
            Range::ToInfinity { a: 1.0 },
            1.0,
            QuadOptions::default().with_rel_tol(1e-13),
        )
        .unwrap();
        let v = generalized_exp_integral(1.0, 1.0).unwrap();
        assert!((v - want).abs() < 1e-12);
        assert!((v - 0.2193839).abs() < 1e-7);
    }

    #[test]
    fn diagonal_matrix_order() {
        let t = SubIntensity::from_rows(&[vec![-1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        let m = generalized_exp_integral_matrix(&t, 0.0, 1.0).unwrap();
        assert!((m[(0, 0)] - generalized_exp_integral(1.0, 1.0).unwrap()).abs() < 1e-13);
        assert!((m[(1, 1)] - generalized_exp_integral(2.0, 1.0).unwrap()).abs() < 1e-13);
        assert!(m[(0, 1)].abs() < 1e-15 && m[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn defective_order_uses_dense_path() {
        let t = SubIntensity::from_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let m = generalized_exp_integral_matrix(&t, 0.0, 1.0).unwrap();
        // v^{T} = v^{-1} (I + N ln v), so the corner is int e^{-v} v^{-1} ln v dv.
        let (corner, _) = crate::quadrature::integrate_scalar(
            |v: f64| Ok::<_, Infallible>((-v).exp() * v.ln() / v),
            Range::ToInfinity { a: 1.0 },
            1.0,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((m[(0, 0)] - generalized_exp_integral(1.0, 1.0).unwrap()).abs() < 1e-11);
        assert!((m[(0, 1)] - corner).abs() < 1e-11);
    }

    #[test]
    fn closed_forms_match_dual_quadrature() {
        let m = coxian();
        for k in [c1(Horizon::Infinite), c2(Horizon::Infinite)] {
            for beta in [1.0, 10.0, 100.0] {
                let closed = reserve_closed_pareto(&m, beta, &k).unwrap();
                let dual = reserve_time0_dual(&m, &InhomogeneityTransform::pareto_exp(beta).unwrap(), &k).unwrap();
                assert!((closed.value / dual.value - 1.0).abs() < 1e-8, "{beta} {} {}", closed.value, dual.value);
            }
            let closed = reserve_closed_gompertz(&m, 0.1383, &k).unwrap();
            let dual = reserve_time0_dual(&m, &InhomogeneityTransform::gompertz_log(0.1383).unwrap(), &k).unwrap();
            assert!((closed.value / dual.value - 1.0).abs() < 1e-8, "{} {}", closed.value, dual.value);
        }
    }

    #[test]
    fn gompertz_pinned_values() {
        let m = coxian();
        let v1 = reserve_closed_gompertz(&m, 0.1383, &c1(Horizon::Infinite)).unwrap().value;
        let v2 = reserve_closed_gompertz(&m, 0.1383, &c2(Horizon::Infinite)).unwrap().value;
        // Frozen from the first run; the Markov reserve with n = 60 agrees
        // to 10 digits since survival past 60 is negligible.
        assert!((v1 - 16.565_967_841_818_23).abs() < 1e-10, "{v1}");
        assert!((v2 - 36.433_466_069_011_516).abs() < 1e-10, "{v2}");
    }

    #[test]
    fn dense_fallbacks_match() {
        let m = PhaseModel::from_rows(&[0.6, 0.4], &[vec![-0.3, 0.3], vec![0.0, -0.3]]).unwrap();
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 1)] = 2.0;
        let k = Contract::new(
            DVector::from_vec(vec![1.0, 0.5]),
            DVector::zeros(2),
            b,
            DVector::from_vec(vec![3.0, 4.0]),
            0.04,
            Horizon::Infinite,
        )
        .unwrap();
        let p = reserve_closed_pareto(&m, 5.0, &k).unwrap();
        assert_eq!(p.method, ReserveMethod::Quadrature);
        let d = reserve_time0_dual(&m, &InhomogeneityTransform::pareto_exp(5.0).unwrap(), &k).unwrap();
        assert!((p.value / d.value - 1.0).abs() < 1e-8);
        let gz = reserve_closed_gompertz(&m, 0.2, &k).unwrap();
        let d = reserve_time0_dual(&m, &InhomogeneityTransform::gompertz_log(0.2).unwrap(), &k).unwrap();
        assert!((gz.value / d.value - 1.0).abs() < 1e-8);
    }
}
