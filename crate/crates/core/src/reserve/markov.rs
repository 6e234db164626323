//! Reserves on the Markov clock: at any time `t` by spectral calculus or
//! matrix quadrature, and at issue through the dual densities.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{
    discounted_speed, quad_options, require_perpetuity, row_exp, Contract, CurrentState, Horizon, ReserveError, ReserveMethod,
    ReserveReport,
};
use crate::distributions::{InhomogeneityTransform, PhaseModel};
use crate::matrix::MatrixError;
use crate::quadrature::{integrate, integrate_complex, Range};

/// Evaluation route for [`reserve_markov_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkovPath {
    /// Spectral when the eigenbasis is well conditioned, else quadrature.
    Auto,
    Spectral,
    Quadrature,
}

/// Reserve at calendar time `t` given the state at `t`, choosing the
/// evaluation route automatically.
pub fn reserve_markov(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    contract: &Contract,
    t: f64,
    state: impl Into<CurrentState>,
) -> Result<ReserveReport, ReserveError> {
    reserve_markov_with(model, g, contract, t, state, MarkovPath::Auto)
}

pub fn reserve_markov_with(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    contract: &Contract,
    t: f64,
    state: impl Into<CurrentState>,
    path: MarkovPath,
) -> Result<ReserveReport, ReserveError> {
    contract.check_model(model)?;
    let n = contract.horizon().value();
    if !(t >= 0.0 && t < n) {
        return Err(ReserveError::HorizonBeforeT { t, n });
    }
    let x = state.into().row(model.dim())?;
    match path {
        MarkovPath::Quadrature => markov_quadrature(model, g, contract, t, &x),
        MarkovPath::Spectral => markov_spectral(model, g, contract, t, &x),
        MarkovPath::Auto => match markov_spectral(model, g, contract, t, &x) {
            Err(ReserveError::Matrix(MatrixError::FallbackRequired)) => markov_quadrature(model, g, contract, t, &x),
            other => other,
        },
    }
}

/// `(1 - e^{-z L}) / z`, or `1 / z` for `L = inf`.
fn discounted_exposure(z: Complex64, len: f64) -> Complex64 {
    if len.is_infinite() {
        return 1.0 / z;
    }
    let w = z * len;
    if w.norm() < 1e-3 {
        len * (1.0 - w / 2.0 + w * w / 6.0 - w * w * w / 24.0)
    } else {
        (1.0 - (-w).exp()) / z
    }
}

fn markov_spectral(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    contract: &Contract,
    t: f64,
    x: &DVector<f64>,
) -> Result<ReserveReport, ReserveError> {
    let spec = model.spectral();
    let w_ann = spec.bilinear_weights(x, &contract.net_rate())?;
    let w_lump = spec.bilinear_weights(x, &contract.lump_rate(model))?;
    let r = contract.interest();
    let n = contract.horizon().value();
    let y0 = g.g_inv(t);
    let len = g.g_inv(n) - y0;
    let zero = Complex64::new(0.0, 0.0);
    let (mut ann, mut lump, mut err) = (zero, zero, 0.0);
    for (i, &eta) in spec.eigenvalues().iter().enumerate() {
        if w_ann[i] == zero && w_lump[i] == zero {
            continue;
        }
        let (f1, f2, e) = if matches!(g, InhomogeneityTransform::Identity) {
            let v = discounted_exposure(r - eta, len);
            (v, v, 0.0)
        } else {
            markov_kernels(g, r, t, y0, len, eta)?
        };
        ann += w_ann[i] * f1;
        lump += w_lump[i] * f2;
        err += (w_ann[i].norm() + w_lump[i].norm()) * e;
    }
    Ok(ReserveReport::new(ann.re, lump.re, ReserveMethod::SpectralClosedForm, err))
}

/// Scalar kernels on the Markov clock `y = g^{-1}(u) - g^{-1}(t)`:
/// `f1 = int e^{-r(g(y0+y)-t) + eta y} g'(y0+y) dy` and the same without `g'`.
fn markov_kernels(
    g: &InhomogeneityTransform,
    r: f64,
    t: f64,
    y0: f64,
    len: f64,
    eta: Complex64,
) -> Result<(Complex64, Complex64, f64), ReserveError> {
    let range = if len.is_infinite() {
        Range::ToInfinity { a: 0.0 }
    } else {
        Range::Finite { a: 0.0, b: len }
    };
    let scale = 0.05 / (eta.norm() + r).max(1e-9);
    let out = integrate(
        |y, out: &mut [f64]| {
            let (d, dg) = discounted_speed(g, r, t, y0 + y);
            let e = (eta * y).exp();
            out[0] = dg * e.re;
            out[1] = dg * e.im;
            out[2] = d * e.re;
            out[3] = d * e.im;
            Ok::<_, ReserveError>(())
        },
        4,
        range,
        scale,
        quad_options(),
    )?;
    let v = &out.values;
    Ok((Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]), out.error))
}

fn markov_quadrature(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    contract: &Contract,
    t: f64,
    x: &DVector<f64>,
) -> Result<ReserveReport, ReserveError> {
    let tm = model.sub_intensity().matrix();
    let net = contract.net_rate();
    let lump = contract.lump_rate(model);
    let r = contract.interest();
    let y0 = g.g_inv(t);
    let range = match contract.horizon() {
        Horizon::Finite(n) => Range::Finite { a: t, b: n },
        Horizon::Infinite => Range::ToInfinity { a: t },
    };
    let rate = model.sub_intensity().norm_inf() * g.lambda(t).max(1e-300);
    let scale = 0.05 / (r + rate).max(1e-9);
    let out = integrate(
        |u, out: &mut [f64]| {
            let d = (-r * (u - t)).exp();
            let s = g.g_inv(u) - y0;
            if d == 0.0 || !s.is_finite() {
                out[0] = 0.0;
                out[1] = 0.0;
                return Ok(());
            }
            let xr = row_exp(x, tm, s)?;
            out[0] = d * xr.dot(&net);
            let l = g.lambda(u);
            out[1] = if l.is_finite() { d * l * xr.dot(&lump) } else { 0.0 };
            Ok::<_, ReserveError>(())
        },
        2,
        range,
        scale,
        quad_options(),
    )?;
    Ok(ReserveReport::new(out.values[0], out.values[1], ReserveMethod::Quadrature, out.error))
}

/// Reserve at issue of a contract without expiry, from the Laplace
/// transforms of the dual densities `h1` (Markov clock) and `h2`
/// (calendar clock) evaluated at `-T` and `r`.
pub fn reserve_time0_dual(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    contract: &Contract,
) -> Result<ReserveReport, ReserveError> {
    contract.check_model(model)?;
    require_perpetuity(contract)?;
    let r = contract.interest();
    let pi = model.pi();
    let spec = model.spectral();
    let net = contract.net_rate();
    let lump = contract.lump_rate(model);
    let opts = quad_options();
    match (spec.bilinear_weights(pi, &net), spec.bilinear_weights(pi, &lump)) {
        (Ok(w_ann), Ok(w_lump)) => {
            let zero = Complex64::new(0.0, 0.0);
            let (mut ann, mut lmp, mut err) = (zero, zero, 0.0);
            for (i, &eta) in spec.eigenvalues().iter().enumerate() {
                let scale = 0.05 / (eta.norm() + r);
                if w_ann[i] != zero {
                    // r^{-1} L_{h1}(-eta) with h1(u) = r e^{-r g(u)} g'(u).
                    let (v, e) = integrate_complex(
                        |u| Ok::<_, ReserveError>((eta * u).exp() * g.dual_h1(r, u) / r),
                        Range::ToInfinity { a: 0.0 },
                        scale,
                        opts,
                    )?;
                    ann += w_ann[i] * v;
                    err += w_ann[i].norm() * e;
                }
                if w_lump[i] != zero {
                    // (-eta)^{-1} L_{h2}(r) with h2(u) = w e^{-w g^{-1}(u)} lambda(u), w = -eta.
                    let w = -eta;
                    let (v, e) = integrate_complex(
                        |u| {
                            let d = (-r * u).exp();
                            if d == 0.0 {
                                return Ok::<_, ReserveError>(Complex64::new(0.0, 0.0));
                            }
                            let decay = (-w * g.g_inv(u)).exp();
                            if decay == Complex64::new(0.0, 0.0) {
                                return Ok(decay);
                            }
                            Ok(d * w * decay * g.lambda(u))
                        },
                        Range::ToInfinity { a: 0.0 },
                        0.05 / (r + eta.norm() * g.lambda(0.0)),
                        opts,
                    )?;
                    lmp += w_lump[i] * v / w;
                    err += (w_lump[i] / w).norm() * e;
                }
            }
            Ok(ReserveReport::new(ann.re, lmp.re, ReserveMethod::DualLaplace, err))
        }
        _ => {
            let tm = model.sub_intensity().matrix();
            let rate = model.sub_intensity().norm_inf();
            let (ann, e1) = crate::quadrature::integrate_scalar(
                |u| {
                    let (_, dg) = discounted_speed(g, r, 0.0, u);
                    if dg == 0.0 {
                        return Ok::<_, ReserveError>(0.0);
                    }
                    Ok(row_exp(pi, tm, u)?.dot(&net) * dg)
                },
                Range::ToInfinity { a: 0.0 },
                0.05 / (r + rate),
                opts,
            )?;
            let (lmp, e2) = crate::quadrature::integrate_scalar(
                |u| {
                    let d = (-r * u).exp();
                    let s = g.g_inv(u);
                    if d == 0.0 || !s.is_finite() {
                        return Ok::<_, ReserveError>(0.0);
                    }
                    let v = row_exp(pi, tm, s)?.dot(&lump);
                    Ok(if v == 0.0 { 0.0 } else { d * v * g.lambda(u) })
                },
                Range::ToInfinity { a: 0.0 },
                0.05 / (r + rate * g.lambda(0.0)),
                opts,
            )?;
            Ok(ReserveReport::new(ann, lmp, ReserveMethod::DualLaplace, e1 + e2))
        }
    }
}
