//! Globally adaptive 21-point Gauss-Kronrod quadrature for vector-valued
//! integrands on finite and semi-infinite ranges.
//!
//! Integrands here often carry structure at widely separated scales (a
//! sharp peak at the origin followed by an algebraic tail). The initial
//! partition is therefore seeded geometrically from a caller-supplied scale
//! before the usual bisection of the worst interval starts.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use thiserror::Error;

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208292246370,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

/// Integration range. `scale` is the length of the first seeded piece; the
/// following pieces double in length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    Finite { a: f64, b: f64 },
    ToInfinity { a: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub values: Vec<f64>,
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError<E> {
    #[error("quadrature did not reach tolerance (estimate {values:?}, error {error:e})")]
    Unconverged { values: Vec<f64>, error: f64 },
    #[error("integrand is not finite at x = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Integrand(E),
}

struct Piece {
    a: f64,
    b: f64,
    // Coordinates are in the mapped tail variable.
    mapped: bool,
    values: Vec<f64>,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates the `dim`-component function `f` over `range`.
///
/// `scale` seeds the partition: pieces of length `scale, scale, 2 scale,
/// 4 scale, ...` up to `2^20 scale`, followed (for semi-infinite ranges) by a
/// mapped tail `x = c + L y / (1 - y)`.
pub fn integrate<F, E>(
    mut f: F,
    dim: usize,
    range: Range,
    scale: f64,
    opts: QuadOptions,
) -> Result<Integral, QuadError<E>>
where
    F: FnMut(f64, &mut [f64]) -> Result<(), E>,
{
    let mut evaluations = 0usize;
    let mut heap = BinaryHeap::new();
    let mut buf = vec![0.0; dim];
    let (pieces, tail) = seed(range, scale);

    for (a, b) in pieces {
        heap.push(gk21(&mut f, &mut buf, a, b, None, &mut evaluations)?);
    }
    if let Some((c, len)) = tail {
        // Map y in [0, 1) to x = c + len * y / (1 - y).
        heap.push(gk21(&mut f, &mut buf, 0.0, 0.5, Some((c, len)), &mut evaluations)?);
        heap.push(gk21(&mut f, &mut buf, 0.5, 1.0, Some((c, len)), &mut evaluations)?);
    }

    loop {
        let (values, error) = totals(&heap, dim);
        let scale_v = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale_v);
        if error <= target {
            return Ok(Integral {
                values,
                error,
                intervals: heap.len(),
                evaluations,
            });
        }
        if heap.len() >= opts.max_intervals {
            return Err(QuadError::Unconverged { values, error });
        }
        let worst = heap.pop().expect("nonempty partition");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval cannot be split further in floating point.
            return Err(QuadError::Unconverged { values, error });
        }
        let map = if worst.mapped { tail } else { None };
        heap.push(gk21(&mut f, &mut buf, worst.a, mid, map, &mut evaluations)?);
        heap.push(gk21(&mut f, &mut buf, mid, worst.b, map, &mut evaluations)?);
    }
}

/// Convenience wrapper for scalar integrands.
pub fn integrate_scalar<F, E>(
    mut f: F,
    range: Range,
    scale: f64,
    opts: QuadOptions,
) -> Result<(f64, f64), QuadError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let r = integrate(
        |x, out: &mut [f64]| {
            out[0] = f(x)?;
            Ok(())
        },
        1,
        range,
        scale,
        opts,
    )?;
    Ok((r.values[0], r.error))
}

/// Complex-valued integrand, integrated as two real components.
pub fn integrate_complex<F, E>(
    mut f: F,
    range: Range,
    scale: f64,
    opts: QuadOptions,
) -> Result<(Complex64, f64), QuadError<E>>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let r = integrate(
        |x, out: &mut [f64]| {
            let v = f(x)?;
            out[0] = v.re;
            out[1] = v.im;
            Ok(())
        },
        2,
        range,
        scale,
        opts,
    )?;
    Ok((Complex64::new(r.values[0], r.values[1]), r.error))
}

/// Finite pieces and an optional trailing infinite piece.
type Partition = (Vec<(f64, f64)>, Option<(f64, f64)>);

fn seed(range: Range, scale: f64) -> Partition {
    let h = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    let mut pieces = Vec::new();
    match range {
        Range::Finite { a, b } => {
            let mut lo = a;
            let mut len = h;
            while lo + len < b && pieces.len() < 40 {
                pieces.push((lo, lo + len));
                lo += len;
                if pieces.len() > 1 {
                    len *= 2.0;
                }
            }
            if b > lo {
                pieces.push((lo, b));
            }
            (pieces, None)
        }
        Range::ToInfinity { a } => {
            let mut lo = a;
            let mut len = h;
            for k in 0..21 {
                pieces.push((lo, lo + len));
                lo += len;
                if k > 0 {
                    len *= 2.0;
                }
            }
            (pieces, Some((lo, len)))
        }
    }
}

fn totals(heap: &BinaryHeap<Piece>, dim: usize) -> (Vec<f64>, f64) {
    let mut values = vec![0.0; dim];
    let mut comp = vec![0.0; dim];
    let mut error = 0.0;
    for p in heap.iter() {
        for (k, v) in p.values.iter().enumerate() {
            // Neumaier summation.
            let t = values[k] + v;
            if values[k].abs() >= v.abs() {
                comp[k] += (values[k] - t) + v;
            } else {
                comp[k] += (v - t) + values[k];
            }
            values[k] = t;
        }
        error += p.error;
    }
    for k in 0..dim {
        values[k] += comp[k];
    }
    (values, error)
}

fn gk21<F, E>(
    f: &mut F,
    buf: &mut [f64],
    a: f64,
    b: f64,
    map: Option<(f64, f64)>,
    evaluations: &mut usize,
) -> Result<Piece, QuadError<E>>
where
    F: FnMut(f64, &mut [f64]) -> Result<(), E>,
{
    let dim = buf.len();
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    let mut eval = |y: f64, out: &mut [f64]| -> Result<(), QuadError<E>> {
        *evaluations += 1;
        let (x, jac) = match map {
            None => (y, 1.0),
            Some((c, len)) => {
                let d = 1.0 - y;
                (c + len * y / d, len / (d * d))
            }
        };
        for v in out.iter_mut() {
            *v = 0.0;
        }
        if !x.is_finite() {
            return Ok(());
        }
        f(x, out).map_err(QuadError::Integrand)?;
        for v in out.iter_mut() {
            if !v.is_finite() {
                return Err(QuadError::NonFinite(x));
            }
            *v *= jac;
            if !v.is_finite() {
                // Jacobian overflow at the far end of the mapped tail.
                *v = 0.0;
            }
        }
        Ok(())
    };

    eval(center, buf)?;
    for k in 0..dim {
        kron[k] = WGK[10] * buf[k];
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let mut sum = vec![0.0; dim];
        eval(center - dx, buf)?;
        sum.copy_from_slice(buf);
        eval(center + dx, buf)?;
        for k in 0..dim {
            sum[k] += buf[k];
            kron[k] += WGK[j] * sum[k];
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * sum[k];
            }
        }
    }
    let mut error: f64 = 0.0;
    for k in 0..dim {
        kron[k] *= half;
        gauss[k] *= half;
        error = error.max((kron[k] - gauss[k]).abs());
    }
    Ok(Piece {
        a,
        b,
        mapped: map.is_some(),
        values: kron,
        error,
    })
}
