//! Multiple-precision evaluation of the defining series on the real axis.
//!
//! The working precision is chosen from the size of the largest term, so the
//! cancellation that ruins the double-precision series for large negative
//! arguments is absorbed by extra bits. Intended as a slow reference.

use std::sync::OnceLock;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::series::log_peak_term;
use super::{rgamma, MlParams};

const RM: RoundingMode = RoundingMode::ToEven;
const STIRLING_TERMS: usize = 100;
/// Working precision above which the reference gives up.
pub const MAX_REFERENCE_BITS: usize = 4096;

/// `B_2, B_4, ..., B_{2 STIRLING_TERMS}` as exact rationals.
fn even_bernoulli() -> &'static [BigRational] {
    static CELL: OnceLock<Vec<BigRational>> = OnceLock::new();
    CELL.get_or_init(|| {
        let m_max = 2 * STIRLING_TERMS;
        let mut b = vec![BigRational::one(), BigRational::new(BigInt::from(-1), BigInt::from(2))];
        for m in 2..=m_max {
            if m % 2 == 1 {
                b.push(BigRational::zero());
                continue;
            }
            let mut binom = BigInt::one();
            let mut acc = BigRational::zero();
            for (k, bk) in b.iter().enumerate().take(m) {
                if k > 0 {
                    binom = binom * BigInt::from(m + 2 - k) / BigInt::from(k);
                }
                if !bk.is_zero() {
                    acc += BigRational::from_integer(binom.clone()) * bk;
                }
            }
            b.push(-acc / BigRational::from_integer(BigInt::from(m + 1)));
        }
        b.into_iter().skip(2).step_by(2).collect()
    })
}

fn big_int(v: &BigInt, p: usize, cc: &mut Consts) -> BigFloat {
    BigFloat::parse(&v.to_string(), Radix::Dec, p, RM, cc)
}

pub(crate) fn to_f64(v: &BigFloat) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    format!("{v}").parse().unwrap_or(f64::NAN)
}

/// `ln Gamma(y)` for `y > 0` by Stirling's series after shifting `y` upward.
fn ln_gamma(y: &BigFloat, p: usize, cc: &mut Consts) -> BigFloat {
    let one = BigFloat::from_u64(1, p);
    // With m Stirling terms the truncation error is about (2m)! / (2 pi y)^(2m);
    // shift far enough that m = STIRLING_TERMS reaches 2^-p.
    let m2 = 2.0 * STIRLING_TERMS as f64;
    let ln_fact = libm::lgamma(m2 + 1.0);
    let start = (((p as f64 + 16.0) * std::f64::consts::LN_2 + ln_fact) / m2).exp() / (2.0 * std::f64::consts::PI);
    let start = start.max(30.0);
    let shifts = (start - to_f64(y)).ceil().max(0.0) as usize;
    let mut yy = y.clone();
    let mut prod = one.clone();
    for _ in 0..shifts {
        prod = prod.mul(&yy, p, RM);
        yy = yy.add(&one, p, RM);
    }
    let half = BigFloat::from_f64(0.5, p);
    let two_pi = cc.pi(p, RM).mul(&BigFloat::from_u64(2, p), p, RM);
    let mut s = yy
        .sub(&half, p, RM)
        .mul(&yy.ln(p, RM, cc), p, RM)
        .sub(&yy, p, RM)
        .add(&two_pi.ln(p, RM, cc).mul(&half, p, RM), p, RM);
    let y2 = yy.mul(&yy, p, RM);
    let mut ypow = yy.clone();
    for (j, b) in even_bernoulli().iter().enumerate() {
        let jj = 2 * (j as u64 + 1);
        let num = big_int(b.numer(), p, cc);
        let den = big_int(b.denom(), p, cc).mul(&BigFloat::from_u64(jj * (jj - 1), p), p, RM);
        let term = num.div(&den, p, RM).div(&ypow, p, RM);
        s = s.add(&term, p, RM);
        let (te, se) = (term.exponent().unwrap_or(i32::MIN), s.exponent().unwrap_or(0));
        if (te as i64) < se as i64 - p as i64 - 8 {
            break;
        }
        ypow = ypow.mul(&y2, p, RM);
    }
    s.sub(&prod.ln(p, RM, cc), p, RM)
}

/// Smallest `(num, den)` with `num / den == alpha` exactly in double precision.
fn rational(alpha: f64) -> Option<(u64, u64)> {
    (1..=1000u64).find_map(|q| {
        let p = (alpha * q as f64).round();
        (p >= 1.0 && p / q as f64 == alpha).then_some((p as u64, q))
    })
}

/// Reference value of `E_{a,b}(x)` for real `x`, or `None` if the required
/// working precision exceeds [`MAX_REFERENCE_BITS`].
pub fn ml_reference(params: MlParams, x: f64) -> Option<f64> {
    let (alpha, beta) = (params.alpha(), params.beta());
    if x == 0.0 {
        return Some(rgamma(beta));
    }
    let (log_peak, k_peak) = log_peak_term(alpha, beta, x.abs());
    let bits = (log_peak.max(0.0) / std::f64::consts::LN_2).ceil() as usize + 128;
    let p = bits.div_ceil(64) * 64;
    if p > MAX_REFERENCE_BITS {
        return None;
    }
    let mut cc = Consts::new().expect("constant cache");

    let xb = BigFloat::from_f64(x, p);
    let beta_b = BigFloat::from_f64(beta, p);
    let alpha_frac = rational(alpha);
    let alpha_b = match alpha_frac {
        Some((num, den)) => BigFloat::from_u64(num, p).div(&BigFloat::from_u64(den, p), p, RM),
        None => BigFloat::from_f64(alpha, p),
    };
    let node = |k: usize| beta_b.add(&alpha_b.mul(&BigFloat::from_u64(k as u64, p), p, RM), p, RM);

    let mut sum = BigFloat::from_u64(0, p);
    let mut zk = BigFloat::from_u64(1, p);
    let mut gammas: Vec<BigFloat> = Vec::new();
    let mut k = 0usize;
    loop {
        let xk = node(k);
        let g = match alpha_frac {
            Some((num, den)) => {
                let den = den as usize;
                if k < den {
                    let g = ln_gamma(&xk, p, &mut cc).exp(p, RM, &mut cc);
                    gammas.push(g.clone());
                    g
                } else {
                    // Gamma(x + num) = Gamma(x) x (x + 1) ... (x + num - 1).
                    let base = node(k - den);
                    let mut g = gammas[k % den].clone();
                    for i in 0..num {
                        g = g.mul(&base.add(&BigFloat::from_u64(i, p), p, RM), p, RM);
                    }
                    gammas[k % den] = g.clone();
                    g
                }
            }
            None => ln_gamma(&xk, p, &mut cc).exp(p, RM, &mut cc),
        };
        let term = zk.div(&g, p, RM);
        sum = sum.add(&term, p, RM);
        if k > k_peak {
            let te = term.exponent().map_or(i64::MIN, |e| e as i64);
            let se = sum.exponent().map_or(0, |e| e as i64);
            if term.is_zero() || te < (se - 64).min(-200) {
                break;
            }
        }
        zk = zk.mul(&xb, p, RM);
        k += 1;
    }
    Some(to_f64(&sum))
}
