use nalgebra::DMatrix;
use num_complex::Complex64;
use libm::{lgamma as ln_gamma, tgamma as gamma};

use super::{ln_abs_rgamma, rgamma};

/// Power series terms larger than this lose too many digits to cancellation.
pub(crate) const SERIES_MAX_TERM: f64 = 1e3;
const MAX_TERMS: usize = 4000;

/// Compensated complex accumulator.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: Complex64,
    comp: Complex64,
}

impl Neumaier {
    fn add(&mut self, x: Complex64) {
        self.sum.re = two_sum(self.sum.re, x.re, &mut self.comp.re);
        self.sum.im = two_sum(self.sum.im, x.im, &mut self.comp.im);
    }

    fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

fn two_sum(s: f64, x: f64, comp: &mut f64) -> f64 {
    let t = s + x;
    if s.abs() >= x.abs() {
        *comp += (s - t) + x;
    } else {
        *comp += (x - t) + s;
    }
    t
}

/// `|z|^k / Gamma(a k + b)`, computed directly while everything stays in range.
fn term_magnitude(r: f64, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    if x < 170.0 && kf * r.max(1.0).ln() < 700.0 {
        r.powi(k as i32) / gamma(x)
    } else {
        (kf * r.ln() - ln_gamma(x)).exp()
    }
}

/// Log of the largest power series term, `max_k k ln|z| - ln Gamma(a k + b)`,
/// and the index where it is attained.
pub(crate) fn log_peak_term(alpha: f64, beta: f64, r: f64) -> (f64, usize) {
    if r == 0.0 {
        return (-ln_gamma(beta).min(0.0), 0);
    }
    let lnr = r.ln();
    let mut best = (-ln_gamma(beta), 0);
    let mut k = 1usize;
    loop {
        let v = k as f64 * lnr - ln_gamma(alpha * k as f64 + beta);
        if v > best.0 {
            best = (v, k);
        }
        // Past the peak once the term ratio has dropped below one.
        if alpha * k as f64 + beta > 1.0 + r.powf(1.0 / alpha) && v < best.0 {
            return best;
        }
        k += 1;
    }
}

/// Evaluates the defining series with compensated summation.
///
/// Returns `None` when some term exceeds [`SERIES_MAX_TERM`] in magnitude,
/// in which case the result would be dominated by cancellation error.
pub(crate) fn power_series(alpha: f64, beta: f64, z: Complex64) -> Option<Complex64> {
    let r = z.norm();
    let mut acc = Neumaier::default();
    let mut unit = Complex64::new(1.0, 0.0);
    let dir = if r > 0.0 { z / r } else { Complex64::new(1.0, 0.0) };
    let mut prev = f64::INFINITY;
    for k in 0..MAX_TERMS {
        let x = alpha * k as f64 + beta;
        let mag = term_magnitude(r, k, x);
        if !mag.is_finite() || mag > SERIES_MAX_TERM {
            return None;
        }
        acc.add(unit * mag);
        let total = acc.value().norm();
        if k > 0 && mag < prev && mag <= 1e-17 * total.max(1e-300) {
            return Some(acc.value());
        }
        if mag == 0.0 && k > 0 {
            return Some(acc.value());
        }
        prev = mag;
        unit *= dir;
    }
    None
}

/// Sine of `pi x`, exactly zero at integers.
pub(crate) fn sinpi(x: f64) -> f64 {
    let n = x.round();
    let f = x - n;
    let s = (std::f64::consts::PI * f).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

/// Algebraic asymptotic expansion for large `|z|`, plus the exponential
/// contribution inside the sector `|arg z| < alpha pi`.
///
/// Returns `None` if the divergent tail is reached before the terms fall
/// below relative roundoff.
pub(crate) fn asymptotic(alpha: f64, beta: f64, z: Complex64) -> Option<Complex64> {
    let r = z.norm();
    let theta = z.arg();
    let mut acc = Neumaier::default();
    if theta.abs() < alpha * std::f64::consts::PI {
        let root = Complex64::from_polar(r.powf(1.0 / alpha), theta / alpha);
        let pre = Complex64::from_polar(r.powf((1.0 - beta) / alpha), theta * (1.0 - beta) / alpha);
        let e = pre * root.exp() / alpha;
        if !e.re.is_finite() || !e.im.is_finite() {
            return None;
        }
        acc.add(e);
    }
    let inv = 1.0 / z;
    let lnr = r.ln();
    let mut power = Complex64::new(1.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 1..=400usize {
        power *= inv;
        let x = beta - alpha * k as f64;
        if alpha == 1.0 && x <= 0.0 && x.fract() == 0.0 {
            // Every remaining coefficient 1/Gamma(b - k) vanishes.
            return Some(acc.value());
        }
        // Envelope of |1/Gamma(x)| without the oscillating sine factor, so
        // that accidental near-zeros do not stop the summation early.
        let ln_env = if x > 0.0 {
            -ln_gamma(x)
        } else {
            ln_gamma(1.0 - x) - std::f64::consts::PI.ln()
        };
        let env = (ln_env - k as f64 * lnr).exp();
        if env > prev {
            return None;
        }
        prev = env;
        if let Some((sign, ln_abs)) = ln_abs_rgamma(x) {
            let mag = (ln_abs - k as f64 * lnr).exp();
            let unit = power / power.norm();
            acc.add(-unit * (sign * mag));
        }
        if env <= 1e-17 * acc.value().norm() {
            return Some(acc.value());
        }
    }
    None
}

/// Defining series in matrix arithmetic; stops once the relative size of
/// three consecutive terms is below `1e-16`.
pub(crate) fn matrix_series(alpha: f64, beta: f64, a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let norm = |m: &DMatrix<f64>| m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n) * rgamma(beta);
    let mut comp = DMatrix::<f64>::zeros(n, n);
    let mut small = 0;
    for k in 1..MAX_TERMS {
        power = &power * a;
        let x = alpha * k as f64 + beta;
        let coef = if x < 170.0 { 1.0 / gamma(x) } else { (-ln_gamma(x)).exp() };
        let term = &power * coef;
        if term.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for (i, t) in term.iter().enumerate() {
            let mut c = comp[i];
            sum[i] = two_sum(sum[i], *t, &mut c);
            comp[i] = c;
        }
        let ratio = norm(&term) / norm(&sum).max(1e-300);
        if ratio < 1e-16 {
            small += 1;
            if small == 3 {
                return Some(sum + comp);
            }
        } else {
            small = 0;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_reproduces_exponential() {
        for &x in &[-3.0, -1.0, 0.5, 2.0] {
            let v = power_series(1.0, 1.0, Complex64::new(x, 0.0)).unwrap();
            assert!((v.re - f64::exp(x)).abs() < 1e-14 * f64::exp(x).max(1.0));
        }
    }

    #[test]
    fn series_rejects_heavy_cancellation() {
        assert!(power_series(0.3, 1.0, Complex64::new(-5.0, 0.0)).is_none());
    }

    #[test]
    fn asymptotic_matches_closed_form() {
        // E_{1,2}(z) = (e^z - 1) / z.
        let z = Complex64::new(-60.0, 0.0);
        let v = asymptotic(1.0, 2.0, z).unwrap();
        let want = ((-60f64).exp() - 1.0) / -60.0;
        assert!((v.re - want).abs() < 1e-16);
    }

    #[test]
    fn sinpi_is_exact_at_integers() {
        assert_eq!(sinpi(-3.0), 0.0);
        assert_eq!(sinpi(4.0), 0.0);
        assert!((sinpi(0.5) - 1.0).abs() < 1e-16);
        assert!((sinpi(-1.5) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn peak_term_location() {
        // For a = b = 1 the largest term of e^r is near k = r.
        let (lp, k) = log_peak_term(1.0, 1.0, 20.0);
        assert!(k == 19 || k == 20);
        assert!((lp - (20f64.powi(20) / gamma(21.0)).ln()).abs() < 1e-9);
    }
}
