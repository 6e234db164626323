//! Inverse Laplace transform of `s^(a-b) / (s^a - z)` along an optimal
//! parabolic contour `s(u) = mu (i u + 1)^2`, with residues for the poles left
//! to the right of the contour.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::MlError;

const LOG_EPS_MACHINE: f64 = -36.04365338911715;
const MAX_NODES: f64 = 200.0;
/// Target accuracy of the contour rule.
const TARGET_LOG_EPS: f64 = -34.538776394910684; // ln(1e-15)
/// Give up if the accuracy has to be relaxed beyond this.
const WORST_LOG_EPS: f64 = -25.328436022934504; // ln(1e-11)

#[derive(Debug, Clone, Copy)]
struct Rule {
    mu: f64,
    h: f64,
    n: usize,
}

fn phi(s: Complex64) -> f64 {
    0.5 * (s.re + s.norm())
}

/// Poles of `s^a = z` on the principal sheet.
fn principal_poles(alpha: f64, z: Complex64) -> Vec<Complex64> {
    let r = z.norm();
    if r == 0.0 {
        return Vec::new();
    }
    let theta = z.arg();
    let kmin = (-alpha / 2.0 - theta / (2.0 * PI)).ceil() as i64;
    let kmax = (alpha / 2.0 - theta / (2.0 * PI)).floor() as i64;
    (kmin..=kmax)
        .map(|k| Complex64::from_polar(r.powf(1.0 / alpha), (theta + 2.0 * PI * k as f64) / alpha))
        .collect()
}

/// Parameters for a region bounded by two singularities.
fn bounded_rule(phi_j: f64, phi_j1: f64, pj: f64, qj: f64, mut log_eps: f64) -> Option<Rule> {
    let fac = 1.01;
    let f_max = (log_eps - LOG_EPS_MACHINE).exp();
    let sq_j = phi_j.sqrt();
    let threshold = 2.0 * (log_eps - LOG_EPS_MACHINE).sqrt();
    let sq_j1 = phi_j1.sqrt().min(threshold - sq_j);

    let (sq_bar_j, sq_bar_j1, f_bar);
    if pj < 1e-14 && qj < 1e-14 {
        sq_bar_j = sq_j;
        sq_bar_j1 = sq_j1;
        f_bar = 1.0;
    } else if pj < 1e-14 {
        let f_min = if sq_j > 0.0 {
            fac * (sq_j / (sq_j1 - sq_j)).powf(qj)
        } else {
            fac
        };
        if f_min >= f_max {
            return None;
        }
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fq = f_bar.powf(-1.0 / qj);
        sq_bar_j = sq_j;
        sq_bar_j1 = (2.0 * sq_j1 - fq * sq_j) / (2.0 + fq);
    } else if qj < 1e-14 {
        let f_min = fac * (sq_j1 / (sq_j1 - sq_j)).powf(pj);
        if f_min >= f_max {
            return None;
        }
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fp = f_bar.powf(-1.0 / pj);
        sq_bar_j = (2.0 * sq_j + fp * sq_j1) / (2.0 - fp);
        sq_bar_j1 = sq_j1;
    } else {
        let f_min = fac * (sq_j + sq_j1) / (sq_j1 - sq_j).powf(pj.max(qj));
        if f_min >= f_max {
            return None;
        }
        let f_min = f_min.max(1.5);
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fp = f_bar.powf(-1.0 / pj);
        let fq = f_bar.powf(-1.0 / qj);
        let w = -phi_j1 / log_eps;
        let den = 2.0 + w - (1.0 + w) * fp + fq;
        sq_bar_j = ((2.0 + w + fq) * sq_j + fp * sq_j1) / den;
        sq_bar_j1 = (-(1.0 + w) * fq * sq_j + (2.0 + w - (1.0 + w) * fp) * sq_j1) / den;
    }
    log_eps -= f_bar.ln();
    let w = -sq_bar_j1 * sq_bar_j1 / log_eps;
    let mu = (((1.0 + w) * sq_bar_j + sq_bar_j1) / (2.0 + w)).powi(2);
    let h = -2.0 * PI / log_eps * (sq_bar_j1 - sq_bar_j) / ((1.0 + w) * sq_bar_j + sq_bar_j1);
    let n = ((1.0 - log_eps / mu).sqrt() / h).ceil();
    if !(n.is_finite() && h > 0.0 && mu > 0.0) {
        return None;
    }
    Some(Rule { mu, h, n: n as usize })
}

/// Parameters for the unbounded region to the right of a singularity.
fn unbounded_rule(phi_j: f64, pj: f64, log_eps: f64) -> Option<Rule> {
    let sq_phi = phi_j.sqrt();
    let mut phibar = if phi_j > 0.0 { phi_j * 1.01 } else { 0.01 };
    let mut sq_phibar = phibar.sqrt();
    let (f_min, f_max, f_tar) = (1.0f64, 10.0f64, 5.0f64);
    let (mut n, mut a, mut sq_mu);
    let mut iterations = 0;
    loop {
        let log_eps_phi = log_eps / phibar;
        n = (phibar / PI * (1.0 - 1.5 * log_eps_phi + (1.0 - 2.0 * log_eps_phi).sqrt())).ceil();
        a = PI * n / phibar;
        sq_mu = sq_phibar * (4.0 - a).abs() / (7.0 - (1.0 + 12.0 * a).sqrt()).abs();
        let fbar = ((sq_phibar - sq_phi) / sq_mu).powf(-pj);
        if pj < 1e-14 || (f_min < fbar && fbar < f_max) {
            break;
        }
        iterations += 1;
        if iterations > 100 {
            return None;
        }
        sq_phibar = f_tar.powf(-1.0 / pj) * sq_mu;
        phibar = sq_phibar * sq_phibar;
    }
    let mut mu = sq_mu * sq_mu;
    let mut h = (-3.0 * a - 2.0 + 2.0 * (1.0 + 12.0 * a).sqrt()) / (4.0 - a) / n;
    let threshold = log_eps - LOG_EPS_MACHINE;
    if mu > threshold {
        let q = if pj.abs() < 1e-14 {
            0.0
        } else {
            f_tar.powf(-1.0 / pj) * mu.sqrt()
        };
        let phibar = (q + sq_phi).powi(2);
        if phibar >= threshold {
            return None;
        }
        let w = (LOG_EPS_MACHINE / (LOG_EPS_MACHINE - log_eps)).sqrt();
        let u = (-phibar / LOG_EPS_MACHINE).sqrt();
        mu = threshold;
        n = (w * log_eps / (2.0 * PI) / (u * w - 1.0)).ceil();
        h = w / n;
    }
    if !(n.is_finite() && h > 0.0 && mu > 0.0) {
        return None;
    }
    Some(Rule { mu, h, n: n as usize })
}

/// Chooses the cheapest admissible region. Returns the rule and the index of
/// the first singularity lying to the right of the contour.
fn choose_rule(phis: &[f64], p: &[f64], q: &[f64]) -> Result<(Rule, usize), MlError> {
    let regions = p.len();
    let mut log_eps = TARGET_LOG_EPS;
    loop {
        let mut best: Option<(Rule, usize)> = None;
        for j in 0..regions {
            let upper = if j + 1 < regions { phis[j + 1] } else { f64::INFINITY };
            if !(phis[j] < log_eps - LOG_EPS_MACHINE && phis[j] < upper) {
                continue;
            }
            let rule = if j + 1 < regions {
                bounded_rule(phis[j], upper, p[j], q[j], log_eps)
            } else {
                unbounded_rule(phis[j], p[j], log_eps)
            };
            if let Some(rule) = rule {
                if best.is_none_or(|(b, _)| rule.n < b.n) {
                    best = Some((rule, j + 1));
                }
            }
        }
        match best {
            Some((rule, first_right)) if rule.n as f64 <= MAX_NODES => {
                return Ok((rule, first_right));
            }
            _ => {
                log_eps += 10f64.ln();
                if log_eps > WORST_LOG_EPS {
                    return Err(MlError::Unconverged {
                        detail: "no admissible contour within the node budget".into(),
                    });
                }
            }
        }
    }
}

/// Singularities (origin first), their `phi` values and the region exponents.
fn singularities(alpha: f64, beta: f64, poles: &[Complex64]) -> (Vec<Complex64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut sorted: Vec<(f64, Complex64)> = poles
        .iter()
        .map(|s| (phi(*s), *s))
        .filter(|(f, _)| *f > 1e-15)
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut s_star = vec![Complex64::new(0.0, 0.0)];
    let mut phis = vec![0.0];
    for (f, s) in sorted {
        s_star.push(s);
        phis.push(f);
    }
    let regions = s_star.len();
    let mut p = vec![1.0; regions];
    p[0] = (-2.0 * (alpha - beta + 1.0)).max(0.0);
    let mut q = vec![1.0; regions];
    q[regions - 1] = f64::INFINITY;
    (s_star, phis, p, q)
}

/// Scalar evaluation of `E_{a,b}(z)`.
pub(crate) fn contour(alpha: f64, beta: f64, z: Complex64) -> Result<Complex64, MlError> {
    let poles = principal_poles(alpha, z);
    let (s_star, phis, p, q) = singularities(alpha, beta, &poles);
    let (rule, first_right) = choose_rule(&phis, &p, &q)?;

    let node = |k: i64| {
        let u = rule.h * k as f64;
        let s = rule.mu * Complex64::new(1.0, u).powi(2);
        let ds = Complex64::new(-2.0 * rule.mu * u, 2.0 * rule.mu);
        s.exp() * s.powf(alpha - beta) / (s.powf(alpha) - z) * ds
    };
    let n = rule.n as i64;
    let mut integral = if z.im == 0.0 {
        // For real z the nodes at -u are minus the conjugates of those at u,
        // so the symmetric sum is purely imaginary.
        let mut im = node(0).im;
        for k in 1..=n {
            im += 2.0 * node(k).im;
        }
        Complex64::new(0.0, im)
    } else {
        (-n..=n).map(node).sum::<Complex64>()
    };
    integral *= rule.h / (2.0 * PI);
    // h / (2 pi i) * sum: division by i is a quarter turn.
    let mut value = Complex64::new(integral.im, -integral.re);
    for s in &s_star[first_right..] {
        value += s.powf(1.0 - beta) * s.exp() / alpha;
    }
    if z.im == 0.0 {
        value.im = 0.0;
    }
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(MlError::NonFinite);
    }
    Ok(value)
}

/// Matrix evaluation via the resolvent `(s^a I - A)^{-1}` on the contour.
///
/// Principal-sheet poles of the spectrum are kept to the left of the contour
/// so that no residues are needed; this fails if they lie too far right.
pub(crate) fn contour_matrix(alpha: f64, beta: f64, a: &DMatrix<f64>) -> Result<DMatrix<f64>, MlError> {
    let n_dim = a.nrows();
    let eig = a.clone().complex_eigenvalues();
    let poles: Vec<Complex64> = eig.iter().flat_map(|e| principal_poles(alpha, *e)).collect();
    let phi_max = poles.iter().map(|s| phi(*s)).fold(0.0f64, f64::max);
    let pj = if phi_max > 1e-15 {
        1.0
    } else {
        (-2.0 * (alpha - beta + 1.0)).max(0.0)
    };
    let mut log_eps = TARGET_LOG_EPS;
    let rule = loop {
        if phi_max < log_eps - LOG_EPS_MACHINE {
            if let Some(rule) = unbounded_rule(phi_max, pj, log_eps) {
                if rule.n as f64 <= MAX_NODES {
                    break rule;
                }
            }
        }
        log_eps += 10f64.ln();
        if log_eps > WORST_LOG_EPS {
            return Err(MlError::Unconverged {
                detail: "spectrum too far into the right half of the contour plane".into(),
            });
        }
    };

    let ac = a.map(|v| Complex64::new(v, 0.0));
    let ident = DMatrix::<Complex64>::identity(n_dim, n_dim);
    let mut acc = DMatrix::<Complex64>::zeros(n_dim, n_dim);
    for k in 0..=rule.n as i64 {
        let u = rule.h * k as f64;
        let s = rule.mu * Complex64::new(1.0, u).powi(2);
        let ds = Complex64::new(-2.0 * rule.mu * u, 2.0 * rule.mu);
        let shifted = &ident * s.powf(alpha) - &ac;
        let resolvent = shifted.lu().try_inverse().ok_or(MlError::Unconverged {
            detail: "singular resolvent on the contour".into(),
        })?;
        let weight = s.exp() * s.powf(alpha - beta) * ds * if k == 0 { 1.0 } else { 2.0 };
        acc += resolvent * weight;
    }
    // Real part of h / (2 pi i) * acc, using conjugate symmetry.
    let out = acc.map(|c| c.im * rule.h / (2.0 * PI));
    if out.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFinite);
    }
    Ok(out)
}
