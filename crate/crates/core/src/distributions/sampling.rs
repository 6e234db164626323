//! Exact samplers: the embedded jump chain, one-sided stable variables and
//! whole lifetimes.

use nalgebra::DVector;
use rand::distr::Open01;
use rand::Rng;

use super::{FractionalClock, InhomogeneityTransform, PhaseModel};
use crate::matrix::SubIntensity;

/// Jump chain of the absorbing Markov process: holding rates and cumulative
/// jump probabilities, with index `p` for absorption.
#[derive(Debug, Clone)]
pub struct JumpChain {
    initial: Vec<f64>,
    rates: Vec<f64>,
    jumps: Vec<Vec<f64>>,
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    let total = acc;
    for v in out.iter_mut() {
        *v /= total;
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

impl JumpChain {
    pub fn new(pi: &DVector<f64>, t: &SubIntensity) -> Self {
        let p = t.dim();
        let m = t.matrix();
        let rates: Vec<f64> = (0..p).map(|i| -m[(i, i)]).collect();
        let jumps = (0..p)
            .map(|i| {
                cumulative((0..=p).map(|j| {
                    if j == p {
                        t.exit()[i]
                    } else if j == i {
                        0.0
                    } else {
                        m[(i, j)]
                    }
                }))
            })
            .collect();
        Self {
            initial: cumulative(pi.iter().copied()),
            rates,
            jumps,
        }
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn rate(&self, state: usize) -> f64 {
        self.rates[state]
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick(&self.initial, rng.random::<f64>())
    }

    /// Next state after leaving `state`; `dim()` means absorption.
    pub fn next_state<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        pick(&self.jumps[state], rng.random::<f64>())
    }

    /// Exponential holding time in `state`.
    pub fn holding_time<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> f64 {
        standard_exponential(rng) / self.rates[state]
    }

    /// Absorption time of one trajectory on the Markov clock.
    pub fn absorption_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.dim();
        let mut state = self.initial_state(rng);
        let mut time = 0.0;
        while state < p {
            time += self.holding_time(state, rng);
            state = self.next_state(state, rng);
        }
        time
    }
}

pub(crate) fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln()
}

/// Positive stable variable `U` with `E exp(-s U) = exp(-s^alpha)`, drawn by
/// Kanter's representation from a uniform angle and an exponential.
///
/// # Panics
/// If `alpha` is not in `(0, 1)`; the degenerate case `alpha = 1` is the
/// constant one and callers skip the subordinator there.
pub fn sample_one_sided_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "stable index must lie in (0, 1), got {alpha}");
    let theta = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let w = standard_exponential(rng);
    let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * theta).sin() / w;
    a * b.powf((1.0 - alpha) / alpha)
}

/// One draw of `g(tau_Z)`, where `tau_Z = tau^{1/alpha} U` for a Markov
/// absorption time `tau` and an independent stable `U`.
pub fn sample_lifetime<R: Rng + ?Sized>(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    rng: &mut R,
) -> f64 {
    let tau = model.jump_chain().absorption_time(rng);
    let tau_z = if clock.is_markov() {
        tau
    } else {
        let a = clock.alpha();
        tau.powf(1.0 / a) * sample_one_sided_stable(a, rng)
    };
    g.g(tau_z)
}
