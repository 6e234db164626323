//! Exact simulation of the time-changed jump process with payment
//! accounting, and Monte Carlo reserves.
//!
//! Each Markov sojourn `W` becomes `W^{1/alpha} U` on the fractional clock
//! with a fresh stable `U`, since subordinator increments over disjoint
//! Markov intervals are independent and self-similar. Calendar times are
//! `g` of the accumulated fractional clock.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::distributions::{sample_one_sided_stable, FractionalClock, InhomogeneityTransform, PhaseModel};
use crate::reserve::{Contract, ReserveError};
use crate::rng::path_rng;

/// Fewest paths accepted by [`mc_reserve`].
pub const MIN_PATHS: usize = 100;
/// Rejection share above which conditioning on survival is abandoned.
pub const MAX_REJECTION: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("at least {MIN_PATHS} paths are required, got {0}")]
    TooFewPaths(usize),
    #[error("valuation time {t} is not before the horizon {n}")]
    HorizonBeforeT { t: f64, n: f64 },
    #[error("survival to t = {t} is too rare to condition on (rejection share {rate})")]
    AllAbsorbed { t: f64, rate: f64 },
    #[error(transparent)]
    Reserve(#[from] ReserveError),
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    /// Visited states; the absorbing state has index `p`.
    pub states: Vec<usize>,
    /// Calendar entry time of each visited state.
    pub entry_times: Vec<f64>,
    pub absorbed: bool,
    /// Horizon at which an unabsorbed path was cut.
    pub horizon: f64,
    pub discounted_annuity: f64,
    pub discounted_lumps: f64,
}

impl PathSample {
    /// Death time, if the path was absorbed.
    pub fn absorption_time(&self) -> Option<f64> {
        self.absorbed.then(|| *self.entry_times.last().expect("nonempty path"))
    }

    /// Whether the process is still alive at calendar time `t`.
    pub fn alive_at(&self, t: f64) -> bool {
        self.absorption_time().is_none_or(|d| d > t)
    }

    /// State occupied at calendar time `s`, `p` once absorbed.
    pub fn state_at(&self, s: f64) -> usize {
        let k = self.entry_times.partition_point(|&e| e <= s);
        self.states[k.saturating_sub(1)]
    }

    /// Fills the payment fields from `contract`, discounting to `t_start`.
    pub fn priced(mut self, contract: &Contract, t_start: f64) -> Self {
        let (a, l) = accrue_payments(&self, contract, t_start);
        self.discounted_annuity = a;
        self.discounted_lumps = l;
        self
    }
}

/// Simulates one trajectory up to absorption or calendar time `horizon`.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    horizon: f64,
    rng: &mut R,
) -> PathSample {
    let chain = model.jump_chain();
    let p = chain.dim();
    let mut state = chain.initial_state(rng);
    let mut states = vec![state];
    let mut entry_times = vec![0.0];
    let mut clock_time = 0.0;
    let mut absorbed = false;
    loop {
        let w = chain.holding_time(state, rng);
        clock_time += if clock.is_markov() {
            w
        } else {
            let a = clock.alpha();
            w.powf(1.0 / a) * sample_one_sided_stable(a, rng)
        };
        let x = g.g(clock_time);
        let next = chain.next_state(state, rng);
        if x >= horizon {
            break;
        }
        states.push(next);
        entry_times.push(x);
        if next == p {
            absorbed = true;
            break;
        }
        state = next;
    }
    PathSample {
        states,
        entry_times,
        absorbed,
        horizon,
        discounted_annuity: 0.0,
        discounted_lumps: 0.0,
    }
}

/// `int_lo^hi e^{-r (x - t0)} dx` for `t0 <= lo <= hi`.
fn discounted_length(r: f64, t0: f64, lo: f64, hi: f64) -> f64 {
    if r == 0.0 {
        hi - lo
    } else {
        (-r * (lo - t0)).exp() * -(-r * (hi - lo)).exp_m1() / r
    }
}

/// Annuity and lump payments of `path` on `[t_start, n]`, discounted to
/// `t_start`.
pub fn accrue_payments(path: &PathSample, contract: &Contract, t_start: f64) -> (f64, f64) {
    let n = contract.horizon().value().min(path.horizon);
    let r = contract.interest();
    let net = contract.net_rate();
    let p = contract.dim();
    let (mut annuity, mut lumps) = (0.0, 0.0);
    for (k, &s) in path.states.iter().enumerate() {
        if s >= p {
            break;
        }
        let start = path.entry_times[k];
        let end = path.entry_times.get(k + 1).copied().unwrap_or(n);
        let (lo, hi) = (start.max(t_start), end.min(n));
        if hi > lo && net[s] != 0.0 {
            annuity += net[s] * discounted_length(r, t_start, lo, hi);
        }
        if let Some(&next) = path.states.get(k + 1) {
            if end >= t_start && end <= n {
                let amount = if next == p {
                    contract.death_lumps()[s]
                } else {
                    contract.transition_lumps()[(s, next)]
                };
                if amount != 0.0 {
                    lumps += amount * (-r * (end - t_start)).exp();
                }
            }
        }
    }
    (annuity, lumps)
}

/// Monte Carlo reserve with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// Sum of the annuity and lump means.
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
    pub annuity_mean: f64,
    pub lump_mean: f64,
    /// Paths discarded because they were absorbed before the valuation time.
    pub rejected: u64,
}

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Per-path attempts before conditioning is declared infeasible.
const MAX_ATTEMPTS: u64 = 1_000_000;

/// Reserve at calendar time `t` estimated from `paths` trajectories.
///
/// For `t > 0` paths absorbed before `t` are redrawn from the same stream,
/// which conditions on survival to `t` and averages over the unobserved
/// clock state. Path `i` always uses stream `i` of `seed`, and results are
/// summed in path order, so the estimate does not depend on the number of
/// worker threads.
pub fn mc_reserve(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    contract: &Contract,
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<McEstimate, McError> {
    if paths < MIN_PATHS {
        return Err(McError::TooFewPaths(paths));
    }
    if contract.dim() != model.dim() {
        return Err(ReserveError::DimensionMismatch {
            expected: model.dim(),
            got: contract.dim(),
        }
        .into());
    }
    let n = contract.horizon().value();
    if !(t >= 0.0 && t < n) {
        return Err(McError::HorizonBeforeT { t, n });
    }
    let draws: Vec<Option<(f64, f64, u64)>> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut rejected = 0u64;
            loop {
                let path = simulate_path(model, g, clock, n, &mut rng);
                if path.alive_at(t) {
                    let (a, l) = accrue_payments(&path, contract, t);
                    return Some((a, l, rejected));
                }
                rejected += 1;
                if rejected >= MAX_ATTEMPTS {
                    return None;
                }
            }
        })
        .collect();

    let (mut ann, mut lmp, mut tot, mut sq) = (Kahan::default(), Kahan::default(), Kahan::default(), Kahan::default());
    let mut rejected = 0u64;
    for d in &draws {
        let Some((a, l, rj)) = *d else {
            return Err(McError::AllAbsorbed { t, rate: 1.0 });
        };
        ann.add(a);
        lmp.add(l);
        tot.add(a + l);
        sq.add((a + l) * (a + l));
        rejected += rj;
    }
    let rate = rejected as f64 / (rejected + paths as u64) as f64;
    if rate > MAX_REJECTION {
        return Err(McError::AllAbsorbed { t, rate });
    }
    let m = paths as f64;
    let mean_total = tot.sum / m;
    let var = ((sq.sum - m * mean_total * mean_total) / (m - 1.0)).max(0.0);
    let annuity_mean = ann.sum / m;
    let lump_mean = lmp.sum / m;
    Ok(McEstimate {
        mean: annuity_mean + lump_mean,
        std_error: (var / m).sqrt(),
        paths,
        seed,
        annuity_mean,
        lump_mean,
        rejected,
    })
}
