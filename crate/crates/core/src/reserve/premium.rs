//! Fair premiums: the premium level that makes the reserve at issue vanish.

use nalgebra::{DMatrix, DVector};

use super::{reserve_at_issue, Contract, ReserveError};
use crate::distributions::{FractionalClock, InhomogeneityTransform, PhaseModel};

/// Shape of the premium vector across states.
#[derive(Debug, Clone, PartialEq)]
pub enum PremiumProfile {
    /// Equal premium rate in every collectible state.
    Uniform,
    /// A caller-chosen nonnegative shape, zero outside the collectible states.
    Custom(DVector<f64>),
    /// The state-by-state solution `c = a + (T * B) e + t * b`, which makes
    /// the reserve vanish at every time. Exists only on the homogeneous
    /// Markov clock with every state collectible.
    Pointwise,
}

/// Premium vector supported on `collectible` that makes the reserve at issue
/// zero. The premiums in `contract` are ignored.
///
/// The reserve is affine in the premium level `k` for a fixed shape `p`:
/// `Y0(k p) = Y0(0) - k A(p)`, where `A(p)` is the value of an annuity paying
/// `p`. Two reserve evaluations therefore determine `k`.
pub fn fair_premium(
    model: &PhaseModel,
    g: &InhomogeneityTransform,
    clock: FractionalClock,
    contract: &Contract,
    collectible: &[usize],
    profile: &PremiumProfile,
) -> Result<DVector<f64>, ReserveError> {
    contract.check_model(model)?;
    let p = model.dim();
    if collectible.is_empty() {
        return Err(ReserveError::InvalidProfile("no collectible states".into()));
    }
    if let Some(&s) = collectible.iter().find(|&&s| s >= p) {
        return Err(ReserveError::StateOutOfRange { state: s, dim: p });
    }
    let allowed = |i: usize| collectible.contains(&i);
    let shape = match profile {
        PremiumProfile::Uniform => DVector::from_fn(p, |i, _| if allowed(i) { 1.0 } else { 0.0 }),
        PremiumProfile::Custom(v) => {
            if v.len() != p {
                return Err(ReserveError::DimensionMismatch { expected: p, got: v.len() });
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || v.iter().all(|x| *x == 0.0) {
                return Err(ReserveError::InvalidProfile("shape must be nonnegative and nonzero".into()));
            }
            if (0..p).any(|i| v[i] != 0.0 && !allowed(i)) {
                return Err(ReserveError::InvalidProfile("shape charges a non-collectible state".into()));
            }
            v.clone()
        }
        PremiumProfile::Pointwise => {
            if !clock.is_markov() || !matches!(g, InhomogeneityTransform::Identity) || collectible.len() < p {
                return Err(ReserveError::InvalidProfile(
                    "pointwise premiums need the homogeneous Markov clock and every state collectible".into(),
                ));
            }
            return Ok(contract.annuities() + contract.lump_rate(model));
        }
    };

    let base = contract.without_premiums();
    let liability = reserve_at_issue(model, g, clock, &base)?.value;
    let unit = Contract::new(
        shape.clone(),
        DVector::zeros(p),
        DMatrix::zeros(p, p),
        DVector::zeros(p),
        contract.interest(),
        contract.horizon(),
    )?;
    let annuity = reserve_at_issue(model, g, clock, &unit)?.value;
    if liability == 0.0 {
        return Ok(DVector::zeros(p));
    }
    if !(annuity.abs() > 1e-12 * liability.abs()) {
        return Err(ReserveError::Unfundable);
    }
    Ok(shape * (liability / annuity))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::Horizon;
    use super::*;

    #[test]
    fn pointwise_matches_formula() {
        let m = coxian();
        let k = c1(Horizon::Finite(50.0));
        let c = fair_premium(&m, &InhomogeneityTransform::Identity, FractionalClock::markov(), &k, &[0, 1, 2], &PremiumProfile::Pointwise).unwrap();
        let rep = reserve_at_issue(&m, &InhomogeneityTransform::Identity, FractionalClock::markov(), &k.with_premiums(c).unwrap()).unwrap();
        assert!(rep.value.abs() < 1e-9);
        let g = InhomogeneityTransform::gompertz_log(0.1383).unwrap();
        assert!(fair_premium(&m, &g, FractionalClock::markov(), &k, &[0, 1, 2], &PremiumProfile::Pointwise).is_err());
    }

    #[test]
    fn restricted_premium_balances() {
        let m = coxian();
        let g = InhomogeneityTransform::gompertz_log(0.1383).unwrap();
        let clock = FractionalClock::new(0.96).unwrap();
        let k = c1(Horizon::Finite(60.0));
        let c = fair_premium(&m, &g, clock, &k, &[0], &PremiumProfile::Uniform).unwrap();
        assert!(c[0] > 0.0 && c[1] == 0.0 && c[2] == 0.0);
        let rep = reserve_at_issue(&m, &g, clock, &k.with_premiums(c).unwrap()).unwrap();
        assert!(rep.value.abs() < 1e-9, "{}", rep.value);
    }

    #[test]
    fn nothing_to_fund() {
        let m = coxian();
        let k = Contract::new(DVector::zeros(3), DVector::zeros(3), DMatrix::zeros(3, 3), DVector::zeros(3), 0.03, Horizon::Finite(10.0)).unwrap();
        let c = fair_premium(&m, &InhomogeneityTransform::Identity, FractionalClock::markov(), &k, &[1], &PremiumProfile::Uniform).unwrap();
        assert_eq!(c, DVector::zeros(3));
    }

    #[test]
    fn unreachable_state_is_unfundable() {
        // State 0 is never entered when starting in state 1.
        let m = coxian().with_initial(DVector::from_vec(vec![0.0, 1.0, 0.0])).unwrap();
        let k = c1(Horizon::Finite(30.0));
        let r = fair_premium(&m, &InhomogeneityTransform::Identity, FractionalClock::markov(), &k, &[0], &PremiumProfile::Uniform);
        assert!(matches!(r, Err(ReserveError::Unfundable)));
    }

    #[test]
    fn profile_validation() {
        let m = coxian();
        let k = c1(Horizon::Finite(30.0));
        let g = InhomogeneityTransform::Identity;
        let c = FractionalClock::markov();
        assert!(fair_premium(&m, &g, c, &k, &[], &PremiumProfile::Uniform).is_err());
        assert!(fair_premium(&m, &g, c, &k, &[5], &PremiumProfile::Uniform).is_err());
        let bad = PremiumProfile::Custom(DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!(fair_premium(&m, &g, c, &k, &[0], &bad).is_err());
    }
}
