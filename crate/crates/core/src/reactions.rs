//! Survival probabilities of classical reactants represented by real
//! coherent states, for a single check, n checks in a fixed total time, and
//! the n -> infinity limit.
//!
//! Every hyperbolic combination is routed through `expm1`, since
//! 1/2 + 1/2 (cosh t + sinh t)^2 - (cosh t + sinh t) = 1/2 (e^t - 1)^2 loses
//! all precision at small t when evaluated term by term.

use crate::error::{domain, LabResult};

/// A phase-space point (q, p) with real c-numbers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentState {
    pub q: f64,
    pub p: f64,
}

impl CoherentState {
    pub const GROUND: CoherentState = CoherentState { q: 0.0, p: 0.0 };

    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    /// z = (q + p) / sqrt(2).
    pub fn z(&self) -> f64 {
        (self.q + self.p) / std::f64::consts::SQRT_2
    }
}

/// n equally spaced checks in total time T; the step is always derived.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepetitionSchedule {
    pub total_time: f64,
    pub n: u64,
}

impl RepetitionSchedule {
    pub fn new(total_time: f64, n: u64) -> LabResult<Self> {
        if !(total_time > 0.0) || !total_time.is_finite() {
            return domain(format!("total time must be positive and finite, got {total_time}"));
        }
        if n == 0 {
            return domain("repetition count must be at least 1");
        }
        Ok(Self { total_time, n })
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The exponent was so negative that the result rounded to zero.
    Underflow,
    /// The exponent was so positive that the result was capped at `f64::MAX`.
    Saturated,
}

/// A probability-like value with a flag for range problems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Survival {
    pub value: f64,
    pub status: Status,
}

impl Survival {
    fn from_exponent(x: f64) -> Self {
        if x.is_nan() || x == f64::NEG_INFINITY {
            return Self { value: 0.0, status: Status::Underflow };
        }
        let value = x.exp();
        if value == 0.0 {
            Self { value, status: Status::Underflow }
        } else if value.is_infinite() {
            Self { value: f64::MAX, status: Status::Saturated }
        } else {
            Self { value, status: Status::Ok }
        }
    }
}

fn check_time(t: f64) -> LabResult<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("time must be finite and non-negative, got {t}"));
    }
    Ok(())
}

/// Probability of finding the reactant unchanged after time t:
/// exp(-(p+q)^2 (e^t - 1)^2 / 4).
pub fn survival_single(s: CoherentState, t: f64) -> LabResult<Survival> {
    check_time(t)?;
    let w = s.q + s.p;
    let g = t.exp_m1();
    if w == 0.0 {
        return Ok(Survival { value: 1.0, status: Status::Ok });
    }
    Ok(Survival::from_exponent(-0.25 * w * w * g * g))
}

/// Survival after n checks spread over T: exp(-(T/(4 dt)) (p+q)^2 (e^dt - 1)^2).
pub fn survival_repeated(s: CoherentState, sched: RepetitionSchedule) -> LabResult<Survival> {
    let w = s.q + s.p;
    if w == 0.0 {
        return Ok(Survival { value: 1.0, status: Status::Ok });
    }
    let g = sched.dt().exp_m1();
    Ok(Survival::from_exponent(-0.25 * sched.n as f64 * w * w * g * g))
}

/// Leading small-step form exp(-T (p+q)^2 dt / 4) of `survival_repeated`.
pub fn survival_repeated_small_step(s: CoherentState, sched: RepetitionSchedule) -> f64 {
    let w = s.q + s.p;
    (-0.25 * sched.total_time * w * w * sched.dt()).exp()
}

fn pair_terms(a: CoherentState, b: CoherentState) -> (f64, f64) {
    let sa = a.q + a.p;
    let sb = b.q + b.p;
    (sa * sa + sb * sb, a.q * b.q + a.p * b.p)
}

/// Joint survival of two reactants under the pair evolution:
/// exp(-(e^t - 1)^2 S / 4 + c t) with S = (qA+pA)^2 + (qB+pB)^2 and
/// c = qA qB + pA pB. The evolution is not unitary and values above 1 are
/// returned unchanged.
pub fn pair_survival(a: CoherentState, b: CoherentState, t: f64) -> LabResult<Survival> {
    check_time(t)?;
    let (s, c) = pair_terms(a, b);
    let g = t.exp_m1();
    let decay = if s == 0.0 { 0.0 } else { -0.25 * g * g * s };
    Ok(Survival::from_exponent(decay + c * t))
}

/// Pair survival after n checks: exp(T c - (n/4) (e^dt - 1)^2 S).
pub fn pair_survival_repeated(
    a: CoherentState,
    b: CoherentState,
    sched: RepetitionSchedule,
) -> LabResult<Survival> {
    let (s, c) = pair_terms(a, b);
    let g = sched.dt().exp_m1();
    let decay = if s == 0.0 { 0.0 } else { -0.25 * sched.n as f64 * g * g * s };
    Ok(Survival::from_exponent(sched.total_time * c + decay))
}

/// n -> infinity limit of `pair_survival_repeated`: exp(T c).
pub fn pair_survival_limit(a: CoherentState, b: CoherentState, total_time: f64) -> LabResult<Survival> {
    check_time(total_time)?;
    let (_, c) = pair_terms(a, b);
    Ok(Survival::from_exponent(total_time * c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Term-by-term hyperbolic form, only trustworthy away from t = 0.
    fn survival_hyperbolic(s: CoherentState, t: f64) -> f64 {
        let w = s.q + s.p;
        let h = t.cosh() + t.sinh();
        (-0.5 * w * w * (0.5 + 0.5 * h * h - h)).exp()
    }

    #[test]
    fn single_survival_cases() {
        let one = CoherentState::new(1.0, 0.0);
        assert_eq!(survival_single(one, 0.0).unwrap().value, 1.0);
        assert_eq!(survival_single(CoherentState::GROUND, 7.0).unwrap().value, 1.0);
        let v = survival_single(CoherentState::new(1.0, 1.0), 2f64.ln()).unwrap().value;
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!((v - survival_hyperbolic(CoherentState::new(1.0, 1.0), 2f64.ln())).abs() < 1e-14);
        assert!(survival_single(one, -1.0).is_err());
    }

    #[test]
    fn single_survival_underflows_with_flag() {
        let s = survival_single(CoherentState::new(1.0, 0.0), 10.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.status, Status::Underflow);
        let s = survival_single(CoherentState::new(1.0, 0.0), 800.0).unwrap();
        assert_eq!(s.status, Status::Underflow);
    }

    #[test]
    fn repeated_reduces_to_single() {
        let s = CoherentState::new(0.7, -0.2);
        let a = survival_repeated(s, RepetitionSchedule::new(1.3, 1).unwrap()).unwrap().value;
        let b = survival_single(s, 1.3).unwrap().value;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn repeated_dense_limit() {
        let s = CoherentState::new(1.0, 0.0);
        let sched = RepetitionSchedule::new(1.0, 1_000_000).unwrap();
        let v = survival_repeated(s, sched).unwrap().value;
        // exp(-2.5e-7) to leading order.
        assert!((v - (-2.5e-7f64).exp()).abs() < 1e-12);
        assert!((v - survival_repeated_small_step(s, sched)).abs() < 1e-10);
        let far = survival_repeated(s, RepetitionSchedule::new(1.0, 1 << 40).unwrap()).unwrap();
        assert!((far.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_cases() {
        let a = CoherentState::new(1.0, 0.0);
        let b = CoherentState::new(-1.0, 0.0);
        assert_eq!(pair_survival(a, b, 0.0).unwrap().value, 1.0);
        let g = CoherentState::GROUND;
        assert_eq!(pair_survival(g, g, 3.0).unwrap().value, 1.0);
        let v = pair_survival(a, b, 1.0).unwrap().value;
        let e1 = std::f64::consts::E - 1.0;
        let want = (-e1 * e1 / 2.0 - 1.0).exp();
        assert!((v / want - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pair_limit_cases() {
        let a = CoherentState::new(1.0, 0.0);
        assert_eq!(pair_survival_limit(a, CoherentState::GROUND, 2.0).unwrap().value, 1.0);
        let e = pair_survival_limit(a, a, 1.0).unwrap().value;
        assert!((e - std::f64::consts::E).abs() < 1e-15);
        let rep = pair_survival_repeated(a, a, RepetitionSchedule::new(1.0, 1_000_000).unwrap()).unwrap();
        assert!((rep.value / e - 1.0).abs() < 1e-4);
    }

    #[test]
    fn pair_saturates() {
        let a = CoherentState::new(30.0, 0.0);
        let s = pair_survival_limit(a, a, 10.0).unwrap();
        assert_eq!(s.status, Status::Saturated);
        assert_eq!(s.value, f64::MAX);
    }

    proptest! {
        #[test]
        fn single_matches_closed_form(q in -3.0f64..3.0, p in -3.0f64..3.0, t in 0.05f64..3.0) {
            let s = CoherentState::new(q, p);
            let v = survival_single(s, t).unwrap().value;
            let g = t.exp() - 1.0;
            let want = (-0.25 * (p + q).powi(2) * g * g).exp();
            prop_assume!(want > 1e-250);
            prop_assert!((v / want - 1.0).abs() < 1e-12);
            prop_assert!((v / survival_hyperbolic(s, t) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn repeated_increases_in_n(q in -2.0f64..2.0, p in -2.0f64..2.0, t in 0.1f64..2.0, n in 1u64..10_000) {
            let s = CoherentState::new(q, p);
            let a = survival_repeated(s, RepetitionSchedule::new(t, n).unwrap()).unwrap().value;
            let b = survival_repeated(s, RepetitionSchedule::new(t, n + 1).unwrap()).unwrap().value;
            prop_assert!(b >= a);
            prop_assert!(b <= 1.0);
        }

        #[test]
        fn small_step_error_is_second_order(q in -2.0f64..2.0, p in -2.0f64..2.0, t in 0.1f64..2.0) {
            let s = CoherentState::new(q, p);
            let err = |n: u64| {
                let sc = RepetitionSchedule::new(t, n).unwrap();
                (survival_repeated(s, sc).unwrap().value - survival_repeated_small_step(s, sc)).abs()
            };
            let w2 = (p + q).powi(2);
            // Leading discrepancy is T w^2 dt^2 / 4 times a bounded factor.
            for n in [100u64, 1000, 10_000] {
                let dt = t / n as f64;
                prop_assert!(err(n) <= 0.5 * t * w2 * dt * dt + 1e-15);
            }
        }

        #[test]
        fn pair_repeated_converges(qa in -2.0f64..2.0, pa in -2.0f64..2.0, qb in -2.0f64..2.0, pb in -2.0f64..2.0, t in 0.1f64..2.0) {
            let a = CoherentState::new(qa, pa);
            let b = CoherentState::new(qb, pb);
            let rep = pair_survival_repeated(a, b, RepetitionSchedule::new(t, 1_000_000).unwrap()).unwrap().value;
            let lim = pair_survival_limit(a, b, t).unwrap().value;
            prop_assert!((rep / lim - 1.0).abs() < 1e-4);
        }
    }
}
