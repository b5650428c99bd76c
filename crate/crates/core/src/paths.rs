//! Joint probabilities for prescribed paths of states: products of squared
//! overlaps between successive states, with optional simultaneous blocks and
//! an explicit intermediate-basis evaluation of the path amplitudes.

use num_complex::Complex64 as C64;

use crate::error::{domain, LabResult};
use crate::reactions::CoherentState;

const NORM_TOL: f64 = 1e-12;

/// Norm of a state, used to validate paths.
pub trait Normed {
    fn norm(&self) -> f64;
}

impl Normed for CoherentState {
    fn norm(&self) -> f64 {
        1.0
    }
}

/// A planar unit vector given by its angle.
impl Normed for f64 {
    fn norm(&self) -> f64 {
        1.0
    }
}

impl Normed for Vec<C64> {
    fn norm(&self) -> f64 {
        self.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Ordered states with strictly increasing times.
#[derive(Clone, Debug)]
pub struct PathOfStates<S> {
    states: Vec<S>,
    times: Vec<f64>,
}

impl<S: Normed> PathOfStates<S> {
    pub fn new(states: Vec<S>, times: Vec<f64>) -> LabResult<Self> {
        if states.len() < 2 {
            return domain("a path needs at least two states");
        }
        if states.len() != times.len() {
            return domain("states and times differ in length");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("path times must be strictly increasing");
        }
        if let Some(i) = states.iter().position(|s| (s.norm() - 1.0).abs() > NORM_TOL) {
            return domain(format!("state {i} is not unit-norm"));
        }
        Ok(Self { states, times })
    }
}

impl<S> PathOfStates<S> {
    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Rule giving the transition amplitude from `a` to `b` a time `dt` later.
pub trait OverlapKernel {
    type State;
    fn amplitude(&self, a: &Self::State, b: &Self::State, dt: f64) -> C64;
}

/// Real coherent states: b is evolved to z_b e^{dt} before the Gaussian
/// overlap with a is taken.
#[derive(Clone, Copy, Debug, Default)]
pub struct CoherentKernel;

impl OverlapKernel for CoherentKernel {
    type State = CoherentState;
    fn amplitude(&self, a: &CoherentState, b: &CoherentState, dt: f64) -> C64 {
        crosscorrelation(*a, *b, dt)
    }
}

/// Planar unit vectors given by angle; the overlap is cos of the angle step.
#[derive(Clone, Copy, Debug, Default)]
pub struct RotationKernel;

impl OverlapKernel for RotationKernel {
    type State = f64;
    fn amplitude(&self, a: &f64, b: &f64, _dt: f64) -> C64 {
        C64::new((b - a).cos(), 0.0)
    }
}

/// Vectors in C^d with the standard inner product <a|b>.
#[derive(Clone, Copy, Debug, Default)]
pub struct InnerProductKernel;

impl OverlapKernel for InnerProductKernel {
    type State = Vec<C64>;
    fn amplitude(&self, a: &Vec<C64>, b: &Vec<C64>, _dt: f64) -> C64 {
        inner(a, b)
    }
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Correlation between coherent state `a` and coherent state `b` observed
/// `dt` later: exp(-z_a^2/2 - z_b(dt)^2/2 + z_a z_b(dt)) with z_b(dt) = z_b e^{dt}.
pub fn crosscorrelation(a: CoherentState, b: CoherentState, dt: f64) -> C64 {
    let za = a.z();
    let zb = b.z() * dt.exp();
    C64::new((-0.5 * (za - zb) * (za - zb)).exp(), 0.0)
}

fn chain_probability<K: OverlapKernel>(states: &[&K::State], dts: &[f64], kernel: &K) -> f64 {
    states
        .windows(2)
        .zip(dts)
        .map(|(w, &dt)| kernel.amplitude(w[0], w[1], dt).norm_sqr())
        .product()
}

/// Product over adjacent pairs of |amplitude|^2.
pub fn joint_path_probability<K: OverlapKernel>(path: &PathOfStates<K::State>, kernel: &K) -> f64 {
    let refs: Vec<&K::State> = path.states.iter().collect();
    let dts: Vec<f64> = path.times.windows(2).map(|w| w[1] - w[0]).collect();
    chain_probability(&refs, &dts, kernel)
}

/// Path probability with `block` (r - 1 extra states) checked at the same
/// instant as state `index`, contributing the overlaps
/// s_index -> block[0] -> block[1] -> ... at zero time separation.
pub fn joint_with_simultaneous<K: OverlapKernel>(
    path: &PathOfStates<K::State>,
    index: usize,
    block: &[K::State],
    kernel: &K,
) -> LabResult<f64> {
    if index >= path.len() {
        return domain(format!("block index {index} outside a path of {} states", path.len()));
    }
    let base = joint_path_probability(path, kernel);
    let mut chain: Vec<&K::State> = vec![&path.states[index]];
    chain.extend(block.iter());
    let zeros = vec![0.0; chain.len().saturating_sub(1)];
    Ok(base * chain_probability(&chain, &zeros, kernel))
}

/// Conditional probability of realizing the path when each secondary-path
/// sum is collapsed by completeness to the direct overlap.
pub fn ensemble_conditional_probability<K: OverlapKernel>(
    path: &PathOfStates<K::State>,
    kernel: &K,
) -> f64 {
    joint_path_probability(path, kernel)
}

/// Same quantity with the secondary-path sums carried out explicitly:
/// each amplitude is sum_i <b|e_i><e_i|a> over the supplied orthonormal
/// basis, which must be complete.
pub fn ensemble_conditional_probability_in_basis(
    path: &PathOfStates<Vec<C64>>,
    basis: &[Vec<C64>],
) -> LabResult<f64> {
    let dim = path.states[0].len();
    if path.states.iter().any(|s| s.len() != dim) {
        return domain("path states differ in dimension");
    }
    if basis.len() != dim || basis.iter().any(|e| e.len() != dim) {
        return domain(format!("basis must contain {dim} vectors of dimension {dim}"));
    }
    for (i, ei) in basis.iter().enumerate() {
        for (j, ej) in basis.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            if (inner(ei, ej) - want).norm() > 1e-10 {
                return domain("basis is not orthonormal");
            }
        }
    }
    let prob = path
        .states
        .windows(2)
        .map(|w| {
            let amp: C64 = basis.iter().map(|e| inner(&w[1], e) * inner(e, &w[0])).sum();
            amp.norm_sqr()
        })
        .product();
    Ok(prob)
}

/// `n` states rotating uniformly through `total_angle` on unit time.
pub fn rotation_path(n: usize, total_angle: f64) -> LabResult<PathOfStates<f64>> {
    if n < 2 {
        return domain("a rotation path needs at least two states");
    }
    let step = 1.0 / (n - 1) as f64;
    let states = (0..n).map(|i| total_angle * i as f64 * step).collect();
    let times = (0..n).map(|i| i as f64 * step).collect();
    PathOfStates::new(states, times)
}

/// The rotation path as explicit vectors (cos theta, sin theta) in C^2.
pub fn rotation_vectors(n: usize, total_angle: f64) -> LabResult<PathOfStates<Vec<C64>>> {
    let angles = rotation_path(n, total_angle)?;
    let states = angles
        .states
        .iter()
        .map(|th| vec![C64::new(th.cos(), 0.0), C64::new(th.sin(), 0.0)])
        .collect();
    PathOfStates::new(states, angles.times)
}

/// Standard basis of C^dim.
pub fn standard_basis(dim: usize) -> Vec<Vec<C64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cs_with_z(z: f64) -> CoherentState {
        CoherentState::new(z * std::f64::consts::SQRT_2, 0.0)
    }

    #[test]
    fn crosscorrelation_cases() {
        let a = CoherentState::new(0.3, 0.4);
        assert!((crosscorrelation(a, a, 0.0).norm() - 1.0).abs() < 1e-15);
        let v = crosscorrelation(cs_with_z(0.0), cs_with_z(1.0), 0.0);
        assert!((v.re - (-0.5f64).exp()).abs() < 1e-15);
        // Overlap modulus approaches 1 as the evolved b approaches a.
        let near = crosscorrelation(cs_with_z(1.0), cs_with_z((-1e-6f64).exp()), 1e-6);
        assert!((near.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_validation() {
        assert!(PathOfStates::new(vec![0.0], vec![0.0]).is_err());
        assert!(PathOfStates::new(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        let bad = vec![vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]; 2];
        assert!(PathOfStates::new(bad, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn joint_trivial_cases() {
        let same = PathOfStates::new(vec![0.4; 5], vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((joint_path_probability(&same, &RotationKernel) - 1.0).abs() < 1e-15);
        let orth = PathOfStates::new(vec![0.0, std::f64::consts::FRAC_PI_2], vec![0.0, 1.0]).unwrap();
        assert!(joint_path_probability(&orth, &RotationKernel) < 1e-30);
    }

    #[test]
    fn rotation_product_closed_form() {
        let theta = std::f64::consts::FRAC_PI_2;
        let n = 10_000;
        let p = joint_path_probability(&rotation_path(n, theta).unwrap(), &RotationKernel);
        let want = (theta / (n - 1) as f64).cos().powi(2 * (n as i32 - 1));
        assert!((p - want).abs() < 1e-12);
        assert!(p > 0.999);
    }

    #[test]
    fn simultaneous_blocks() {
        let path = rotation_path(5, 1.0).unwrap();
        let base = joint_path_probability(&path, &RotationKernel);
        assert_eq!(joint_with_simultaneous(&path, 2, &[], &RotationKernel).unwrap(), base);
        let at = path.states()[2];
        let same = joint_with_simultaneous(&path, 2, &[at, at], &RotationKernel).unwrap();
        assert!((same - base).abs() < 1e-15);
        let tilted = joint_with_simultaneous(&path, 2, &[at + 0.1], &RotationKernel).unwrap();
        assert!((tilted - base * 0.1f64.cos().powi(2)).abs() < 1e-15);
        assert!(joint_with_simultaneous(&path, 5, &[], &RotationKernel).is_err());
        // Dense limit: path and block steps shrink together.
        let dense = rotation_path(100_000, 1.0).unwrap();
        let d = joint_with_simultaneous(&dense, 7, &[dense.states()[7] + 1e-5; 3], &RotationKernel).unwrap();
        assert!(d > 0.9999);
    }

    #[test]
    fn ensemble_probability_cases() {
        let same = PathOfStates::new(vec![0.2, 0.2], vec![0.0, 1.0]).unwrap();
        assert!((ensemble_conditional_probability(&same, &RotationKernel) - 1.0).abs() < 1e-15);
        let v = rotation_vectors(2, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(ensemble_conditional_probability_in_basis(&v, &standard_basis(2)).unwrap() < 1e-30);
        let mut prev = 0.0;
        for n in [10, 100, 1000, 10_000] {
            let p = ensemble_conditional_probability_in_basis(
                &rotation_vectors(n, std::f64::consts::FRAC_PI_2).unwrap(),
                &standard_basis(2),
            )
            .unwrap();
            assert!(p > prev);
            prev = p;
        }
        assert!(prev > 0.999);
    }

    #[test]
    fn basis_must_be_complete_and_orthonormal() {
        let v = rotation_vectors(3, 1.0).unwrap();
        assert!(ensemble_conditional_probability_in_basis(&v, &standard_basis(2)[..1]).is_err());
        let skew = vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]];
        assert!(ensemble_conditional_probability_in_basis(&v, &skew).is_err());
    }

    #[test]
    fn factorization_holds_only_in_the_limit() {
        // |tau(A,B)|^2 / (tau(A,A) tau(B,B)) with both autocorrelations 1.
        let ratio = |za: f64, zb: f64, dt: f64| {
            let ab = crosscorrelation(cs_with_z(za), cs_with_z(zb), dt).norm_sqr();
            let aa = crosscorrelation(cs_with_z(za), cs_with_z(za), 0.0).norm_sqr();
            let bb = crosscorrelation(cs_with_z(zb), cs_with_z(zb), 0.0).norm_sqr();
            ab / (aa * bb)
        };
        // Distinct centres: the ratio is exp(-(z_a - z_b)^2), not 1.
        assert!((ratio(0.0, 1.0, 0.0) - (-1f64).exp()).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 1..=6 {
            let dt = 10f64.powi(-k);
            let r = ratio(1.0, 1.0 - dt, dt);
            assert!(r >= prev);
            prev = r;
        }
        assert!((prev - 1.0).abs() < 1e-11);
    }

    proptest! {
        #[test]
        fn concatenation_is_multiplicative(a in proptest::collection::vec(-3.0f64..3.0, 2..8), b in proptest::collection::vec(-3.0f64..3.0, 1..8)) {
            let times = |n: usize, t0: f64| (0..n).map(|i| t0 + i as f64).collect::<Vec<_>>();
            let p1 = PathOfStates::new(a.clone(), times(a.len(), 0.0)).unwrap();
            let mut joined = a.clone();
            joined.extend(&b);
            let mut tail = vec![*a.last().unwrap()];
            tail.extend(&b);
            let p2 = PathOfStates::new(tail, times(b.len() + 1, 0.0)).unwrap();
            let pj = PathOfStates::new(joined.clone(), times(joined.len(), 0.0)).unwrap();
            let l = joint_path_probability(&pj, &RotationKernel);
            let r = joint_path_probability(&p1, &RotationKernel) * joint_path_probability(&p2, &RotationKernel);
            prop_assert!((l - r).abs() <= 1e-12 * l.max(1e-300) + 1e-300);
        }

        #[test]
        fn intermediate_basis_is_irrelevant(phi in 0.0f64..6.3, n in 2usize..50, total in 0.0f64..3.0, swap in any::<bool>()) {
            let path = rotation_vectors(n, total).unwrap();
            let mut basis = vec![
                vec![C64::new(phi.cos(), 0.0), C64::new(phi.sin(), 0.0)],
                vec![C64::new(-phi.sin(), 0.0), C64::new(phi.cos(), 0.0)],
            ];
            if swap {
                basis.swap(0, 1);
            }
            let a = ensemble_conditional_probability_in_basis(&path, &basis).unwrap();
            let b = ensemble_conditional_probability_in_basis(&path, &standard_basis(2)).unwrap();
            let c = ensemble_conditional_probability(&rotation_path(n, total).unwrap(), &RotationKernel);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((a - c).abs() < 1e-12);
        }
    }
}
