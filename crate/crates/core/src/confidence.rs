//! Empirical-Bernstein confidence radii around the empirical transition model.
//!
//! For a pair with `N^+ = max(1, n)` samples the radius on entry `s'` is
//!
//! ```text
//! beta = 4 sqrt(p_hat(s') L / N^+) + 28 L / N^+,   L = ln(S A N^+ / delta)
//! ```
//!
//! The `S A N^+` factor inside the logarithm already pays for the union bound
//! over pairs and sample counts, so `delta` is used as given.

use crate::error::{Result, SspError};
use crate::mdp::TransitionTensor;
use crate::sampler::EmpiricalModel;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(SspError::InvalidDelta(delta))
    }
}

#[inline]
fn log_term(n_plus: u64, num_states: usize, num_actions: usize, delta: f64) -> f64 {
    ((num_states * num_actions) as f64 * n_plus as f64 / delta).ln()
}

#[inline]
fn radius_with_log(p_hat: f64, n_plus: u64, log: f64) -> f64 {
    let n = n_plus as f64;
    4.0 * (p_hat * log / n).sqrt() + 28.0 * log / n
}

/// Bernstein radius for a single entry. `n_plus` is clamped to at least 1.
pub fn bernstein_radius(
    p_hat: f64,
    n_plus: u64,
    num_states: usize,
    num_actions: usize,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    let n_plus = n_plus.max(1);
    Ok(radius_with_log(p_hat, n_plus, log_term(n_plus, num_states, num_actions, delta)))
}

/// Radii for every `(s, a, s')` of an empirical model.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceRadii {
    num_states: usize,
    num_actions: usize,
    beta: Vec<f64>,
    delta: f64,
}

impl ConfidenceRadii {
    pub fn from_empirical(e: &EmpiricalModel, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let (ns, na) = (e.num_states(), e.num_actions());
        let mut beta = Vec::with_capacity(ns * na * (ns + 1));
        for s in 0..ns {
            for a in 0..na {
                let n_plus = e.n_plus(s, a);
                let log = log_term(n_plus, ns, na, delta);
                beta.extend(e.p_hat_row(s, a).into_iter().map(|p| radius_with_log(p, n_plus, log)));
            }
        }
        Ok(Self {
            num_states: ns,
            num_actions: na,
            beta,
            delta,
        })
    }

    /// All-zero radii, which collapse the confidence set onto `p_hat`.
    pub fn zero(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            beta: vec![0.0; num_states * num_actions * (num_states + 1)],
            delta: 0.5,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let w = self.num_states + 1;
        let start = (state * self.num_actions + action) * w;
        &self.beta[start..start + w]
    }
}

/// `max_{s,a} || p(.|s,a) - q(.|s,a) ||_1`.
pub fn model_l1_distance(p: &TransitionTensor, q: &TransitionTensor) -> Result<f64> {
    if !p.same_shape(q) {
        return Err(SspError::ShapeMismatch {
            expected: format!("{}x{} transitions", p.num_states(), p.num_actions()),
            actual: format!("{}x{}", q.num_states(), q.num_actions()),
        });
    }
    let mut worst = 0.0_f64;
    for s in 0..p.num_states() {
        for a in 0..p.num_actions() {
            let d: f64 = p.row(s, a).iter().zip(q.row(s, a)).map(|(x, y)| (x - y).abs()).sum();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Data-only upper bound on `max_{s,a} ||p_hat - p||_1`, valid on the
/// high-probability event: the largest per-pair sum of radii.
pub fn certified_l1_bound(e: &EmpiricalModel, delta: f64) -> Result<f64> {
    let radii = ConfidenceRadii::from_empirical(e, delta)?;
    Ok(max_radius_sum(&radii))
}

pub(crate) fn pair_radius_sum(radii: &ConfidenceRadii, state: usize, action: usize) -> f64 {
    radii.row(state, action).iter().sum()
}

fn max_radius_sum(radii: &ConfidenceRadii) -> f64 {
    let mut worst = 0.0_f64;
    for s in 0..radii.num_states {
        for a in 0..radii.num_actions {
            worst = worst.max(pair_radius_sum(radii, s, a));
        }
    }
    worst
}

/// Whether `|p_hat - p| <= beta` holds on every entry. Needs the true model,
/// so this is a diagnostic for tests and experiments.
pub fn bernstein_event_holds(e: &EmpiricalModel, truth: &TransitionTensor, delta: f64) -> Result<bool> {
    let radii = ConfidenceRadii::from_empirical(e, delta)?;
    for s in 0..e.num_states() {
        for a in 0..e.num_actions() {
            let p_hat = e.p_hat_row(s, a);
            let ok = p_hat
                .iter()
                .zip(truth.row(s, a))
                .zip(radii.row(s, a))
                .all(|((ph, p), b)| (ph - p).abs() <= *b);
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs;
    use crate::sampler::{CountTarget, GenerativeModel};
    use proptest::prelude::*;

    #[test]
    fn zero_p_hat_leaves_only_the_linear_term() {
        let l = (2.0 * 3.0 * 50.0 / 0.05_f64).ln();
        let r = bernstein_radius(0.0, 50, 2, 3, 0.05).unwrap();
        assert_eq!(r, 28.0 * l / 50.0);
    }

    #[test]
    fn reference_value() {
        // 4 sqrt(0.5 ln(4000) / 100) + 28 ln(4000) / 100, evaluated independently
        let expected = 3.1369037066779732;
        let r = bernstein_radius(0.5, 100, 2, 2, 0.1).unwrap();
        assert!((r - expected).abs() < 1e-12, "{r}");
    }

    #[test]
    fn shrinks_with_samples() {
        let small = bernstein_radius(0.3, 100, 4, 2, 0.1).unwrap();
        let large = bernstein_radius(0.3, 1_000_000, 4, 2, 0.1).unwrap();
        assert!(large < small);
    }

    #[test]
    fn rejects_bad_delta() {
        for d in [0.0, 1.0, -0.1, 2.0, f64::NAN] {
            assert!(matches!(bernstein_radius(0.1, 10, 1, 1, d), Err(SspError::InvalidDelta(_))));
        }
    }

    #[test]
    fn l1_distance_cases() {
        let m = envs::fixture_a();
        assert_eq!(model_l1_distance(m.trans(), m.trans()).unwrap(), 0.0);
        let p = TransitionTensor::from_nested(&[vec![vec![1.0, 0.0]]]).unwrap();
        let q = TransitionTensor::from_nested(&[vec![vec![0.0, 1.0]]]).unwrap();
        assert_eq!(model_l1_distance(&p, &q).unwrap(), 2.0);
        assert!(matches!(
            model_l1_distance(&p, m.trans()),
            Err(SspError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn l1_distance_against_direct_sum() {
        let m = envs::fixture_a();
        let mut g = GenerativeModel::new(m.clone(), 4);
        g.collect_until(&CountTarget::Uniform(37));
        let q = g.empirical().p_hat();
        let mut expected = 0.0_f64;
        for s in 0..3 {
            for a in 0..2 {
                let mut d = 0.0;
                for y in 0..4 {
                    d += (m.row(s, a)[y] - q.row(s, a)[y]).abs();
                }
                expected = expected.max(d);
            }
        }
        assert_eq!(model_l1_distance(m.trans(), &q).unwrap(), expected);
    }

    #[test]
    fn certified_bound_single_observation() {
        // S = 2, A = 1, one observed transition: one entry with p_hat = 1 and
        // S entries with p_hat = 0.
        let mut e = EmpiricalModel::new(2, 1);
        e.record(0, 0, 2);
        e.record(1, 0, 2);
        let l = (2.0_f64 / 0.1).ln();
        let expected = 4.0 * l.sqrt() + 28.0 * l + 2.0 * 28.0 * l;
        let got = certified_l1_bound(&e, 0.1).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn certified_bound_halves_when_samples_quadruple() {
        // Coin-flip pair with p_hat = (1/2, 1/2); ratio evaluated independently.
        let at = |n: u64| EmpiricalModel::from_counts(&[vec![vec![n / 2, n / 2]]]).unwrap();
        let b1 = certified_l1_bound(&at(10_000), 0.1).unwrap();
        let b2 = certified_l1_bound(&at(40_000), 0.1).unwrap();
        let ratio = b2 / b1;
        assert!((ratio - 0.4666028673377783).abs() < 1e-12, "{ratio}");
        assert!(ratio > 0.45 && ratio < 0.55);
    }

    #[test]
    fn certified_bound_covers_true_error() {
        let m = envs::fixture_a();
        let hits = (0..200u64)
            .filter(|&seed| {
                let mut g = GenerativeModel::new(m.clone(), seed);
                g.collect_until(&CountTarget::Uniform(200));
                let err = model_l1_distance(m.trans(), &g.empirical().p_hat()).unwrap();
                err <= certified_l1_bound(g.empirical(), 0.1).unwrap()
            })
            .count();
        assert!(hits >= 180, "{hits}");
    }

    proptest! {
        #[test]
        fn matches_closed_form(
            p in 0.0f64..=1.0, n in 1u64..1_000_000, s in 1usize..50, a in 1usize..10, d in 0.001f64..0.999
        ) {
            let l = ((s * a) as f64 * n as f64 / d).ln();
            let expected = 4.0 * (p * l / n as f64).sqrt() + 28.0 * l / n as f64;
            let got = bernstein_radius(p, n, s, a, d).unwrap();
            prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
        }

        #[test]
        fn nonincreasing_in_n(p in 0.0f64..=1.0, n in 3u64..100_000, d in 0.01f64..0.5) {
            let r1 = bernstein_radius(p, n, 3, 2, d).unwrap();
            let r2 = bernstein_radius(p, n + 1, 3, 2, d).unwrap();
            prop_assert!(r2 <= r1);
        }
    }
}
