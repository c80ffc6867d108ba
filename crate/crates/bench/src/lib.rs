//! Workloads shared by the criterion benches.

use ssp_pac::envs;
use ssp_pac::sampler::{CountTarget, GenerativeModel};
use ssp_pac::{ConfidenceSet, EmpiricalModel, SspMdp};

/// Square unit-cost gridworld with `side * side - 1` non-goal states.
pub fn grid(side: usize) -> SspMdp {
    envs::gen_gridworld(side, side, 0.1).expect("valid gridworld")
}

/// Counts after drawing `n` samples at every pair of `m`.
pub fn counts(m: &SspMdp, n: u64, seed: u64) -> EmpiricalModel {
    let mut g = GenerativeModel::new(m.clone(), seed);
    g.collect_until(&CountTarget::Uniform(n)).clone()
}

pub fn confidence_set(m: &SspMdp, n: u64, seed: u64, delta: f64) -> ConfidenceSet {
    ConfidenceSet::new(&counts(m, n, seed), delta).expect("every pair sampled")
}

/// Deterministic `(p_hat, beta, v)` inputs for one optimistic row of length
/// `len + 1` (goal last).
pub fn row_inputs(len: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let weights: Vec<f64> = (0..=len).map(|i| 1.0 + ((i * 7919) % 13) as f64).collect();
    let total: f64 = weights.iter().sum();
    let p_hat: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let beta = vec![0.05; len + 1];
    let v: Vec<f64> = (0..len).map(|i| ((i * 104_729) % 97) as f64 / 10.0).collect();
    (p_hat, beta, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_inputs_are_a_distribution() {
        let (p, beta, v) = row_inputs(10);
        assert_eq!((p.len(), beta.len(), v.len()), (11, 11, 10));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counts_hit_the_target() {
        let e = counts(&grid(3), 5, 0);
        assert_eq!(e.min_count(), 5);
    }
}
