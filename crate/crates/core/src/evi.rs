//! Extended value iteration over empirical-Bernstein confidence boxes.
//!
//! The plausible models are every `q(.|s,a)` on the simplex over `S+1`
//! states with `|q(s') - p_hat(s')| <= beta(s')` and `q` in `[0, 1]`. The
//! extended Bellman operator takes a minimum over actions and over this set;
//! the inner minimum is a box-constrained LP on the simplex, solved by moving
//! mass from the highest-valued successors to the lowest-valued ones.

use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceRadii;
use crate::error::{Result, SspError};
use crate::mdp::{self, sup_distance, CostMatrix, Policy, SspMdp, TransitionTensor, ValueVector};
use crate::sampler::EmpiricalModel;

pub const DEFAULT_EVI_MAX_ITER: u64 = 10_000_000;

/// Slack allowed when checking the deterministic optimism certificates.
pub const CERTIFICATE_RTOL: f64 = 1e-9;

const ROW_FEASIBILITY_TOL: f64 = 1e-9;

/// Empirical model plus radii: everything EVI needs about the data.
#[derive(Clone, Debug)]
pub struct ConfidenceSet {
    p_hat: TransitionTensor,
    radii: ConfidenceRadii,
}

impl ConfidenceSet {
    /// Requires at least one sample at every pair.
    pub fn new(e: &EmpiricalModel, delta: f64) -> Result<Self> {
        for s in 0..e.num_states() {
            for a in 0..e.num_actions() {
                if e.n(s, a) == 0 {
                    return Err(SspError::InsufficientSamples { state: s, action: a });
                }
            }
        }
        Ok(Self {
            p_hat: e.p_hat(),
            radii: ConfidenceRadii::from_empirical(e, delta)?,
        })
    }

    pub fn from_parts(p_hat: TransitionTensor, radii: ConfidenceRadii) -> Result<Self> {
        if p_hat.num_states() != radii.num_states() || p_hat.num_actions() != radii.num_actions() {
            return Err(SspError::ShapeMismatch {
                expected: format!("{}x{} radii", p_hat.num_states(), p_hat.num_actions()),
                actual: format!("{}x{}", radii.num_states(), radii.num_actions()),
            });
        }
        Ok(Self { p_hat, radii })
    }

    /// Degenerate set containing only the given model's dynamics.
    pub fn exact(m: &SspMdp) -> Self {
        Self {
            p_hat: m.trans().clone(),
            radii: ConfidenceRadii::zero(m.num_states(), m.num_actions()),
        }
    }

    pub fn p_hat(&self) -> &TransitionTensor {
        &self.p_hat
    }

    pub fn radii(&self) -> &ConfidenceRadii {
        &self.radii
    }

    pub fn num_states(&self) -> usize {
        self.p_hat.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.p_hat.num_actions()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EviOutput {
    /// Stopping iterate `v_j`.
    pub v_tilde: ValueVector,
    /// Greedy with respect to `v_tilde` under `p_tilde`.
    pub pi_tilde: Policy,
    /// Optimistic row of every pair at the stopping iterate.
    #[serde(skip)]
    pub p_tilde: Option<TransitionTensor>,
    /// Number of operator applications performed.
    pub iterations: u64,
    pub vi_precision: f64,
    /// `||L~ v_j - v_j||_inf`, at most `vi_precision`.
    pub residual: f64,
}

impl EviOutput {
    pub fn p_tilde(&self) -> &TransitionTensor {
        self.p_tilde.as_ref().expect("p_tilde is populated by evi")
    }
}

/// Indices `0..=S` sorted by extended value (goal = 0), ties by index.
fn value_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..=v.len()).collect();
    order.sort_by(|&i, &j| ext(v, i).total_cmp(&ext(v, j)).then(i.cmp(&j)));
    order
}

#[inline]
fn ext(v: &[f64], i: usize) -> f64 {
    if i == v.len() {
        0.0
    } else {
        v[i]
    }
}

fn fill_optimistic_row(
    p_hat: &[f64],
    beta: &[f64],
    v: &[f64],
    order: &[usize],
    out: &mut [f64],
) -> Result<()> {
    let sum: f64 = p_hat.iter().sum();
    if (sum - 1.0).abs() > ROW_FEASIBILITY_TOL || p_hat.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(SspError::Infeasible);
    }
    out.copy_from_slice(p_hat);
    let (mut lo, mut hi) = (0, order.len() - 1);
    while lo < hi {
        let (i, j) = (order[lo], order[hi]);
        if ext(v, j) <= ext(v, i) {
            break;
        }
        let room = (p_hat[i] + beta[i]).min(1.0) - out[i];
        if room <= 0.0 {
            lo += 1;
            continue;
        }
        let avail = out[j] - (p_hat[j] - beta[j]).max(0.0);
        if avail <= 0.0 {
            hi -= 1;
            continue;
        }
        let moved = room.min(avail);
        out[i] += moved;
        out[j] -= moved;
        if room <= avail {
            lo += 1;
        } else {
            hi -= 1;
        }
    }
    Ok(())
}

/// Row in the confidence box minimizing `<q, (v, 0)>`. With zero radii or a
/// constant `v` no mass moves and `p_hat` is returned unchanged.
pub fn optimistic_row(p_hat: &[f64], beta: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if p_hat.len() != v.len() + 1 || beta.len() != p_hat.len() {
        return Err(SspError::ShapeMismatch {
            expected: format!("rows of length {}", v.len() + 1),
            actual: format!("p_hat {}, beta {}", p_hat.len(), beta.len()),
        });
    }
    let mut out = vec![0.0; p_hat.len()];
    fill_optimistic_row(p_hat, beta, v, &value_order(v), &mut out)?;
    Ok(out)
}

fn check_cost_shape(set: &ConfidenceSet, cost: &CostMatrix) -> Result<()> {
    if cost.num_states() != set.num_states() || cost.num_actions() != set.num_actions() {
        return Err(SspError::ShapeMismatch {
            expected: format!("{}x{} costs", set.num_states(), set.num_actions()),
            actual: format!("{}x{}", cost.num_states(), cost.num_actions()),
        });
    }
    Ok(())
}

/// One sweep of the extended operator into caller-owned buffers.
fn sweep(
    set: &ConfidenceSet,
    cost: &CostMatrix,
    v: &[f64],
    next: &mut [f64],
    actions: &mut [usize],
    p_tilde: &mut TransitionTensor,
) -> Result<()> {
    let order = value_order(v);
    for s in 0..set.num_states() {
        let mut best = f64::INFINITY;
        for a in 0..set.num_actions() {
            let row = p_tilde.row_mut(s, a);
            fill_optimistic_row(set.p_hat.row(s, a), set.radii.row(s, a), v, &order, row)?;
            let q = cost.get(s, a) + row[..v.len()].iter().zip(v).map(|(p, x)| p * x).sum::<f64>();
            if q < best {
                best = q;
                actions[s] = a;
            }
        }
        next[s] = best;
    }
    Ok(())
}

/// One application of the extended Bellman operator: new values, the argmin
/// policy (ties to the lowest action) and the optimistic rows used.
pub fn extended_bellman(
    set: &ConfidenceSet,
    cost: &CostMatrix,
    v: &[f64],
) -> Result<(ValueVector, Policy, TransitionTensor)> {
    check_cost_shape(set, cost)?;
    let n = set.num_states();
    let mut next = vec![0.0; n];
    let mut actions = vec![0; n];
    let mut p_tilde = TransitionTensor::zeros(n, set.num_actions());
    sweep(set, cost, v, &mut next, &mut actions, &mut p_tilde)?;
    Ok((ValueVector::new(next), Policy::new(actions), p_tilde))
}

/// Extended value iteration from `v_0 = 0`, stopping at the first `j` with
/// `||v_{j+1} - v_j||_inf <= mu_vi`.
pub fn evi(set: &ConfidenceSet, cost: &CostMatrix, mu_vi: f64, max_iter: u64) -> Result<EviOutput> {
    check_cost_shape(set, cost)?;
    if !(mu_vi > 0.0) {
        return Err(SspError::InvalidArgs(format!("VI precision must be positive, got {mu_vi}")));
    }
    if !(cost.min() > 0.0) {
        return Err(SspError::InvalidArgs("extended value iteration needs strictly positive costs".into()));
    }
    let n = set.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut actions = vec![0; n];
    let mut p_tilde = TransitionTensor::zeros(n, set.num_actions());
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        sweep(set, cost, &v, &mut next, &mut actions, &mut p_tilde)?;
        residual = sup_distance(&next, &v);
        if residual <= mu_vi {
            return Ok(EviOutput {
                v_tilde: ValueVector::new(v),
                pi_tilde: Policy::new(actions),
                p_tilde: Some(p_tilde),
                iterations: iteration,
                vi_precision: mu_vi,
                residual,
            });
        }
        std::mem::swap(&mut v, &mut next);
    }
    Err(SspError::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Value of `pi` in the optimistic model `p_tilde`.
pub fn optimistic_policy_value(p_tilde: &TransitionTensor, cost: &CostMatrix, pi: &Policy) -> Result<ValueVector> {
    mdp::policy_value(&SspMdp::new(cost.clone(), p_tilde.clone())?, pi)
}

/// Outcome of the deterministic optimism certificates for one EVI run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimismCertificate {
    pub optimistic_value: ValueVector,
    /// `v_tilde <= V~^{pi~}`.
    pub lower_holds: bool,
    /// `V~^{pi~} <= (1 + 2 mu / c_min) v_tilde`; `None` when `mu > c_min / 2`.
    pub upper_holds: Option<bool>,
}

impl OptimismCertificate {
    pub fn all_hold(&self) -> bool {
        self.lower_holds && self.upper_holds.unwrap_or(true)
    }
}

/// Checks the two certificates that hold for every run regardless of the data.
pub fn optimism_certificate(out: &EviOutput, cost: &CostMatrix) -> Result<OptimismCertificate> {
    let value = optimistic_policy_value(out.p_tilde(), cost, &out.pi_tilde)?;
    let slack = |x: f64| CERTIFICATE_RTOL * x.abs().max(1.0);
    let lower_holds = out.v_tilde.iter().zip(value.iter()).all(|(v, w)| *v <= w + slack(*w));
    let c_min = cost.min();
    let upper_holds = (out.vi_precision <= c_min / 2.0).then(|| {
        let factor = 1.0 + 2.0 * out.vi_precision / c_min;
        value.iter().zip(out.v_tilde.iter()).all(|(w, v)| *w <= factor * v + slack(*w))
    });
    Ok(OptimismCertificate {
        optimistic_value: value,
        lower_holds,
        upper_holds,
    })
}
