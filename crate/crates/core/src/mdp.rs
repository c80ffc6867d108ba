//! Exact SSP model and ground-truth solvers.
//!
//! States are indexed `0..S`; the goal is the implicit index `S` in every
//! transition row. It is absorbing and zero-cost, so it has no stored row and
//! its value is always 0.

use std::collections::VecDeque;
use std::fs;
use std::ops::Deref;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SspError};

/// Rows must sum to one within this tolerance once stored.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Rows further than this from summing to one are rejected on load.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_VI_TOL: f64 = 1e-10;
pub const DEFAULT_VI_MAX_ITER: u64 = 10_000_000;

/// Above this many states `policy_value` switches to iterative evaluation.
const DENSE_SOLVE_LIMIT: usize = 2000;
const ITERATIVE_EVAL_TOL: f64 = 1e-10;

/// Stationary deterministic policy: one action per non-goal state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Self(actions)
    }

    pub fn constant(num_states: usize, action: usize) -> Self {
        Self(vec![action; num_states])
    }

    #[inline]
    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks that the policy is total over `num_states` states with actions below `num_actions`.
    pub fn validate(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if self.0.len() != num_states {
            return Err(SspError::ShapeMismatch {
                expected: format!("policy over {num_states} states"),
                actual: format!("{} entries", self.0.len()),
            });
        }
        if let Some((s, &a)) = self.0.iter().enumerate().find(|(_, &a)| a >= num_actions) {
            return Err(SspError::InvalidArgs(format!(
                "policy picks action {a} at state {s}, but only {num_actions} actions exist"
            )));
        }
        Ok(())
    }
}

impl From<Vec<usize>> for Policy {
    fn from(actions: Vec<usize>) -> Self {
        Self(actions)
    }
}

/// Value per non-goal state; the goal value is implicitly zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVector(Vec<f64>);

impl ValueVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(num_states: usize) -> Self {
        Self(vec![0.0; num_states])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        sup_distance(&self.0, other)
    }

    /// `self <= other + tol` componentwise.
    pub fn dominated_by(&self, other: &[f64], tol: f64) -> bool {
        self.0.iter().zip(other).all(|(a, b)| *a <= *b + tol)
    }
}

impl Deref for ValueVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ValueVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Dense `S x A` cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    num_states: usize,
    num_actions: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        if num_states == 0 || num_actions == 0 {
            return Err(SspError::InvalidModel("cost matrix must be non-empty".into()));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != num_actions) {
            return Err(SspError::ShapeMismatch {
                expected: format!("{num_actions} costs per state"),
                actual: format!("{} costs", row.len()),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            data: rows.concat(),
        })
    }

    pub fn constant(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self {
            num_states,
            num_actions,
            data: vec![value; num_states * num_actions],
        }
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.data[state * self.num_actions + action]
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            data: self.data.iter().map(|&c| f(c)).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.num_actions).map(<[f64]>::to_vec).collect()
    }
}

/// Dense `S x A x (S+1)` transition tensor; the last entry of each row is the goal.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionTensor {
    num_states: usize,
    num_actions: usize,
    data: Vec<f64>,
}

impl TransitionTensor {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            data: vec![0.0; num_states * num_actions * (num_states + 1)],
        }
    }

    pub fn from_nested(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        if num_states == 0 || num_actions == 0 {
            return Err(SspError::InvalidModel("transition tensor must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(num_states * num_actions * (num_states + 1));
        for (s, per_action) in rows.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(SspError::ShapeMismatch {
                    expected: format!("{num_actions} actions at state {s}"),
                    actual: format!("{} actions", per_action.len()),
                });
            }
            for row in per_action {
                if row.len() != num_states + 1 {
                    return Err(SspError::ShapeMismatch {
                        expected: format!("rows of length {} (S+1, goal last)", num_states + 1),
                        actual: format!("row of length {}", row.len()),
                    });
                }
                data.extend_from_slice(row);
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            data,
        })
    }

    pub(crate) fn from_flat(num_states: usize, num_actions: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), num_states * num_actions * (num_states + 1));
        Self {
            num_states,
            num_actions,
            data,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row_len(&self) -> usize {
        self.num_states + 1
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let w = self.row_len();
        let start = (state * self.num_actions + action) * w;
        &self.data[start..start + w]
    }

    #[inline]
    pub fn row_mut(&mut self, state: usize, action: usize) -> &mut [f64] {
        let w = self.row_len();
        let start = (state * self.num_actions + action) * w;
        &mut self.data[start..start + w]
    }

    pub(crate) fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.row_len())
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.row(s, a).to_vec()).collect())
            .collect()
    }

    pub fn same_shape(&self, other: &TransitionTensor) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }
}

#[derive(Serialize, Deserialize)]
struct RawMdp {
    #[serde(rename = "S")]
    num_states: usize,
    #[serde(rename = "A")]
    num_actions: usize,
    cost: Vec<Vec<f64>>,
    trans: Vec<Vec<Vec<f64>>>,
}

/// A stochastic shortest path MDP with an implicit absorbing, zero-cost goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp", into = "RawMdp")]
pub struct SspMdp {
    cost: CostMatrix,
    trans: TransitionTensor,
}

impl TryFrom<RawMdp> for SspMdp {
    type Error = SspError;

    fn try_from(raw: RawMdp) -> Result<Self> {
        if raw.cost.len() != raw.num_states || raw.trans.len() != raw.num_states {
            return Err(SspError::ShapeMismatch {
                expected: format!("{} states", raw.num_states),
                actual: format!("cost has {}, trans has {}", raw.cost.len(), raw.trans.len()),
            });
        }
        let cost = CostMatrix::from_rows(&raw.cost)?;
        if cost.num_actions() != raw.num_actions {
            return Err(SspError::ShapeMismatch {
                expected: format!("{} actions", raw.num_actions),
                actual: format!("{} actions", cost.num_actions()),
            });
        }
        SspMdp::new(cost, TransitionTensor::from_nested(&raw.trans)?)
    }
}

impl From<SspMdp> for RawMdp {
    fn from(m: SspMdp) -> Self {
        RawMdp {
            num_states: m.num_states(),
            num_actions: m.num_actions(),
            cost: m.cost.to_rows(),
            trans: m.trans.to_nested(),
        }
    }
}

impl SspMdp {
    /// Validates costs and transition rows. Rows within `1e-9` of summing to
    /// one are renormalized; anything further off is rejected.
    pub fn new(cost: CostMatrix, mut trans: TransitionTensor) -> Result<Self> {
        if cost.num_states() != trans.num_states() || cost.num_actions() != trans.num_actions() {
            return Err(SspError::ShapeMismatch {
                expected: format!("{}x{} transitions", cost.num_states(), cost.num_actions()),
                actual: format!("{}x{}", trans.num_states(), trans.num_actions()),
            });
        }
        for s in 0..cost.num_states() {
            for a in 0..cost.num_actions() {
                let c = cost.get(s, a);
                if !(0.0..=1.0).contains(&c) {
                    return Err(SspError::InvalidModel(format!(
                        "cost({s},{a}) = {c} outside [0, 1]"
                    )));
                }
                let row = trans.row_mut(s, a);
                if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                    return Err(SspError::InvalidModel(format!(
                        "row ({s},{a}) has a negative or non-finite entry"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
                    return Err(SspError::InvalidModel(format!(
                        "row ({s},{a}) sums to {sum}, not 1"
                    )));
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    row.iter_mut().for_each(|p| *p /= sum);
                }
            }
        }
        Ok(Self { cost, trans })
    }

    pub fn from_nested(cost: &[Vec<f64>], trans: &[Vec<Vec<f64>>]) -> Result<Self> {
        Self::new(CostMatrix::from_rows(cost)?, TransitionTensor::from_nested(trans)?)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.cost.num_states()
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.cost.num_actions()
    }

    /// Index of the goal inside transition rows.
    #[inline]
    pub fn goal(&self) -> usize {
        self.num_states()
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn trans(&self) -> &TransitionTensor {
        &self.trans
    }

    #[inline]
    pub fn cost_of(&self, state: usize, action: usize) -> f64 {
        self.cost.get(state, action)
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        self.trans.row(state, action)
    }

    /// Same dynamics, different costs.
    pub fn with_costs(&self, cost: CostMatrix) -> Result<Self> {
        Self::new(cost, self.trans.clone())
    }

    /// Unit-cost copy, whose policy values are expected hitting times.
    pub fn unit_cost(&self) -> Self {
        Self {
            cost: CostMatrix::constant(self.num_states(), self.num_actions(), 1.0),
            trans: self.trans.clone(),
        }
    }

    pub fn support_size(&self, state: usize, action: usize) -> usize {
        self.row(state, action).iter().filter(|&&p| p > 0.0).count()
    }

    /// Number of stationary deterministic policies, `A^S`.
    pub fn policy_count(&self) -> u128 {
        (self.num_actions() as u128).saturating_pow(self.num_states() as u32)
    }

    #[inline]
    pub(crate) fn q_value(&self, state: usize, action: usize, v: &[f64]) -> f64 {
        let row = self.row(state, action);
        self.cost_of(state, action) + row[..v.len()].iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
    }
}

/// Scalar summaries of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScalars {
    pub c_min: f64,
    pub gamma_support: usize,
    /// `max_s V*(s)`; only reported when `c_min > 0`.
    pub b_star: Option<f64>,
    pub diameter: f64,
    pub per_state_diameter: ValueVector,
}

fn greedy_backup(m: &SspMdp, v: &[f64]) -> (Vec<f64>, Policy) {
    let mut out = Vec::with_capacity(m.num_states());
    let mut actions = Vec::with_capacity(m.num_states());
    for s in 0..m.num_states() {
        let (mut best_a, mut best) = (0, m.q_value(s, 0, v));
        for a in 1..m.num_actions() {
            let q = m.q_value(s, a, v);
            if q < best {
                best = q;
                best_a = a;
            }
        }
        out.push(best);
        actions.push(best_a);
    }
    (out, Policy(actions))
}

/// One application of the optimal Bellman operator.
pub fn bellman_apply(m: &SspMdp, v: &[f64]) -> ValueVector {
    ValueVector(greedy_backup(m, v).0)
}

/// Greedy policy with respect to `v` (ties go to the lowest action index).
pub fn greedy_policy(m: &SspMdp, v: &[f64]) -> Policy {
    greedy_backup(m, v).1
}

/// Value iteration from the zero vector. The returned `v` satisfies
/// `||Lv - v||_inf <= tol`; the policy is greedy with respect to it.
pub fn value_iteration(m: &SspMdp, tol: f64, max_iter: u64) -> Result<(ValueVector, Policy)> {
    if !(tol > 0.0) {
        return Err(SspError::InvalidArgs(format!("tolerance must be positive, got {tol}")));
    }
    let mut v = vec![0.0; m.num_states()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let (next, _) = greedy_backup(m, &v);
        residual = sup_distance(&next, &v);
        v = next;
        // L is a sup-norm non-expansion, so ||L v_{k+1} - v_{k+1}|| <= ||v_{k+1} - v_k||.
        if residual <= tol {
            let policy = greedy_policy(m, &v);
            return Ok((ValueVector(v), policy));
        }
    }
    Err(SspError::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// States from which the goal cannot be reached under `pi` along
/// positive-probability edges, in increasing order.
fn unreachable_states(m: &SspMdp, pi: &Policy) -> Vec<usize> {
    let n = m.num_states();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for s in 0..n {
        for (y, &p) in m.row(s, pi.action(s)).iter().enumerate() {
            if p > 0.0 {
                reverse[y].push(s);
            }
        }
    }
    let mut reached = vec![false; n + 1];
    reached[n] = true;
    let mut queue = VecDeque::from([n]);
    while let Some(y) = queue.pop_front() {
        for &s in &reverse[y] {
            if !reached[s] {
                reached[s] = true;
                queue.push_back(s);
            }
        }
    }
    (0..n).filter(|&s| !reached[s]).collect()
}

/// True iff the goal is reachable from every state under `pi`, which in a
/// finite chain is the same as reaching it with probability one.
pub fn policy_is_proper(m: &SspMdp, pi: &Policy) -> bool {
    unreachable_states(m, pi).is_empty()
}

/// True iff at least one proper policy exists.
pub fn has_proper_policy(m: &SspMdp) -> bool {
    attractor_policy(m).is_some()
}

/// A proper policy built by backward search from the goal, if one exists.
pub fn attractor_policy(m: &SspMdp) -> Option<Policy> {
    let n = m.num_states();
    let mut joined = vec![false; n + 1];
    joined[n] = true;
    let mut actions = vec![0; n];
    let mut remaining = n;
    loop {
        let mut progressed = false;
        for s in 0..n {
            if joined[s] {
                continue;
            }
            let hit = (0..m.num_actions())
                .find(|&a| m.row(s, a).iter().zip(&joined).any(|(&p, &j)| p > 0.0 && j));
            if let Some(a) = hit {
                joined[s] = true;
                actions[s] = a;
                remaining -= 1;
                progressed = true;
            }
        }
        if remaining == 0 {
            return Some(Policy(actions));
        }
        if !progressed {
            return None;
        }
    }
}

/// Value of a proper policy, solving `(I - Q_pi) V = c_pi`.
pub fn policy_value(m: &SspMdp, pi: &Policy) -> Result<ValueVector> {
    pi.validate(m.num_states(), m.num_actions())?;
    if let Some(&state) = unreachable_states(m, pi).first() {
        return Err(SspError::ImproperPolicy { state });
    }
    let n = m.num_states();
    if n > DENSE_SOLVE_LIMIT {
        return iterative_policy_value(m, pi);
    }
    let system = DMatrix::from_fn(n, n, |s, y| {
        let p = m.row(s, pi.action(s))[y];
        if s == y {
            1.0 - p
        } else {
            -p
        }
    });
    let rhs = DVector::from_fn(n, |s, _| m.cost_of(s, pi.action(s)));
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SspError::InvalidModel("singular policy evaluation system".into()))?;
    Ok(ValueVector(solution.iter().copied().collect()))
}

fn iterative_policy_value(m: &SspMdp, pi: &Policy) -> Result<ValueVector> {
    let mut v = vec![0.0; m.num_states()];
    let mut residual = f64::INFINITY;
    for _ in 0..DEFAULT_VI_MAX_ITER {
        let next: Vec<f64> = (0..m.num_states()).map(|s| m.q_value(s, pi.action(s), &v)).collect();
        residual = sup_distance(&next, &v);
        v = next;
        if residual <= ITERATIVE_EVAL_TOL {
            return Ok(ValueVector(v));
        }
    }
    Err(SspError::NonConvergence {
        iterations: DEFAULT_VI_MAX_ITER,
        residual,
    })
}

/// `E[tau_pi(s)]`: the policy value under unit costs.
pub fn expected_hitting_time(m: &SspMdp, pi: &Policy) -> Result<ValueVector> {
    policy_value(&m.unit_cost(), pi)
}

/// SSP diameter `D = max_s D_s` with `D_s = min_pi E[tau_pi(s)]`.
pub fn ssp_diameter(m: &SspMdp) -> Result<(f64, ValueVector)> {
    if !has_proper_policy(m) {
        return Err(SspError::NonConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    let (per_state, _) = value_iteration(&m.unit_cost(), DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER)?;
    Ok((per_state.max_norm(), per_state))
}

pub fn model_scalars(m: &SspMdp) -> Result<ModelScalars> {
    let c_min = m.cost().min();
    let gamma_support = (0..m.num_states())
        .flat_map(|s| (0..m.num_actions()).map(move |a| (s, a)))
        .map(|(s, a)| m.support_size(s, a))
        .max()
        .unwrap_or(0);
    let (diameter, per_state_diameter) = ssp_diameter(m)?;
    let b_star = if c_min > 0.0 {
        Some(value_iteration(m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER)?.0.max_norm())
    } else {
        None
    };
    Ok(ModelScalars {
        c_min,
        gamma_support,
        b_star,
        diameter,
        per_state_diameter,
    })
}

/// Raises every cost to at least `nu`: `c'(s,a) = max(c(s,a), nu)`.
pub fn perturb_costs(m: &SspMdp, nu: f64) -> Result<SspMdp> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(SspError::InvalidArgs(format!("perturbation {nu} outside [0, 1]")));
    }
    Ok(SspMdp {
        cost: m.cost.map(|c| c.max(nu)),
        trans: m.trans.clone(),
    })
}

/// Embeds a discounted MDP as an SSP: every transition is scaled by `gamma`
/// and the remaining `1 - gamma` goes to the goal.
pub fn dmdp_to_ssp(p: &[Vec<Vec<f64>>], cost: &[Vec<f64>], gamma: f64) -> Result<SspMdp> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SspError::InvalidArgs(format!("discount {gamma} outside (0, 1)")));
    }
    let trans: Vec<Vec<Vec<f64>>> = p
        .iter()
        .map(|per_action| {
            per_action
                .iter()
                .map(|row| {
                    let mut out: Vec<f64> = row.iter().map(|&q| gamma * q).collect();
                    out.push(1.0 - gamma);
                    out
                })
                .collect()
        })
        .collect();
    SspMdp::from_nested(cost, &trans)
}
