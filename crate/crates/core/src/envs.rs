//! Environment generators and the two shipped fixtures.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SspError};
use crate::mdp::SspMdp;

/// Parameters `fixture_a` was generated with.
pub const FIXTURE_A_PARAMS: RandomSspParams = RandomSspParams {
    num_states: 3,
    num_actions: 2,
    support: 3,
    c_min: 0.2,
    seed: 7,
};

const FIXTURE_A_JSON: &str = include_str!("../fixtures/fixture_a.json");
const FIXTURE_B_JSON: &str = include_str!("../fixtures/fixture_b.json");

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RandomSspParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub support: usize,
    pub c_min: f64,
    pub seed: u64,
}

/// Random 3-state, 2-action model with costs in `[0.2, 1]`.
pub fn fixture_a() -> SspMdp {
    SspMdp::from_json_str(FIXTURE_A_JSON).expect("shipped fixture_a is valid")
}

/// Three states, two actions, minimum cost 0. Action 0 at state 0 is a
/// zero-cost self-loop, so every policy using it is improper; action 0 at
/// state 1 moves to state 2 at zero cost.
pub fn fixture_b() -> SspMdp {
    SspMdp::from_json_str(FIXTURE_B_JSON).expect("shipped fixture_b is valid")
}

/// Random model where every pair has exactly `support` successors (drawn
/// uniformly from the `S+1` states, goal included) with Dirichlet(1) weights.
/// One action per state is forced to put mass on the goal, so a proper policy
/// always exists. Costs are uniform in `[c_min, 1]`.
pub fn gen_random_ssp(
    num_states: usize,
    num_actions: usize,
    support: usize,
    c_min: f64,
    seed: u64,
) -> Result<SspMdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(SspError::InvalidArgs("need at least one state and one action".into()));
    }
    if support == 0 || support > num_states + 1 {
        return Err(SspError::InvalidArgs(format!(
            "support {support} outside [1, {}]",
            num_states + 1
        )));
    }
    if !(0.0..=1.0).contains(&c_min) {
        return Err(SspError::InvalidArgs(format!("c_min {c_min} outside [0, 1]")));
    }
    let goal = num_states;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goal_action: Vec<usize> = (0..num_states).map(|_| rng.random_range(0..num_actions)).collect();

    let mut trans = vec![vec![vec![0.0; num_states + 1]; num_actions]; num_states];
    for (s, per_action) in trans.iter_mut().enumerate() {
        for (a, row) in per_action.iter_mut().enumerate() {
            let mut succ = index::sample(&mut rng, num_states + 1, support).into_vec();
            if a == goal_action[s] && !succ.contains(&goal) {
                let k = rng.random_range(0..support);
                succ[k] = goal;
            }
            let weights: Vec<f64> = succ.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = weights.iter().sum();
            for (&y, w) in succ.iter().zip(&weights) {
                row[y] = w / total;
            }
        }
    }
    let cost: Vec<Vec<f64>> = (0..num_states)
        .map(|_| {
            (0..num_actions)
                .map(|_| c_min + (1.0 - c_min) * rng.random::<f64>())
                .collect()
        })
        .collect();
    SspMdp::from_nested(&cost, &trans)
}

/// Single-action chain: state `i` advances w.p. `1 - slip` and stays
/// otherwise; the last state advances into the goal.
pub fn gen_chain(n: usize, slip: f64, cost: f64) -> Result<SspMdp> {
    if n == 0 {
        return Err(SspError::InvalidArgs("chain needs at least one state".into()));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(SspError::InvalidArgs(format!("slip {slip} outside [0, 1)")));
    }
    if !(0.0..=1.0).contains(&cost) {
        return Err(SspError::InvalidArgs(format!("cost {cost} outside [0, 1]")));
    }
    let trans: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|s| {
            let mut row = vec![0.0; n + 1];
            row[s] += slip;
            row[s + 1] += 1.0 - slip;
            vec![row]
        })
        .collect();
    SspMdp::from_nested(&vec![vec![cost]; n], &trans)
}

/// `w x h` grid with unit costs and the goal in the bottom-right corner.
/// Actions are up, down, left, right. The intended move happens w.p.
/// `1 - slip`; the remaining `slip` is spread evenly over all four moves.
/// Moving off the grid leaves the agent in place.
pub fn gen_gridworld(width: usize, height: usize, slip: f64) -> Result<SspMdp> {
    if width == 0 || height == 0 || width * height < 2 {
        return Err(SspError::InvalidArgs("grid needs at least two cells".into()));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(SspError::InvalidArgs(format!("slip {slip} outside [0, 1)")));
    }
    // Cell (x, y) has index y * width + x, so the goal corner is index S.
    let num_states = width * height - 1;
    let step = |cell: usize, dir: usize| -> usize {
        let (x, y) = (cell % width, cell / width);
        let (nx, ny) = match dir {
            0 => (x, y.saturating_sub(1)),
            1 => (x, (y + 1).min(height - 1)),
            2 => (x.saturating_sub(1), y),
            _ => ((x + 1).min(width - 1), y),
        };
        ny * width + nx
    };
    let trans: Vec<Vec<Vec<f64>>> = (0..num_states)
        .map(|cell| {
            (0..4)
                .map(|intended| {
                    let mut row = vec![0.0; num_states + 1];
                    row[step(cell, intended)] += 1.0 - slip;
                    for dir in 0..4 {
                        row[step(cell, dir)] += slip / 4.0;
                    }
                    row
                })
                .collect()
        })
        .collect();
    SspMdp::from_nested(&vec![vec![1.0; 4]; num_states], &trans)
}
