//! Generative-model simulator and empirical transition counts.
//!
//! Every `(s, a)` pair draws from its own ChaCha stream keyed by
//! `(master_seed, pair index)`, so the `k`-th sample of a pair depends only on
//! the seed, the pair and `k`. Collection order and thread count do not
//! change the resulting counts.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SspError};
use crate::mdp::{SspMdp, TransitionTensor};

/// Below this many draws collection stays on the calling thread.
const PARALLEL_DRAW_THRESHOLD: u64 = 1 << 16;

/// Per-pair sample counts and the empirical transition frequencies they induce.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCounts", into = "RawCounts")]
pub struct EmpiricalModel {
    num_states: usize,
    num_actions: usize,
    counts: Vec<u64>,
    n: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawCounts {
    counts: Vec<Vec<Vec<u64>>>,
}

impl TryFrom<RawCounts> for EmpiricalModel {
    type Error = SspError;

    fn try_from(raw: RawCounts) -> Result<Self> {
        EmpiricalModel::from_counts(&raw.counts)
    }
}

impl From<EmpiricalModel> for RawCounts {
    fn from(e: EmpiricalModel) -> Self {
        RawCounts {
            counts: (0..e.num_states)
                .map(|s| (0..e.num_actions).map(|a| e.counts(s, a).to_vec()).collect())
                .collect(),
        }
    }
}

impl EmpiricalModel {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            counts: vec![0; num_states * num_actions * (num_states + 1)],
            n: vec![0; num_states * num_actions],
        }
    }

    pub fn from_counts(counts: &[Vec<Vec<u64>>]) -> Result<Self> {
        let num_states = counts.len();
        let num_actions = counts.first().map_or(0, Vec::len);
        if num_states == 0 || num_actions == 0 {
            return Err(SspError::InvalidModel("count tensor must be non-empty".into()));
        }
        let mut out = Self::new(num_states, num_actions);
        for (s, per_action) in counts.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(SspError::ShapeMismatch {
                    expected: format!("{num_actions} actions"),
                    actual: format!("{} at state {s}", per_action.len()),
                });
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != num_states + 1 {
                    return Err(SspError::ShapeMismatch {
                        expected: format!("count rows of length {}", num_states + 1),
                        actual: format!("{}", row.len()),
                    });
                }
                let pair = s * num_actions + a;
                out.counts[pair * (num_states + 1)..(pair + 1) * (num_states + 1)].copy_from_slice(row);
                out.n[pair] = row.iter().sum();
            }
        }
        Ok(out)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn row_len(&self) -> usize {
        self.num_states + 1
    }

    pub fn counts(&self, state: usize, action: usize) -> &[u64] {
        let pair = state * self.num_actions + action;
        &self.counts[pair * self.row_len()..(pair + 1) * self.row_len()]
    }

    #[inline]
    pub fn n(&self, state: usize, action: usize) -> u64 {
        self.n[state * self.num_actions + action]
    }

    /// `max(1, n)`.
    #[inline]
    pub fn n_plus(&self, state: usize, action: usize) -> u64 {
        self.n(state, action).max(1)
    }

    pub fn min_count(&self) -> u64 {
        self.n.iter().copied().min().unwrap_or(0)
    }

    pub fn total_samples(&self) -> u64 {
        self.n.iter().sum()
    }

    /// Empirical frequencies for one pair; all zeros when the pair is unsampled.
    pub fn p_hat_row(&self, state: usize, action: usize) -> Vec<f64> {
        let n = self.n(state, action);
        let row = self.counts(state, action);
        if n == 0 {
            return vec![0.0; row.len()];
        }
        row.iter().map(|&c| c as f64 / n as f64).collect()
    }

    pub fn p_hat(&self) -> TransitionTensor {
        let mut data = Vec::with_capacity(self.counts.len());
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                data.extend(self.p_hat_row(s, a));
            }
        }
        TransitionTensor::from_flat(self.num_states, self.num_actions, data)
    }

    /// Records one observed transition.
    pub fn record(&mut self, state: usize, action: usize, next: usize) {
        let pair = state * self.num_actions + action;
        let w = self.row_len();
        self.counts[pair * w + next] += 1;
        self.n[pair] += 1;
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// Largest empirical support `max_{s,a} |{s' : counts > 0}|`; 0 with no samples.
pub fn empirical_gamma(e: &EmpiricalModel) -> usize {
    e.counts
        .chunks(e.row_len())
        .map(|row| row.iter().filter(|&&c| c > 0).count())
        .max()
        .unwrap_or(0)
}

/// How many samples each pair should hold after a collection round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CountTarget {
    Uniform(u64),
    /// Flat `S x A`, row-major by state.
    PerPair(Vec<u64>),
}

impl CountTarget {
    fn get(&self, pair: usize) -> u64 {
        match self {
            CountTarget::Uniform(n) => *n,
            CountTarget::PerPair(v) => v[pair],
        }
    }
}

/// Seeded sampling oracle over a hidden model. All draws are recorded into
/// the cumulative [`EmpiricalModel`]; samples are never discarded.
#[derive(Clone, Debug)]
pub struct GenerativeModel {
    model: SspMdp,
    master_seed: u64,
    cdf: Vec<f64>,
    streams: Vec<ChaCha8Rng>,
    empirical: EmpiricalModel,
}

impl GenerativeModel {
    pub fn new(model: SspMdp, master_seed: u64) -> Self {
        let (s_count, a_count) = (model.num_states(), model.num_actions());
        let mut cdf = Vec::with_capacity(s_count * a_count * (s_count + 1));
        for row in model.trans().rows() {
            cdf.extend(row_cdf(row));
        }
        let base = ChaCha8Rng::seed_from_u64(master_seed);
        let streams = (0..s_count * a_count)
            .map(|pair| {
                let mut rng = base.clone();
                rng.set_stream(pair as u64);
                rng
            })
            .collect();
        Self {
            empirical: EmpiricalModel::new(s_count, a_count),
            model,
            master_seed,
            cdf,
            streams,
        }
    }

    pub fn model(&self) -> &SspMdp {
        &self.model
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn empirical(&self) -> &EmpiricalModel {
        &self.empirical
    }

    /// Total generator calls so far, equal to the summed per-pair counts.
    pub fn total_calls(&self) -> u64 {
        self.empirical.total_samples()
    }

    /// Draws one successor of `(state, action)`; the goal is index `S`.
    pub fn sample_transition(&mut self, state: usize, action: usize) -> usize {
        let w = self.model.num_states() + 1;
        let pair = state * self.model.num_actions() + action;
        let next = draw(&mut self.streams[pair], &self.cdf[pair * w..(pair + 1) * w]);
        self.empirical.record(state, action, next);
        next
    }

    /// Tops every pair up to its target count and returns the cumulative model.
    pub fn collect_until(&mut self, target: &CountTarget) -> &EmpiricalModel {
        let w = self.model.num_states() + 1;
        let pairs = self.streams.len();
        if let CountTarget::PerPair(v) = target {
            assert_eq!(v.len(), pairs, "per-pair target must have S*A entries");
        }
        let pending: u64 = (0..pairs)
            .map(|p| target.get(p).saturating_sub(self.empirical.n[p]))
            .sum();
        if pending == 0 {
            return &self.empirical;
        }
        let fill = |pair: usize, rng: &mut ChaCha8Rng, counts: &mut [u64], n: &mut u64, cdf: &[f64]| {
            let goal_n = target.get(pair);
            while *n < goal_n {
                counts[draw(rng, cdf)] += 1;
                *n += 1;
            }
        };
        let emp = &mut self.empirical;
        if pending < PARALLEL_DRAW_THRESHOLD {
            for (pair, ((rng, counts), n)) in self
                .streams
                .iter_mut()
                .zip(emp.counts.chunks_mut(w))
                .zip(emp.n.iter_mut())
                .enumerate()
            {
                fill(pair, rng, counts, n, &self.cdf[pair * w..(pair + 1) * w]);
            }
        } else {
            self.streams
                .par_iter_mut()
                .zip(emp.counts.par_chunks_mut(w))
                .zip(emp.n.par_iter_mut())
                .zip(self.cdf.par_chunks(w))
                .enumerate()
                .for_each(|(pair, (((rng, counts), n), cdf))| fill(pair, rng, counts, n, cdf));
        }
        &self.empirical
    }
}

/// Cumulative row with the last positive entry pinned to exactly 1.
pub(crate) fn row_cdf(row: &[f64]) -> Vec<f64> {
    let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1);
    let mut acc = 0.0;
    row.iter()
        .enumerate()
        .map(|(i, &p)| {
            acc += p;
            if i >= last {
                1.0
            } else {
                acc
            }
        })
        .collect()
}

/// Inverse-CDF draw over the stored row order.
#[inline]
pub(crate) fn draw<R: Rng>(rng: &mut R, cdf: &[f64]) -> usize {
    let u: f64 = rng.random();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}
