//! Reproducible experiment driver: a JSON config names an environment, an
//! algorithm and a replication count; results go to `summary.json` and
//! `runs.csv` in the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs;
use crate::error::{Result, SspError};
use crate::mdp::{self, CostMatrix, SspMdp, ValueVector, DEFAULT_VI_MAX_ITER, DEFAULT_VI_TOL};
use crate::oracle;
use crate::pac::{self, PacConfig, PacRunLog};
use crate::sampler::GenerativeModel;

pub const SUMMARY_FILE: &str = "summary.json";
pub const RUNS_FILE: &str = "runs.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum EnvSpec {
    FixtureA,
    FixtureB,
    Random {
        num_states: usize,
        num_actions: usize,
        support: usize,
        c_min: f64,
        seed: u64,
    },
    Chain {
        n: usize,
        slip: f64,
        cost: f64,
    },
    Gridworld {
        width: usize,
        height: usize,
        slip: f64,
    },
    File {
        path: PathBuf,
    },
}

impl EnvSpec {
    pub fn build(&self) -> Result<SspMdp> {
        match self {
            EnvSpec::FixtureA => Ok(envs::fixture_a()),
            EnvSpec::FixtureB => Ok(envs::fixture_b()),
            EnvSpec::Random {
                num_states,
                num_actions,
                support,
                c_min,
                seed,
            } => envs::gen_random_ssp(*num_states, *num_actions, *support, *c_min, *seed),
            EnvSpec::Chain { n, slip, cost } => envs::gen_chain(*n, *slip, *cost),
            EnvSpec::Gridworld { width, height, slip } => envs::gen_gridworld(*width, *height, *slip),
            EnvSpec::File { path } => SspMdp::load(path),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Exact,
    PacPositive,
    PacRestricted,
    EstimateDiameter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    pub pac: PacConfig,
    pub replications: u32,
    /// Replication `i` uses seed `seed + i`.
    pub seed: u64,
    /// Output directory.
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub calls: u64,
    /// Sup-norm distance to the target; empty when the policy is improper.
    /// For the diameter estimator this is `|D^ - D|`.
    pub sup_error: Option<f64>,
    pub success: bool,
    pub delta_terminal: Option<f64>,
    pub d_hat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    /// `None` when there are no replications.
    pub success_rate: Option<f64>,
    pub runs: Vec<RunRecord>,
    pub logs: Vec<PacRunLog>,
}

/// What a replication is judged against.
enum Target {
    Value(ValueVector),
    Diameter(f64),
}

fn target_for(m: &SspMdp, cfg: &ExperimentConfig) -> Result<Target> {
    match cfg.algorithm {
        Algorithm::Exact | Algorithm::PacPositive => {
            Ok(Target::Value(mdp::value_iteration(m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER)?.0))
        }
        Algorithm::PacRestricted => {
            let theta = cfg
                .pac
                .theta
                .ok_or_else(|| SspError::InvalidArgs("pac-restricted needs theta".into()))?;
            Ok(Target::Value(oracle::enumerate_restricted_optimum(m, theta)?.v_theta_star))
        }
        Algorithm::EstimateDiameter => Ok(Target::Diameter(mdp::ssp_diameter(m)?.0)),
    }
}

fn judge_policy(m: &SspMdp, pi: &mdp::Policy, target: &ValueVector, eps: f64) -> (Option<f64>, bool) {
    match mdp::policy_value(m, pi) {
        Ok(v) => {
            let err = v.sup_distance(target);
            (Some(err), err <= eps)
        }
        Err(_) => (None, false),
    }
}

fn replicate(m: &SspMdp, cost: &CostMatrix, cfg: &ExperimentConfig, target: &Target, seed: u64) -> Result<(RunRecord, Option<PacRunLog>)> {
    let eps = cfg.pac.epsilon;
    let mut g = GenerativeModel::new(m.clone(), seed);
    let (record, log) = match (cfg.algorithm, target) {
        (Algorithm::Exact, Target::Value(v_star)) => {
            let (_, pi) = mdp::value_iteration(m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER)?;
            let (sup_error, success) = judge_policy(m, &pi, v_star, eps);
            let record = RunRecord {
                seed,
                calls: 0,
                sup_error,
                success,
                delta_terminal: None,
                d_hat: None,
            };
            (record, None)
        }
        (Algorithm::PacPositive | Algorithm::PacRestricted, Target::Value(v_star)) => {
            let (pi, log) = if cfg.algorithm == Algorithm::PacPositive {
                pac::solve_positive(&mut g, cost, &cfg.pac)?
            } else {
                pac::solve_restricted(&mut g, cost, &cfg.pac)?
            };
            let (sup_error, success) = judge_policy(m, &pi, v_star, eps);
            let record = RunRecord {
                seed,
                calls: log.total_calls,
                sup_error,
                success,
                delta_terminal: log.final_delta,
                d_hat: log.d_hat,
            };
            (record, Some(log))
        }
        (Algorithm::EstimateDiameter, Target::Diameter(d)) => {
            let (d_hat, log) = pac::estimate_diameter(&mut g, &cfg.pac)?;
            let upper = (1.0 + 2.0 * eps * (1.0 + eps)) * (1.0 + eps) * d;
            let record = RunRecord {
                seed,
                calls: log.total_calls,
                sup_error: Some((d_hat - d).abs()),
                success: *d <= d_hat && d_hat <= upper,
                delta_terminal: None,
                d_hat: Some(d_hat),
            };
            (record, Some(log))
        }
        _ => unreachable!("target kind follows the algorithm"),
    };
    Ok((record, log))
}

/// Runs every replication in parallel and writes `summary.json` and
/// `runs.csv` under `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.pac.validate()?;
    let m = cfg.env.build()?;
    let target = if cfg.replications == 0 {
        None
    } else {
        Some(target_for(&m, cfg)?)
    };
    let results: Vec<(RunRecord, Option<PacRunLog>)> = match &target {
        None => Vec::new(),
        Some(target) => (0..cfg.replications as u64)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.seed.wrapping_add(i);
                replicate(&m, m.cost(), cfg, target, seed).map_err(|e| SspError::Replication {
                    seed,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?,
    };
    let (runs, logs): (Vec<RunRecord>, Vec<Option<PacRunLog>>) = results.into_iter().unzip();
    let success_rate = if runs.is_empty() {
        None
    } else {
        Some(runs.iter().filter(|r| r.success).count() as f64 / runs.len() as f64)
    };
    let summary = ExperimentSummary {
        config: cfg.clone(),
        success_rate,
        runs,
        logs: logs.into_iter().flatten().collect(),
    };
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    write_runs_csv(cfg.output.join(RUNS_FILE), &summary.runs)?;
    Ok(summary)
}

fn write_runs_csv(path: impl AsRef<Path>, runs: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "calls", "sup_error", "success", "delta_terminal", "d_hat"])?;
    for r in runs {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.seed.to_string(),
            r.calls.to_string(),
            opt(r.sup_error),
            r.success.to_string(),
            opt(r.delta_terminal),
            opt(r.d_hat),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Grid for the sample-complexity scaling study of `solve_positive`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingGrid {
    pub env: EnvSpec,
    pub epsilons: Vec<f64>,
    /// Each entry rescales the costs so their minimum equals it. Empty means
    /// the environment's own costs.
    #[serde(default)]
    pub c_mins: Vec<f64>,
    pub delta: f64,
    pub alpha: f64,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub c_min: f64,
    pub mean_calls: f64,
    pub min_calls: u64,
    pub max_calls: u64,
    pub mean_delta_terminal: f64,
}

fn rescale_min_cost(m: &SspMdp, c_min: f64) -> Result<SspMdp> {
    let current = m.cost().min();
    if !(current > 0.0) || !(c_min > 0.0 && c_min <= 1.0) {
        return Err(SspError::InvalidArgs(format!(
            "cannot rescale minimum cost {current} to {c_min}"
        )));
    }
    let factor = c_min / current;
    m.with_costs(m.cost().map(|c| (c * factor).min(1.0)))
}

/// Generator calls of `solve_positive` for every `(epsilon, c_min)` cell,
/// averaged over `grid.seeds`.
pub fn bench_scaling(grid: &ScalingGrid) -> Result<Vec<ScalingRow>> {
    if grid.seeds.is_empty() {
        return Err(SspError::InvalidArgs("scaling grid needs at least one seed".into()));
    }
    let base = grid.env.build()?;
    let models: Vec<SspMdp> = if grid.c_mins.is_empty() {
        vec![base]
    } else {
        grid.c_mins.iter().map(|&c| rescale_min_cost(&base, c)).collect::<Result<_>>()?
    };
    let mut rows = Vec::new();
    for m in &models {
        for &epsilon in &grid.epsilons {
            let cfg = PacConfig::new(epsilon, grid.delta).with_alpha(grid.alpha);
            let runs: Vec<(u64, f64)> = grid
                .seeds
                .par_iter()
                .map(|&seed| {
                    let mut g = GenerativeModel::new(m.clone(), seed);
                    let (_, log) = pac::solve_positive(&mut g, m.cost(), &cfg)?;
                    Ok((log.total_calls, log.final_delta.unwrap_or(f64::NAN)))
                })
                .collect::<Result<_>>()?;
            let n = runs.len() as f64;
            rows.push(ScalingRow {
                epsilon,
                c_min: m.cost().min(),
                mean_calls: runs.iter().map(|r| r.0 as f64).sum::<f64>() / n,
                min_calls: runs.iter().map(|r| r.0).min().unwrap_or(0),
                max_calls: runs.iter().map(|r| r.0).max().unwrap_or(0),
                mean_delta_terminal: runs.iter().map(|r| r.1).sum::<f64>() / n,
            });
        }
    }
    Ok(rows)
}

pub fn write_scaling_csv(path: impl AsRef<Path>, rows: &[ScalingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(SspError::InvalidArgs("slope fit needs two or more paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(SspError::InvalidArgs("slope fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SspError::InvalidArgs("slope fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}
