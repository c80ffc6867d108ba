use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use ssp_pac::evi::{optimism_certificate, DEFAULT_EVI_MAX_ITER};
use ssp_pac::experiment::{
    bench_scaling, fit_loglog_slope, run_experiment, write_scaling_csv, Algorithm, EnvSpec, ExperimentConfig,
    ScalingGrid,
};
use ssp_pac::mdp::{self, DEFAULT_VI_MAX_ITER, DEFAULT_VI_TOL};
use ssp_pac::sampler::GenerativeModel;
use ssp_pac::{envs, evi, oracle, pac};
use ssp_pac::{ConfidenceSet, EmpiricalModel, PacConfig, Policy, Result, SspError, SspMdp};

use crate::{AlgorithmArg, BenchArgs, Command, Family, GenArgs, PacArgs, VerifyArgs};

pub enum Status {
    Pass,
    CheckFailed,
}

pub fn run(command: Command) -> Result<Status> {
    match command {
        Command::Gen(args) => gen(args),
        Command::SolveExact { mdp, out } => solve_exact(&mdp, out.as_deref()),
        Command::PacPositive(args) => pac_run(args, Algorithm::PacPositive),
        Command::PacRestricted(args) => pac_run(args, Algorithm::PacRestricted),
        Command::EstimateDiameter(args) => pac_run(args, Algorithm::EstimateDiameter),
        Command::Verify(args) => verify(args),
        Command::Bench(args) => bench(args),
    }
}

/// Names the offending file in read failures.
fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SspError::InvalidArgs(format!("cannot read {}: {e}", path.display())))
}

fn load_mdp(path: &Path) -> Result<SspMdp> {
    SspMdp::from_json_str(&read(path)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<Status> {
    let m = match args.family {
        Family::Random {
            states,
            actions,
            support,
            c_min,
            seed,
        } => envs::gen_random_ssp(states, actions, support, c_min, seed)?,
        Family::Chain { n, slip, cost } => envs::gen_chain(n, slip, cost)?,
        Family::Gridworld { width, height, slip } => envs::gen_gridworld(width, height, slip)?,
        Family::FixtureA => envs::fixture_a(),
        Family::FixtureB => envs::fixture_b(),
    };
    emit(&m.to_json_string()?, args.out.as_deref())?;
    Ok(Status::Pass)
}

fn solve_exact(path: &Path, out: Option<&Path>) -> Result<Status> {
    let m = load_mdp(path)?;
    let (value, policy) = mdp::value_iteration(&m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER)?;
    let scalars = mdp::model_scalars(&m)?;
    let report = json!({ "value": value, "policy": policy, "scalars": scalars });
    emit(&serde_json::to_string_pretty(&report)?, out)?;
    Ok(Status::Pass)
}

fn pac_config(eps: f64, delta: f64, alpha: f64, theta: Option<f64>) -> PacConfig {
    let cfg = PacConfig::new(eps, delta).with_alpha(alpha);
    match theta {
        Some(t) => cfg.with_theta(t),
        None => cfg,
    }
}

fn pac_run(args: PacArgs, algorithm: Algorithm) -> Result<Status> {
    let m = load_mdp(&args.mdp)?;
    let cfg = pac_config(args.eps, args.delta, args.alpha, args.theta);
    let mut g = GenerativeModel::new(m.clone(), args.seed);
    let log = match algorithm {
        Algorithm::PacPositive => pac::solve_positive(&mut g, m.cost(), &cfg)?.1,
        Algorithm::PacRestricted => {
            if cfg.theta.is_none() {
                return Err(SspError::InvalidArgs("pac-restricted needs --theta".into()));
            }
            pac::solve_restricted(&mut g, m.cost(), &cfg)?.1
        }
        Algorithm::EstimateDiameter => pac::estimate_diameter(&mut g, &cfg)?.1,
        Algorithm::Exact => unreachable!("exact runs go through solve-exact"),
    };
    let text = log.to_json_string()?;
    match &args.out {
        Some(path) => {
            fs::write(path, text)?;
            let mut line = format!("calls {}", log.total_calls);
            if let Some(d) = log.final_delta {
                line.push_str(&format!(", terminal Delta {d}"));
            }
            if let Some(d) = log.d_hat {
                line.push_str(&format!(", D^ {d}"));
            }
            if let Some(p) = &log.policy {
                line.push_str(&format!(", policy {:?}", p.actions()));
            }
            println!("{line}");
        }
        None => println!("{text}"),
    }
    Ok(Status::Pass)
}

fn load_policy(path: &Path) -> Result<Policy> {
    let v: Value = serde_json::from_str(&read(path)?)?;
    let inner = match v {
        Value::Object(mut map) => map
            .remove("policy")
            .ok_or_else(|| SspError::InvalidArgs(format!("{} has no policy field", path.display())))?,
        other => other,
    };
    if inner.is_null() {
        return Err(SspError::InvalidArgs(format!("{} holds no policy", path.display())));
    }
    Ok(serde_json::from_value(inner)?)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn verify(args: VerifyArgs) -> Result<Status> {
    if args.policy.is_none() && args.counts.is_none() {
        return Err(SspError::InvalidArgs("verify needs --policy and/or --counts".into()));
    }
    let m = load_mdp(&args.mdp)?;
    let mut all = true;
    if let Some(path) = &args.policy {
        let pi = load_policy(path)?;
        pi.validate(m.num_states(), m.num_actions())?;
        let (target, label) = match args.theta {
            Some(theta) => (
                oracle::enumerate_restricted_optimum(&m, theta)?.v_theta_star,
                format!("restricted optimum, theta {theta}"),
            ),
            None => (mdp::value_iteration(&m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER)?.0, "optimum".to_string()),
        };
        match mdp::policy_value(&m, &pi) {
            Ok(v) => {
                let err = v.sup_distance(&target);
                let ok = err <= args.eps;
                all &= ok;
                println!("[{}] eps-optimal vs {label}: sup error {err:.6e} (eps {})", verdict(ok), args.eps);
            }
            Err(SspError::ImproperPolicy { state }) => {
                all = false;
                println!("[FAIL] eps-optimal vs {label}: policy is improper from state {state}");
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(path) = &args.counts {
        let e: EmpiricalModel = serde_json::from_str(&read(path)?)?;
        let set = ConfidenceSet::new(&e, args.delta)?;
        let out = evi::evi(&set, m.cost(), args.mu, DEFAULT_EVI_MAX_ITER)?;
        let cert = optimism_certificate(&out, m.cost())?;
        all &= cert.all_hold();
        println!(
            "[{}] EVI lower certificate v~ <= V~(pi~) ({} iterations, ||v~|| {:.6})",
            verdict(cert.lower_holds),
            out.iterations,
            out.v_tilde.max_norm()
        );
        match cert.upper_holds {
            Some(ok) => println!("[{}] EVI upper certificate V~(pi~) <= (1 + 2 mu / c_min) v~", verdict(ok)),
            None => println!("[SKIP] EVI upper certificate: mu {} exceeds c_min / 2", args.mu),
        }
    }
    Ok(if all { Status::Pass } else { Status::CheckFailed })
}

fn bench(args: BenchArgs) -> Result<Status> {
    if let Some(path) = &args.scaling {
        let grid: ScalingGrid = serde_json::from_str(&read(path)?)?;
        let rows = bench_scaling(&grid)?;
        let out = args.out.unwrap_or_else(|| PathBuf::from("scaling.csv"));
        write_scaling_csv(&out, &rows)?;
        let cells = grid.c_mins.len().max(1);
        for chunk in rows.chunks(grid.epsilons.len().max(1)).take(cells) {
            let xs: Vec<f64> = chunk.iter().map(|r| r.epsilon).collect();
            let ys: Vec<f64> = chunk.iter().map(|r| r.mean_calls).collect();
            if let Ok(slope) = fit_loglog_slope(&xs, &ys) {
                println!("c_min {}: log-log slope of calls in epsilon {slope:.3}", chunk[0].c_min);
            }
        }
        println!("wrote {} rows to {}", rows.len(), out.display());
        return Ok(Status::Pass);
    }
    let mut cfg = match (&args.config, &args.mdp) {
        (Some(path), _) => serde_json::from_str::<ExperimentConfig>(&read(path)?)?,
        (None, Some(mdp)) => ExperimentConfig {
            env: EnvSpec::File { path: mdp.clone() },
            algorithm: match args.algorithm {
                AlgorithmArg::Exact => Algorithm::Exact,
                AlgorithmArg::PacPositive => Algorithm::PacPositive,
                AlgorithmArg::PacRestricted => Algorithm::PacRestricted,
                AlgorithmArg::EstimateDiameter => Algorithm::EstimateDiameter,
            },
            pac: pac_config(args.eps, args.delta, args.alpha, args.theta),
            replications: args.reps,
            seed: args.seed,
            output: PathBuf::from("bench-out"),
        },
        (None, None) => unreachable!("clap requires one source"),
    };
    if let Some(out) = args.out {
        cfg.output = out;
    }
    let summary = run_experiment(&cfg)?;
    let mean_calls = if summary.runs.is_empty() {
        0.0
    } else {
        summary.runs.iter().map(|r| r.calls as f64).sum::<f64>() / summary.runs.len() as f64
    };
    match summary.success_rate {
        Some(rate) => println!(
            "{} replications, success rate {rate:.3}, mean calls {mean_calls:.0}; results in {}",
            summary.runs.len(),
            cfg.output.display()
        ),
        None => println!("0 replications; results in {}", cfg.output.display()),
    }
    Ok(Status::Pass)
}
