use proptest::prelude::*;
use ssp_pac::mdp::{self, DEFAULT_VI_MAX_ITER, DEFAULT_VI_TOL};
use ssp_pac::oracle::{self, DEFAULT_HORIZON_CAP};
use ssp_pac::sampler::GenerativeModel;
use ssp_pac::{envs, pac, PacConfig, SspMdp};

/// Componentwise minimum of the values of every proper policy.
fn enumerated_optimum(m: &SspMdp) -> Vec<f64> {
    let all = oracle::feasible_policies(m, 1e12).unwrap();
    let mut best = vec![f64::INFINITY; m.num_states()];
    for (_, v) in &all {
        for (b, x) in best.iter_mut().zip(v.iter()) {
            *b = b.min(*x);
        }
    }
    best
}

#[test]
fn gridworld_value_iteration_matches_enumeration() {
    let m = envs::gen_gridworld(3, 3, 0.1).unwrap();
    let (v, pi) = mdp::value_iteration(&m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER).unwrap();
    let best = enumerated_optimum(&m);
    assert!(v.sup_distance(&best) <= 1e-8, "{v:?} vs {best:?}");
    assert!(mdp::policy_value(&m, &pi).unwrap().sup_distance(&best) <= 1e-8);
}

#[test]
fn fixture_values_agree_with_enumeration() {
    let m = envs::fixture_a();
    let (v, _) = mdp::value_iteration(&m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER).unwrap();
    assert!(v.sup_distance(&enumerated_optimum(&m)) <= 1e-8);
}

#[test]
fn monte_carlo_agrees_with_exact_evaluation() {
    for m in [envs::fixture_a(), envs::gen_gridworld(3, 3, 0.2).unwrap()] {
        let (_, pi) = mdp::value_iteration(&m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER).unwrap();
        let exact = mdp::policy_value(&m, &pi).unwrap();
        let mc = oracle::monte_carlo_value(&m, &pi, 20_000, DEFAULT_HORIZON_CAP, 11).unwrap();
        assert_eq!(mc.truncated, 0);
        for s in 0..m.num_states() {
            let gap = (mc.mean[s] - exact[s]).abs();
            assert!(gap <= 5.0 * mc.stderr[s] + 1e-12, "state {s}: {} vs {}", mc.mean[s], exact[s]);
        }
    }
}

#[test]
fn positive_solver_on_gridworld() {
    let m = envs::gen_gridworld(3, 3, 0.1).unwrap();
    let cfg = PacConfig::new(0.3, 0.1).with_alpha(1.0);
    let mut g = GenerativeModel::new(m.clone(), 5);
    let (pi, log) = pac::solve_positive(&mut g, m.cost(), &cfg).unwrap();
    let (v_star, _) = mdp::value_iteration(&m, DEFAULT_VI_TOL, DEFAULT_VI_MAX_ITER).unwrap();
    let v = mdp::policy_value(&m, &pi).unwrap();
    assert!(v.sup_distance(&v_star) <= cfg.epsilon, "{v:?} vs {v_star:?}");
    assert_eq!(log.total_calls, g.total_calls());
    assert!(log.final_delta.unwrap() <= 2.0 * v_star.max_norm());
}

#[test]
fn restricted_solver_on_fixture_b() {
    let m = envs::fixture_b();
    let cfg = PacConfig::new(0.5, 0.1).with_alpha(1.0).with_theta(4.0);
    let mut g = GenerativeModel::new(m.clone(), 2);
    let (pi, log) = pac::solve_restricted(&mut g, m.cost(), &cfg).unwrap();
    let target = oracle::enumerate_restricted_optimum(&m, 4.0).unwrap().v_theta_star;
    let v = mdp::policy_value(&m, &pi).unwrap();
    assert!(v.sup_distance(&target) <= cfg.epsilon);
    let diameter = mdp::ssp_diameter(&m).unwrap().0;
    assert!(log.d_hat.unwrap() >= diameter);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// V*(c) <= V*(max(c, nu)) <= V^{pi*}(c) + nu E^{pi*}[tau].
    #[test]
    fn perturbation_sandwich(
        s in 1usize..5, a in 1usize..4, c in 0.0f64..0.3, nu in 0.0f64..0.5, seed in any::<u64>()
    ) {
        let m = envs::gen_random_ssp(s, a, (s + 1).min(3), c, seed).unwrap();
        let pi_proper = mdp::attractor_policy(&m).unwrap();
        // with zero costs and nu = 0 the greedy optimum may be improper
        prop_assume!(m.cost().min() > 0.0 || nu > 0.0);
        let perturbed = mdp::perturb_costs(&m, nu).unwrap();
        let (vp, pi_p) = mdp::value_iteration(&perturbed, 1e-11, DEFAULT_VI_MAX_ITER).unwrap();
        let base_pi = if m.cost().min() > 0.0 {
            mdp::value_iteration(&m, 1e-11, DEFAULT_VI_MAX_ITER).unwrap().1
        } else {
            pi_proper
        };
        let v = mdp::policy_value(&m, &base_pi).unwrap();
        let t = mdp::expected_hitting_time(&m, &base_pi).unwrap();
        let v_of_pi_p = mdp::policy_value(&m, &pi_p).unwrap();
        for st in 0..s {
            prop_assert!(vp[st] <= v[st] + nu * t[st] + 1e-8);
            prop_assert!(v_of_pi_p[st] <= vp[st] + 1e-8);
        }
    }

    #[test]
    fn generated_models_survive_a_file_round_trip(
        s in 1usize..6, a in 1usize..4, support in 1usize..4, c in 0.0f64..=1.0, seed in any::<u64>()
    ) {
        let m = envs::gen_random_ssp(s, a, support.min(s + 1), c, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        prop_assert_eq!(SspMdp::load(&path).unwrap(), m);
    }
}
