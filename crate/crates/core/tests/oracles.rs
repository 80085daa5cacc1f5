//! Planning and confidence-set routines against independent brute-force
//! oracles.

use approx::assert_abs_diff_eq;
use rand::Rng;

use hflab::confidence::ConfidenceSet;
use hflab::lemma_lab::instances::{random_markov_policy, random_model, random_policy, random_reward};
use hflab::mdp::{substream, Lane, Policy, TransitionModel};
use hflab::planning::{
    discounted_value, max_reach_probability, optimal_value_finite, policy_value_finite,
    reach_probability, GeneralReward, Target,
};
use hflab::rmis::rmis_plan_with_set;

/// Expected `d`-step reward by summing over every state path.
fn enumerate_value(
    p: &TransitionModel,
    policy: &dyn Policy,
    reward: &GeneralReward,
    d: usize,
    start: usize,
) -> f64 {
    fn walk(
        p: &TransitionModel,
        policy: &dyn Policy,
        reward: &GeneralReward,
        step: usize,
        d: usize,
        s: usize,
        prob: f64,
    ) -> f64 {
        if step == d || prob == 0.0 {
            return 0.0;
        }
        let a = policy.action(step, s);
        let mut total = prob * reward.value(s, a);
        for (next, &q) in p.row(s, a).iter().enumerate() {
            total += walk(p, policy, reward, step + 1, d, next, prob * q);
        }
        total
    }
    walk(p, policy, reward, 0, d, start, 1.0)
}

/// Probability that some pair of `pairs` is taken within `d` steps.
fn enumerate_reach(
    p: &TransitionModel,
    policy: &dyn Policy,
    pairs: &[(usize, usize)],
    d: usize,
    start: usize,
) -> f64 {
    fn walk(p: &TransitionModel, policy: &dyn Policy, pairs: &[(usize, usize)], step: usize, d: usize, s: usize) -> f64 {
        if step == d {
            return 0.0;
        }
        let a = policy.action(step, s);
        if pairs.contains(&(s, a)) {
            return 1.0;
        }
        p.row(s, a)
            .iter()
            .enumerate()
            .map(|(next, &q)| if q == 0.0 { 0.0 } else { q * walk(p, policy, pairs, step + 1, d, next) })
            .sum()
    }
    walk(p, policy, pairs, 0, d, start)
}

/// Solves `(I - gamma P_pi) v = r_pi` by Gaussian elimination.
fn solve_discounted(p: &TransitionModel, actions: &[usize], reward: &GeneralReward, gamma: f64) -> Vec<f64> {
    let n = p.num_states();
    let mut m = vec![vec![0.0; n + 1]; n];
    for s in 0..n {
        let a = actions[s];
        for t in 0..n {
            m[s][t] = if s == t { 1.0 } else { 0.0 } - gamma * p.prob(s, a, t);
        }
        m[s][n] = reward.value(s, a);
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    (0..n).map(|s| m[s][n] / m[s][s]).collect()
}

#[test]
fn finite_evaluation_matches_path_enumeration() {
    for i in 0..40 {
        let mut rng = substream(11, i, Lane::Aux);
        let (n, a_n) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let d = rng.random_range(1..=5);
        let p = random_model(n, a_n, &mut rng);
        let reward = random_reward(n, a_n, &mut rng);
        let policy = random_markov_policy(n, a_n, d, &mut rng);
        for s in 0..n {
            let mut init = vec![0.0; n];
            init[s] = 1.0;
            let dp = policy_value_finite(&p, &policy, &reward, d, &init).unwrap();
            assert_abs_diff_eq!(dp, enumerate_value(&p, &policy, &reward, d, s), epsilon = 1e-12);
        }
    }
}

#[test]
fn reach_probability_matches_path_enumeration() {
    for i in 0..40 {
        let mut rng = substream(12, i, Lane::Aux);
        let (n, a_n) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let d = rng.random_range(1..=5);
        let p = random_model(n, a_n, &mut rng);
        let pairs = vec![(rng.random_range(0..n), rng.random_range(0..a_n))];
        let policy = random_markov_policy(n, a_n, d, &mut rng);
        let s = rng.random_range(0..n);
        let mut init = vec![0.0; n];
        init[s] = 1.0;
        let dp = reach_probability(&p, &Target::Pairs(pairs.clone()), &policy, d, &init).unwrap();
        assert_abs_diff_eq!(dp, enumerate_reach(&p, &policy, &pairs, d, s), epsilon = 1e-12);
    }
}

#[test]
fn optimal_reach_dominates_every_markov_policy() {
    for i in 0..20 {
        let mut rng = substream(13, i, Lane::Aux);
        let (n, a_n, d) = (2, 2, rng.random_range(1..=3));
        let p = random_model(n, a_n, &mut rng);
        let target = Target::Pairs(vec![(1, rng.random_range(0..a_n))]);
        let (best, _) = max_reach_probability(&p, &target, d, &[1.0, 0.0]).unwrap();
        let brute = hflab::mdp::NonstationaryPolicy::enumerate(n, a_n, d)
            .map(|pi| reach_probability(&p, &target, &pi, d, &[1.0, 0.0]).unwrap())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(best, brute, epsilon = 1e-12);
    }
}

#[test]
fn discounted_value_matches_linear_solve() {
    for i in 0..30 {
        let mut rng = substream(14, i, Lane::Aux);
        let (n, a_n) = (rng.random_range(1..=5), rng.random_range(1..=2));
        let p = random_model(n, a_n, &mut rng);
        let reward = random_reward(n, a_n, &mut rng);
        let policy = random_policy(n, a_n, &mut rng);
        let gamma = [0.0, 0.5, 0.9, 0.99][rng.random_range(0..4)];
        let exact = solve_discounted(&p, policy.actions(), &reward, gamma);
        for s in 0..n {
            let mut init = vec![0.0; n];
            init[s] = 1.0;
            let vi = discounted_value(&p, &policy, &reward, gamma, &init).unwrap();
            assert_abs_diff_eq!(vi, exact[s], epsilon = 1e-9);
        }
    }
}

#[test]
fn zero_radius_optimistic_plan_is_the_optimal_plan() {
    for i in 0..20 {
        let mut rng = substream(15, i, Lane::Aux);
        let (n, a_n, h) = (3, 2, rng.random_range(1..=6));
        let p = random_model(n, a_n, &mut rng);
        // Scale rewards so the cap at 1 never binds.
        let values: Vec<f64> = (0..n * a_n).map(|_| rng.random::<f64>() / h as f64).collect();
        let reward = GeneralReward::new(n, a_n, values.clone()).unwrap();
        let plan = rmis_plan_with_set(&ConfidenceSet::exact(&p), &values, h).unwrap();
        let (opt, _) = optimal_value_finite(&p, &reward, h).unwrap();
        for s in 0..n {
            assert_abs_diff_eq!(plan.initial_value(s), opt[s], epsilon = 1e-12);
        }
    }
}
