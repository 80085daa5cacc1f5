//! Exact and Monte Carlo oracles for structural inequalities about
//! stationary policies, visit counts, clipping and discounting.
//!
//! Each `verify_*` function checks one instance; [`run_suite`] draws
//! seeded random instances and checks them in parallel.

mod checks;
pub mod instances;
mod report;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

pub use checks::{
    closeness, max_stationary_visits, perturb, verify_approx_power, verify_concentration,
    verify_cut_bounds, verify_cut_reach, verify_discount_bounds, verify_doubling, verify_mpdl,
    verify_policy_difference, verify_reach_horizon, verify_stationary_vs_all, DISCOUNTED_TOLERANCE,
    ENUMERATION_CAP, EXACT_TOLERANCE, MIN_TRIALS,
};
pub use report::{Check, LemmaReport, Method, Relation};

use crate::error::{Error, Result};
use crate::mdp::{substream, Lane, SimRng};
use crate::planning::AsModel;
use instances::{
    pinned_policy, random_clipped, random_initial, random_markov_policy, random_model,
    random_policy, random_reward, replay_mdp,
};

/// Monte Carlo trials per concentration instance in suites.
pub const SUITE_TRIALS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LemmaId {
    ApproxPower,
    StationaryVsAll,
    Concentration,
    Mpdl,
    ReachHorizon,
    DiscountBounds,
    CutBounds,
    CutReach,
    PolicyDifference,
    Doubling,
}

impl LemmaId {
    pub const ALL: [LemmaId; 10] = [
        LemmaId::ApproxPower,
        LemmaId::StationaryVsAll,
        LemmaId::Concentration,
        LemmaId::Mpdl,
        LemmaId::ReachHorizon,
        LemmaId::DiscountBounds,
        LemmaId::CutBounds,
        LemmaId::CutReach,
        LemmaId::PolicyDifference,
        LemmaId::Doubling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::ApproxPower => "approx-power",
            LemmaId::StationaryVsAll => "stationary-vs-all",
            LemmaId::Concentration => "concentration",
            LemmaId::Mpdl => "mpdl",
            LemmaId::ReachHorizon => "reach-horizon",
            LemmaId::DiscountBounds => "discount-bounds",
            LemmaId::CutBounds => "cut-bounds",
            LemmaId::CutReach => "cut-reach",
            LemmaId::PolicyDifference => "policy-difference",
            LemmaId::Doubling => "doubling",
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LemmaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LemmaId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = LemmaId::ALL.iter().map(|id| id.as_str()).collect();
                Error::Config(format!("unknown lemma `{s}`; expected one of {}", known.join(", ")))
            })
    }
}

/// Checks `instances` seeded random instances of one lemma. Instance `i`
/// draws from its own stream of `seed`, so results do not depend on
/// thread scheduling. Failing reports carry a replayable instance.
pub fn run_suite(id: LemmaId, instances: usize, seed: u64) -> Result<Vec<LemmaReport>> {
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64, Lane::Aux);
            let mut report = run_instance(id, seed, i as u64, &mut rng)?;
            report.instance = format!("#{i} seed={seed} {}", report.instance);
            Ok(report)
        })
        .collect()
}

fn pick_pair(states: usize, actions: usize, rng: &mut SimRng) -> (usize, usize) {
    (rng.random_range(0..states), rng.random_range(0..actions))
}

fn run_instance(id: LemmaId, seed: u64, index: u64, rng: &mut SimRng) -> Result<LemmaReport> {
    let actions = rng.random_range(1..=2);
    match id {
        LemmaId::ApproxPower | LemmaId::StationaryVsAll => {
            let states = rng.random_range(1..=4);
            let p = random_model(states, actions, rng);
            let (s, a) = pick_pair(states, actions, rng);
            let (k, d) = if id == LemmaId::ApproxPower {
                (rng.random_range(1..=3), rng.random_range(1..=6))
            } else {
                (1, rng.random_range(1..=20))
            };
            let mut report = if id == LemmaId::ApproxPower {
                verify_approx_power(&p, s, a, k, d)?
            } else {
                verify_stationary_vs_all(&p, s, a, d)?
            };
            if !report.pass {
                report.replay = Some(json!({
                    "mdp": replay_mdp(&p, None, k * d, &unit(states, s)),
                    "s": s, "a": a, "k": k, "d": d,
                }));
            }
            Ok(report)
        }
        LemmaId::Concentration => {
            let states = rng.random_range(2..=4);
            let p = random_model(states, actions, rng);
            let (s, a) = pick_pair(states, actions, rng);
            let policy = pinned_policy(states, actions, s, a, rng);
            let d = rng.random_range(10..=50);
            let mut mc = substream(seed, index, Lane::Agent);
            let mut report = verify_concentration(&p, &policy, s, a, d, SUITE_TRIALS, &mut mc)?;
            if !report.pass {
                report.replay = Some(json!({
                    "mdp": replay_mdp(&p, None, d, &unit(states, s)),
                    "policy": policy, "s": s, "a": a, "d": d,
                }));
            }
            Ok(report)
        }
        LemmaId::Mpdl => {
            let states = rng.random_range(1..=5);
            let p = random_model(states, actions, rng);
            let eps = rng.random_range(0.01..0.2);
            let (q, realized) = perturb(&p, eps, rng);
            let policy = random_policy(states, actions, rng);
            let reward = random_reward(states, actions, rng);
            let d = rng.random_range(1..=20);
            let init = random_initial(states, states, rng);
            let mut report = verify_mpdl(&p, &q, realized, &policy, &reward, d, &init)?;
            if !report.pass {
                report.replay = Some(json!({
                    "mdp": replay_mdp(&p, Some(&reward), d, &init),
                    "perturbed": replay_mdp(&q, Some(&reward), d, &init),
                    "policy": policy, "eps": realized,
                }));
            }
            Ok(report)
        }
        LemmaId::ReachHorizon => {
            let states = rng.random_range(1..=4);
            let p = random_model(states, actions, rng);
            let mut pairs: Vec<(usize, usize)> = (0..states)
                .flat_map(|s| (0..actions).map(move |a| (s, a)))
                .filter(|_| rng.random_bool(0.25))
                .collect();
            if pairs.is_empty() {
                pairs.push(pick_pair(states, actions, rng));
            }
            let d = rng.random_range(1..=5);
            let init = random_initial(states, states, rng);
            let mut report = verify_reach_horizon(&p, &pairs, d, &init)?;
            if !report.pass {
                report.replay = Some(json!({
                    "mdp": replay_mdp(&p, None, (states + 2) * d, &init),
                    "pairs": pairs, "d": d,
                }));
            }
            Ok(report)
        }
        LemmaId::DiscountBounds => {
            let states = 5;
            let p = random_model(states, actions, rng);
            let (s, a) = pick_pair(states, actions, rng);
            let policy = pinned_policy(states, actions, s, a, rng);
            let reward = random_reward(states, actions, rng);
            let d2: usize = rng.random_range(1..=3);
            let needed = 10.0 * states as f64 * (states as f64).ln() * d2 as f64;
            let d1 = needed.ceil() as usize + rng.random_range(0..=3);
            let mut report = verify_discount_bounds(&p, &policy, s, a, d1, d2, &reward)?;
            if !report.pass {
                report.replay = Some(json!({
                    "mdp": replay_mdp(&p, Some(&reward), d1, &unit(states, s)),
                    "policy": policy, "s": s, "a": a, "d1": d1, "d2": d2,
                }));
            }
            Ok(report)
        }
        LemmaId::CutBounds | LemmaId::CutReach => {
            let states = rng.random_range(1..=4);
            let model = random_clipped(states, actions, rng);
            let n = states + 2;
            let (s, a) = pick_pair(states, actions, rng);
            let d = rng.random_range(1..=20);
            let (mut report, replay) = if id == LemmaId::CutBounds {
                let policy = pinned_policy(n, actions, s, a, rng);
                let report = verify_cut_bounds(&model, &policy, s, a, d)?;
                (report, json!({ "policy": policy, "s": s, "a": a, "d": d }))
            } else {
                let policy = random_markov_policy(n, actions, d, rng);
                let init = random_initial(n, states, rng);
                let report = verify_cut_reach(&model, &policy, s, d, &init)?;
                (report, json!({ "policy": policy, "init": init, "s": s, "d": d }))
            };
            if !report.pass {
                let mdp = replay_mdp(model.model(), None, d, &unit(n, s));
                report.replay = Some(json!({ "mdp": mdp, "instance": replay }));
            }
            Ok(report)
        }
        LemmaId::PolicyDifference => {
            let states = rng.random_range(1..=5);
            let p = random_model(states, actions, rng);
            let q = if rng.random_bool(0.5) {
                perturb(&p, 0.3, rng).0
            } else {
                random_model(states, actions, rng)
            };
            let d = rng.random_range(1..=20);
            let policy = random_markov_policy(states, actions, d, rng);
            let reward = random_reward(states, actions, rng);
            let init = random_initial(states, states, rng);
            let mut report = verify_policy_difference(&p, &q, &policy, &reward, d, &init)?;
            if !report.pass {
                report.replay = Some(json!({
                    "mdp": replay_mdp(&p, Some(&reward), d, &init),
                    "other": replay_mdp(&q, Some(&reward), d, &init),
                    "policy": policy,
                }));
            }
            Ok(report)
        }
        LemmaId::Doubling => {
            let states = 5;
            let p = random_model(states, actions, rng);
            let policy = random_policy(states, actions, rng);
            let reward = random_reward(states, actions, rng);
            let d = rng.random_range(5..=10);
            let init = random_initial(states, states, rng);
            let mut report = verify_doubling(&p, &policy, &reward, d, &init)?;
            if !report.pass {
                report.replay = Some(json!({
                    "mdp": replay_mdp(&p, Some(&reward), 2 * d, &init),
                    "policy": policy, "d": d,
                }));
            }
            Ok(report)
        }
    }
}

fn unit(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma_ids_round_trip() {
        for id in LemmaId::ALL {
            assert_eq!(id.to_string().parse::<LemmaId>().unwrap(), id);
        }
        assert!("lemma-9".parse::<LemmaId>().is_err());
    }

    #[test]
    fn suites_are_reproducible() {
        let a = run_suite(LemmaId::CutReach, 8, 5).unwrap();
        let b = run_suite(LemmaId::CutReach, 8, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.pass && r.replay.is_none()));
    }
}
