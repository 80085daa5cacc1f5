//! Stage 2: optimistic value iteration over the confidence set, values
//! capped at 1, warm-started from whatever counts were collected before.

use serde::Serialize;

use crate::confidence::{build_confidence, descending_order, ConfidenceSet};
use crate::error::{Error, Result};
use crate::explorer::RunObserver;
use crate::mdp::{substream, CountTable, EnvSession, Lane, Policy};

/// Optimistic values `V_h(s)` for `h = 0..=H` and the greedy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticValueTable {
    horizon: usize,
    num_states: usize,
    values: Vec<f64>,
    actions: Vec<usize>,
}

impl OptimisticValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Values with `horizon - step` steps to go; row `horizon` is zero.
    pub fn values(&self, step: usize) -> &[f64] {
        &self.values[step * self.num_states..(step + 1) * self.num_states]
    }

    pub fn actions(&self, step: usize) -> &[usize] {
        &self.actions[step * self.num_states..(step + 1) * self.num_states]
    }

    pub fn initial_value(&self, state: usize) -> f64 {
        self.values[state]
    }
}

impl Policy for OptimisticValueTable {
    #[inline]
    fn action(&self, step: usize, state: usize) -> usize {
        self.actions[step * self.num_states + state]
    }

    fn same_rule(&self, a: usize, b: usize) -> bool {
        self.actions(a) == self.actions(b)
    }
}

/// Backward pass `V_h(s) = min{max_a r(s,a) + max_{p in P(s,a)} p V_{h+1}, 1}`.
pub fn rmis_plan_with_set(
    set: &ConfidenceSet,
    rewards: &[f64],
    horizon: usize,
) -> Result<OptimisticValueTable> {
    let (s_n, a_n) = (set.num_states(), set.num_actions());
    if rewards.len() != s_n * a_n {
        return Err(Error::DimensionMismatch(format!(
            "{} rewards for {s_n}x{a_n} pairs",
            rewards.len()
        )));
    }
    let mut table = OptimisticValueTable {
        horizon,
        num_states: s_n,
        values: vec![0.0; (horizon + 1) * s_n],
        actions: vec![0; horizon * s_n],
    };
    let mut settled = false;
    for h in (0..horizon).rev() {
        if settled {
            table
                .values
                .copy_within((h + 1) * s_n..(h + 2) * s_n, h * s_n);
            table
                .actions
                .copy_within((h + 1) * s_n..(h + 2) * s_n, h * s_n);
            continue;
        }
        let (head, tail) = table.values.split_at_mut((h + 1) * s_n);
        let next = &tail[..s_n];
        let cur = &mut head[h * s_n..];
        let order = descending_order(next);
        for s in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_n {
                let q = rewards[s * a_n + a] + set.optimistic_value(s, a, next, &order);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            cur[s] = best.min(1.0);
            table.actions[h * s_n + s] = best_a;
        }
        // Identical input gives identical output for every earlier step.
        settled = h + 1 < horizon && cur == next;
    }
    Ok(table)
}

pub fn rmis_plan(
    counts: &CountTable,
    rewards: &[f64],
    horizon: usize,
    delta: f64,
) -> Result<OptimisticValueTable> {
    rmis_plan_with_set(&build_confidence(counts, delta)?, rewards, horizon)
}

/// One Stage-2 (or baseline) episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage2Episode {
    /// 1-based index within the whole run.
    pub episode: usize,
    pub initial_state: usize,
    /// `V_1(s_1)` of the optimistic plan.
    pub optimistic_value: f64,
    pub episode_return: f64,
}

/// Runs `episodes` optimistic episodes numbered `first_episode + 1 ..`,
/// replanning from the current counts before each one.
pub fn run_stage2(
    env: &mut EnvSession<'_>,
    counts: &mut CountTable,
    episodes: usize,
    first_episode: usize,
    delta: f64,
    seed: u64,
    observer: &mut dyn RunObserver,
) -> Result<Vec<Stage2Episode>> {
    let horizon = env.horizon();
    let rewards = env.rewards().to_vec();
    let mut logs = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let k = first_episode + i;
        observer.episode_started(k + 1, counts);
        let plan = rmis_plan(counts, &rewards, horizon, delta)?;
        let initial_state = env.reset(Some(substream(seed, k as u64, Lane::Env)));
        observer.stage2_planned(k + 1, initial_state, &plan);
        let mut state = initial_state;
        for h in 0..horizon {
            let t = env.step(plan.action(h, state));
            counts.record(t.state, t.action, t.next_state);
            state = t.next_state;
        }
        let log = Stage2Episode {
            episode: k + 1,
            initial_state,
            optimistic_value: plan.initial_value(initial_state),
            episode_return: env.episode_return(),
        };
        observer.stage2_finished(&log);
        logs.push(log);
    }
    Ok(logs)
}
