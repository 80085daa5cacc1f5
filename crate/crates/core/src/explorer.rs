//! Stage 1: collecting initial samples for every reachable state-action
//! pair before switching to optimistic regret minimization.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::confidence::{build_confidence, descending_order, iota, ConfidenceSet};
use crate::error::{Error, Result};
use crate::mdp::{
    random_action, substream, CountTable, EnvSession, Lane, NonstationaryPolicy, Policy, SimRng,
    StationaryPolicy, TransitionModel,
};
use crate::planning::{
    clip, discounted_optimal_stationary, AsModel, ClippedMdp, GeneralReward, Target,
};
use crate::rmis::{OptimisticValueTable, Stage2Episode};

/// Named constant presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Theoretical constants, unscaled.
    #[default]
    Paper,
    /// Constants shrunk by 1e-2 so runs of feasible length explore.
    Desk,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        })
    }
}

/// Multipliers applied to the theoretical sizing constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantScales {
    /// Stage-1 length `K1`.
    pub k1: f64,
    /// Known-triple threshold `N0`.
    pub n0: f64,
    /// Success count that removes a pair from the omitted set.
    pub m_threshold: f64,
    /// The `810` in the exploration trigger.
    pub trigger: f64,
}

impl ConstantScales {
    pub fn uniform(scale: f64) -> Self {
        Self {
            k1: scale,
            n0: scale,
            m_threshold: scale,
            trigger: scale,
        }
    }
}

impl Default for ConstantScales {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoConfig {
    pub profile: Profile,
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub scale: ConstantScales,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Paper, 0.1)
    }
}

impl AlgoConfig {
    pub fn for_profile(profile: Profile, delta: f64) -> Self {
        let scale = match profile {
            Profile::Paper => ConstantScales::uniform(1.0),
            Profile::Desk => ConstantScales::uniform(1e-2),
        };
        Self {
            profile,
            delta,
            c1: 1.0,
            c2: 1.0,
            scale,
        }
    }

    /// Known-triple threshold `N0` alone; defined for any horizon.
    pub fn n0(&self, num_states: usize) -> u64 {
        let s = num_states as f64;
        ((256.0 * self.scale.n0 * s * s * (1.0 / self.delta).ln()).ceil() as u64).max(1)
    }

    /// Resolves every derived constant for an instance of the given size.
    pub fn constants(
        &self,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        episodes: usize,
    ) -> Result<Constants> {
        let iota = iota(self.delta)?;
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Config("empty state or action space".into()));
        }
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("scale.k1", self.scale.k1),
            ("scale.n0", self.scale.n0),
            ("scale.m_threshold", self.scale.m_threshold),
            ("scale.trigger", self.scale.trigger),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a nonnegative number")));
            }
        }
        let (s, a) = (num_states as f64, num_actions as f64);
        let log_inv = (1.0 / self.delta).ln();
        let d = (num_states + 1) * horizon / (num_states + 2);
        if d == 0 || d >= horizon {
            return Err(Error::Config(format!(
                "horizon {horizon} too short to split into two phases"
            )));
        }
        let d_prime = horizon - d;
        let d2 = if num_states == 1 {
            d_prime
        } else {
            ((d_prime as f64 / (20.0 * s * s.ln())).floor() as usize).max(1)
        };
        let d1 = d_prime - d2;
        let k1_raw =
            (self.c1 * self.scale.k1 * (s.powi(9) * a.powi(3) * episodes as f64 * iota).sqrt())
                .ceil();
        let k1 = (k1_raw as usize).min(episodes / 2);
        let n0 = self.n0(num_states);
        let m_threshold = ((400.0 * self.scale.m_threshold * log_inv).ceil() as u64).max(1);
        Ok(Constants {
            delta: self.delta,
            iota,
            k1,
            n0,
            m_threshold,
            d,
            d_prime,
            d1,
            d2,
            gamma: 1.0 - 1.0 / d2 as f64,
            trigger_u: 1.0 / (1200.0 * s),
            trigger_n_coeff: 810.0 * self.scale.trigger * s * a * n0 as f64,
            n1: (self.c2 * s.powi(7) * a.powi(3) * iota).ceil(),
        })
    }
}

/// Constants derived from an [`AlgoConfig`] and the instance size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub delta: f64,
    pub iota: f64,
    pub k1: usize,
    pub n0: u64,
    pub m_threshold: u64,
    /// Steps spent searching for omitted pairs.
    pub d: usize,
    /// Steps left for exploration or collection, `H - d`.
    pub d_prime: usize,
    pub d1: usize,
    pub d2: usize,
    pub gamma: f64,
    pub trigger_u: f64,
    pub trigger_n_coeff: f64,
    /// Carried for reporting; the algorithm does not consume it.
    pub n1: f64,
}

/// Pairs that still lack initial samples, with their success counters.
#[derive(Debug, Clone, PartialEq)]
pub struct OmittedSet {
    num_actions: usize,
    pairs: BTreeSet<(usize, usize)>,
    successes: Vec<u64>,
}

impl OmittedSet {
    pub fn full(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            pairs: (0..num_states)
                .flat_map(|s| (0..num_actions).map(move |a| (s, a)))
                .collect(),
            successes: vec![0; num_states * num_actions],
        }
    }

    pub fn from_pairs(num_states: usize, num_actions: usize, pairs: &[(usize, usize)]) -> Self {
        Self {
            num_actions,
            pairs: pairs.iter().copied().collect(),
            successes: vec![0; num_states * num_actions],
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, s: usize, a: usize) -> bool {
        self.pairs.contains(&(s, a))
    }

    /// Lowest omitted action at `s`.
    pub fn first_action_at(&self, s: usize) -> Option<usize> {
        self.pairs.range((s, 0)..(s, self.num_actions)).next().map(|p| p.1)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn successes(&self, s: usize, a: usize) -> u64 {
        self.successes[s * self.num_actions + a]
    }

    /// Counts one completed collection; returns whether the pair left the set.
    pub fn record_success(&mut self, s: usize, a: usize, threshold: u64) -> bool {
        let m = &mut self.successes[s * self.num_actions + a];
        *m += 1;
        *m >= threshold && self.pairs.remove(&(s, a))
    }

    pub fn target(&self) -> Target {
        Target::Pairs(self.pairs.iter().copied().collect())
    }
}

/// Triples observed at least `N0` times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownSet {
    num_states: usize,
    num_actions: usize,
    known: Vec<bool>,
}

impl KnownSet {
    pub fn from_counts(counts: &CountTable, n0: u64) -> Self {
        Self {
            num_states: counts.num_states(),
            num_actions: counts.num_actions(),
            known: counts.as_slice().iter().map(|&c| c >= n0).collect(),
        }
    }

    #[inline]
    pub fn contains(&self, s: usize, a: usize, next: usize) -> bool {
        self.known[(s * self.num_actions + a) * self.num_states + next]
    }

    /// `K(s,a)`: the known destinations of a pair.
    pub fn destinations(&self, s: usize, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states).filter(move |&next| self.contains(s, a, next))
    }

    pub fn has_unknown(&self, s: usize, a: usize) -> bool {
        (0..self.num_states).any(|next| !self.contains(s, a, next))
    }

    pub fn len(&self) -> usize {
        self.known.iter().filter(|&&k| k).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `K^C` as a triple target.
    pub fn complement(&self) -> Target {
        let mut out = Vec::new();
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for next in 0..self.num_states {
                    if !self.contains(s, a, next) {
                        out.push((s, a, next));
                    }
                }
            }
        }
        Target::Triples(out)
    }

    pub fn is_subset_of(&self, other: &KnownSet) -> bool {
        self.known.len() == other.known.len()
            && self.known.iter().zip(&other.known).all(|(a, b)| !a || *b)
    }
}

/// Empirical kernel restricted to known triples; pairs with no known
/// destination send all mass to `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    clipped: ClippedMdp,
}

impl ReferenceModel {
    pub fn clipped(&self) -> &ClippedMdp {
        &self.clipped
    }

    pub fn base_states(&self) -> usize {
        self.clipped.base_states()
    }
}

impl AsModel for ReferenceModel {
    fn model(&self) -> &TransitionModel {
        self.clipped.model()
    }
}

pub fn build_reference_model(counts: &CountTable, known: &KnownSet) -> ReferenceModel {
    let (s_n, a_n) = (counts.num_states(), counts.num_actions());
    let (z, zp) = (s_n, s_n + 1);
    let mut model = TransitionModel::zeros(s_n + 2, a_n);
    for s in 0..s_n {
        for a in 0..a_n {
            let total: u64 = known.destinations(s, a).map(|n| counts.get(s, a, n)).sum();
            let row = model.row_mut(s, a);
            if total == 0 {
                row[z] = 1.0;
            } else {
                for next in known.destinations(s, a) {
                    row[next] = counts.get(s, a, next) as f64 / total as f64;
                }
            }
        }
    }
    for a in 0..a_n {
        model.row_mut(z, a)[zp] = 1.0;
        model.row_mut(zp, a)[zp] = 1.0;
    }
    let clipped = ClippedMdp::from_augmented(model, s_n)
        .expect("reference rows are normalized by construction");
    ReferenceModel { clipped }
}

/// Optimistic `d`-step probability of taking an omitted pair, maximized
/// jointly over policies and kernels in the confidence set.
pub fn plan_optimistic_reach(
    omitted: &OmittedSet,
    set: &ConfidenceSet,
    d: usize,
    init: &[f64],
) -> Result<(NonstationaryPolicy, f64)> {
    let (s_n, a_n) = (set.num_states(), set.num_actions());
    if init.len() != s_n {
        return Err(Error::DimensionMismatch(format!(
            "initial distribution has {} entries, expected {s_n}",
            init.len()
        )));
    }
    let mut actions = vec![vec![0usize; s_n]; d];
    if omitted.is_empty() {
        return Ok((NonstationaryPolicy::new(actions), 0.0));
    }
    let mut next = vec![0.0; s_n];
    let mut cur = vec![0.0; s_n];
    let mut settled = false;
    for h in (0..d).rev() {
        if settled {
            actions[h] = actions[h + 1].clone();
            continue;
        }
        let order = descending_order(&next);
        for s in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_n {
                let q = if omitted.contains(s, a) {
                    1.0
                } else {
                    set.optimistic_value(s, a, &next, &order).min(1.0)
                };
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            cur[s] = best;
            actions[h][s] = best_a;
        }
        settled = h + 1 < d && cur == next;
        std::mem::swap(&mut cur, &mut next);
    }
    let value = init.iter().zip(&next).map(|(m, v)| m * v).sum();
    Ok((NonstationaryPolicy::new(actions), value))
}

/// Records one environment step into the counts.
fn step_and_record(env: &mut EnvSession<'_>, counts: &mut CountTable, action: usize) -> usize {
    let t = env.step(action);
    counts.record(t.state, t.action, t.next_state);
    t.next_state
}

fn play_random(
    env: &mut EnvSession<'_>,
    counts: &mut CountTable,
    rng: &mut SimRng,
    steps: usize,
) {
    for _ in 0..steps {
        let action = random_action(env.num_actions(), rng);
        step_and_record(env, counts, action);
    }
}

/// Result of one explicit-exploration call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplorationOutcome {
    pub trigger: bool,
    /// Pair whose check fired.
    pub target: Option<(usize, usize)>,
    /// Whether the target state was reached within the reaching budget.
    pub reached: bool,
    pub steps: usize,
}

/// Scans pairs with an unknown destination in lexicographic order and, for
/// the first one that is reachable but under-sampled, spends `d'` steps
/// trying to reach and collect it. Starts at the current environment state,
/// which must be `start.0`.
pub fn explicit_exploration(
    start: (usize, usize),
    reference: &ReferenceModel,
    counts: &mut CountTable,
    known: &KnownSet,
    consts: &Constants,
    env: &mut EnvSession<'_>,
    rng: &mut SimRng,
) -> Result<ExplorationOutcome> {
    assert_eq!(env.state(), start.0, "exploration must start at the chosen state");
    let (s_n, a_n) = (counts.num_states(), counts.num_actions());
    let aug = reference.model().num_states();
    let mut reachers: Vec<Option<(StationaryPolicy, f64)>> = vec![None; s_n];
    for s in 0..s_n {
        for a in 0..a_n {
            if !known.has_unknown(s, a) {
                continue;
            }
            if reachers[s].is_none() {
                let clipped = clip(reference, &Target::States(vec![s]));
                let reward = GeneralReward::z_inflow(&clipped);
                let (pi, values) =
                    discounted_optimal_stationary(&clipped, &reward, consts.gamma, Some(start))?;
                reachers[s] = Some((pi, values[start.0]));
            }
            let (pi1, u) = reachers[s].as_ref().expect("filled above");
            if *u < consts.trigger_u {
                continue;
            }
            let reward = GeneralReward::pair_indicator(aug, a_n, s, a);
            let (pi2, values) = discounted_optimal_stationary(reference, &reward, consts.gamma, None)?;
            let v = values[s];
            if counts.pair_count(s, a) as f64 > consts.trigger_n_coeff * u * v {
                continue;
            }
            let mut steps = 0;
            let mut state = env.state();
            let mut reached = state == s;
            while !reached && steps < consts.d1 {
                let action = pi1.get(state);
                let next = step_and_record(env, counts, action);
                steps += 1;
                if next == s {
                    reached = true;
                } else if !known.contains(state, action, next) {
                    break;
                }
                state = next;
            }
            if reached {
                let budget = consts.d2.min(consts.d_prime - steps);
                for _ in 0..budget {
                    state = step_and_record(env, counts, pi2.get(state));
                }
                steps += budget;
            }
            play_random(env, counts, rng, consts.d_prime - steps);
            return Ok(ExplorationOutcome {
                trigger: true,
                target: Some((s, a)),
                reached,
                steps: consts.d_prime,
            });
        }
    }
    Ok(ExplorationOutcome {
        trigger: false,
        target: None,
        reached: false,
        steps: 0,
    })
}

/// Plays the discounted-optimal collector of `start` (forced to take
/// `start.1` in `start.0`) under the reference model for `d'` steps.
pub fn sample_collection(
    start: (usize, usize),
    reference: &ReferenceModel,
    counts: &mut CountTable,
    consts: &Constants,
    env: &mut EnvSession<'_>,
) -> Result<StationaryPolicy> {
    let aug = reference.model().num_states();
    let reward = GeneralReward::pair_indicator(aug, counts.num_actions(), start.0, start.1);
    let (pi, _) = discounted_optimal_stationary(reference, &reward, consts.gamma, Some(start))?;
    let mut state = env.state();
    for _ in 0..consts.d_prime {
        state = step_and_record(env, counts, pi.get(state));
    }
    Ok(pi)
}

/// What happened after the search phase found an omitted pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrival {
    /// Steps taken before arriving (0 when the episode starts there).
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub trigger: bool,
    pub explored: Option<(usize, usize)>,
    /// Whether the pair left the omitted set this episode.
    pub removed: bool,
}

/// One line of the Stage-1 trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage1Episode {
    /// 1-based.
    pub episode: usize,
    pub initial_state: usize,
    pub omitted: usize,
    pub known: usize,
    pub planned_reach: f64,
    pub arrival: Option<Arrival>,
    pub steps: usize,
    pub episode_return: f64,
    /// Set if the episode ran out of budget mid-phase. Never expected.
    pub truncated: bool,
}

/// Hooks for diagnostics that may read ground truth. The agent itself
/// never does.
pub trait RunObserver {
    /// Called before planning, with the counts the plan will be built from.
    fn episode_started(&mut self, _episode: usize, _counts: &CountTable) {}

    fn reference_built(&mut self, _reference: &ReferenceModel, _known: &KnownSet, _counts: &CountTable) {}

    fn stage1_finished(&mut self, _log: &Stage1Episode) {}

    fn stage2_planned(&mut self, _episode: usize, _initial_state: usize, _plan: &OptimisticValueTable) {}

    fn stage2_finished(&mut self, _log: &Stage2Episode) {}
}

/// Observer that ignores everything.
pub struct NoObserver;

impl RunObserver for NoObserver {}

#[derive(Debug, Clone)]
pub struct Stage1Outcome {
    pub counts: CountTable,
    pub omitted: OmittedSet,
    pub known: KnownSet,
    pub episodes: Vec<Stage1Episode>,
}

/// Runs `consts.k1` Stage-1 episodes. Episode `k` draws from substreams
/// `(seed, k)`, so results do not depend on anything outside the run.
pub fn run_stage1(
    env: &mut EnvSession<'_>,
    consts: &Constants,
    seed: u64,
    observer: &mut dyn RunObserver,
) -> Result<Stage1Outcome> {
    let (s_n, a_n) = (env.num_states(), env.num_actions());
    let horizon = env.horizon();
    if consts.d + consts.d_prime != horizon {
        return Err(Error::Config("constants were derived for another horizon".into()));
    }
    let mut counts = CountTable::new(s_n, a_n);
    let mut omitted = OmittedSet::full(s_n, a_n);
    let mut known = KnownSet::from_counts(&counts, consts.n0);
    let mut episodes = Vec::with_capacity(consts.k1);
    for k in 0..consts.k1 {
        let initial_state = env.reset(Some(substream(seed, k as u64, Lane::Env)));
        let mut rng = substream(seed, k as u64, Lane::Agent);
        observer.episode_started(k + 1, &counts);
        let set = build_confidence(&counts, consts.delta)?;
        let (pi, planned_reach) = plan_optimistic_reach(&omitted, &set, consts.d, env.initial())?;
        let omitted_before = omitted.len();

        let mut state = initial_state;
        let mut found = omitted.first_action_at(state).map(|a| (0, a));
        let mut h = 0;
        while found.is_none() && h < consts.d {
            state = step_and_record(env, &mut counts, pi.action(h, state));
            h += 1;
            found = omitted.first_action_at(state).map(|a| (h, a));
        }

        let mut truncated = false;
        let arrival = match found {
            None => None,
            Some((step, action)) => {
                known = KnownSet::from_counts(&counts, consts.n0);
                let reference = build_reference_model(&counts, &known);
                observer.reference_built(&reference, &known, &counts);
                if env.remaining() < consts.d_prime {
                    truncated = true;
                }
                assert!(!truncated, "phase budget exceeds episode budget");
                let start = (state, action);
                let outcome = explicit_exploration(
                    start, &reference, &mut counts, &known, consts, env, &mut rng,
                )?;
                let mut removed = false;
                if !outcome.trigger {
                    sample_collection(start, &reference, &mut counts, consts, env)?;
                    removed = omitted.record_success(state, action, consts.m_threshold);
                }
                Some(Arrival {
                    step,
                    state,
                    action,
                    trigger: outcome.trigger,
                    explored: outcome.target,
                    removed,
                })
            }
        };
        let remaining = env.remaining();
        play_random(env, &mut counts, &mut rng, remaining);
        let log = Stage1Episode {
            episode: k + 1,
            initial_state,
            omitted: omitted_before,
            known: known.len(),
            planned_reach,
            arrival,
            steps: env.steps_taken(),
            episode_return: env.episode_return(),
            truncated,
        };
        observer.stage1_finished(&log);
        episodes.push(log);
    }
    known = KnownSet::from_counts(&counts, consts.n0);
    Ok(Stage1Outcome {
        counts,
        omitted,
        known,
        episodes,
    })
}

/// JSON-lines rendering of a Stage-1 trace.
pub fn trace_jsonl(episodes: &[Stage1Episode]) -> Result<String> {
    let mut out = String::new();
    for e in episodes {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TabularMdp;
    use crate::planning::max_reach_probability;

    fn two_state() -> TransitionModel {
        TransitionModel::from_nested(&[
            vec![vec![0.3, 0.7], vec![0.9, 0.1]],
            vec![vec![0.6, 0.4], vec![0.2, 0.8]],
        ])
        .unwrap()
    }

    #[test]
    fn unit_scale_profile_reproduces_constants() {
        let cfg = AlgoConfig::for_profile(Profile::Paper, 0.1);
        let c = cfg.constants(5, 2, 700, 1_000_000).unwrap();
        let iota = (20f64).ln();
        assert_eq!(c.iota, iota);
        assert_eq!(c.d, 600);
        assert_eq!(c.d_prime, 100);
        assert_eq!(c.d2, 1);
        assert_eq!(c.d1, 99);
        assert_eq!(c.gamma, 0.0);
        assert_eq!(c.n0, (256.0 * 25.0 * (10f64).ln()).ceil() as u64);
        assert_eq!(c.m_threshold, (400.0 * (10f64).ln()).ceil() as u64);
        assert_eq!(c.k1, 500_000);
        assert_eq!(c.trigger_n_coeff, 8100.0 * c.n0 as f64);
        assert_eq!(c.trigger_u, 1.0 / 6000.0);
    }

    #[test]
    fn single_state_uses_all_remaining_steps_for_collection() {
        let c = AlgoConfig::default().constants(1, 2, 9, 10).unwrap();
        assert_eq!((c.d, c.d_prime, c.d2, c.d1), (6, 3, 3, 0));
    }

    #[test]
    fn too_short_horizon_is_rejected() {
        assert!(AlgoConfig::default().constants(3, 2, 1, 10).is_err());
    }

    #[test]
    fn reference_rows_follow_known_counts() {
        let mut counts = CountTable::new(3, 1);
        counts.set(0, 0, 1, 10);
        counts.set(0, 0, 2, 30);
        counts.set(1, 0, 0, 1000);
        counts.set(1, 0, 2, 3);
        let known = KnownSet::from_counts(&counts, 10);
        let reference = build_reference_model(&counts, &known);
        let m = reference.model();
        assert_eq!(m.row(0, 0), &[0.0, 0.25, 0.75, 0.0, 0.0]);
        assert_eq!(m.row(1, 0), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.row(2, 0), &[0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.row(3, 0), &[0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn omitted_pair_removed_at_threshold() {
        let mut o = OmittedSet::full(2, 2);
        assert_eq!(o.first_action_at(1), Some(0));
        assert!(!o.record_success(1, 0, 2));
        assert!(o.record_success(1, 0, 2));
        assert_eq!(o.first_action_at(1), Some(1));
        assert_eq!(o.len(), 3);
    }

    #[test]
    fn start_inside_omitted_set_reaches_with_certainty() {
        let counts = CountTable::new(2, 2);
        let set = build_confidence(&counts, 0.1).unwrap();
        let o = OmittedSet::from_pairs(2, 2, &[(0, 1)]);
        let (_, value) = plan_optimistic_reach(&o, &set, 1, &[1.0, 0.0]).unwrap();
        assert_eq!(value, 1.0);
    }

    #[test]
    fn vacuous_set_reaches_anything_in_two_steps() {
        let counts = CountTable::new(3, 1);
        let set = build_confidence(&counts, 0.1).unwrap();
        let o = OmittedSet::from_pairs(3, 1, &[(2, 0)]);
        let init = [1.0, 0.0, 0.0];
        assert_eq!(plan_optimistic_reach(&o, &set, 1, &init).unwrap().1, 0.0);
        assert_eq!(plan_optimistic_reach(&o, &set, 2, &init).unwrap().1, 1.0);
    }

    #[test]
    fn exact_set_matches_reach_oracle() {
        let p = two_state();
        let set = ConfidenceSet::exact(&p);
        let o = OmittedSet::from_pairs(2, 2, &[(1, 1)]);
        for d in 1..8 {
            let (_, optimistic) = plan_optimistic_reach(&o, &set, d, &[1.0, 0.0]).unwrap();
            let (oracle, _) =
                max_reach_probability(&p, &o.target(), d, &[1.0, 0.0]).unwrap();
            assert!((optimistic - oracle).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn empty_omitted_set_plans_nothing() {
        let set = ConfidenceSet::exact(&two_state());
        let o = OmittedSet::from_pairs(2, 2, &[]);
        assert_eq!(plan_optimistic_reach(&o, &set, 5, &[1.0, 0.0]).unwrap().1, 0.0);
    }

    fn loop_mdp(horizon: usize) -> TabularMdp {
        // State 0 self-loops under action 0 and moves to 1 under action 1.
        let p = TransitionModel::from_nested(&[
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        ])
        .unwrap();
        TabularMdp::new(p, vec![0.0; 4], horizon, vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn all_known_means_no_trigger_and_no_steps() {
        let mdp = loop_mdp(30);
        let consts = AlgoConfig::default().constants(2, 2, 30, 100).unwrap();
        let mut counts = CountTable::from_counts(2, 2, vec![5, 5, 5, 5, 5, 5, 5, 5]).unwrap();
        let known = KnownSet::from_counts(&counts, 1);
        let reference = build_reference_model(&counts, &known);
        let mut env = EnvSession::new(&mdp, substream(0, 0, Lane::Env));
        env.reset(None);
        let before = counts.clone();
        let out = explicit_exploration(
            (0, 0), &reference, &mut counts, &known, &consts, &mut env,
            &mut substream(0, 0, Lane::Agent),
        )
        .unwrap();
        assert!(!out.trigger);
        assert_eq!(counts, before);
        assert_eq!(env.steps_taken(), 0);
    }

    #[test]
    fn absorbing_collector_samples_pair_every_step() {
        let mdp = loop_mdp(30);
        let consts = AlgoConfig::default().constants(2, 2, 30, 100).unwrap();
        let mut counts = CountTable::from_counts(2, 2, vec![50, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let known = KnownSet::from_counts(&counts, 10);
        let reference = build_reference_model(&counts, &known);
        let mut env = EnvSession::new(&mdp, substream(0, 0, Lane::Env));
        env.reset(None);
        let pi = sample_collection((0, 0), &reference, &mut counts, &consts, &mut env).unwrap();
        assert_eq!(pi.get(0), 0);
        assert_eq!(counts.get(0, 0, 0), 50 + consts.d_prime as u64);
        assert_eq!(counts.total(), 50 + consts.d_prime as u64);
    }

    #[test]
    fn stage1_consumes_exactly_h_steps_per_episode() {
        let mdp = loop_mdp(40);
        let mut cfg = AlgoConfig::for_profile(Profile::Desk, 0.1);
        cfg.c1 = 100.0;
        let consts = cfg.constants(2, 2, 40, 200).unwrap();
        let mut env = EnvSession::new(&mdp, substream(3, 0, Lane::Env));
        let out = run_stage1(&mut env, &consts, 3, &mut NoObserver).unwrap();
        assert_eq!(out.episodes.len(), consts.k1);
        assert_eq!(env.total_steps(), (consts.k1 * 40) as u64);
        assert_eq!(out.counts.total(), env.total_steps());
        assert!(out.episodes.iter().all(|e| e.steps == 40 && !e.truncated));
        let trace = trace_jsonl(&out.episodes).unwrap();
        assert_eq!(trace.lines().count(), consts.k1);
    }

    #[test]
    fn unreachable_pair_stays_omitted() {
        // State 1 is absorbing and state 0 is never re-entered.
        let mdp = loop_mdp(40).with_initial(vec![0.0, 1.0]).unwrap();
        let mut cfg = AlgoConfig::for_profile(Profile::Desk, 0.1);
        cfg.c1 = 100.0;
        let consts = cfg.constants(2, 2, 40, 400).unwrap();
        let mut env = EnvSession::new(&mdp, substream(1, 0, Lane::Env));
        let out = run_stage1(&mut env, &consts, 1, &mut NoObserver).unwrap();
        assert!(out.omitted.contains(0, 0) && out.omitted.contains(0, 1));
        assert!(!out.omitted.contains(1, 0) && !out.omitted.contains(1, 1));
    }
}
