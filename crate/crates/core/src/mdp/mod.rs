//! Tabular MDP data types: transition models, policies, trajectories and
//! visit counts, plus validation of the modeling assumptions.

mod file;
mod sim;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use file::{load_mdp_file, parse_mdp_str};
pub use sim::{
    random_action, sample_episode, sample_index, substream, EnvSession, Lane, SimRng, Transition,
};

/// Tolerance used for every "sums to one" check.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Dense transition kernel stored as `[state][action][next_state]`.
///
/// The state space is arbitrary: planning code reuses this type for
/// augmented models that carry extra virtual states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TransitionModel {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::DimensionMismatch(
                "state and action counts must be positive".into(),
            ));
        }
        let expected = num_states * num_actions * num_states;
        if probs.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "transition array has {} entries, expected {expected}",
                probs.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    /// All-zero kernel; callers fill rows through [`row_mut`](Self::row_mut).
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![0.0; num_states * num_actions * num_states],
        }
    }

    pub fn from_nested(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for (s, per_action) in rows.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(Error::DimensionMismatch(format!(
                    "state {s} has {} actions, expected {num_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != num_states {
                    return Err(Error::DimensionMismatch(format!(
                        "row ({s},{a}) has {} entries, expected {num_states}",
                        row.len()
                    )));
                }
                probs.extend_from_slice(row);
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    #[inline]
    pub fn row_mut(&mut self, state: usize, action: usize) -> &mut [f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &mut self.probs[start..start + self.num_states]
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.probs[(state * self.num_actions + action) * self.num_states + next]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|s| {
                (0..self.num_actions)
                    .map(|a| self.row(s, a).to_vec())
                    .collect()
            })
            .collect()
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.probs
            .chunks(self.num_states)
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Raw, unvalidated MDP description; this is the on-disk schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub mu1: Vec<f64>,
    #[serde(rename = "P")]
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
}

impl MdpSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("MDP spec serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroDimension { what: &'static str },
    Shape { what: String },
    RowSum { state: usize, action: usize, sum: f64, deficit: f64 },
    ProbabilityRange { state: usize, action: usize, next: usize, value: f64 },
    RewardRange { state: usize, action: usize, value: f64 },
    InitialSum { sum: f64 },
    InitialRange { state: usize, value: f64 },
}

impl Violation {
    /// JSON path of the offending value, used for file diagnostics.
    pub(crate) fn json_path(&self) -> Vec<PathItem> {
        use PathItem::{Index, Key};
        match *self {
            Violation::ZeroDimension { what } => vec![Key(what.to_string())],
            Violation::Shape { .. } => vec![],
            Violation::RowSum { state, action, .. } => {
                vec![Key("P".into()), Index(state), Index(action)]
            }
            Violation::ProbabilityRange {
                state,
                action,
                next,
                ..
            } => vec![Key("P".into()), Index(state), Index(action), Index(next)],
            Violation::RewardRange { state, action, .. } => {
                vec![Key("r".into()), Index(state), Index(action)]
            }
            Violation::InitialSum { .. } => vec![Key("mu1".into())],
            Violation::InitialRange { state, .. } => vec![Key("mu1".into()), Index(state)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PathItem {
    Key(String),
    Index(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDimension { what } => write!(f, "{what} must be positive"),
            Violation::Shape { what } => write!(f, "shape mismatch: {what}"),
            Violation::RowSum {
                state,
                action,
                sum,
                deficit,
            } => write!(
                f,
                "P[{state}][{action}] sums to {sum} (deficit {deficit})"
            ),
            Violation::ProbabilityRange {
                state,
                action,
                next,
                value,
            } => write!(f, "P[{state}][{action}][{next}] = {value} outside [0, 1]"),
            Violation::RewardRange {
                state,
                action,
                value,
            } => write!(f, "r[{state}][{action}] = {value} outside [0, 1]"),
            Violation::InitialSum { sum } => write!(f, "mu1 sums to {sum}"),
            Violation::InitialRange { state, value } => {
                write!(f, "mu1[{state}] = {value} outside [0, 1]")
            }
        }
    }
}

/// Every invariant violation found in an [`MdpSpec`]; empty iff valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

pub fn validate_mdp(spec: &MdpSpec) -> ValidationReport {
    let mut violations = Vec::new();
    let (s_n, a_n) = (spec.num_states, spec.num_actions);
    if s_n == 0 {
        violations.push(Violation::ZeroDimension { what: "S" });
    }
    if a_n == 0 {
        violations.push(Violation::ZeroDimension { what: "A" });
    }
    if spec.horizon == 0 {
        violations.push(Violation::ZeroDimension { what: "H" });
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }

    if spec.mu1.len() != s_n {
        violations.push(Violation::Shape {
            what: format!("mu1 has {} entries, expected {s_n}", spec.mu1.len()),
        });
    } else {
        for (s, &m) in spec.mu1.iter().enumerate() {
            if !in_unit(m) {
                violations.push(Violation::InitialRange { state: s, value: m });
            }
        }
        let sum: f64 = spec.mu1.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE || !sum.is_finite() {
            violations.push(Violation::InitialSum { sum });
        }
    }

    if spec.transitions.len() != s_n {
        violations.push(Violation::Shape {
            what: format!("P has {} states, expected {s_n}", spec.transitions.len()),
        });
    } else {
        for (s, per_action) in spec.transitions.iter().enumerate() {
            if per_action.len() != a_n {
                violations.push(Violation::Shape {
                    what: format!("P[{s}] has {} actions, expected {a_n}", per_action.len()),
                });
                continue;
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != s_n {
                    violations.push(Violation::Shape {
                        what: format!("P[{s}][{a}] has {} entries, expected {s_n}", row.len()),
                    });
                    continue;
                }
                for (next, &p) in row.iter().enumerate() {
                    if !in_unit(p) {
                        violations.push(Violation::ProbabilityRange {
                            state: s,
                            action: a,
                            next,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > SUM_TOLERANCE || !sum.is_finite() {
                    violations.push(Violation::RowSum {
                        state: s,
                        action: a,
                        sum,
                        deficit: 1.0 - sum,
                    });
                }
            }
        }
    }

    if spec.r.len() != s_n {
        violations.push(Violation::Shape {
            what: format!("r has {} states, expected {s_n}", spec.r.len()),
        });
    } else {
        for (s, row) in spec.r.iter().enumerate() {
            if row.len() != a_n {
                violations.push(Violation::Shape {
                    what: format!("r[{s}] has {} actions, expected {a_n}", row.len()),
                });
                continue;
            }
            for (a, &v) in row.iter().enumerate() {
                if !in_unit(v) {
                    violations.push(Violation::RewardRange {
                        state: s,
                        action: a,
                        value: v,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// A validated finite-horizon tabular MDP with known deterministic rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    transition: TransitionModel,
    reward: Vec<f64>,
    horizon: usize,
    initial: Vec<f64>,
}

impl TabularMdp {
    /// Builds and validates; invalid inputs are refused, never renormalized.
    pub fn new(
        transition: TransitionModel,
        reward: Vec<f64>,
        horizon: usize,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let (s_n, a_n) = (transition.num_states(), transition.num_actions());
        if reward.len() != s_n * a_n {
            return Err(Error::DimensionMismatch(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                s_n * a_n
            )));
        }
        let mdp = Self {
            transition,
            reward,
            horizon,
            initial,
        };
        let report = validate_mdp(&mdp.to_spec());
        if !report.is_valid() {
            return Err(Error::InvalidMdp(report.to_string()));
        }
        Ok(mdp)
    }

    pub fn from_spec(spec: &MdpSpec) -> Result<Self> {
        let report = validate_mdp(spec);
        if !report.is_valid() {
            return Err(Error::InvalidMdp(report.to_string()));
        }
        let transition = TransitionModel::from_nested(&spec.transitions)?;
        let reward = spec.r.iter().flatten().copied().collect();
        Ok(Self {
            transition,
            reward,
            horizon: spec.horizon,
            initial: spec.mu1.clone(),
        })
    }

    pub fn to_spec(&self) -> MdpSpec {
        let a_n = self.num_actions();
        MdpSpec {
            num_states: self.num_states(),
            num_actions: a_n,
            horizon: self.horizon,
            mu1: self.initial.clone(),
            transitions: self.transition.to_nested(),
            r: self.reward.chunks(a_n).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidMdp("H must be positive".into()));
        }
        Ok(Self {
            horizon,
            ..self.clone()
        })
    }

    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        Self::new(self.transition.clone(), self.reward.clone(), self.horizon, initial)
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.transition.num_states()
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.transition.num_actions()
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn transition(&self) -> &TransitionModel {
        &self.transition
    }

    /// Rewards laid out as `[state][action]`.
    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    #[inline]
    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state * self.num_actions() + action]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }
}

/// Largest total reward collectable along any positive-probability
/// trajectory of length `H` started in the support of `mu1`.
///
/// The bounded-total-reward assumption holds iff the result is at most 1.
pub fn validate_bounded_reward(mdp: &TabularMdp) -> f64 {
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let p = mdp.transition();
    let mut next = vec![0.0; s_n];
    let mut cur = vec![0.0; s_n];
    for _ in 0..mdp.horizon() {
        for (s, slot) in cur.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for a in 0..a_n {
                let tail = p
                    .row(s, a)
                    .iter()
                    .zip(&next)
                    .filter(|(&q, _)| q > 0.0)
                    .map(|(_, &m)| m)
                    .fold(f64::NEG_INFINITY, f64::max);
                best = best.max(mdp.reward(s, a) + tail);
            }
            *slot = best;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    mdp.initial()
        .iter()
        .zip(&next)
        .filter(|(&mu, _)| mu > 0.0)
        .map(|(_, &m)| m)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Action rule indexed by 0-based step and state.
///
/// States beyond the policy's table (virtual states of augmented models)
/// map to action 0; every action behaves identically there.
pub trait Policy {
    fn action(&self, step: usize, state: usize) -> usize;

    /// True when steps `a` and `b` use the same rule.
    fn same_rule(&self, _a: usize, _b: usize) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    actions: Vec<usize>,
}

impl StationaryPolicy {
    pub fn new(actions: Vec<usize>) -> Self {
        Self { actions }
    }

    pub fn constant(num_states: usize, action: usize) -> Self {
        Self::new(vec![action; num_states])
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn get(&self, state: usize) -> usize {
        self.actions.get(state).copied().unwrap_or(0)
    }

    pub fn is_valid_for(&self, num_states: usize, num_actions: usize) -> bool {
        self.actions.len() == num_states && self.actions.iter().all(|&a| a < num_actions)
    }

    /// All `A^S` stationary policies in lexicographic order.
    pub fn enumerate(num_states: usize, num_actions: usize) -> impl Iterator<Item = Self> {
        let total = (num_actions as u128).pow(num_states as u32);
        (0..total).map(move |mut code| {
            let mut actions = vec![0; num_states];
            for slot in actions.iter_mut().rev() {
                *slot = (code % num_actions as u128) as usize;
                code /= num_actions as u128;
            }
            Self { actions }
        })
    }
}

impl Policy for StationaryPolicy {
    #[inline]
    fn action(&self, _step: usize, state: usize) -> usize {
        self.get(state)
    }

    fn same_rule(&self, _a: usize, _b: usize) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonstationaryPolicy {
    /// `[step][state]`
    actions: Vec<Vec<usize>>,
}

impl NonstationaryPolicy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        Self { actions }
    }

    pub fn from_stationary(policy: &StationaryPolicy, horizon: usize) -> Self {
        Self::new(vec![policy.actions().to_vec(); horizon])
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.actions
    }

    pub fn is_valid_for(&self, num_states: usize, num_actions: usize) -> bool {
        self.actions
            .iter()
            .all(|row| row.len() == num_states && row.iter().all(|&a| a < num_actions))
    }

    /// All `A^(S*d)` deterministic Markov policies of length `d`.
    pub fn enumerate(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
    ) -> impl Iterator<Item = Self> {
        StationaryPolicy::enumerate(num_states * horizon, num_actions).map(move |flat| {
            Self::new(
                flat.actions()
                    .chunks(num_states)
                    .map(<[usize]>::to_vec)
                    .collect(),
            )
        })
    }
}

impl Policy for NonstationaryPolicy {
    #[inline]
    fn action(&self, step: usize, state: usize) -> usize {
        self.actions
            .get(step)
            .and_then(|row| row.get(state))
            .copied()
            .unwrap_or(0)
    }

    fn same_rule(&self, a: usize, b: usize) -> bool {
        match (self.actions.get(a), self.actions.get(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Each step starts where the previous one ended.
    pub fn is_chained(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| w[0].next_state == w[1].state)
    }
}

/// Visit counts `N(s, a, s')`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    num_states: usize,
    num_actions: usize,
    counts: Vec<u64>,
}

impl CountTable {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            counts: vec![0; num_states * num_actions * num_states],
        }
    }

    pub fn from_counts(num_states: usize, num_actions: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_states * num_actions * num_states {
            return Err(Error::DimensionMismatch(format!(
                "count table has {} entries, expected {}",
                counts.len(),
                num_states * num_actions * num_states
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            counts,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn index(&self, s: usize, a: usize, next: usize) -> usize {
        (s * self.num_actions + a) * self.num_states + next
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize, next: usize) -> u64 {
        self.counts[self.index(s, a, next)]
    }

    pub fn set(&mut self, s: usize, a: usize, next: usize, value: u64) {
        let i = self.index(s, a, next);
        self.counts[i] = value;
    }

    #[inline]
    pub fn record(&mut self, s: usize, a: usize, next: usize) {
        let i = self.index(s, a, next);
        self.counts[i] += 1;
    }

    pub fn row(&self, s: usize, a: usize) -> &[u64] {
        let start = self.index(s, a, 0);
        &self.counts[start..start + self.num_states]
    }

    /// Raw number of recorded visits to `(s, a)`.
    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.row(s, a).iter().sum()
    }

    /// `N(s, a) = max(sum_s' N(s, a, s'), 1)`.
    pub fn pair_count(&self, s: usize, a: usize) -> u64 {
        self.visits(s, a).max(1)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }
}
