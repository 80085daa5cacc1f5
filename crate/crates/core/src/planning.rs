//! Exact dynamic-programming oracles over dense tabular models.
//!
//! Finite-horizon routines use 0-based steps internally: a value table for
//! horizon `d` has rows `0..=d`, row `d` is identically zero and row 0 is the
//! value of the full `d`-step problem.
//!
//! Reaching probabilities are always computed on a clipped model: every
//! target event is redirected to the virtual state `z`, and the reward is the
//! probability mass flowing into `z`. An event at step `h <= d` therefore
//! counts, which equals `W_{d+1}(1_z, clip(p, target), mu)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{
    NonstationaryPolicy, Policy, StationaryPolicy, TabularMdp, TransitionModel, SUM_TOLERANCE,
};

/// Anything that exposes a dense transition kernel.
pub trait AsModel {
    fn model(&self) -> &TransitionModel;
}

impl AsModel for TransitionModel {
    fn model(&self) -> &TransitionModel {
        self
    }
}

impl AsModel for TabularMdp {
    fn model(&self) -> &TransitionModel {
        self.transition()
    }
}

impl AsModel for ClippedMdp {
    fn model(&self) -> &TransitionModel {
        &self.model
    }
}

impl<T: AsModel + ?Sized> AsModel for &T {
    fn model(&self) -> &TransitionModel {
        (**self).model()
    }
}

/// Nonnegative reward over (state, action) pairs of some model.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralReward {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl GeneralReward {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch(format!(
                "reward has {} entries, expected {}",
                values.len(),
                num_states * num_actions
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::InvalidMdp(format!("reward entry {v} is negative")));
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    /// `1_s`: one unit whenever the chain sits in `state`.
    pub fn state_indicator(num_states: usize, num_actions: usize, state: usize) -> Self {
        let mut r = Self::zeros(num_states, num_actions);
        for a in 0..num_actions {
            r.values[state * num_actions + a] = 1.0;
        }
        r
    }

    /// `1_{s,a}`: one unit per visit of the pair.
    pub fn pair_indicator(num_states: usize, num_actions: usize, state: usize, action: usize) -> Self {
        let mut r = Self::zeros(num_states, num_actions);
        r.values[state * num_actions + action] = 1.0;
        r
    }

    /// `1_z` on a clipped model.
    pub fn z_indicator(clipped: &ClippedMdp) -> Self {
        let m = clipped.model();
        Self::state_indicator(m.num_states(), m.num_actions(), clipped.z())
    }

    /// Probability mass entering `z` from each pair.
    pub fn z_inflow(clipped: &ClippedMdp) -> Self {
        let m = clipped.model();
        let mut r = Self::zeros(m.num_states(), m.num_actions());
        for s in 0..clipped.base_states() {
            for a in 0..m.num_actions() {
                r.values[s * m.num_actions() + a] = m.prob(s, a, clipped.z());
            }
        }
        r
    }

    pub fn from_mdp(mdp: &TabularMdp) -> Self {
        Self {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            values: mdp.rewards().to_vec(),
        }
    }

    /// Same reward on a larger state space; new states earn nothing.
    pub fn padded(&self, num_states: usize) -> Self {
        let mut values = self.values.clone();
        values.resize(num_states.max(self.num_states) * self.num_actions, 0.0);
        Self {
            num_states: num_states.max(self.num_states),
            num_actions: self.num_actions,
            values,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, model: &TransitionModel) -> Result<()> {
        if self.num_states != model.num_states() || self.num_actions != model.num_actions() {
            return Err(Error::DimensionMismatch(format!(
                "reward is {}x{}, model is {}x{}",
                self.num_states,
                self.num_actions,
                model.num_states(),
                model.num_actions()
            )));
        }
        Ok(())
    }
}

/// Set of events whose occurrence is redirected to `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    /// Being in any of these states.
    States(Vec<usize>),
    /// Taking the action in the state.
    Pairs(Vec<(usize, usize)>),
    /// Realizing the transition.
    Triples(Vec<(usize, usize, usize)>),
}

impl Target {
    pub fn is_empty(&self) -> bool {
        match self {
            Target::States(v) => v.is_empty(),
            Target::Pairs(v) => v.is_empty(),
            Target::Triples(v) => v.is_empty(),
        }
    }
}

/// A model over `S + 2` states where excluded events lead to `z`, `z`
/// moves to the absorbing `z'`, and everything else follows the base model.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedMdp {
    model: TransitionModel,
    base_states: usize,
}

impl ClippedMdp {
    /// Wraps an already augmented kernel, checking the `z -> z' -> z'`
    /// structure and row sums.
    pub fn from_augmented(model: TransitionModel, base_states: usize) -> Result<Self> {
        if model.num_states() != base_states + 2 {
            return Err(Error::DimensionMismatch(format!(
                "augmented model has {} states, expected {}",
                model.num_states(),
                base_states + 2
            )));
        }
        let clipped = Self { model, base_states };
        for a in 0..clipped.model.num_actions() {
            for virt in [clipped.z(), clipped.z_prime()] {
                if clipped.model.prob(virt, a, clipped.z_prime()) != 1.0 {
                    return Err(Error::InvalidMdp(format!(
                        "virtual state {virt} must move to z' under action {a}"
                    )));
                }
            }
        }
        if clipped.model.max_row_error() > SUM_TOLERANCE {
            return Err(Error::InvalidMdp("augmented rows must sum to 1".into()));
        }
        Ok(clipped)
    }

    pub fn base_states(&self) -> usize {
        self.base_states
    }

    pub fn z(&self) -> usize {
        self.base_states
    }

    pub fn z_prime(&self) -> usize {
        self.base_states + 1
    }

    pub fn into_model(self) -> TransitionModel {
        self.model
    }
}

/// Redirects the excluded events of `model` to a fresh virtual state `z`.
pub fn clip<M: AsModel + ?Sized>(model: &M, excluded: &Target) -> ClippedMdp {
    let base = model.model();
    let (s_n, a_n) = (base.num_states(), base.num_actions());
    let (z, zp) = (s_n, s_n + 1);
    let mut out = TransitionModel::zeros(s_n + 2, a_n);
    for s in 0..s_n {
        for a in 0..a_n {
            out.row_mut(s, a)[..s_n].copy_from_slice(base.row(s, a));
        }
    }
    let redirect_pair = |out: &mut TransitionModel, s: usize, a: usize| {
        let row = out.row_mut(s, a);
        // The whole row moves; summing would leave `z` a few ulps short of 1.
        row[..s_n].fill(0.0);
        row[z] = 1.0;
    };
    match excluded {
        Target::States(states) => {
            for &s in states {
                for a in 0..a_n {
                    redirect_pair(&mut out, s, a);
                }
            }
        }
        Target::Pairs(pairs) => {
            for &(s, a) in pairs {
                redirect_pair(&mut out, s, a);
            }
        }
        Target::Triples(triples) => {
            for &(s, a, next) in triples {
                let row = out.row_mut(s, a);
                let mass = row[next];
                row[next] = 0.0;
                row[z] += mass;
            }
        }
    }
    for a in 0..a_n {
        out.row_mut(z, a)[zp] = 1.0;
        out.row_mut(zp, a)[zp] = 1.0;
    }
    ClippedMdp {
        model: out,
        base_states: s_n,
    }
}

/// Removes the `z` mass from every row with mass outside `z` and
/// renormalizes the remaining entries.
pub fn cut(clipped: &ClippedMdp) -> ClippedMdp {
    let mut out = clipped.model.clone();
    let z = clipped.z();
    let (s_n, a_n) = (out.num_states(), out.num_actions());
    for s in 0..s_n {
        for a in 0..a_n {
            let row = out.row_mut(s, a);
            let rest: f64 = row
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != z)
                .map(|(_, &p)| p)
                .sum();
            if rest > 0.0 {
                row[z] = 0.0;
                row.iter_mut().for_each(|p| *p /= rest);
            } else {
                row[z] = 1.0;
            }
        }
    }
    ClippedMdp {
        model: out,
        base_states: clipped.base_states,
    }
}

/// Per-step values of a finite-horizon problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    num_states: usize,
    values: Vec<f64>,
}

impl ValueTable {
    fn zeros(horizon: usize, num_states: usize) -> Self {
        Self {
            horizon,
            num_states,
            values: vec![0.0; (horizon + 1) * num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Values with `horizon - step` steps to go.
    pub fn row(&self, step: usize) -> &[f64] {
        &self.values[step * self.num_states..(step + 1) * self.num_states]
    }

    fn copy_row(&mut self, from: usize, to: usize) {
        let n = self.num_states;
        self.values.copy_within(from * n..(from + 1) * n, to * n);
    }

    pub fn initial(&self) -> &[f64] {
        self.row(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,state,value\n");
        for h in 0..=self.horizon {
            for (s, v) in self.row(h).iter().enumerate() {
                let _ = writeln!(out, "{},{s},{v}", h + 1);
            }
        }
        out
    }
}

#[inline]
fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn weighted(init: &[f64], values: &[f64]) -> Result<f64> {
    if init.len() > values.len() {
        return Err(Error::DimensionMismatch(format!(
            "initial distribution has {} entries, model has {} states",
            init.len(),
            values.len()
        )));
    }
    Ok(dot(init, values))
}

/// Backward evaluation of `policy` for `horizon` steps.
pub fn evaluate_finite<M, P>(
    model: &M,
    policy: &P,
    reward: &GeneralReward,
    horizon: usize,
) -> Result<ValueTable>
where
    M: AsModel + ?Sized,
    P: Policy + ?Sized,
{
    let m = model.model();
    reward.check(m)?;
    let n = m.num_states();
    let mut table = ValueTable::zeros(horizon, n);
    let mut settled = false;
    for h in (0..horizon).rev() {
        let same_as_next = h + 1 < horizon && policy.same_rule(h, h + 1);
        if settled && same_as_next {
            table.copy_row(h + 1, h);
            continue;
        }
        let (head, tail) = table.values.split_at_mut((h + 1) * n);
        let next = &tail[..n];
        let cur = &mut head[h * n..];
        for (s, slot) in cur.iter_mut().enumerate() {
            let a = policy.action(h, s);
            *slot = reward.value(s, a) + dot(m.row(s, a), next);
        }
        // Same rule and same values: every earlier row repeats this one.
        settled = same_as_next && cur == next;
    }
    Ok(table)
}

/// `W^pi_d(r, p, mu)`.
pub fn policy_value_finite<M, P>(
    model: &M,
    policy: &P,
    reward: &GeneralReward,
    horizon: usize,
    init: &[f64],
) -> Result<f64>
where
    M: AsModel + ?Sized,
    P: Policy + ?Sized,
{
    let table = evaluate_finite(model, policy, reward, horizon)?;
    weighted(init, table.initial())
}

/// Bellman-optimal backward induction; ties go to the lowest action.
pub fn optimal_finite<M: AsModel + ?Sized>(
    model: &M,
    reward: &GeneralReward,
    horizon: usize,
) -> Result<(ValueTable, NonstationaryPolicy)> {
    let m = model.model();
    reward.check(m)?;
    let (n, a_n) = (m.num_states(), m.num_actions());
    let mut table = ValueTable::zeros(horizon, n);
    let mut actions = vec![vec![0usize; n]; horizon];
    let mut settled = false;
    for h in (0..horizon).rev() {
        if settled {
            table.copy_row(h + 1, h);
            actions[h] = actions[h + 1].clone();
            continue;
        }
        let (head, tail) = table.values.split_at_mut((h + 1) * n);
        let next = &tail[..n];
        let cur = &mut head[h * n..];
        for (s, slot) in cur.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_n {
                let q = reward.value(s, a) + dot(m.row(s, a), next);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            *slot = best;
            actions[h][s] = best_a;
        }
        settled = h + 1 < horizon && cur == next;
    }
    Ok((table, NonstationaryPolicy::new(actions)))
}

/// Optimal `d`-step values at the first step and a policy attaining them.
pub fn optimal_value_finite<M: AsModel + ?Sized>(
    model: &M,
    reward: &GeneralReward,
    horizon: usize,
) -> Result<(Vec<f64>, NonstationaryPolicy)> {
    let (table, policy) = optimal_finite(model, reward, horizon)?;
    Ok((table.initial().to_vec(), policy))
}

/// Distribution of the state at each step `0..horizon` under `policy`.
pub fn state_occupancy<M, P>(
    model: &M,
    policy: &P,
    horizon: usize,
    init: &[f64],
) -> Result<Vec<Vec<f64>>>
where
    M: AsModel + ?Sized,
    P: Policy + ?Sized,
{
    let m = model.model();
    let n = m.num_states();
    if init.len() > n {
        return Err(Error::DimensionMismatch(
            "initial distribution longer than state space".into(),
        ));
    }
    let mut cur = init.to_vec();
    cur.resize(n, 0.0);
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut next = vec![0.0; n];
        for (s, &mass) in cur.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let row = m.row(s, policy.action(h, s));
            for (slot, &p) in next.iter_mut().zip(row) {
                *slot += mass * p;
            }
        }
        out.push(std::mem::replace(&mut cur, next));
    }
    Ok(out)
}

/// Probability that `policy` hits `target` within `horizon` steps.
pub fn reach_probability<M, P>(
    model: &M,
    target: &Target,
    policy: &P,
    horizon: usize,
    init: &[f64],
) -> Result<f64>
where
    M: AsModel + ?Sized,
    P: Policy + ?Sized,
{
    if target.is_empty() {
        return Ok(0.0);
    }
    let clipped = clip(model, target);
    let reward = GeneralReward::z_inflow(&clipped);
    policy_value_finite(&clipped, policy, &reward, horizon, init)
}

/// `max_pi` of [`reach_probability`] over all (non-stationary) policies.
pub fn max_reach_probability<M: AsModel + ?Sized>(
    model: &M,
    target: &Target,
    horizon: usize,
    init: &[f64],
) -> Result<(f64, NonstationaryPolicy)> {
    let n = model.model().num_states();
    if target.is_empty() {
        return Ok((0.0, NonstationaryPolicy::new(vec![vec![0; n + 2]; horizon])));
    }
    let clipped = clip(model, target);
    let reward = GeneralReward::z_inflow(&clipped);
    let (values, policy) = optimal_value_finite(&clipped, &reward, horizon)?;
    Ok((weighted(init, &values)?, policy))
}

/// Absolute accuracy of the discounted solvers.
pub const DISCOUNT_TOLERANCE: f64 = 1e-10;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::DiscountOutOfRange(gamma));
    }
    Ok(())
}

fn iteration_cap(gamma: f64) -> usize {
    10 * ((1e10f64).ln() / (1.0 - gamma)).ceil() as usize
}

/// Runs `backup` until the span of successive differences is at most
/// `tol * (1 - gamma)` and returns the midpoint of the resulting bracket.
fn discounted_fixed_point<F>(n: usize, gamma: f64, mut backup: F) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    let threshold = DISCOUNT_TOLERANCE * (1.0 - gamma);
    for _ in 0..iteration_cap(gamma) {
        backup(&cur, &mut next);
        let (lo, hi) = next
            .iter()
            .zip(&cur)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            });
        std::mem::swap(&mut cur, &mut next);
        if hi - lo <= threshold {
            let shift = gamma / (1.0 - gamma) * 0.5 * (lo + hi);
            cur.iter_mut().for_each(|v| *v += shift);
            break;
        }
    }
    cur
}

/// Per-state `W^pi_gamma(r, p, 1_s)`.
pub fn discounted_values<M: AsModel + ?Sized>(
    model: &M,
    policy: &StationaryPolicy,
    reward: &GeneralReward,
    gamma: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let m = model.model();
    reward.check(m)?;
    Ok(discounted_fixed_point(m.num_states(), gamma, |v, out| {
        for (s, slot) in out.iter_mut().enumerate() {
            let a = policy.get(s);
            *slot = reward.value(s, a) + gamma * dot(m.row(s, a), v);
        }
    }))
}

/// `W^pi_gamma(r, p, mu)`.
pub fn discounted_value<M: AsModel + ?Sized>(
    model: &M,
    policy: &StationaryPolicy,
    reward: &GeneralReward,
    gamma: f64,
    init: &[f64],
) -> Result<f64> {
    weighted(init, &discounted_values(model, policy, reward, gamma)?)
}

/// Discounted first-passage value `X^pi_gamma(target, p, mu)`: the first
/// hit at step `i` is worth `gamma^(i-1)`.
pub fn discounted_reach<M: AsModel + ?Sized>(
    model: &M,
    target: &Target,
    policy: &StationaryPolicy,
    gamma: f64,
    init: &[f64],
) -> Result<f64> {
    check_gamma(gamma)?;
    if target.is_empty() {
        return Ok(0.0);
    }
    let clipped = clip(model, target);
    let reward = GeneralReward::z_inflow(&clipped);
    discounted_value(&clipped, policy, &reward, gamma, init)
}

/// Discounted-optimal stationary policy, optionally forced to play
/// `pin.1` in state `pin.0`. Returns the policy and its exact per-state
/// values.
pub fn discounted_optimal_stationary<M: AsModel + ?Sized>(
    model: &M,
    reward: &GeneralReward,
    gamma: f64,
    pin: Option<(usize, usize)>,
) -> Result<(StationaryPolicy, Vec<f64>)> {
    check_gamma(gamma)?;
    let m = model.model();
    reward.check(m)?;
    let (n, a_n) = (m.num_states(), m.num_actions());
    if let Some((s, a)) = pin {
        if s >= n || a >= a_n {
            return Err(Error::DimensionMismatch(format!("pin ({s},{a}) out of range")));
        }
    }
    let allowed = |s: usize| -> std::ops::Range<usize> {
        match pin {
            Some((ps, pa)) if ps == s => pa..pa + 1,
            _ => 0..a_n,
        }
    };
    let q = |s: usize, a: usize, v: &[f64]| reward.value(s, a) + gamma * dot(m.row(s, a), v);
    let values = discounted_fixed_point(n, gamma, |v, out| {
        for (s, slot) in out.iter_mut().enumerate() {
            *slot = allowed(s).map(|a| q(s, a, v)).fold(f64::NEG_INFINITY, f64::max);
        }
    });
    let actions = (0..n)
        .map(|s| {
            let mut best_a = allowed(s).start;
            let mut best = q(s, best_a, &values);
            for a in allowed(s).skip(1) {
                let value = q(s, a, &values);
                if value > best + 1e-12 * (1.0 + best.abs()) {
                    best = value;
                    best_a = a;
                }
            }
            best_a
        })
        .collect();
    let policy = StationaryPolicy::new(actions);
    let exact = discounted_values(m, &policy, reward, gamma)?;
    Ok((policy, exact))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain3() -> TransitionModel {
        TransitionModel::from_nested(&[
            vec![vec![0.0, 1.0, 0.0]],
            vec![vec![0.0, 0.0, 1.0]],
            vec![vec![0.0, 0.0, 1.0]],
        ])
        .unwrap()
    }

    fn two_state() -> TransitionModel {
        TransitionModel::from_nested(&[
            vec![vec![0.3, 0.7], vec![0.9, 0.1]],
            vec![vec![0.6, 0.4], vec![0.2, 0.8]],
        ])
        .unwrap()
    }

    #[test]
    fn chain_pair_visited_once() {
        let r = GeneralReward::pair_indicator(3, 1, 1, 0);
        let pi = StationaryPolicy::constant(3, 0);
        let w = policy_value_finite(&chain3(), &pi, &r, 10, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(w, 1.0);
    }

    #[test]
    fn zero_reward_gives_zero() {
        let r = GeneralReward::zeros(2, 2);
        let pi = StationaryPolicy::new(vec![1, 0]);
        assert_eq!(
            policy_value_finite(&two_state(), &pi, &r, 7, &[0.5, 0.5]).unwrap(),
            0.0
        );
    }

    #[test]
    fn reward_dimension_mismatch_is_an_error() {
        let r = GeneralReward::zeros(3, 2);
        let pi = StationaryPolicy::constant(2, 0);
        assert!(matches!(
            policy_value_finite(&two_state(), &pi, &r, 2, &[1.0, 0.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn single_action_optimum_is_the_only_policy() {
        let r = GeneralReward::new(3, 1, vec![0.2, 0.5, 0.1]).unwrap();
        let (v, _) = optimal_value_finite(&chain3(), &r, 4).unwrap();
        let pi = StationaryPolicy::constant(3, 0);
        let w = policy_value_finite(&chain3(), &pi, &r, 4, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(v[0], w);
    }

    #[test]
    fn unreachable_state_target_is_worthless() {
        // State 0 is never re-entered once left.
        let r = GeneralReward::state_indicator(3, 1, 0);
        let (v, _) = optimal_value_finite(&chain3(), &r, 5).unwrap();
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn optimal_policy_attains_its_value() {
        let r = GeneralReward::new(2, 2, vec![0.1, 0.4, 0.3, 0.0]).unwrap();
        let (table, pi) = optimal_finite(&two_state(), &r, 6).unwrap();
        let eval = evaluate_finite(&two_state(), &pi, &r, 6).unwrap();
        assert_eq!(table, eval);
    }

    #[test]
    fn chain_reach_needs_three_steps() {
        let pi = StationaryPolicy::constant(3, 0);
        let t = Target::States(vec![2]);
        let init = [1.0, 0.0, 0.0];
        assert_eq!(reach_probability(&chain3(), &t, &pi, 3, &init).unwrap(), 1.0);
        assert_eq!(reach_probability(&chain3(), &t, &pi, 2, &init).unwrap(), 0.0);
    }

    #[test]
    fn target_everything_hits_immediately() {
        let pi = StationaryPolicy::new(vec![0, 1]);
        let t = Target::States(vec![0, 1]);
        for d in 1..5 {
            let x = reach_probability(&two_state(), &t, &pi, d, &[0.4, 0.6]).unwrap();
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_target_has_zero_reach() {
        let pi = StationaryPolicy::constant(2, 0);
        let t = Target::Pairs(vec![]);
        assert_eq!(reach_probability(&two_state(), &t, &pi, 4, &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn inflow_reach_equals_z_indicator_one_step_longer() {
        let t = Target::Triples(vec![(0, 1, 1), (1, 0, 0)]);
        let clipped = clip(&two_state(), &t);
        let pi = StationaryPolicy::new(vec![1, 0, 0, 0]);
        for d in 1..6 {
            let x = reach_probability(&two_state(), &t, &pi, d, &[1.0, 0.0]).unwrap();
            let w = policy_value_finite(
                &clipped,
                &pi,
                &GeneralReward::z_indicator(&clipped),
                d + 1,
                &[1.0, 0.0],
            )
            .unwrap();
            assert!((x - w).abs() < 1e-15);
        }
    }

    #[test]
    fn clip_moves_excluded_mass_to_z() {
        let p = TransitionModel::from_nested(&[
            vec![vec![0.3, 0.7]],
            vec![vec![0.0, 1.0]],
        ])
        .unwrap();
        let c = clip(&p, &Target::Triples(vec![(0, 0, 1)]));
        assert_eq!(c.model().row(0, 0), &[0.3, 0.0, 0.7, 0.0]);
        assert_eq!(c.model().row(1, 0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(c.model().row(c.z(), 0), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(c.model().row(c.z_prime(), 0), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn cut_renormalizes_partial_rows_and_keeps_full_z_rows() {
        let aug = TransitionModel::from_nested(&[
            vec![vec![0.0, 0.5, 0.5, 0.0]],
            vec![vec![0.0, 0.0, 1.0, 0.0]],
            vec![vec![0.0, 0.0, 0.0, 1.0]],
            vec![vec![0.0, 0.0, 0.0, 1.0]],
        ])
        .unwrap();
        let c = cut(&ClippedMdp::from_augmented(aug, 2).unwrap());
        assert_eq!(c.model().row(0, 0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(c.model().row(1, 0), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_clip_leaves_z_unreachable() {
        let c = clip(&two_state(), &Target::Triples(vec![]));
        for s in 0..2 {
            for a in 0..2 {
                assert_eq!(&c.model().row(s, a)[..2], two_state().row(s, a));
                assert_eq!(c.model().prob(s, a, c.z()), 0.0);
            }
        }
        assert_eq!(cut(&c), c);
    }

    #[test]
    fn geometric_series_self_loop() {
        let p = TransitionModel::from_nested(&[vec![vec![1.0]]]).unwrap();
        let r = GeneralReward::new(1, 1, vec![1.0]).unwrap();
        let v = discounted_value(&p, &StationaryPolicy::constant(1, 0), &r, 0.5, &[1.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_discount_collects_first_reward_only() {
        let r = GeneralReward::new(2, 2, vec![0.1, 0.4, 0.3, 0.0]).unwrap();
        let pi = StationaryPolicy::new(vec![1, 0]);
        let v = discounted_values(&two_state(), &pi, &r, 0.0).unwrap();
        assert_eq!(v, vec![0.4, 0.3]);
    }

    #[test]
    fn discount_must_be_below_one() {
        let r = GeneralReward::zeros(2, 2);
        let pi = StationaryPolicy::constant(2, 0);
        assert!(matches!(
            discounted_values(&two_state(), &pi, &r, 1.0),
            Err(Error::DiscountOutOfRange(_))
        ));
        assert!(discounted_optimal_stationary(&two_state(), &r, 1.2, None).is_err());
    }

    #[test]
    fn discounted_matches_linear_solve() {
        // (I - gamma P_pi) v = r solved by Cramer's rule on the 2x2 system.
        let gamma = 0.9;
        let pi = StationaryPolicy::new(vec![0, 1]);
        let r = GeneralReward::new(2, 2, vec![1.0, 0.0, 0.0, 0.5]).unwrap();
        let p = two_state();
        let (p00, p01) = (p.prob(0, 0, 0), p.prob(0, 0, 1));
        let (p10, p11) = (p.prob(1, 1, 0), p.prob(1, 1, 1));
        let (a, b, c, d) = (1.0 - gamma * p00, -gamma * p01, -gamma * p10, 1.0 - gamma * p11);
        let det = a * d - b * c;
        let v0 = (1.0 * d - b * 0.5) / det;
        let v1 = (a * 0.5 - c * 1.0) / det;
        let v = discounted_values(&p, &pi, &r, gamma).unwrap();
        assert!((v[0] - v0).abs() < 1e-10 && (v[1] - v1).abs() < 1e-10);
    }

    #[test]
    fn pinned_optimum_respects_pin_and_cannot_win() {
        let r = GeneralReward::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let (free, free_v) = discounted_optimal_stationary(&two_state(), &r, 0.8, None).unwrap();
        assert_eq!(free.get(0), 1);
        let (pinned, pinned_v) =
            discounted_optimal_stationary(&two_state(), &r, 0.8, Some((0, 0))).unwrap();
        assert_eq!(pinned.get(0), 0);
        assert!(pinned_v[0] <= free_v[0]);
    }

    #[test]
    fn value_table_exports_csv() {
        let r = GeneralReward::pair_indicator(3, 1, 1, 0);
        let t = evaluate_finite(&chain3(), &StationaryPolicy::constant(3, 0), &r, 2).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("step,state,value\n1,0,1\n"));
        assert_eq!(csv.lines().count(), 1 + 3 * 3);
    }
}
