//! Seeded random instances for the lemma suites.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde_json::{json, Value};

use crate::mdp::{MdpSpec, NonstationaryPolicy, StationaryPolicy, TransitionModel};
use crate::planning::{ClippedMdp, GeneralReward};

/// Probability that a transition entry is forced to zero, so that
/// instances have sparse supports and unreachable pairs.
const SPARSITY: f64 = 0.3;

fn normalized(mut row: Vec<f64>) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

/// Sparse Dirichlet(1/2)-like row with at least one positive entry.
pub fn random_row<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(0.5, 1.0).expect("valid shape");
    loop {
        let row: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random_bool(SPARSITY) {
                    0.0
                } else {
                    gamma.sample(rng)
                }
            })
            .collect();
        if row.iter().any(|&p| p > 1e-6) {
            return normalized(row.into_iter().map(|p| if p > 1e-6 { p } else { 0.0 }).collect());
        }
    }
}

pub fn random_model<R: Rng + ?Sized>(states: usize, actions: usize, rng: &mut R) -> TransitionModel {
    let mut model = TransitionModel::zeros(states, actions);
    for s in 0..states {
        for a in 0..actions {
            let row = random_row(states, rng);
            model.row_mut(s, a).copy_from_slice(&row);
        }
    }
    model
}

/// Base states plus `z` and `z'`. Some rows lead to `z` surely, most put
/// a random share of mass on it, and the rest avoid it.
pub fn random_clipped<R: Rng + ?Sized>(states: usize, actions: usize, rng: &mut R) -> ClippedMdp {
    let (z, zp) = (states, states + 1);
    let mut model = TransitionModel::zeros(states + 2, actions);
    for s in 0..states {
        for a in 0..actions {
            let row = model.row_mut(s, a);
            if rng.random_bool(0.1) {
                row[z] = 1.0;
            } else {
                let mut base = random_row(states + 1, rng);
                if rng.random_bool(0.3) {
                    base[z] = 0.0;
                    if base.iter().all(|&p| p == 0.0) {
                        base[s] = 1.0;
                    }
                    base = normalized(base);
                }
                row[..=z].copy_from_slice(&base);
            }
        }
    }
    for a in 0..actions {
        model.row_mut(z, a)[zp] = 1.0;
        model.row_mut(zp, a)[zp] = 1.0;
    }
    ClippedMdp::from_augmented(model, states).expect("rows are distributions")
}

/// Uniform rewards on pairs, zero with probability 0.3.
pub fn random_reward<R: Rng + ?Sized>(states: usize, actions: usize, rng: &mut R) -> GeneralReward {
    let values = (0..states * actions)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
        .collect();
    GeneralReward::new(states, actions, values).expect("nonnegative rewards")
}

pub fn random_policy<R: Rng + ?Sized>(states: usize, actions: usize, rng: &mut R) -> StationaryPolicy {
    StationaryPolicy::new((0..states).map(|_| rng.random_range(0..actions)).collect())
}

/// Random stationary policy that plays `a` in `s`.
pub fn pinned_policy<R: Rng + ?Sized>(
    states: usize,
    actions: usize,
    s: usize,
    a: usize,
    rng: &mut R,
) -> StationaryPolicy {
    let mut acts = random_policy(states, actions, rng).actions().to_vec();
    acts[s] = a;
    StationaryPolicy::new(acts)
}

pub fn random_markov_policy<R: Rng + ?Sized>(
    states: usize,
    actions: usize,
    horizon: usize,
    rng: &mut R,
) -> NonstationaryPolicy {
    NonstationaryPolicy::new(
        (0..horizon)
            .map(|_| random_policy(states, actions, rng).actions().to_vec())
            .collect(),
    )
}

/// Initial distribution over the first `support` of `states` states.
pub fn random_initial<R: Rng + ?Sized>(states: usize, support: usize, rng: &mut R) -> Vec<f64> {
    let mut mu = random_row(support, rng);
    mu.resize(states, 0.0);
    mu
}

/// MDP-file JSON for a model, optionally with a reward, for replay.
pub fn replay_mdp(
    model: &TransitionModel,
    reward: Option<&GeneralReward>,
    horizon: usize,
    init: &[f64],
) -> Value {
    let (n, a_n) = (model.num_states(), model.num_actions());
    let r = match reward {
        Some(r) => r.as_slice().chunks(a_n).map(<[f64]>::to_vec).collect(),
        None => vec![vec![0.0; a_n]; n],
    };
    let mut mu1 = init.to_vec();
    mu1.resize(n, 0.0);
    let spec = MdpSpec {
        num_states: n,
        num_actions: a_n,
        horizon,
        mu1,
        transitions: model.to_nested(),
        r,
    };
    serde_json::to_value(spec).unwrap_or_else(|e| json!({ "error": e.to_string() }))
}
