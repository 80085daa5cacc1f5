//! Environment generators. Every generated MDP has total reward at most 1
//! along any trajectory.

use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{load_mdp_file, substream, Lane, SimRng, TabularMdp, TransitionModel};

pub const GENERATORS: [&str; 4] = ["spiky-chain", "riverswim-bounded", "dirichlet-random", "file"];

/// Generator parameters; each generator reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    /// Number of states (chain length for the chain families).
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    /// Probability that "right" advances in `spiky-chain`.
    pub advance: f64,
    /// Dirichlet concentration for `dirichlet-random`.
    pub alpha: f64,
    /// Instance seed for randomized generators.
    pub seed: u64,
    /// MDP file for `file`.
    pub path: Option<PathBuf>,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            states: 5,
            actions: 2,
            horizon: 64,
            advance: 0.9,
            alpha: 1.0,
            seed: 0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub generator: String,
    #[serde(default)]
    pub params: EnvParams,
}

impl EnvSpec {
    pub fn build(&self) -> Result<TabularMdp> {
        make_env(
            &self.generator,
            &self.params,
            &mut substream(self.params.seed, 0, Lane::Aux),
        )
    }
}

pub fn make_env(generator: &str, params: &EnvParams, rng: &mut SimRng) -> Result<TabularMdp> {
    match generator {
        "spiky-chain" => spiky_chain(params.states, params.advance, params.horizon),
        "riverswim-bounded" => riverswim_bounded(params.states, params.horizon),
        "dirichlet-random" => {
            dirichlet_random(params.states, params.actions, params.alpha, params.horizon, rng)
        }
        "file" => {
            let path = params
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("generator `file` needs params.path".into()))?;
            load_mdp_file(path)
        }
        other => Err(Error::UnknownGenerator(other.to_string())),
    }
}

fn start_at_zero(n: usize) -> Vec<f64> {
    let mut mu = vec![0.0; n];
    mu[0] = 1.0;
    mu
}

/// States `0..n-1` form a line ending in the absorbing terminal `n-1`.
/// Action 1 moves right with probability `advance`; taking it in `n-2`
/// enters the terminal and pays 1. Action 0 falls into the terminal with
/// probability 0.1 and otherwise steps left.
pub fn spiky_chain(n: usize, advance: f64, horizon: usize) -> Result<TabularMdp> {
    if n < 2 {
        return Err(Error::Config("spiky-chain needs at least 2 states".into()));
    }
    if !(advance > 0.0 && advance <= 1.0) {
        return Err(Error::Config("spiky-chain advance must lie in (0, 1]".into()));
    }
    let terminal = n - 1;
    let mut p = TransitionModel::zeros(n, 2);
    let mut r = vec![0.0; n * 2];
    for s in 0..terminal {
        let left = p.row_mut(s, 0);
        left[terminal] += 0.1;
        left[s.saturating_sub(1)] += 0.9;
        let right = p.row_mut(s, 1);
        if s + 1 == terminal {
            right[terminal] = 1.0;
            r[s * 2 + 1] = 1.0;
        } else {
            right[s + 1] += advance;
            right[s] += 1.0 - advance;
        }
    }
    p.row_mut(terminal, 0)[terminal] = 1.0;
    p.row_mut(terminal, 1)[terminal] = 1.0;
    TabularMdp::new(p, r, horizon, start_at_zero(n))
}

/// Classic river-swim currents over `n` river states plus an absorbing
/// terminal. Swimming right from the last river state pays 1 and ends the
/// episode; drifting left from the bank pays 0.005 and ends it too.
pub fn riverswim_bounded(n: usize, horizon: usize) -> Result<TabularMdp> {
    if n < 2 {
        return Err(Error::Config("riverswim-bounded needs at least 2 river states".into()));
    }
    let terminal = n;
    let mut p = TransitionModel::zeros(n + 1, 2);
    let mut r = vec![0.0; (n + 1) * 2];
    for s in 0..n {
        let left = p.row_mut(s, 0);
        if s == 0 {
            left[terminal] = 1.0;
            r[0] = 0.005;
        } else {
            left[s - 1] = 1.0;
        }
        let right = p.row_mut(s, 1);
        if s == n - 1 {
            right[terminal] = 1.0;
            r[s * 2 + 1] = 1.0;
        } else if s == 0 {
            right[0] = 0.6;
            right[1] = 0.4;
        } else {
            right[s - 1] = 0.05;
            right[s] = 0.6;
            right[s + 1] = 0.35;
        }
    }
    p.row_mut(terminal, 0)[terminal] = 1.0;
    p.row_mut(terminal, 1)[terminal] = 1.0;
    TabularMdp::new(p, r, horizon, start_at_zero(n + 1))
}

fn dirichlet_row<R: Rng + ?Sized>(gamma: &Gamma<f64>, len: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            let mut row: Vec<f64> = draws.iter().map(|x| x / total).collect();
            // Push the rounding residue onto the largest entry.
            let residue = 1.0 - row.iter().sum::<f64>();
            let (imax, _) = row
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
            row[imax] += residue;
            return row;
        }
    }
}

/// Dirichlet(`alpha`) rows over all states, except that `S-1` is an
/// absorbing zero-reward sink and the single rewarded pair `(S-2, A-1)`
/// moves to the sink with probability 1 and pays 1.
pub fn dirichlet_random<R: Rng + ?Sized>(
    states: usize,
    actions: usize,
    alpha: f64,
    horizon: usize,
    rng: &mut R,
) -> Result<TabularMdp> {
    if states < 2 || actions == 0 {
        return Err(Error::Config("dirichlet-random needs S >= 2 and A >= 1".into()));
    }
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::Config(format!("invalid Dirichlet concentration {alpha}: {e}")))?;
    let sink = states - 1;
    let mut p = TransitionModel::zeros(states, actions);
    let mut r = vec![0.0; states * actions];
    for s in 0..sink {
        for a in 0..actions {
            let row = dirichlet_row(&gamma, states, rng);
            p.row_mut(s, a).copy_from_slice(&row);
        }
    }
    let paying = (sink - 1, actions - 1);
    let row = p.row_mut(paying.0, paying.1);
    row.fill(0.0);
    row[sink] = 1.0;
    r[paying.0 * actions + paying.1] = 1.0;
    for a in 0..actions {
        p.row_mut(sink, a)[sink] = 1.0;
    }
    TabularMdp::new(p, r, horizon, start_at_zero(states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{validate_bounded_reward, StationaryPolicy};
    use crate::planning::{policy_value_finite, GeneralReward};

    #[test]
    fn spiky_chain_pays_once_going_right() {
        let mdp = spiky_chain(3, 1.0, 3).unwrap();
        let value = policy_value_finite(
            &mdp,
            &StationaryPolicy::constant(3, 1),
            &GeneralReward::from_mdp(&mdp),
            3,
            mdp.initial(),
        )
        .unwrap();
        assert_eq!(value, 1.0);
        assert_eq!(validate_bounded_reward(&mdp), 1.0);
    }

    #[test]
    fn riverswim_total_reward_is_exactly_one() {
        let mdp = riverswim_bounded(6, 50).unwrap();
        assert_eq!(validate_bounded_reward(&mdp), 1.0);
    }

    #[test]
    fn dirichlet_rows_are_distributions() {
        let mdp = dirichlet_random(5, 3, 0.5, 10, &mut substream(4, 0, Lane::Aux)).unwrap();
        assert!(mdp.transition().max_row_error() <= 1e-12);
        assert_eq!(validate_bounded_reward(&mdp), 1.0);
    }

    #[test]
    fn dirichlet_instances_follow_their_seed() {
        let spec = EnvSpec {
            generator: "dirichlet-random".into(),
            params: EnvParams {
                seed: 12,
                ..EnvParams::default()
            },
        };
        assert_eq!(spec.build().unwrap(), spec.build().unwrap());
    }

    #[test]
    fn unknown_generator_is_an_error() {
        let err = make_env("maze", &EnvParams::default(), &mut substream(0, 0, Lane::Aux));
        assert!(matches!(err, Err(Error::UnknownGenerator(_))));
    }
}
