use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Policy, Step, TabularMdp, Trajectory};

pub type SimRng = ChaCha8Rng;

/// Independent consumers of randomness within one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    /// Environment transitions and initial states.
    Env = 0,
    /// Agent-side randomness (uniform exploration actions).
    Agent = 1,
    /// Free for diagnostics and test harnesses.
    Aux = 2,
}

/// Deterministic substream keyed by `(master_seed, index, lane)`.
///
/// Streams never overlap, so episodes and seeds can run in any order or in
/// parallel without changing results.
pub fn substream(master_seed: u64, index: u64, lane: Lane) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((index << 2) | lane as u64);
    rng
}

/// Draws an index from a probability vector. Only entries with positive
/// mass can be returned.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

pub fn random_action<R: Rng + ?Sized>(num_actions: usize, rng: &mut R) -> usize {
    rng.random_range(0..num_actions)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

impl From<Transition> for Step {
    fn from(t: Transition) -> Self {
        Step {
            state: t.state,
            action: t.action,
            reward: t.reward,
            next_state: t.next_state,
        }
    }
}

/// Black-box sampler over an MDP that enforces the per-episode budget of
/// `H` steps and audits the total number of transitions consumed.
#[derive(Debug)]
pub struct EnvSession<'a> {
    mdp: &'a TabularMdp,
    rng: SimRng,
    state: usize,
    episode_steps: usize,
    episode_return: f64,
    total_steps: u64,
}

impl<'a> EnvSession<'a> {
    pub fn new(mdp: &'a TabularMdp, rng: SimRng) -> Self {
        Self {
            mdp,
            rng,
            state: 0,
            episode_steps: 0,
            episode_return: 0.0,
            total_steps: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    pub fn horizon(&self) -> usize {
        self.mdp.horizon()
    }

    /// Known reward table, the only model information agents may read.
    pub fn rewards(&self) -> &[f64] {
        self.mdp.rewards()
    }

    pub fn initial(&self) -> &[f64] {
        self.mdp.initial()
    }

    /// Starts a new episode, optionally switching to a fresh substream.
    pub fn reset(&mut self, rng: Option<SimRng>) -> usize {
        if let Some(rng) = rng {
            self.rng = rng;
        }
        self.state = sample_index(self.mdp.initial(), &mut self.rng);
        self.episode_steps = 0;
        self.episode_return = 0.0;
        self.state
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.episode_steps
    }

    pub fn remaining(&self) -> usize {
        self.mdp.horizon() - self.episode_steps
    }

    pub fn episode_return(&self) -> f64 {
        self.episode_return
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn step(&mut self, action: usize) -> Transition {
        assert!(
            self.episode_steps < self.mdp.horizon(),
            "episode budget of {} steps exhausted",
            self.mdp.horizon()
        );
        let state = self.state;
        let row = self.mdp.transition().row(state, action);
        let next_state = sample_index(row, &mut self.rng);
        let reward = self.mdp.reward(state, action);
        self.state = next_state;
        self.episode_steps += 1;
        self.episode_return += reward;
        self.total_steps += 1;
        Transition {
            state,
            action,
            reward,
            next_state,
        }
    }
}

/// Rolls out one full episode of `H` steps.
pub fn sample_episode<P: Policy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    rng: &mut SimRng,
) -> Trajectory {
    let mut state = sample_index(mdp.initial(), rng);
    let mut steps = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let action = policy.action(h, state);
        let next_state = sample_index(mdp.transition().row(state, action), rng);
        steps.push(Step {
            state,
            action,
            reward: mdp.reward(state, action),
            next_state,
        });
        state = next_state;
    }
    Trajectory { steps }
}
