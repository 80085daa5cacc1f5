//! Tabular episodic MDP laboratory with a horizon-free regret learner,
//! exact planning oracles and numerical checks of its structural lemmas.

pub mod error;
pub mod mdp;
pub mod confidence;
pub mod explorer;
pub mod harness;
pub mod lemma_lab;
pub mod planning;
pub mod rmis;

pub use error::{Error, Result};
