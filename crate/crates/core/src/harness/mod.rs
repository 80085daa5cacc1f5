//! Experiment orchestration: configs, exact regret accounting, diagnostics
//! and CSV output.

mod envs;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use envs::{
    dirichlet_random, make_env, riverswim_bounded, spiky_chain, EnvParams, EnvSpec, GENERATORS,
};

use crate::confidence::check_event_g;
use crate::error::{Error, Result};
use crate::explorer::{
    run_stage1, AlgoConfig, KnownSet, ReferenceModel, RunObserver, Stage1Episode,
};
use crate::mdp::{substream, CountTable, EnvSession, Lane, TabularMdp};
use crate::planning::{clip, cut, evaluate_finite, optimal_value_finite, AsModel, GeneralReward};
use crate::rmis::{run_stage2, OptimisticValueTable, Stage2Episode};

pub const CSV_HEADER: &str = "seed,episode,stage,regret_inst,regret_cum,omitted,known,eventG";

/// Slack below zero tolerated in exact per-episode regret.
pub const REGRET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    #[default]
    HorizonFree,
    UcbviBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub agent: AgentKind,
    #[serde(default)]
    pub algo: AlgoConfig,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            context: "reading config",
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !GENERATORS.contains(&self.env.generator.as_str()) {
            return Err(Error::UnknownGenerator(self.env.generator.clone()));
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretRecord {
    pub seed: u64,
    /// 1-based.
    pub episode: usize,
    pub stage: u8,
    pub regret_inst: f64,
    pub regret_cum: f64,
    pub omitted: usize,
    pub known: usize,
    pub event_g: bool,
}

/// Per-seed audit and diagnostic counters.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    pub stage1_episodes: usize,
    pub total_steps: u64,
    pub final_regret: f64,
    /// Episodes whose planning counts violated the good event.
    pub event_g_failures: usize,
    /// Stage-2 episodes checked for optimism while the good event had held
    /// at every episode so far.
    pub optimism_checks: usize,
    pub optimism_violations: usize,
    /// Reference models compared against the clipped-and-cut true kernel.
    pub sandwich_checks: usize,
    pub sandwich_failures: usize,
    pub omitted_after_stage1: usize,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub records: Vec<RegretRecord>,
    pub summary: SeedSummary,
    pub stage1: Vec<Stage1Episode>,
}

/// Ground-truth side of a run: exact regret and diagnostics.
struct Accountant<'a> {
    mdp: &'a TabularMdp,
    reward: GeneralReward,
    v_star: Vec<f64>,
    delta: f64,
    n0: u64,
    seed: u64,
    records: Vec<RegretRecord>,
    cum: f64,
    omitted: usize,
    known: usize,
    event_g: bool,
    g_throughout: bool,
    pending: Option<f64>,
    summary: SeedSummary,
}

impl<'a> Accountant<'a> {
    fn new(mdp: &'a TabularMdp, delta: f64, n0: u64, seed: u64) -> Result<Self> {
        let reward = GeneralReward::from_mdp(mdp);
        let (v_star, _) = optimal_value_finite(mdp, &reward, mdp.horizon())?;
        Ok(Self {
            mdp,
            reward,
            v_star,
            delta,
            n0,
            seed,
            records: Vec::new(),
            cum: 0.0,
            omitted: 0,
            known: 0,
            event_g: true,
            g_throughout: true,
            pending: None,
            summary: SeedSummary {
                seed,
                ..SeedSummary::default()
            },
        })
    }

    fn push(&mut self, episode: usize, stage: u8, regret: f64) {
        self.cum += regret;
        self.records.push(RegretRecord {
            seed: self.seed,
            episode,
            stage,
            regret_inst: regret,
            regret_cum: self.cum,
            omitted: self.omitted,
            known: self.known,
            event_g: self.event_g,
        });
    }

    fn sandwich_holds(&self, reference: &ReferenceModel, known: &KnownSet) -> bool {
        let truth = cut(&clip(self.mdp, &known.complement()));
        let bound = (1.0 / self.mdp.num_states() as f64).exp();
        let (t, r) = (truth.model().as_slice(), reference.model().as_slice());
        t.iter()
            .zip(r)
            .all(|(&t, &r)| t <= bound * r * (1.0 + 1e-12) && r <= bound * t * (1.0 + 1e-12))
    }
}

impl RunObserver for Accountant<'_> {
    fn episode_started(&mut self, _episode: usize, counts: &CountTable) {
        self.event_g = check_event_g(counts, self.mdp, self.delta).unwrap_or(false);
        if !self.event_g {
            self.summary.event_g_failures += 1;
            self.g_throughout = false;
        }
        self.known = KnownSet::from_counts(counts, self.n0).len();
    }

    fn reference_built(&mut self, reference: &ReferenceModel, known: &KnownSet, _counts: &CountTable) {
        self.summary.sandwich_checks += 1;
        if !self.sandwich_holds(reference, known) {
            self.summary.sandwich_failures += 1;
        }
    }

    fn stage1_finished(&mut self, log: &Stage1Episode) {
        self.omitted = log.omitted;
        // The Stage-1 policy adapts within the episode, so the realized
        // return stands in for its value.
        let regret = (self.v_star[log.initial_state] - log.episode_return).max(0.0);
        self.push(log.episode, 1, regret);
    }

    fn stage2_planned(&mut self, _episode: usize, initial_state: usize, plan: &OptimisticValueTable) {
        if self.g_throughout {
            self.summary.optimism_checks += 1;
            if plan.initial_value(initial_state) < self.v_star[initial_state] - REGRET_SLACK {
                self.summary.optimism_violations += 1;
            }
        }
        let value = evaluate_finite(self.mdp, plan, &self.reward, self.mdp.horizon())
            .expect("plan matches the environment")
            .initial()[initial_state];
        self.pending = Some(self.v_star[initial_state] - value);
    }

    fn stage2_finished(&mut self, log: &Stage2Episode) {
        let regret = self.pending.take().expect("planned before finishing");
        self.push(log.episode, 2, regret);
    }
}

/// Runs one seed of `agent` on `mdp` for `episodes` episodes.
pub fn run_seed(
    mdp: &TabularMdp,
    agent: AgentKind,
    algo: &AlgoConfig,
    episodes: usize,
    seed: u64,
) -> Result<SeedRun> {
    let (s_n, a_n, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut env = EnvSession::new(mdp, substream(seed, 0, Lane::Env));
    let (records, stage1, mut summary) = match agent {
        AgentKind::HorizonFree => {
            let consts = algo.constants(s_n, a_n, horizon, episodes)?;
            let mut acct = Accountant::new(mdp, algo.delta, consts.n0, seed)?;
            let out = run_stage1(&mut env, &consts, seed, &mut acct)?;
            acct.omitted = out.omitted.len();
            let mut counts = out.counts;
            run_stage2(
                &mut env,
                &mut counts,
                episodes - consts.k1,
                consts.k1,
                algo.delta,
                seed,
                &mut acct,
            )?;
            acct.summary.stage1_episodes = consts.k1;
            acct.summary.omitted_after_stage1 = out.omitted.len();
            (acct.records, out.episodes, acct.summary)
        }
        AgentKind::UcbviBaseline => {
            let mut acct = Accountant::new(mdp, algo.delta, algo.n0(s_n), seed)?;
            ucbvi_baseline_with(&mut env, episodes, algo.delta, seed, &mut acct)?;
            (acct.records, Vec::new(), acct.summary)
        }
    };
    summary.episodes = episodes;
    summary.total_steps = env.total_steps();
    summary.final_regret = records.last().map_or(0.0, |r| r.regret_cum);
    Ok(SeedRun {
        records,
        summary,
        stage1,
    })
}

fn ucbvi_baseline_with(
    env: &mut EnvSession<'_>,
    episodes: usize,
    delta: f64,
    seed: u64,
    observer: &mut dyn RunObserver,
) -> Result<Vec<Stage2Episode>> {
    let mut counts = CountTable::new(env.num_states(), env.num_actions());
    run_stage2(env, &mut counts, episodes, 0, delta, seed, observer)
}

/// Optimistic planning from zero counts for all `episodes`, with exact
/// regret records.
pub fn ucbvi_baseline(
    mdp: &TabularMdp,
    episodes: usize,
    delta: f64,
    seed: u64,
) -> Result<Vec<RegretRecord>> {
    Ok(run_seed(
        mdp,
        AgentKind::UcbviBaseline,
        &AlgoConfig::for_profile(Default::default(), delta),
        episodes,
        seed,
    )?
    .records)
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Sorted by `(seed, episode)`.
    pub records: Vec<RegretRecord>,
    /// Sorted by seed.
    pub summaries: Vec<SeedSummary>,
}

/// Runs every seed of the config in parallel and merges the results in
/// `(seed, episode)` order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mdp = cfg.env.build()?;
    let runs: Vec<SeedRun> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(&mdp, cfg.agent, &cfg.algo, cfg.episodes, seed))
        .collect::<Result<_>>()?;
    let mut records: Vec<RegretRecord> = Vec::with_capacity(cfg.episodes * cfg.seeds.len());
    let mut summaries = Vec::with_capacity(runs.len());
    for run in runs {
        records.extend(run.records);
        summaries.push(run.summary);
    }
    records.sort_by_key(|r| (r.seed, r.episode));
    summaries.sort_by_key(|s| s.seed);
    Ok(ExperimentResult { records, summaries })
}

pub fn records_to_csv(records: &[RegretRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.seed,
            r.episode,
            r.stage,
            r.regret_inst,
            r.regret_cum,
            r.omitted,
            r.known,
            u8::from(r.event_g)
        );
    }
    out
}

pub fn write_csv(records: &[RegretRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, records_to_csv(records)).map_err(|source| Error::Io {
        context: "writing CSV",
        path: path.to_path_buf(),
        source,
    })
}
