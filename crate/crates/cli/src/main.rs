use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hflab::explorer::{trace_jsonl, AlgoConfig, Profile};
use hflab::harness::{records_to_csv, run_experiment, run_seed, ExperimentConfig};
use hflab::lemma_lab::{run_suite, LemmaId};
use hflab::mdp::{load_mdp_file, validate_bounded_reward};
use hflab::planning::{optimal_finite, GeneralReward};

#[derive(Parser)]
#[command(name = "hflab", version, about = "Tabular MDP regret and planning laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a regret experiment and write per-episode CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; defaults to the config's `output`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the config's constant scales with a named profile.
        #[arg(long)]
        profile: Option<Profile>,
        /// Write the Stage-1 episode trace (JSON lines, one seed only).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check structural inequalities on seeded random instances.
    VerifyLemmas {
        /// Lemma id or `all`.
        #[arg(long, default_value = "all")]
        lemma: String,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON-lines report destination.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the optimal first-step value and policy of an MDP file.
    Plan {
        #[arg(long)]
        mdp: PathBuf,
        /// Overrides the file's horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Validate an MDP file and report its maximal total reward.
    ValidateMdp { file: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            profile,
            trace,
        } => simulate(config, seed, out, profile, trace),
        Command::VerifyLemmas {
            lemma,
            instances,
            seed,
            report,
        } => verify(&lemma, instances, seed, report),
        Command::Plan { mdp, horizon } => plan(mdp, horizon),
        Command::ValidateMdp { file } => validate(file),
    }
}

fn simulate(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    profile: Option<Profile>,
    trace: Option<PathBuf>,
) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(profile) = profile {
        cfg.algo = AlgoConfig::for_profile(profile, cfg.algo.delta);
    }
    let result = run_experiment(&cfg)?;
    let csv = records_to_csv(&result.records);
    match out.or_else(|| cfg.output.clone()) {
        Some(path) => fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    if let Some(path) = trace {
        if cfg.seeds.len() != 1 {
            bail!("--trace needs exactly one seed");
        }
        let mdp = cfg.env.build()?;
        let run = run_seed(&mdp, cfg.agent, &cfg.algo, cfg.episodes, cfg.seeds[0])?;
        fs::write(&path, trace_jsonl(&run.stage1)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let mut ok = true;
    for s in &result.summaries {
        let expected = (s.episodes * cfg.env.build()?.horizon()) as u64;
        if s.total_steps != expected {
            eprintln!("seed {}: consumed {} steps, expected {expected}", s.seed, s.total_steps);
            ok = false;
        }
        eprintln!(
            "seed {} profile {}: regret {:.6} over {} episodes ({} in stage 1)",
            s.seed, cfg.algo.profile, s.final_regret, s.episodes, s.stage1_episodes
        );
    }
    Ok(ok)
}

fn verify(lemma: &str, instances: usize, seed: u64, report: Option<PathBuf>) -> Result<bool> {
    let ids: Vec<LemmaId> = if lemma == "all" {
        LemmaId::ALL.to_vec()
    } else {
        vec![lemma.parse()?]
    };
    let mut lines = String::new();
    let mut ok = true;
    for id in ids {
        let reports = run_suite(id, instances, seed)?;
        let failed = reports.iter().filter(|r| !r.pass).count();
        println!(
            "{}: {} instances, {} failed",
            id,
            reports.len(),
            failed
        );
        ok &= failed == 0;
        for r in &reports {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
    }
    if let Some(path) = report {
        fs::write(&path, lines).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ok)
}

fn plan(path: PathBuf, horizon: Option<usize>) -> Result<bool> {
    let mut mdp = load_mdp_file(&path)?;
    if let Some(h) = horizon {
        mdp = mdp.with_horizon(h)?;
    }
    let (table, policy) = optimal_finite(&mdp, &GeneralReward::from_mdp(&mdp), mdp.horizon())?;
    let v1 = table.initial();
    let value: f64 = mdp.initial().iter().zip(v1).map(|(m, v)| m * v).sum();
    println!("V*_1(mu1) = {value}");
    println!("V*_1 = {v1:?}");
    for (h, row) in policy.rows().iter().enumerate() {
        println!("h={} pi={row:?}", h + 1);
    }
    Ok(true)
}

fn validate(path: PathBuf) -> Result<bool> {
    match load_mdp_file(&path) {
        Ok(mdp) => {
            let bound = validate_bounded_reward(&mdp);
            println!(
                "{}: valid (S={}, A={}, H={}), max total reward {bound}",
                path.display(),
                mdp.num_states(),
                mdp.num_actions(),
                mdp.horizon()
            );
            if bound > 1.0 + 1e-12 {
                println!("total reward can exceed 1");
                return Ok(false);
            }
            Ok(true)
        }
        Err(e) => {
            println!("{e}");
            Ok(false)
        }
    }
}
