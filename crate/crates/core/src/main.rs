use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use clrmr::harness::{
    compare_policies, parse_schedule, run_experiment, scenario_genie, write_comparison, write_csvs, PolicyKind,
    RunSummary, Scenario,
};
use clrmr::markov::ChainAnalysis;
use clrmr::oracle::{theorem_constants, BoundReport, GAP_ENUMERATION_CAP};
use clrmr::policy::{Exploration, Schedule};
use clrmr::{Error, Result};

#[derive(Parser)]
#[command(name = "clrmr", version, about = "Combinatorial learning with restless Markov rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy over all seeds and write per-seed and aggregate CSVs.
    Run {
        #[command(flatten)]
        common: Common,
        /// clrmr, clrmr-ln or rca (default: the scenario's).
        #[arg(long)]
        policy: Option<PolicyKind>,
    },
    /// Print chain analyses, the genie and the bound constants as JSON.
    Analyze {
        #[arg(long)]
        scenario: String,
        /// Exploration constant the bounds are evaluated at.
        #[arg(long = "L")]
        l: Option<f64>,
    },
    /// Run several policies on shared seeds and report paired regret differences.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated policies; the first one is the baseline.
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<PolicyKind>,
    },
}

#[derive(Args)]
struct Common {
    /// Path to a scenario JSON file or a preset name (shortest-path-19, matching-5x9).
    #[arg(long)]
    scenario: String,
    /// Constant exploration weight.
    #[arg(long = "L")]
    l: Option<f64>,
    /// Growing exploration weight: loglog:<scale>, log:<scale> or const:<value>.
    #[arg(long = "L-schedule", value_parser = parse_schedule_arg)]
    l_schedule: Option<Schedule>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Number of seeds; replications use streams 0..seeds.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Output directory (default: the scenario's, else ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn parse_schedule_arg(s: &str) -> std::result::Result<Schedule, String> {
    parse_schedule(s).map_err(|e| e.to_string())
}

impl Common {
    fn load(&self) -> Result<Scenario> {
        let mut s = Scenario::load(&self.scenario)?;
        if let Some(h) = self.horizon {
            s.horizon = h;
        }
        if let Some(k) = self.seeds {
            s.seeds = (0..k).collect();
        }
        if let Some(m) = self.master_seed {
            s.master_seed = m;
        }
        Ok(s)
    }

    fn out_dir(&self, scenario: &Scenario) -> PathBuf {
        self.out
            .clone()
            .or_else(|| scenario.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    /// Exploration for `policy`: the flag that fits it, else the scenario's.
    fn exploration_for(&self, policy: PolicyKind, scenario: &Scenario) -> Result<Exploration> {
        let constant = self.l.map(Exploration::Constant);
        let schedule = self.l_schedule.map(Exploration::Schedule);
        let chosen = match policy {
            PolicyKind::Clrmr => constant,
            PolicyKind::ClrmrLn => schedule.or_else(|| {
                // A constant L given to clrmr-ln is read as a constant schedule.
                self.l.map(|value| Exploration::Schedule(Schedule::Constant { value }))
            }),
            PolicyKind::Rca => constant.or(schedule),
        };
        if let Some(e) = chosen {
            return Ok(e);
        }
        if policy == PolicyKind::Clrmr && self.l_schedule.is_some() {
            return Err(Error::InvalidArgument(
                "clrmr takes a constant --L; use clrmr-ln for --L-schedule".into(),
            ));
        }
        Ok(match (policy, scenario.exploration) {
            (PolicyKind::ClrmrLn, Exploration::Constant(value)) => Exploration::Schedule(Schedule::Constant { value }),
            (_, e) => e,
        })
    }
}

fn print_summary(run: &RunSummary) {
    let last = run.checkpoints.len() - 1;
    let n = run.checkpoints[last];
    println!(
        "{:<10} n={:<8} seeds={:<3} gamma*={:.6}  R(n)={:.3} +- {:.3}  R(n)/ln n={}",
        run.policy.as_str(),
        n,
        run.seeds.len(),
        run.gamma_star,
        run.mean_regret[last],
        run.std_regret[last],
        run.mean_norm_regret[last].map_or("-".into(), |v| format!("{v:.3}")),
    );
}

#[derive(Serialize)]
struct ChainRow<'a> {
    label: &'a str,
    #[serde(flatten)]
    analysis: &'a ChainAnalysis,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    scenario: &'a str,
    chains: Vec<ChainRow<'a>>,
    bounds: BoundReport,
}

fn analyze(scenario: &str, l: Option<f64>) -> Result<()> {
    let s = Scenario::load(scenario)?;
    let (analyses, _) = scenario_genie(&s)?;
    let l = match (l, s.exploration) {
        (Some(l), _) => l,
        (None, Exploration::Constant(l)) => l,
        (None, Exploration::Schedule(sched)) => sched.at(s.horizon),
    };
    let bounds = theorem_constants(&s.action_set, &s.chains, &analyses, l, s.sense, GAP_ENUMERATION_CAP)?;
    let report = AnalyzeReport {
        scenario: &s.name,
        chains: s
            .chains
            .iter()
            .zip(&analyses)
            .map(|(c, a)| ChainRow {
                label: c.label(),
                analysis: a,
            })
            .collect(),
        bounds,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, policy } => {
            let base = common.load()?;
            let policy = policy.unwrap_or(base.policy);
            let scenario = base.with_policy(policy, common.exploration_for(policy, &base)?)?;
            let summary = run_experiment(&scenario, common.workers)?;
            let dir = common.out_dir(&scenario);
            write_csvs(&summary, &dir)?;
            print_summary(&summary);
            println!("wrote {}", dir.display());
        }
        Command::Analyze { scenario, l } => analyze(&scenario, l)?,
        Command::Compare { common, policies } => {
            let base = common.load()?;
            let scenarios = policies
                .iter()
                .map(|&p| base.with_policy(p, common.exploration_for(p, &base)?))
                .collect::<Result<Vec<_>>>()?;
            let cmp = compare_policies(&scenarios, common.workers)?;
            let dir = common.out_dir(&base);
            write_comparison(&cmp, &dir)?;
            for run in &cmp.runs {
                print_summary(run);
            }
            for pair in &cmp.pairs {
                println!(
                    "{} - {}: mean diff {:.3} at n={}; {} lower, {} tied, {} higher (of {} seeds)",
                    pair.baseline,
                    pair.other,
                    pair.mean_diff.last().copied().unwrap_or(0.0),
                    cmp.runs[0].checkpoints.last().copied().unwrap_or(0),
                    pair.baseline_lower,
                    pair.ties,
                    pair.baseline_higher,
                    cmp.runs[0].seeds.len(),
                );
            }
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
