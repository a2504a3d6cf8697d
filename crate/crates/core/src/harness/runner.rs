//! Seeded Monte-Carlo replications and their CSV output.
//!
//! Seed `k` of an experiment draws from ChaCha8 stream `k` of the master seed,
//! so a replication's trajectory depends only on `(master_seed, k)`. Seeds run
//! on a rayon pool and are collected back in seed order; every aggregate is
//! then folded sequentially, which keeps the output bytes independent of the
//! pool size.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::{Arm, Sense};
use crate::error::{Error, Result};
use crate::markov::{analyze_chain, ChainAnalysis, Environment};
use crate::oracle::{genie, mean_rewards, GenieReport, PlayCount, GAP_ENUMERATION_CAP};
use crate::policy::{simulate_with, Clrmr, ClrmrConfig, Phase, Policy, Rca};

use super::scenario::{PolicyKind, Scenario};

/// Largest arm family the arm-level baseline accepts.
pub const RCA_ARM_CAP: usize = 200_000;

/// Checkpoints per decade of the logarithmic grid.
const GRID_PER_DECADE: u32 = 10;

/// Logarithmically spaced slots `2 ..= horizon`, always ending at `horizon`.
pub fn checkpoint_grid(horizon: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut k = 0u32;
    loop {
        let n = 10f64.powf(k as f64 / GRID_PER_DECADE as f64).round() as u64;
        k += 1;
        if n >= horizon {
            break;
        }
        if n >= 2 && grid.last() != Some(&n) {
            grid.push(n);
        }
    }
    grid.push(horizon);
    grid
}

/// RNG of replication `seed`.
pub fn seed_rng(master_seed: u64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(seed);
    rng
}

/// Fresh policy for the scenario's policy kind.
pub fn build_policy(scenario: &Scenario) -> Result<Box<dyn Policy>> {
    let config = ClrmrConfig {
        exploration: scenario.exploration,
        sense: scenario.sense,
        reward_floor: scenario.reward_floor,
    };
    Ok(match scenario.policy {
        PolicyKind::Clrmr | PolicyKind::ClrmrLn => Box::new(Clrmr::new(scenario.action_set.clone(), config)?),
        PolicyKind::Rca => Box::new(Rca::new(&scenario.action_set, config, RCA_ARM_CAP)?),
    })
}

/// Chain analyses and the genie of a scenario.
pub fn scenario_genie(scenario: &Scenario) -> Result<(Vec<ChainAnalysis>, GenieReport)> {
    let analyses = scenario
        .chains
        .iter()
        .map(analyze_chain)
        .collect::<Result<Vec<_>>>()?;
    let genie = genie(&scenario.action_set, &analyses, scenario.sense, GAP_ENUMERATION_CAP)?;
    Ok((analyses, genie))
}

/// Outcome of one replication, sampled on the checkpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub cum_reward: Vec<f64>,
    pub regret: Vec<f64>,
    /// `sum_a Delta_a T_a(n)`.
    pub weighted_suboptimal: Vec<f64>,
    /// Slots spent on arms with a positive gap.
    pub suboptimal_slots: Vec<u64>,
    pub plays: BTreeMap<Arc<Arm>, PlayCount>,
    pub blocks: u64,
}

impl SeedRun {
    pub fn final_regret(&self) -> f64 {
        *self.regret.last().expect("grid is never empty")
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: String,
    pub policy: PolicyKind,
    pub sense: Sense,
    pub gamma_star: f64,
    pub checkpoints: Vec<u64>,
    pub seeds: Vec<SeedRun>,
    pub mean_cum_reward: Vec<f64>,
    pub mean_regret: Vec<f64>,
    pub std_regret: Vec<f64>,
    pub mean_norm_regret: Vec<Option<f64>>,
    pub std_norm_regret: Vec<Option<f64>>,
}

impl RunSummary {
    pub fn final_regrets(&self) -> Vec<f64> {
        self.seeds.iter().map(SeedRun::final_regret).collect()
    }

    pub fn checkpoint_index(&self, slot: u64) -> Option<usize> {
        self.checkpoints.iter().position(|&n| n == slot)
    }

    /// Mean over seeds of `sum_a Delta_a T_a(n)` at each checkpoint.
    pub fn mean_weighted_suboptimal(&self) -> Vec<f64> {
        column_mean(&self.seeds, |s, k| s.weighted_suboptimal[k], self.checkpoints.len())
    }
}

fn column_mean(seeds: &[SeedRun], f: impl Fn(&SeedRun, usize) -> f64, len: usize) -> Vec<f64> {
    (0..len).map(|k| mean_std(seeds.iter().map(|s| f(s, k))).0).collect()
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_seed(scenario: &Scenario, genie: &GenieReport, mu: &[f64], grid: &[u64], seed: u64) -> Result<SeedRun> {
    let mut env = Environment::new(scenario.chains.clone(), seed_rng(scenario.master_seed, seed))?;
    let mut policy = build_policy(scenario)?;
    let mut run = SeedRun {
        seed,
        cum_reward: Vec::with_capacity(grid.len()),
        regret: Vec::with_capacity(grid.len()),
        weighted_suboptimal: Vec::with_capacity(grid.len()),
        suboptimal_slots: Vec::with_capacity(grid.len()),
        plays: BTreeMap::new(),
        blocks: 0,
    };
    let mut cum = 0.0;
    let mut weighted = 0.0;
    let mut subopt = 0u64;
    let mut last: Option<(Arc<Arm>, f64)> = None;
    let mut next = 0;
    simulate_with(&mut env, policy.as_mut(), scenario.horizon, |e| {
        cum += e.reward;
        let gap = match &last {
            Some((arm, gap)) if Arc::ptr_eq(arm, &e.arm) => *gap,
            _ => {
                let gap = genie.gap(&e.arm, mu);
                last = Some((e.arm.clone(), gap));
                gap
            }
        };
        weighted += gap;
        if gap > 0.0 {
            subopt += 1;
        }
        let count = run.plays.entry(e.arm.clone()).or_default();
        count.slots += 1;
        if e.phase == Phase::Sb3 {
            count.blocks += 1;
            run.blocks += 1;
        }
        if next < grid.len() && e.slot == grid[next] {
            let baseline = e.slot as f64 * genie.gamma_star;
            run.cum_reward.push(cum);
            run.regret.push(match scenario.sense {
                Sense::Max => baseline - cum,
                Sense::Min => cum - baseline,
            });
            run.weighted_suboptimal.push(weighted);
            run.suboptimal_slots.push(subopt);
            next += 1;
        }
    })?;
    Ok(run)
}

/// Runs every seed of the scenario on a pool of `workers` threads
/// (0 = rayon's default).
pub fn run_experiment(scenario: &Scenario, workers: usize) -> Result<RunSummary> {
    let (analyses, genie) = scenario_genie(scenario)?;
    run_with_genie(scenario, &analyses, &genie, workers)
}

fn run_with_genie(
    scenario: &Scenario,
    analyses: &[ChainAnalysis],
    genie: &GenieReport,
    workers: usize,
) -> Result<RunSummary> {
    scenario.validate()?;
    // Surface construction errors (e.g. an un-enumerable family for RCA) once.
    build_policy(scenario)?;
    let mu = mean_rewards(analyses);
    let grid = checkpoint_grid(scenario.horizon);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let seeds: Vec<SeedRun> = pool.install(|| {
        scenario
            .seeds
            .par_iter()
            .map(|&seed| run_seed(scenario, genie, &mu, &grid, seed))
            .collect::<Result<Vec<_>>>()
    })?;

    let k = grid.len();
    let mut summary = RunSummary {
        scenario: scenario.name.clone(),
        policy: scenario.policy,
        sense: scenario.sense,
        gamma_star: genie.gamma_star,
        checkpoints: grid,
        mean_cum_reward: column_mean(&seeds, |s, j| s.cum_reward[j], k),
        mean_regret: Vec::with_capacity(k),
        std_regret: Vec::with_capacity(k),
        mean_norm_regret: Vec::with_capacity(k),
        std_norm_regret: Vec::with_capacity(k),
        seeds,
    };
    for (j, &n) in summary.checkpoints.iter().enumerate() {
        let (m, s) = mean_std(summary.seeds.iter().map(|r| r.regret[j]));
        summary.mean_regret.push(m);
        summary.std_regret.push(s);
        let norm = (n >= 2).then(|| mean_std(summary.seeds.iter().map(|r| r.regret[j] / (n as f64).ln())));
        summary.mean_norm_regret.push(norm.map(|x| x.0));
        summary.std_norm_regret.push(norm.map(|x| x.1));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct TraceRow<'a> {
    slot: u64,
    policy: &'a str,
    seed: u64,
    cum_reward: f64,
    regret: f64,
    norm_regret: Option<f64>,
}

#[derive(Serialize)]
struct AggregateRow<'a> {
    slot: u64,
    policy: &'a str,
    mean_cum_reward: f64,
    mean_regret: f64,
    std_regret: f64,
    mean_norm_regret: Option<f64>,
    std_norm_regret: Option<f64>,
}

#[derive(Serialize)]
struct PlayRow<'a> {
    policy: &'a str,
    seed: u64,
    arm: String,
    slots: u64,
    blocks: u64,
}

fn norm(regret: f64, n: u64) -> Option<f64> {
    (n >= 2).then(|| regret / (n as f64).ln())
}

/// Writes `<policy>_seed<k>.csv` per seed, `<policy>_aggregate.csv` and
/// `<policy>_plays.csv` into `dir`.
pub fn write_csvs(summary: &RunSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let policy = summary.policy.as_str();
    for run in &summary.seeds {
        let mut w = csv::Writer::from_path(dir.join(format!("{policy}_seed{}.csv", run.seed)))?;
        for (j, &slot) in summary.checkpoints.iter().enumerate() {
            w.serialize(TraceRow {
                slot,
                policy,
                seed: run.seed,
                cum_reward: run.cum_reward[j],
                regret: run.regret[j],
                norm_regret: norm(run.regret[j], slot),
            })?;
        }
        w.flush()?;
    }
    let mut w = csv::Writer::from_path(dir.join(format!("{policy}_aggregate.csv")))?;
    for (j, &slot) in summary.checkpoints.iter().enumerate() {
        w.serialize(AggregateRow {
            slot,
            policy,
            mean_cum_reward: summary.mean_cum_reward[j],
            mean_regret: summary.mean_regret[j],
            std_regret: summary.std_regret[j],
            mean_norm_regret: summary.mean_norm_regret[j],
            std_norm_regret: summary.std_norm_regret[j],
        })?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join(format!("{policy}_plays.csv")))?;
    for run in &summary.seeds {
        for (arm, count) in &run.plays {
            w.serialize(PlayRow {
                policy,
                seed: run.seed,
                arm: arm.id(),
                slots: count.slots,
                blocks: count.blocks,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Paired regret differences of one policy against the baseline.
#[derive(Debug, Clone)]
pub struct PairedDiff {
    pub baseline: PolicyKind,
    pub other: PolicyKind,
    /// `diffs[j][s]`: baseline regret minus other regret at checkpoint `j`, seed `s`.
    pub diffs: Vec<Vec<f64>>,
    pub mean_diff: Vec<f64>,
    /// Seeds where the baseline ends with lower, equal and higher regret.
    pub baseline_lower: usize,
    pub ties: usize,
    pub baseline_higher: usize,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<RunSummary>,
    pub pairs: Vec<PairedDiff>,
}

/// Runs each policy over the same seeds and pairs every later policy with
/// the first one.
pub fn compare_policies(scenarios: &[Scenario], workers: usize) -> Result<Comparison> {
    let first = scenarios
        .first()
        .ok_or_else(|| Error::InvalidArgument("no policies to compare".into()))?;
    if scenarios
        .iter()
        .any(|s| s.seeds != first.seeds || s.horizon != first.horizon || s.master_seed != first.master_seed)
    {
        return Err(Error::InvalidArgument("compared runs must share seeds and horizon".into()));
    }
    let (analyses, genie) = scenario_genie(first)?;
    let runs = scenarios
        .iter()
        .map(|s| run_with_genie(s, &analyses, &genie, workers))
        .collect::<Result<Vec<_>>>()?;
    let base = &runs[0];
    let pairs = runs[1..]
        .iter()
        .map(|other| {
            let diffs: Vec<Vec<f64>> = (0..base.checkpoints.len())
                .map(|j| {
                    base.seeds
                        .iter()
                        .zip(&other.seeds)
                        .map(|(a, b)| a.regret[j] - b.regret[j])
                        .collect()
                })
                .collect();
            let mean_diff = diffs.iter().map(|d| mean_std(d.iter().copied()).0).collect();
            let last = diffs.last().expect("grid is never empty");
            PairedDiff {
                baseline: base.policy,
                other: other.policy,
                baseline_lower: last.iter().filter(|&&d| d < 0.0).count(),
                ties: last.iter().filter(|&&d| d == 0.0).count(),
                baseline_higher: last.iter().filter(|&&d| d > 0.0).count(),
                mean_diff,
                diffs,
            }
        })
        .collect();
    Ok(Comparison { runs, pairs })
}

#[derive(Serialize)]
struct DiffRow<'a> {
    slot: u64,
    baseline: &'a str,
    other: &'a str,
    seed: u64,
    regret_diff: f64,
}

/// Writes every run's CSVs plus `compare.csv` with the paired differences.
pub fn write_comparison(cmp: &Comparison, dir: &Path) -> Result<()> {
    for run in &cmp.runs {
        write_csvs(run, dir)?;
    }
    let mut w = csv::Writer::from_path(dir.join("compare.csv"))?;
    let base = &cmp.runs[0];
    for pair in &cmp.pairs {
        for (j, &slot) in base.checkpoints.iter().enumerate() {
            for (s, run) in base.seeds.iter().enumerate() {
                w.serialize(DiffRow {
                    slot,
                    baseline: pair.baseline.as_str(),
                    other: pair.other.as_str(),
                    seed: run.seed,
                    regret_diff: pair.diffs[j][s],
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
