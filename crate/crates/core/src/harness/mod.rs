//! Scenario files, built-in presets and the experiment runner.

pub mod presets;
mod runner;
mod scenario;

pub use runner::{
    build_policy, checkpoint_grid, compare_policies, mean_std, run_experiment, scenario_genie, seed_rng, write_comparison,
    write_csvs, Comparison, PairedDiff, RunSummary, SeedRun, RCA_ARM_CAP,
};
pub use scenario::{
    load_scenario, parse_schedule, ActionSetDesc, ChainDesc, ExplorationDesc, PolicyKind, Scenario, ScenarioFile, SeedsDesc,
};
