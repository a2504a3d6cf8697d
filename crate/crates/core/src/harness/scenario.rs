//! JSON scenario schema and its validation.
//!
//! ```json
//! {
//!   "name": "toy",
//!   "sense": "max",
//!   "chains": [
//!     { "label": "a", "p01": 0.2, "p10": 0.8, "rewards": [0.1, 1.0] },
//!     { "label": "b", "transition": [[0.9, 0.1], [0.5, 0.5]], "rewards": [0, 1],
//!       "initial_dist": [1, 0] }
//!   ],
//!   "action_set": { "kind": "explicit", "arms": [[1, 0], [0, 1]] },
//!   "policy": "clrmr",
//!   "exploration": { "constant": 2.0 },
//!   "horizon": 10000,
//!   "seeds": 4,
//!   "master_seed": 7
//! }
//! ```
//!
//! `action_set` is one of `{"kind": "explicit", "arms": [[a_1..a_N], ..]}`,
//! `{"kind": "path", "num_nodes", "edges": [[u, v], ..], "source", "sink",
//! "directed"}` or `{"kind": "matching", "users", "channels"}`. `exploration`
//! is `{"constant": L}` or `{"schedule": {"kind": "log-log" | "log", "scale": c}}`
//! (also `{"kind": "constant", "value": L}`). `seeds` is a count or an explicit
//! list of stream indices.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::{ActionSet, Arm, PathSet, Sense};
use crate::error::{Error, Result};
use crate::markov::{validate_chain, ChainSpec};
use crate::policy::{Exploration, Schedule};

use super::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Clrmr,
    ClrmrLn,
    Rca,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Clrmr => "clrmr",
            PolicyKind::ClrmrLn => "clrmr-ln",
            PolicyKind::Rca => "rca",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clrmr" => Ok(PolicyKind::Clrmr),
            "clrmr-ln" => Ok(PolicyKind::ClrmrLn),
            "rca" => Ok(PolicyKind::Rca),
            other => Err(Error::InvalidArgument(format!(
                "unknown policy `{other}` (expected clrmr, clrmr-ln or rca)"
            ))),
        }
    }
}

/// Parses `loglog:<scale>`, `log:<scale>` or `const:<value>`.
pub fn parse_schedule(s: &str) -> Result<Schedule> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("schedule `{s}` must look like loglog:<scale>")))?;
    let v: f64 = value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("schedule parameter `{value}` is not a number")))?;
    match kind {
        "loglog" | "log-log" => Ok(Schedule::LogLog { scale: v }),
        "log" => Ok(Schedule::Log { scale: v }),
        "const" | "constant" => Ok(Schedule::Constant { value: v }),
        other => Err(Error::InvalidArgument(format!("unknown schedule `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainDesc {
    TwoState {
        label: String,
        p01: f64,
        p10: f64,
        rewards: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_dist: Option<Vec<f64>>,
    },
    Matrix {
        label: String,
        transition: Vec<Vec<f64>>,
        rewards: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_dist: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ActionSetDesc {
    Explicit {
        arms: Vec<Vec<f64>>,
    },
    Path {
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
        #[serde(default = "yes")]
        directed: bool,
    },
    Matching {
        users: usize,
        channels: usize,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ExplorationDesc {
    Constant(f64),
    Schedule(Schedule),
}

impl From<ExplorationDesc> for Exploration {
    fn from(d: ExplorationDesc) -> Self {
        match d {
            ExplorationDesc::Constant(l) => Exploration::Constant(l),
            ExplorationDesc::Schedule(s) => Exploration::Schedule(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedsDesc {
    Count(u64),
    List(Vec<u64>),
}

/// The scenario file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub sense: Sense,
    pub chains: Vec<ChainDesc>,
    pub action_set: ActionSetDesc,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    pub exploration: ExplorationDesc,
    #[serde(default)]
    pub reward_floor: f64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: SeedsDesc,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_policy() -> PolicyKind {
    PolicyKind::Clrmr
}

fn default_horizon() -> u64 {
    presets::DEFAULT_HORIZON
}

fn default_seeds() -> SeedsDesc {
    SeedsDesc::Count(presets::DEFAULT_SEEDS)
}

/// A validated experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub chains: Arc<[ChainSpec]>,
    pub action_set: Arc<ActionSet>,
    pub sense: Sense,
    pub policy: PolicyKind,
    pub exploration: Exploration,
    pub reward_floor: f64,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    /// Loads a preset by name or a JSON file by path.
    pub fn load(path_or_preset: &str) -> Result<Self> {
        if let Some(file) = presets::preset(path_or_preset) {
            return Self::from_file(file);
        }
        let path = Path::new(path_or_preset);
        if !path.exists() {
            return Err(Error::Scenario(format!(
                "`{path_or_preset}` is neither a preset ({}) nor an existing file",
                presets::PRESETS.join(", ")
            )));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Scenario(format!("at `{}`: {}", e.path(), e.inner())))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let chains = file
            .chains
            .into_iter()
            .enumerate()
            .map(|(k, desc)| build_chain(desc).map_err(|e| Error::Scenario(format!("chains[{k}]: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let n = chains.len();
        let action_set = build_action_set(file.action_set, n).map_err(|e| Error::Scenario(format!("action_set: {e}")))?;
        if action_set.num_chains() != n {
            return Err(Error::Scenario(format!(
                "action_set: defines {} chains but {} are listed",
                action_set.num_chains(),
                n
            )));
        }
        let seeds = match file.seeds {
            SeedsDesc::Count(k) => (0..k).collect(),
            SeedsDesc::List(list) => list,
        };
        let scenario = Scenario {
            name: file.name.unwrap_or_else(|| "scenario".into()),
            chains: chains.into(),
            action_set: Arc::new(action_set),
            sense: file.sense,
            policy: file.policy,
            exploration: file.exploration.into(),
            reward_floor: file.reward_floor,
            horizon: file.horizon,
            seeds,
            master_seed: file.master_seed,
            output_dir: file.output_dir,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.chains.len();
        if self.horizon < n as u64 {
            return Err(Error::Scenario(format!(
                "horizon: {} is shorter than the {} chains initialization needs",
                self.horizon, n
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Scenario("seeds: at least one seed is required".into()));
        }
        if !self.reward_floor.is_finite() {
            return Err(Error::Scenario("reward_floor: must be finite".into()));
        }
        self.exploration
            .validate()
            .map_err(|e| Error::Scenario(format!("exploration: {e}")))?;
        match (self.policy, &self.exploration) {
            (PolicyKind::Clrmr, Exploration::Schedule(_)) => Err(Error::Scenario(
                "exploration: policy clrmr needs a constant L (use clrmr-ln for schedules)".into(),
            )),
            (PolicyKind::ClrmrLn, Exploration::Constant(_)) => Err(Error::Scenario(
                "exploration: policy clrmr-ln needs a schedule".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Same scenario under another policy and exploration setting.
    pub fn with_policy(&self, policy: PolicyKind, exploration: Exploration) -> Result<Self> {
        let mut s = self.clone();
        s.policy = policy;
        s.exploration = exploration;
        s.validate()?;
        Ok(s)
    }
}

/// Loads a preset by name or a JSON scenario file by path.
pub fn load_scenario(path_or_preset: &str) -> Result<Scenario> {
    Scenario::load(path_or_preset)
}

fn build_chain(desc: ChainDesc) -> Result<ChainSpec> {
    let spec = match desc {
        ChainDesc::TwoState {
            label,
            p01,
            p10,
            rewards,
            initial_dist,
        } => {
            let c = ChainSpec::two_state(label, p01, p10, rewards)?;
            match initial_dist {
                Some(d) => c.with_initial(d)?,
                None => c,
            }
        }
        ChainDesc::Matrix {
            label,
            transition,
            rewards,
            initial_dist,
        } => ChainSpec::new(label, transition, rewards, initial_dist)?,
    };
    validate_chain(&spec)?;
    Ok(spec)
}

fn build_action_set(desc: ActionSetDesc, n: usize) -> Result<ActionSet> {
    match desc {
        ActionSetDesc::Explicit { arms } => {
            let arms = arms
                .into_iter()
                .enumerate()
                .map(|(k, a)| {
                    if a.len() != n {
                        return Err(Error::InvalidArgument(format!(
                            "arms[{k}] has {} coefficients for {n} chains",
                            a.len()
                        )));
                    }
                    Arm::new(a).map_err(|e| Error::InvalidArgument(format!("arms[{k}]: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            ActionSet::explicit(n, arms)
        }
        ActionSetDesc::Path {
            num_nodes,
            edges,
            source,
            sink,
            directed,
        } => ActionSet::path(PathSet {
            num_nodes,
            edges,
            source,
            sink,
            directed,
        }),
        ActionSetDesc::Matching { users, channels } => ActionSet::matching(users, channels),
    }
}
