//! The block-structured regenerative index policy.
//!
//! Memory is two length-N vectors (SB2 reward sums and SB2 observation
//! counts), the per-chain anchor states, a handful of counters and the arm of
//! the current block. No statistic is ever kept per arm.
//!
//! Each block plays one arm chosen by solving the linear problem over the
//! per-chain indices. The block runs until the joint state of the arm's
//! support has hit the anchor vector twice: slots before the first hit are
//! SB1, slots from the first hit up to (excluding) the second are SB2, and the
//! second hit is the single SB3 slot. Only SB2 observations are recorded, so
//! the recorded samples of each chain are concatenated regenerative cycles.

use std::sync::Arc;

use crate::action::{ActionSet, Arm, Sense};
use crate::error::{Error, Result};

use super::{check_support, Exploration, Observation, Phase, Policy, SlotReport};

/// Enumeration cap used when looking for covering paths.
const COVER_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClrmrConfig {
    pub exploration: Exploration,
    pub sense: Sense,
    /// Lower clamp of min-sense indices; keeps shortest-path weights nonnegative.
    pub reward_floor: f64,
}

impl ClrmrConfig {
    pub fn new(exploration: Exploration, sense: Sense) -> Self {
        ClrmrConfig {
            exploration,
            sense,
            reward_floor: 0.0,
        }
    }
}

/// Index of one chain: sample mean plus (max) or minus (min, clamped at
/// `floor`) the exploration term `sqrt(L ln t2 / m)`.
pub fn index_value(mean: f64, count: u64, t2: u64, l: f64, sense: Sense, floor: f64) -> f64 {
    let bonus = (l * (t2 as f64).ln() / count as f64).sqrt();
    match sense {
        Sense::Max => mean + bonus,
        Sense::Min => (mean - bonus).max(floor),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    /// Initialization pass for chain `cursor`.
    Init { cursor: usize },
    BlockStart,
    Sb1,
    Sb2,
}

#[derive(Debug, Clone)]
pub struct Clrmr {
    action_set: Arc<ActionSet>,
    config: ClrmrConfig,
    t: u64,
    t2: u64,
    b: u64,
    /// Slot at which `t2` last advanced, `n(t2)` of the growing schedule.
    t2_slot: u64,
    sums: Vec<f64>,
    counts: Vec<u64>,
    anchors: Vec<Option<usize>>,
    stage: Stage,
    current: Option<Arc<Arm>>,
}

impl Clrmr {
    /// Fails when some chain belongs to no arm.
    pub fn new(action_set: Arc<ActionSet>, config: ClrmrConfig) -> Result<Self> {
        config.exploration.validate()?;
        if !config.reward_floor.is_finite() {
            return Err(Error::InvalidArgument("reward floor must be finite".into()));
        }
        let n = action_set.num_chains();
        action_set.covering_arms(COVER_CAP)?;
        Ok(Clrmr {
            action_set,
            config,
            t: 1,
            t2: 1,
            b: 0,
            t2_slot: 0,
            sums: vec![0.0; n],
            counts: vec![0; n],
            anchors: vec![None; n],
            stage: Stage::Init { cursor: 0 },
            current: None,
        })
    }

    pub fn config(&self) -> &ClrmrConfig {
        &self.config
    }

    /// One more than the number of slots played.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// One more than the number of initialization and SB2 slots.
    pub fn t2(&self) -> u64 {
        self.t2
    }

    /// Completed main-loop blocks.
    pub fn blocks(&self) -> u64 {
        self.b
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// Sample means of the recorded observations (0 for unobserved chains).
    pub fn means(&self) -> Vec<f64> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &m)| if m == 0 { 0.0 } else { s / m as f64 })
            .collect()
    }

    pub fn anchors(&self) -> &[Option<usize>] {
        &self.anchors
    }

    pub fn in_initialization(&self) -> bool {
        matches!(self.stage, Stage::Init { .. })
    }

    pub fn current_arm(&self) -> Option<&Arc<Arm>> {
        self.current.as_ref()
    }

    /// Exploration weight used at the next block start.
    pub fn current_l(&self) -> f64 {
        self.config.exploration.at(self.t2_slot)
    }

    /// Per-chain indices as they would be computed at a block start.
    pub fn indices(&self) -> Vec<f64> {
        let l = self.current_l();
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &m)| {
                index_value(
                    s / m as f64,
                    m,
                    self.t2,
                    l,
                    self.config.sense,
                    self.config.reward_floor,
                )
            })
            .collect()
    }

    fn at_anchor(&self, observations: &[Observation]) -> bool {
        observations
            .iter()
            .all(|o| self.anchors[o.chain] == Some(o.state))
    }

    fn record(&mut self, observations: &[Observation]) {
        self.t2 += 1;
        self.t2_slot = self.t - 1;
        for o in observations {
            self.sums[o.chain] += o.reward;
            self.counts[o.chain] += 1;
        }
    }

    fn report(&self, phase: Phase, block_done: bool) -> SlotReport {
        let block = match phase {
            Phase::Init => 0,
            Phase::Sb3 => self.b,
            _ => self.b + 1,
        };
        SlotReport {
            phase,
            block,
            t2: self.t2,
            block_done,
        }
    }
}

impl Policy for Clrmr {
    fn name(&self) -> &'static str {
        match self.config.exploration {
            Exploration::Constant(_) => "clrmr",
            Exploration::Schedule(_) => "clrmr-ln",
        }
    }

    fn sense(&self) -> Sense {
        self.config.sense
    }

    fn select_action(&mut self) -> Result<Arc<Arm>> {
        if let Some(arm) = &self.current {
            return Ok(arm.clone());
        }
        let arm = match self.stage {
            Stage::Init { cursor } => self.action_set.covering_arm(cursor, COVER_CAP)?,
            Stage::BlockStart => {
                let indices = self.indices();
                let arm = self.action_set.solve_linear(&indices, self.config.sense)?;
                self.stage = Stage::Sb1;
                arm
            }
            Stage::Sb1 | Stage::Sb2 => return Err(Error::NoActiveArm),
        };
        let arm = Arc::new(arm);
        self.current = Some(arm.clone());
        Ok(arm)
    }

    fn observe(&mut self, observations: &[Observation]) -> Result<SlotReport> {
        let arm = self.current.clone().ok_or(Error::NoActiveArm)?;
        check_support(&arm, observations)?;
        self.t += 1;
        match self.stage {
            Stage::Init { cursor } => {
                for o in observations {
                    self.anchors[o.chain].get_or_insert(o.state);
                }
                self.record(observations);
                if self.at_anchor(observations) {
                    self.current = None;
                    self.stage = if cursor + 1 == self.sums.len() {
                        Stage::BlockStart
                    } else {
                        Stage::Init { cursor: cursor + 1 }
                    };
                }
                Ok(self.report(Phase::Init, false))
            }
            Stage::Sb1 => {
                if self.at_anchor(observations) {
                    self.stage = Stage::Sb2;
                    self.record(observations);
                    Ok(self.report(Phase::Sb2, false))
                } else {
                    Ok(self.report(Phase::Sb1, false))
                }
            }
            Stage::Sb2 => {
                if self.at_anchor(observations) {
                    self.b += 1;
                    self.stage = Stage::BlockStart;
                    self.current = None;
                    Ok(self.report(Phase::Sb3, true))
                } else {
                    self.record(observations);
                    Ok(self.report(Phase::Sb2, false))
                }
            }
            Stage::BlockStart => Err(Error::NoActiveArm),
        }
    }
}
