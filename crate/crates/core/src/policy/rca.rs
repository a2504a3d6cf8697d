//! Arm-level regenerative baseline.
//!
//! The same block mechanics as [`super::Clrmr`], but every arm keeps its own
//! anchor joint state, SB2 reward sum and SB2 count, and the index is a
//! UCB1-form bonus on the arm's scalar reward. Storage and per-block work are
//! linear in the number of arms, so the family must be enumerable.

use std::sync::Arc;

use crate::action::{ActionSet, Arm, Sense};
use crate::error::{Error, Result};

use super::{check_support, index_value, ClrmrConfig, Observation, Phase, Policy, SlotReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Init { cursor: usize },
    BlockStart,
    Sb1,
    Sb2,
}

#[derive(Debug, Clone)]
pub struct Rca {
    config: ClrmrConfig,
    arms: Vec<Arc<Arm>>,
    sums: Vec<f64>,
    counts: Vec<u64>,
    anchors: Vec<Option<Vec<usize>>>,
    t: u64,
    t2: u64,
    b: u64,
    t2_slot: u64,
    stage: Stage,
    current: Option<usize>,
}

impl Rca {
    /// Enumerates the arm family; fails when it has more than `cap` arms.
    pub fn new(action_set: &ActionSet, config: ClrmrConfig, cap: usize) -> Result<Self> {
        config.exploration.validate()?;
        let arms: Vec<Arc<Arm>> = action_set.enumerate_arms(cap)?.into_iter().map(Arc::new).collect();
        let k = arms.len();
        Ok(Rca {
            config,
            arms,
            sums: vec![0.0; k],
            counts: vec![0; k],
            anchors: vec![None; k],
            t: 1,
            t2: 1,
            b: 0,
            t2_slot: 0,
            stage: Stage::Init { cursor: 0 },
            current: None,
        })
    }

    pub fn arms(&self) -> &[Arc<Arm>] {
        &self.arms
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn t2(&self) -> u64 {
        self.t2
    }

    pub fn blocks(&self) -> u64 {
        self.b
    }

    /// Number of per-arm scalars held (sums, counts, anchors).
    pub fn stored_arm_entries(&self) -> usize {
        self.sums.len() + self.counts.len() + self.anchors.len()
    }

    fn select_index(&self) -> usize {
        let l = self.config.exploration.at(self.t2_slot);
        let mut best = 0;
        let mut best_value = f64::NAN;
        for k in 0..self.arms.len() {
            let v = index_value(
                self.sums[k] / self.counts[k] as f64,
                self.counts[k],
                self.t2,
                l,
                self.config.sense,
                self.config.reward_floor,
            );
            if k == 0 || self.config.sense.better(v, best_value) {
                best = k;
                best_value = v;
            }
        }
        best
    }

    fn record(&mut self, arm: usize, reward: f64) {
        self.t2 += 1;
        self.t2_slot = self.t - 1;
        self.sums[arm] += reward;
        self.counts[arm] += 1;
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

impl Policy for Rca {
    fn name(&self) -> &'static str {
        "rca"
    }

    fn sense(&self) -> Sense {
        self.config.sense
    }

    fn select_action(&mut self) -> Result<Arc<Arm>> {
        if let Some(k) = self.current {
            return Ok(self.arms[k].clone());
        }
        let k = match self.stage {
            Stage::Init { cursor } => cursor,
            Stage::BlockStart => {
                self.stage = Stage::Sb1;
                self.select_index()
            }
            Stage::Sb1 | Stage::Sb2 => return Err(Error::NoActiveArm),
        };
        self.current = Some(k);
        Ok(self.arms[k].clone())
    }

    fn observe(&mut self, observations: &[Observation]) -> Result<SlotReport> {
        let k = self.current.ok_or(Error::NoActiveArm)?;
        let arm = self.arms[k].clone();
        check_support(&arm, observations)?;
        self.t += 1;
        let reward: f64 = observations
            .iter()
            .zip(arm.coefficients())
            .map(|(o, a)| a * o.reward)
            .sum();
        let joint_is_anchor = |anchor: &Option<Vec<usize>>| {
            anchor
                .as_ref()
                .is_some_and(|z| z.iter().zip(observations).all(|(&s, o)| s == o.state))
        };
        match self.stage {
            Stage::Init { cursor } => {
                if self.anchors[k].is_none() {
                    self.anchors[k] = Some(observations.iter().map(|o| o.state).collect());
                }
                self.record(k, reward);
                if joint_is_anchor(&self.anchors[k]) {
                    self.current = None;
                    self.stage = if cursor + 1 == self.arms.len() {
                        Stage::BlockStart
                    } else {
                        Stage::Init { cursor: cursor + 1 }
                    };
                }
                Ok(self.report(Phase::Init, false))
            }
            Stage::Sb1 => {
                if joint_is_anchor(&self.anchors[k]) {
                    self.stage = Stage::Sb2;
                    self.record(k, reward);
                    Ok(self.report(Phase::Sb2, false))
                } else {
                    Ok(self.report(Phase::Sb1, false))
                }
            }
            Stage::Sb2 => {
                if joint_is_anchor(&self.anchors[k]) {
                    self.b += 1;
                    self.stage = Stage::BlockStart;
                    self.current = None;
                    Ok(self.report(Phase::Sb3, true))
                } else {
                    self.record(k, reward);
                    Ok(self.report(Phase::Sb2, false))
                }
            }
            Stage::BlockStart => Err(Error::NoActiveArm),
        }
    }
}
