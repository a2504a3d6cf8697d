//! Learning policies and the slot loop that drives them.

mod clrmr;
mod rca;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::{Arm, Sense};
use crate::error::{Error, Result};
use crate::markov::Environment;

pub use clrmr::{index_value, Clrmr, ClrmrConfig};
pub use rca::Rca;

/// Which part of a block a slot belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Initialization passes; statistics are updated every slot.
    Init,
    /// Waiting for the anchor state; nothing is recorded.
    Sb1,
    /// The regenerative cycle; the only main-loop slots that feed statistics.
    Sb2,
    /// The closing return to the anchor.
    Sb3,
}

/// State and reward of one observed chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub chain: usize,
    pub state: usize,
    pub reward: f64,
}

/// What a policy did with one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotReport {
    pub phase: Phase,
    /// 1-based index of the main-loop block, 0 during initialization.
    pub block: u64,
    /// The SB2 counter after this slot.
    pub t2: u64,
    pub block_done: bool,
}

/// Exploration weight `L` of the index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exploration {
    Constant(f64),
    Schedule(Schedule),
}

/// A non-decreasing, diverging `L(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    /// `L(n) = value` for every n; only useful for comparisons.
    Constant { value: f64 },
    /// `L(n) = scale * (1 + ln(1 + ln(1 + n)))`.
    LogLog { scale: f64 },
    /// `L(n) = scale * (1 + ln(1 + n))`.
    Log { scale: f64 },
}

impl Schedule {
    pub fn at(&self, n: u64) -> f64 {
        let n = n as f64;
        match *self {
            Schedule::Constant { value } => value,
            Schedule::LogLog { scale } => scale * (1.0 + (1.0 + (1.0 + n).ln()).ln()),
            Schedule::Log { scale } => scale * (1.0 + (1.0 + n).ln()),
        }
    }
}

impl Exploration {
    /// `L` in force once the SB2 counter was last advanced at slot `n`.
    pub fn at(&self, n: u64) -> f64 {
        match self {
            Exploration::Constant(l) => *l,
            Exploration::Schedule(s) => s.at(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Exploration::Constant(l) if !(l.is_finite() && *l > 0.0) => Err(Error::InvalidArgument(format!(
                "exploration constant must be positive, got {l}"
            ))),
            Exploration::Constant(_) => Ok(()),
            Exploration::Schedule(s) => {
                let mut prev = 0.0;
                for k in 0..64 {
                    let n = if k == 0 { 0 } else { 1u64 << k.min(62) };
                    let l = s.at(n);
                    if !(l.is_finite() && l > 0.0) || l < prev {
                        return Err(Error::InvalidArgument(format!(
                            "schedule must be positive and non-decreasing, L({n}) = {l}"
                        )));
                    }
                    prev = l;
                }
                Ok(())
            }
        }
    }
}

/// Common interface of the learners.
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    fn sense(&self) -> Sense;

    /// The arm to play in the next slot.
    fn select_action(&mut self) -> Result<Arc<Arm>>;

    /// Feeds back the states of exactly the played arm's support, ascending.
    fn observe(&mut self, observations: &[Observation]) -> Result<SlotReport>;
}

/// One row of the per-slot event log.
#[derive(Debug, Clone)]
pub struct SlotEvent {
    /// 1-based slot index.
    pub slot: u64,
    pub phase: Phase,
    pub block: u64,
    pub arm: Arc<Arm>,
    pub states: Vec<usize>,
    pub rewards: Vec<f64>,
    /// `sum_i a_i r^i_{x_i}` over the support.
    pub reward: f64,
    pub t2: u64,
}

/// Plays `horizon` slots, returning the event log.
///
/// Each slot the environment advances first and the policy then sees the
/// post-transition states of its arm's support.
pub fn simulate(env: &mut Environment, policy: &mut dyn Policy, horizon: u64) -> Result<Vec<SlotEvent>> {
    let mut log = Vec::with_capacity(horizon as usize);
    simulate_with(env, policy, horizon, |e| log.push(e))?;
    Ok(log)
}

/// Like [`simulate`] but hands each event to `sink` instead of keeping it.
pub fn simulate_with<F: FnMut(SlotEvent)>(
    env: &mut Environment,
    policy: &mut dyn Policy,
    horizon: u64,
    mut sink: F,
) -> Result<()> {
    let mut observations = Vec::new();
    for slot in 1..=horizon {
        let arm = policy.select_action()?;
        env.step_all();
        observations.clear();
        observations.extend(arm.support().iter().map(|&i| Observation {
            chain: i,
            state: env.state(i),
            reward: env.reward(i),
        }));
        let report = policy.observe(&observations)?;
        let reward = observations
            .iter()
            .zip(arm.coefficients())
            .map(|(o, a)| a * o.reward)
            .sum();
        sink(SlotEvent {
            slot,
            phase: report.phase,
            block: report.block,
            states: observations.iter().map(|o| o.state).collect(),
            rewards: observations.iter().map(|o| o.reward).collect(),
            reward,
            t2: report.t2,
            arm,
        });
    }
    Ok(())
}

pub(crate) fn check_support(arm: &Arm, observations: &[Observation]) -> Result<()> {
    if observations.len() != arm.support().len()
        || observations.iter().zip(arm.support()).any(|(o, &i)| o.chain != i)
    {
        return Err(Error::ObservationMismatch(format!(
            "arm {arm} observed chains {:?}",
            observations.iter().map(|o| o.chain).collect::<Vec<_>>()
        )));
    }
    Ok(())
}
