//! Model-aware analysis: the genie, regret traces and the regret-bound
//! constants.
//!
//! The genie knows every transition matrix but commits to one arm forever.
//! Regret is measured against its rate `gamma*`. For cost minimization the
//! roles flip: `gamma*` is the smallest expected cost and regret is the
//! policy's accumulated cost minus `n gamma*`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::action::{ActionSet, Arm, Sense};
use crate::error::{Error, Result};
use crate::markov::{mean_hitting_times, product_chain, stationary_distribution, ChainAnalysis, ChainSpec};
use crate::policy::{Phase, SlotEvent};

/// Largest arm family the genie enumerates for gap statistics.
pub const GAP_ENUMERATION_CAP: usize = 200_000;

/// Gaps relative to the best arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapStats {
    pub delta_min: f64,
    pub delta_max: f64,
    /// Expected reward of the best suboptimal arm.
    pub gamma_prime_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenieReport {
    pub sense: Sense,
    pub gamma_star: f64,
    #[serde(serialize_with = "serialize_arm")]
    pub optimal_arm: Arm,
    /// Expected reward of every arm, in canonical order, when enumerable.
    #[serde(skip)]
    pub arm_rewards: Option<Vec<(Arm, f64)>>,
    pub gaps: Option<GapStats>,
    /// Why `gaps` is missing.
    pub gaps_note: Option<String>,
}

fn serialize_arm<S: serde::Serializer>(arm: &Arm, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&arm.id())
}

impl GenieReport {
    /// `Delta_a`, zero for optimal arms.
    pub fn gap(&self, arm: &Arm, mean_rewards: &[f64]) -> f64 {
        let gamma = arm.value(mean_rewards);
        match self.sense {
            Sense::Max => (self.gamma_star - gamma).max(0.0),
            Sense::Min => (gamma - self.gamma_star).max(0.0),
        }
    }
}

pub fn mean_rewards(analyses: &[ChainAnalysis]) -> Vec<f64> {
    analyses.iter().map(|a| a.mean_reward).collect()
}

/// Best static arm. Gap statistics need the whole family; above `cap` arms
/// only `gamma*` and the optimal arm are reported.
pub fn genie(action_set: &ActionSet, analyses: &[ChainAnalysis], sense: Sense, cap: usize) -> Result<GenieReport> {
    let mu = mean_rewards(analyses);
    let optimal_arm = action_set.solve_linear(&mu, sense)?;
    let gamma_star = optimal_arm.value(&mu);
    let mut report = GenieReport {
        sense,
        gamma_star,
        optimal_arm,
        arm_rewards: None,
        gaps: None,
        gaps_note: None,
    };
    let arms = match action_set.enumerate_arms(cap) {
        Ok(arms) => arms,
        Err(Error::CapExceeded(c)) => {
            report.gaps_note = Some(format!("more than {c} arms; gap statistics unavailable"));
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let rewards: Vec<(Arm, f64)> = arms
        .into_iter()
        .map(|a| {
            let g = a.value(&mu);
            (a, g)
        })
        .collect();
    let tol = 1e-12 * gamma_star.abs().max(1.0);
    let gaps: Vec<(f64, f64)> = rewards
        .iter()
        .map(|&(_, g)| {
            let d = match sense {
                Sense::Max => gamma_star - g,
                Sense::Min => g - gamma_star,
            };
            (d, g)
        })
        .filter(|&(d, _)| d > tol)
        .collect();
    if gaps.is_empty() {
        report.gaps_note = Some("no suboptimal arm; gap statistics undefined".into());
    } else {
        let delta_min = gaps.iter().map(|g| g.0).fold(f64::INFINITY, f64::min);
        let delta_max = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
        let gamma_prime_max = match sense {
            Sense::Max => gamma_star - delta_min,
            Sense::Min => gamma_star + delta_min,
        };
        report.gaps = Some(GapStats {
            delta_min,
            delta_max,
            gamma_prime_max,
        });
    }
    report.arm_rewards = Some(rewards);
    Ok(report)
}

/// Chain-level inputs of the exploration threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdInputs {
    pub s_max: usize,
    pub r_max: f64,
    pub pi_hat_max: f64,
    pub eps_min: f64,
    pub h: usize,
}

impl ThresholdInputs {
    pub fn new(chains: &[ChainSpec], analyses: &[ChainAnalysis], h: usize) -> Result<Self> {
        if chains.is_empty() || chains.len() != analyses.len() {
            return Err(Error::InvalidArgument("need one analysis per chain".into()));
        }
        if h == 0 {
            return Err(Error::InvalidArgument("H must be at least 1".into()));
        }
        let eps_min = analyses.iter().map(|a| a.eigen_gap).fold(f64::INFINITY, f64::min);
        if !(eps_min > 0.0) {
            return Err(Error::InvalidArgument(format!("eigenvalue gap {eps_min} is not positive")));
        }
        Ok(ThresholdInputs {
            s_max: chains.iter().map(ChainSpec::num_states).max().unwrap(),
            r_max: chains
                .iter()
                .flat_map(|c| c.rewards().iter().map(|r| r.abs()))
                .fold(0.0, f64::max),
            pi_hat_max: analyses.iter().map(ChainAnalysis::pi_hat_max).fold(0.0, f64::max),
            eps_min,
            h,
        })
    }

    /// `56 (H + 1) S_max^2 r_max^2 pi_hat_max^2 / eps_min`.
    pub fn threshold(&self) -> f64 {
        let s = self.s_max as f64;
        56.0 * (self.h as f64 + 1.0) * s * s * self.r_max * self.r_max * self.pi_hat_max * self.pi_hat_max
            / self.eps_min
    }
}

/// Smallest constant exploration weight covered by the logarithmic bound.
pub fn l_threshold(chains: &[ChainSpec], analyses: &[ChainAnalysis], h: usize) -> Result<f64> {
    Ok(ThresholdInputs::new(chains, analyses, h)?.threshold())
}

/// Bound constants for suboptimal play (`Z1`, `Z2`) and for regret
/// (`Z3`, `Z4`, with `Z5` as an intermediate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub z4: f64,
    pub z5: f64,
}

impl BoundConstants {
    /// Bound on `sum_a Delta_a E[T_a(n)]`.
    pub fn suboptimal_bound(&self, n: u64) -> f64 {
        self.z1 * (n as f64).ln() + self.z2
    }

    /// Bound on the regret.
    pub fn regret_bound(&self, n: u64) -> f64 {
        self.z3 * (n as f64).ln() + self.z4
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub l: f64,
    pub l_threshold: f64,
    pub threshold_inputs: ThresholdInputs,
    pub n: usize,
    pub a_max: f64,
    pub pi_min: f64,
    pub pi_max: f64,
    pub product_pi_min: Option<f64>,
    pub m_max: Option<f64>,
    pub m_star_max: Option<f64>,
    pub genie: GenieReport,
    pub constants: Option<BoundConstants>,
    /// Set when the constants could not be computed, naming the cause.
    pub partial: Option<String>,
    pub warnings: Vec<String>,
}

/// Per-arm product-chain quantities: smallest stationary mass and largest
/// mean hitting time.
fn arm_product_stats(chains: &[ChainSpec], arm: &Arm) -> Result<(f64, f64)> {
    let product = product_chain(chains, arm)?;
    let pi = stationary_distribution(&product)?;
    let pi_min = pi.iter().copied().fold(f64::INFINITY, f64::min);
    let m = mean_hitting_times(&product)?;
    Ok((pi_min, m.iter().copied().fold(0.0, f64::max)))
}

pub fn theorem_constants(
    action_set: &ActionSet,
    chains: &[ChainSpec],
    analyses: &[ChainAnalysis],
    l: f64,
    sense: Sense,
    cap: usize,
) -> Result<BoundReport> {
    let genie = genie(action_set, analyses, sense, cap)?;
    let stats = action_set.structure_stats(cap)?;
    let inputs = ThresholdInputs::new(chains, analyses, stats.h)?;
    let threshold = inputs.threshold();
    let pi_min = analyses.iter().map(ChainAnalysis::pi_min).fold(f64::INFINITY, f64::min);
    let pi_max = analyses.iter().map(ChainAnalysis::pi_max).fold(0.0, f64::max);
    let mut report = BoundReport {
        l,
        l_threshold: threshold,
        threshold_inputs: inputs,
        n: stats.num_chains,
        a_max: stats.a_max,
        pi_min,
        pi_max,
        product_pi_min: None,
        m_max: None,
        m_star_max: None,
        genie,
        constants: None,
        partial: None,
        warnings: Vec::new(),
    };
    if l < threshold {
        report.warnings.push(format!(
            "L = {l} is below the threshold {threshold}; the logarithmic bound is not guaranteed"
        ));
    }
    let Some(arms) = report.genie.arm_rewards.as_ref() else {
        report.partial = report.genie.gaps_note.clone();
        return Ok(report);
    };
    let Some(gaps) = report.genie.gaps else {
        report.partial = report.genie.gaps_note.clone();
        return Ok(report);
    };
    let per_arm: Vec<Result<(f64, f64)>> = arms
        .par_iter()
        .map(|(arm, _)| {
            arm_product_stats(chains, arm).map_err(|e| match e {
                Error::ProductTooLarge { .. } => Error::InvalidArgument(format!("arm {arm}: {e}")),
                other => other,
            })
        })
        .collect();
    let mut product_pi_min = f64::INFINITY;
    let mut m_max: f64 = 0.0;
    for r in per_arm {
        match r {
            Ok((p, m)) => {
                product_pi_min = product_pi_min.min(p);
                m_max = m_max.max(m);
            }
            Err(e) => {
                report.partial = Some(e.to_string());
                return Ok(report);
            }
        }
    }
    let (_, m_star_max) = arm_product_stats(chains, &report.genie.optimal_arm)?;

    let n = stats.num_chains as f64;
    let h = stats.h as f64;
    let s_max = inputs.s_max as f64;
    let gamma_star = report.genie.gamma_star;
    let regen = 1.0 / product_pi_min + m_max + 1.0;
    let explore = 4.0 * n * l * h * h * stats.a_max * stats.a_max / (gaps.delta_min * gaps.delta_min);
    let tail = n + PI * n * h * s_max / (3.0 * pi_min);
    let z1 = gaps.delta_max * regen * explore;
    let z2 = gaps.delta_max * regen * tail;
    let z5 = gaps.gamma_prime_max * (regen - 1.0 / pi_max) + gamma_star * m_star_max;
    let z3 = z1 + z5 * explore;
    let z4 = z2 + gamma_star * (1.0 / pi_min + m_max + 1.0) + z5 * tail;
    report.product_pi_min = Some(product_pi_min);
    report.m_max = Some(m_max);
    report.m_star_max = Some(m_star_max);
    report.constants = Some(BoundConstants { z1, z2, z3, z4, z5 });
    Ok(report)
}

/// Cumulative reward and regret after every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub sense: Sense,
    pub gamma_star: f64,
    pub cum_reward: Vec<f64>,
    pub regret: Vec<f64>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.regret.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regret.is_empty()
    }

    /// `R(n)`, 1-based.
    pub fn regret_at(&self, n: u64) -> f64 {
        self.regret[n as usize - 1]
    }

    pub fn cum_reward_at(&self, n: u64) -> f64 {
        self.cum_reward[n as usize - 1]
    }

    /// `R(n) / ln n`, defined for `n >= 2`.
    pub fn normalized_at(&self, n: u64) -> Option<f64> {
        (n >= 2).then(|| self.regret_at(n) / (n as f64).ln())
    }
}

pub fn regret_trace(events: &[SlotEvent], gamma_star: f64, sense: Sense) -> Result<RegretTrace> {
    if events.is_empty() {
        return Err(Error::LogGap("empty log".into()));
    }
    let mut cum = 0.0;
    let mut cum_reward = Vec::with_capacity(events.len());
    let mut regret = Vec::with_capacity(events.len());
    for (k, e) in events.iter().enumerate() {
        let expected = k as u64 + 1;
        if e.slot != expected {
            return Err(Error::LogGap(format!("expected slot {expected}, found {}", e.slot)));
        }
        cum += e.reward;
        cum_reward.push(cum);
        let baseline = expected as f64 * gamma_star;
        regret.push(match sense {
            Sense::Max => baseline - cum,
            Sense::Min => cum - baseline,
        });
    }
    Ok(RegretTrace {
        sense,
        gamma_star,
        cum_reward,
        regret,
    })
}

/// Slots (`T_a`) and completed main-loop blocks (`B_a`) per arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlayCount {
    pub slots: u64,
    pub blocks: u64,
}

/// Play counts over the first `upto` slots of a log.
pub fn play_counts(events: &[SlotEvent], upto: u64) -> BTreeMap<Arc<Arm>, PlayCount> {
    let mut out: BTreeMap<Arc<Arm>, PlayCount> = BTreeMap::new();
    for e in events.iter().take(upto as usize) {
        let entry = out.entry(e.arm.clone()).or_default();
        entry.slots += 1;
        if e.phase == Phase::Sb3 {
            entry.blocks += 1;
        }
    }
    out
}

/// `sum_a Delta_a T_a(n)` over the first `upto` slots.
pub fn weighted_suboptimal_plays(events: &[SlotEvent], upto: u64, genie: &GenieReport, mean_rewards: &[f64]) -> f64 {
    play_counts(events, upto)
        .iter()
        .map(|(arm, c)| genie.gap(arm, mean_rewards) * c.slots as f64)
        .sum()
}
