//! Finite-state restless Markov chains.
//!
//! A [`ChainSpec`] describes one chain. Structural checks (shape, stochastic
//! rows, initial distribution) happen at construction; the dynamical
//! requirements (irreducible and aperiodic) are checked by [`validate_chain`]
//! so that test fixtures such as a forced two-cycle can still be simulated.
//!
//! [`analyze_chain`] computes the quantities the regret analysis needs: the
//! stationary distribution, the mean reward, the per-state `max(pi, 1 - pi)`
//! and the eigenvalue gap of the multiplicative symmetrization
//! `P_hat = P' P`, where `P'` is the adjoint of `P` in `l2(pi)`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::Arm;
use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 100_000;

/// Largest product state space [`product_chain`] will build.
pub const PRODUCT_STATE_CAP: usize = 10_000;

/// One invariant a chain failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    Shape(String),
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    NonStochasticRow { row: usize, sum: f64 },
    MalformedInitialDistribution(String),
    NonFiniteReward { state: usize },
    Reducible,
    Periodic { period: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(msg) => write!(f, "shape: {msg}"),
            Violation::EntryOutOfRange { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} outside [0,1]")
            }
            Violation::NonStochasticRow { row, sum } => {
                write!(f, "non-stochastic row {row} (sums to {sum})")
            }
            Violation::MalformedInitialDistribution(msg) => {
                write!(f, "malformed initial distribution: {msg}")
            }
            Violation::NonFiniteReward { state } => write!(f, "reward of state {state} is not finite"),
            Violation::Reducible => write!(f, "reducible chain"),
            Violation::Periodic { period } => write!(f, "periodic chain (period {period})"),
        }
    }
}

/// A finite-state Markov chain with per-state rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    label: String,
    transition: DMatrix<f64>,
    rewards: Vec<f64>,
    initial: Option<Vec<f64>>,
}

impl ChainSpec {
    /// Builds a chain from row-major transition rows.
    ///
    /// `initial = None` means "start from the stationary distribution".
    pub fn new(
        label: impl Into<String>,
        rows: Vec<Vec<f64>>,
        rewards: Vec<f64>,
        initial: Option<Vec<f64>>,
    ) -> Result<Self> {
        let label = label.into();
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidChain {
                label,
                violations: vec![Violation::Shape("transition matrix must be square and non-empty".into())],
            });
        }
        let transition = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let spec = ChainSpec {
            label,
            transition,
            rewards,
            initial,
        };
        let violations = structural_violations(&spec);
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(Error::InvalidChain {
                label: spec.label,
                violations,
            })
        }
    }

    /// Two-state chain with `p01 = P(0 -> 1)` and `p10 = P(1 -> 0)`.
    pub fn two_state(label: impl Into<String>, p01: f64, p10: f64, rewards: [f64; 2]) -> Result<Self> {
        Self::new(
            label,
            vec![vec![1.0 - p01, p01], vec![p10, 1.0 - p10]],
            rewards.to_vec(),
            None,
        )
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Result<Self> {
        self.initial = Some(initial);
        let violations = structural_violations(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidChain {
                label: self.label,
                violations,
            })
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[(from, to)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward(&self, state: usize) -> f64 {
        self.rewards[state]
    }

    pub fn initial(&self) -> Option<&[f64]> {
        self.initial.as_deref()
    }

    /// Initial distribution, defaulting to the stationary one.
    pub fn initial_distribution(&self) -> Result<Vec<f64>> {
        match &self.initial {
            Some(d) => Ok(d.clone()),
            None => stationary_distribution(self),
        }
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn structural_violations(spec: &ChainSpec) -> Vec<Violation> {
    let n = spec.transition.nrows();
    let mut out = Vec::new();
    if spec.rewards.len() != n {
        out.push(Violation::Shape(format!(
            "{} rewards for {} states",
            spec.rewards.len(),
            n
        )));
    }
    for (state, r) in spec.rewards.iter().enumerate() {
        if !r.is_finite() {
            out.push(Violation::NonFiniteReward { state });
        }
    }
    for row in 0..n {
        let mut sum = 0.0;
        for col in 0..n {
            let p = spec.transition[(row, col)];
            if !(0.0..=1.0).contains(&p) {
                out.push(Violation::EntryOutOfRange { row, col, value: p });
            }
            sum += p;
        }
        if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
            out.push(Violation::NonStochasticRow { row, sum });
        }
    }
    if let Some(init) = &spec.initial {
        if init.len() != n {
            out.push(Violation::MalformedInitialDistribution(format!(
                "{} entries for {} states",
                init.len(),
                n
            )));
        } else if init.iter().any(|p| !(0.0..=1.0).contains(p)) {
            out.push(Violation::MalformedInitialDistribution("entry outside [0,1]".into()));
        } else {
            let s: f64 = init.iter().sum();
            if !((s - 1.0).abs() <= ROW_SUM_TOL) {
                out.push(Violation::MalformedInitialDistribution(format!("sums to {s}")));
            }
        }
    }
    out
}

/// Every invariant `spec` violates, including irreducibility and aperiodicity.
pub fn chain_violations(spec: &ChainSpec) -> Vec<Violation> {
    let mut out = structural_violations(spec);
    if !out.is_empty() {
        return out;
    }
    let n = spec.num_states();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|x| (0..n).filter(|&y| spec.prob(x, y) > 0.0).collect())
        .collect();
    let mut pred = vec![Vec::new(); n];
    for (x, ys) in succ.iter().enumerate() {
        for &y in ys {
            pred[y].push(x);
        }
    }
    let forward = bfs_levels(&succ);
    let backward = bfs_levels(&pred);
    if forward.iter().chain(&backward).any(Option::is_none) {
        out.push(Violation::Reducible);
        return out;
    }
    // For an irreducible chain the period is the gcd over edges (x, y) of
    // level(x) + 1 - level(y), with levels from any BFS root.
    let levels: Vec<i64> = forward.iter().map(|l| l.unwrap() as i64).collect();
    let mut period = 0u64;
    for (x, ys) in succ.iter().enumerate() {
        for &y in ys {
            period = gcd(period, (levels[x] + 1 - levels[y]).unsigned_abs());
        }
    }
    if period != 1 {
        out.push(Violation::Periodic {
            period: period as usize,
        });
    }
    out
}

/// Accepts `spec` iff it is stochastic, irreducible and aperiodic with a
/// well-formed initial distribution.
pub fn validate_chain(spec: &ChainSpec) -> Result<()> {
    let violations = chain_violations(spec);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidChain {
            label: spec.label.clone(),
            violations,
        })
    }
}

fn bfs_levels(adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    let mut queue = VecDeque::from([0usize]);
    level[0] = Some(0);
    while let Some(x) = queue.pop_front() {
        let next = level[x].unwrap() + 1;
        for &y in &adj[x] {
            if level[y].is_none() {
                level[y] = Some(next);
                queue.push_back(y);
            }
        }
    }
    level
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary distribution by a direct solve of the balance equations with
/// the last equation replaced by the normalization constraint.
pub fn stationary_distribution(spec: &ChainSpec) -> Result<Vec<f64>> {
    let n = spec.num_states();
    let p = &spec.transition;
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("balance equations of `{}`", spec.label)))?;
    // one step of iterative refinement
    let r = &rhs - &a * &pi;
    if let Some(d) = lu.solve(&r) {
        pi += d;
    }
    let total: f64 = pi.iter().sum();
    pi /= total;
    let pi: Vec<f64> = pi.iter().copied().collect();
    let residual = stationarity_residual(p, &pi);
    if !residual.is_finite() || residual > RESIDUAL_TOL || pi.iter().any(|&x| x < 0.0) {
        return Err(Error::Singular(format!(
            "stationary solve for `{}` left residual {residual:e}",
            spec.label
        )));
    }
    Ok(pi)
}

/// `max_y |(pi P)_y - pi_y|`.
pub fn stationarity_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = pi.len();
    (0..n)
        .map(|y| {
            let flow: f64 = (0..n).map(|x| pi[x] * p[(x, y)]).sum();
            (flow - pi[y]).abs()
        })
        .fold(0.0, f64::max)
}

/// Per-chain quantities used by the index policy analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainAnalysis {
    pub stationary: Vec<f64>,
    pub mean_reward: f64,
    pub pi_hat: Vec<f64>,
    pub eigen_gap: f64,
}

impl ChainAnalysis {
    pub fn pi_hat_max(&self) -> f64 {
        self.pi_hat.iter().copied().fold(0.0, f64::max)
    }

    pub fn pi_min(&self) -> f64 {
        self.stationary.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn pi_max(&self) -> f64 {
        self.stationary.iter().copied().fold(0.0, f64::max)
    }
}

/// Multiplicative symmetrization `P_hat = P' P` with `p'_{x,y} = p_{y,x} pi_y / pi_x`.
pub fn multiplicative_symmetrization(p: &DMatrix<f64>, pi: &[f64]) -> DMatrix<f64> {
    let n = pi.len();
    let adjoint = DMatrix::from_fn(n, n, |x, y| p[(y, x)] * pi[y] / pi[x]);
    adjoint * p
}

pub fn analyze_chain(spec: &ChainSpec) -> Result<ChainAnalysis> {
    let stationary = stationary_distribution(spec)?;
    let mean_reward = stationary.iter().zip(&spec.rewards).map(|(p, r)| p * r).sum();
    let pi_hat = stationary.iter().map(|&p| p.max(1.0 - p)).collect();
    let eigen_gap = eigen_gap(spec, &stationary)?;
    Ok(ChainAnalysis {
        stationary,
        mean_reward,
        pi_hat,
        eigen_gap,
    })
}

/// `1 - lambda_2(P_hat)` from a symmetric eigensolve of `D^{1/2} P_hat D^{-1/2}`.
fn eigen_gap(spec: &ChainSpec, pi: &[f64]) -> Result<f64> {
    let n = pi.len();
    if n == 1 {
        return Ok(1.0);
    }
    let p_hat = multiplicative_symmetrization(&spec.transition, pi);
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |x, y| {
        let a = sqrt_pi[x] * p_hat[(x, y)] / sqrt_pi[y];
        let b = sqrt_pi[y] * p_hat[(y, x)] / sqrt_pi[x];
        0.5 * (a + b)
    });
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NoConvergence(spec.label.clone()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    // P_hat is positive semidefinite in l2(pi), so its spectrum lies in [0, 1].
    let lambda2 = values[1].clamp(0.0, 1.0);
    Ok(1.0 - lambda2)
}

/// The chain of the joint state of `arm`'s support.
///
/// Joint states are ordered in mixed radix over the support in ascending
/// chain order, the first support chain being most significant. The joint
/// reward is `sum_i a_i r^i_{x_i}`.
pub fn product_chain(specs: &[ChainSpec], arm: &Arm) -> Result<ChainSpec> {
    let support = arm.support();
    let sizes: Vec<usize> = support.iter().map(|&i| specs[i].num_states()).collect();
    let total = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s).filter(|&v| v <= PRODUCT_STATE_CAP))
        .ok_or(Error::ProductTooLarge {
            states: sizes.iter().fold(1usize, |a, &s| a.saturating_mul(s)),
            cap: PRODUCT_STATE_CAP,
        })?;
    let decode = |mut z: usize| -> Vec<usize> {
        let mut xs = vec![0; sizes.len()];
        for k in (0..sizes.len()).rev() {
            xs[k] = z % sizes[k];
            z /= sizes[k];
        }
        xs
    };
    let joint: Vec<Vec<usize>> = (0..total).map(decode).collect();
    let rewards = joint
        .iter()
        .map(|xs| {
            support
                .iter()
                .zip(arm.coefficients())
                .zip(xs)
                .map(|((&i, &a), &x)| a * specs[i].reward(x))
                .sum()
        })
        .collect();
    let initial = if support.iter().all(|&i| specs[i].initial.is_some()) {
        Some(
            joint
                .iter()
                .map(|xs| {
                    support
                        .iter()
                        .zip(xs)
                        .map(|(&i, &x)| specs[i].initial.as_ref().unwrap()[x])
                        .product()
                })
                .collect(),
        )
    } else {
        None
    };
    let label = support
        .iter()
        .map(|&i| specs[i].label.as_str())
        .collect::<Vec<_>>()
        .join("x");
    let mut transition = DMatrix::from_fn(total, total, |z1, z2| {
        support
            .iter()
            .enumerate()
            .map(|(k, &i)| specs[i].prob(joint[z1][k], joint[z2][k]))
            .product::<f64>()
    });
    // rows of a product of stochastic rows only drift from 1 by rounding
    for i in 0..total {
        let s: f64 = transition.row(i).sum();
        for j in 0..total {
            transition[(i, j)] /= s;
        }
    }
    Ok(ChainSpec {
        label,
        transition,
        rewards,
        initial,
    })
}

/// `M[z1][z2]`, the expected number of steps to first reach `z2` from `z1`,
/// with `M[z][z] = 0`.
pub fn mean_hitting_times(spec: &ChainSpec) -> Result<DMatrix<f64>> {
    let n = spec.num_states();
    if n > PRODUCT_STATE_CAP {
        return Err(Error::ProductTooLarge {
            states: n,
            cap: PRODUCT_STATE_CAP,
        });
    }
    let p = &spec.transition;
    let mut out = DMatrix::<f64>::zeros(n, n);
    for target in 0..n {
        let others: Vec<usize> = (0..n).filter(|&x| x != target).collect();
        let m = others.len();
        if m == 0 {
            continue;
        }
        let a = DMatrix::from_fn(m, m, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            id - p[(others[r], others[c])]
        });
        let rhs = DVector::from_element(m, 1.0);
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("hitting times of state {target} in `{}`", spec.label)))?;
        if sol.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Singular(format!(
                "hitting times of state {target} in `{}`",
                spec.label
            )));
        }
        for (r, &x) in others.iter().enumerate() {
            out[(x, target)] = sol[r];
        }
    }
    Ok(out)
}

/// The N independent chains plus their current states.
///
/// All chains advance one transition per [`Environment::step_all`] call,
/// whether or not anyone looks at them.
#[derive(Debug, Clone)]
pub struct Environment {
    chains: Arc<[ChainSpec]>,
    cumulative: Vec<Vec<Vec<f64>>>,
    states: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Environment {
    /// Draws each chain's starting state from its initial distribution.
    pub fn new(chains: Arc<[ChainSpec]>, mut rng: ChaCha8Rng) -> Result<Self> {
        let mut states = Vec::with_capacity(chains.len());
        for c in chains.iter() {
            let dist = c.initial_distribution()?;
            states.push(sample(&cumsum(&dist), rng.random::<f64>()));
        }
        Ok(Self::with_states(chains, states, rng))
    }

    pub fn with_states(chains: Arc<[ChainSpec]>, states: Vec<usize>, rng: ChaCha8Rng) -> Self {
        assert_eq!(chains.len(), states.len(), "one state per chain");
        let cumulative = chains
            .iter()
            .map(|c| {
                (0..c.num_states())
                    .map(|x| cumsum(&c.transition.row(x).iter().copied().collect::<Vec<_>>()))
                    .collect()
            })
            .collect();
        Environment {
            chains,
            cumulative,
            states,
            rng,
        }
    }

    pub fn chains(&self) -> &[ChainSpec] {
        &self.chains
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn state(&self, chain: usize) -> usize {
        self.states[chain]
    }

    pub fn reward(&self, chain: usize) -> f64 {
        self.chains[chain].reward(self.states[chain])
    }

    /// Advances every chain by one transition and returns the new states.
    pub fn step_all(&mut self) -> &[usize] {
        for (i, x) in self.states.iter_mut().enumerate() {
            let u = self.rng.random::<f64>();
            *x = sample(&self.cumulative[i][*x], u);
        }
        &self.states
    }
}

fn cumsum(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn sample(cum: &[f64], u: f64) -> usize {
    match cum.iter().position(|&c| u < c) {
        Some(i) => i,
        // u landed in the rounding slack above the last partial sum
        None => cum
            .iter()
            .enumerate()
            .rev()
            .find(|&(i, &c)| i == 0 || c > cum[i - 1])
            .map_or(0, |(i, _)| i),
    }
}
