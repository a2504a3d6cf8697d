//! Feasible arm families and the linear optimization over them.
//!
//! Every arm is a nonnegative coefficient vector over the N chains. At each
//! decision point the index policy needs `argmax_a sum_i a_i w_i` (or argmin)
//! for arbitrary per-chain weights, which this module answers without ever
//! materializing the arm family for the structured variants.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Max,
    Min,
}

impl Sense {
    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Max => a > b,
            Sense::Min => a < b,
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Max => "max",
            Sense::Min => "min",
        })
    }
}

/// One feasible action, stored sparsely over its support.
///
/// Arms order by their canonical id: the ascending support compared
/// lexicographically, then the coefficients.
#[derive(Debug, Clone)]
pub struct Arm {
    num_chains: usize,
    support: Vec<usize>,
    coefficients: Vec<f64>,
}

impl Arm {
    /// Builds an arm from a dense length-N coefficient vector.
    pub fn new(dense: Vec<f64>) -> Result<Self> {
        let n = dense.len();
        Self::from_sparse(
            n,
            dense.into_iter().enumerate().filter(|&(_, a)| a != 0.0).collect(),
        )
    }

    pub fn from_sparse(num_chains: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, a)| a != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!("chain {} listed twice in an arm", w[0].0)));
            }
        }
        for &(i, a) in &entries {
            if i >= num_chains {
                return Err(Error::InvalidArgument(format!("chain {i} out of range for N = {num_chains}")));
            }
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidArgument(format!("coefficient {a} of chain {i} must be finite and >= 0")));
            }
        }
        let (support, coefficients) = entries.into_iter().unzip();
        Ok(Arm {
            num_chains,
            support,
            coefficients,
        })
    }

    /// Arm with unit coefficients on `support`.
    pub fn unit(num_chains: usize, support: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::from_sparse(num_chains, support.into_iter().map(|i| (i, 1.0)).collect())
    }

    pub fn num_chains(&self) -> usize {
        self.num_chains
    }

    /// Chains with nonzero coefficient, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Coefficients aligned with [`Arm::support`].
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, chain: usize) -> f64 {
        self.support
            .binary_search(&chain)
            .map_or(0.0, |k| self.coefficients[k])
    }

    pub fn contains(&self, chain: usize) -> bool {
        self.support.binary_search(&chain).is_ok()
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_chains];
        for (&i, &a) in self.support.iter().zip(&self.coefficients) {
            v[i] = a;
        }
        v
    }

    /// `sum_i a_i w_i`, accumulated in ascending chain order.
    pub fn value(&self, weights: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coefficients)
            .map(|(&i, &a)| a * weights[i])
            .sum()
    }

    pub fn max_coefficient(&self) -> f64 {
        self.coefficients.iter().copied().fold(0.0, f64::max)
    }

    /// Canonical id, e.g. `0:1+4:1`.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (i, a)) in self.support.iter().zip(&self.coefficients).enumerate() {
            if k > 0 {
                f.write_str("+")?;
            }
            write!(f, "{i}:{a}")?;
        }
        Ok(())
    }
}

impl Ord for Arm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.support.cmp(&other.support).then_with(|| {
            self.coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

impl PartialOrd for Arm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Arm {
    fn eq(&self, other: &Self) -> bool {
        self.num_chains == other.num_chains && self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Arm {}

/// Source-sink paths in a graph whose edges are the chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub num_nodes: usize,
    /// Edge `i` is chain `i`.
    pub edges: Vec<(usize, usize)>,
    pub source: usize,
    pub sink: usize,
    #[serde(default = "default_directed")]
    pub directed: bool,
}

fn default_directed() -> bool {
    true
}

/// Assignments of every user to a distinct channel; chain `u * channels + c`
/// is the user-channel pair `(u, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingSet {
    pub users: usize,
    pub channels: usize,
}

impl MatchingSet {
    pub fn chain(&self, user: usize, channel: usize) -> usize {
        user * self.channels + channel
    }
}

/// The feasible family `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    Explicit { num_chains: usize, arms: Vec<Arm> },
    Path(PathSet),
    Matching(MatchingSet),
}

/// Size and shape summary of an action set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureStats {
    pub num_chains: usize,
    /// Largest support size.
    pub h: usize,
    pub a_max: f64,
    /// Number of arms, saturating at `u128::MAX`.
    pub arm_count: u128,
}

impl ActionSet {
    pub fn explicit(num_chains: usize, arms: Vec<Arm>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::EmptyActionSet);
        }
        if let Some(a) = arms.iter().find(|a| a.num_chains != num_chains) {
            return Err(Error::InvalidArgument(format!(
                "arm {a} is defined over {} chains, expected {num_chains}",
                a.num_chains
            )));
        }
        if let Some(a) = arms.iter().find(|a| a.support.is_empty()) {
            return Err(Error::InvalidArgument(format!("arm `{a}` has empty support")));
        }
        Ok(ActionSet::Explicit { num_chains, arms })
    }

    pub fn path(set: PathSet) -> Result<Self> {
        let PathSet {
            num_nodes,
            ref edges,
            source,
            sink,
            ..
        } = set;
        if edges.is_empty() {
            return Err(Error::EmptyActionSet);
        }
        if source >= num_nodes || sink >= num_nodes || source == sink {
            return Err(Error::InvalidArgument(format!(
                "source {source} and sink {sink} must be distinct nodes below {num_nodes}"
            )));
        }
        if let Some((u, v)) = edges.iter().find(|&&(u, v)| u >= num_nodes || v >= num_nodes || u == v) {
            return Err(Error::InvalidArgument(format!("edge ({u}, {v}) is a loop or out of range")));
        }
        Ok(ActionSet::Path(set))
    }

    pub fn matching(users: usize, channels: usize) -> Result<Self> {
        if users == 0 || channels == 0 {
            return Err(Error::EmptyActionSet);
        }
        if users > channels {
            return Err(Error::TooManyUsers { users, channels });
        }
        Ok(ActionSet::Matching(MatchingSet { users, channels }))
    }

    /// Number of chains N.
    pub fn num_chains(&self) -> usize {
        match self {
            ActionSet::Explicit { num_chains, .. } => *num_chains,
            ActionSet::Path(p) => p.edges.len(),
            ActionSet::Matching(m) => m.users * m.channels,
        }
    }

    /// Arm attaining the optimum of `sum_i a_i w_i` over the family.
    ///
    /// Explicit sets and matchings return the optimal arm with the smallest
    /// canonical id. Paths are found by a label-setting search whose ties go
    /// to the lower node and then the lower edge index, so the result depends
    /// only on the graph and the weights.
    pub fn solve_linear(&self, weights: &[f64], sense: Sense) -> Result<Arm> {
        if weights.len() != self.num_chains() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} chains",
                weights.len(),
                self.num_chains()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight {w} is not finite")));
        }
        match self {
            ActionSet::Explicit { arms, .. } => Ok(best_explicit(arms, weights, sense).clone()),
            ActionSet::Path(p) => {
                if sense == Sense::Max {
                    return Err(Error::InvalidArgument(
                        "path sets support only minimization".into(),
                    ));
                }
                if let Some(w) = weights.iter().find(|&&w| w < 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "path weights must be nonnegative, got {w}"
                    )));
                }
                shortest_path(p, weights)
            }
            ActionSet::Matching(m) => Ok(best_matching(m, weights, sense)),
        }
    }

    /// Every arm, in canonical order, failing once more than `cap` exist.
    pub fn enumerate_arms(&self, cap: usize) -> Result<Vec<Arm>> {
        match self {
            ActionSet::Explicit { arms, .. } => {
                if arms.len() > cap {
                    return Err(Error::CapExceeded(cap));
                }
                let mut out = arms.clone();
                out.sort();
                out.dedup();
                Ok(out)
            }
            ActionSet::Path(p) => {
                let mut out = simple_paths(p, cap)?;
                out.sort();
                Ok(out)
            }
            ActionSet::Matching(m) => {
                if matching_count(m) > cap as u128 {
                    return Err(Error::CapExceeded(cap));
                }
                Ok(all_matchings(m))
            }
        }
    }

    /// N, H, `a_max` and the arm count. Path sets are enumerated under `cap`.
    pub fn structure_stats(&self, cap: usize) -> Result<StructureStats> {
        let num_chains = self.num_chains();
        Ok(match self {
            ActionSet::Explicit { arms, .. } => StructureStats {
                num_chains,
                h: arms.iter().map(|a| a.support.len()).max().unwrap_or(0),
                a_max: arms.iter().map(Arm::max_coefficient).fold(0.0, f64::max),
                arm_count: self.enumerate_arms(usize::MAX)?.len() as u128,
            },
            ActionSet::Path(_) => {
                let arms = self.enumerate_arms(cap)?;
                StructureStats {
                    num_chains,
                    h: arms.iter().map(|a| a.support.len()).max().unwrap_or(0),
                    a_max: 1.0,
                    arm_count: arms.len() as u128,
                }
            }
            ActionSet::Matching(m) => StructureStats {
                num_chains,
                h: m.users,
                a_max: 1.0,
                arm_count: matching_count(m),
            },
        })
    }

    /// The arm with the smallest canonical id containing `chain`; see
    /// [`ActionSet::covering_arms`].
    pub fn covering_arm(&self, chain: usize, cap: usize) -> Result<Arm> {
        if chain >= self.num_chains() {
            return Err(Error::UncoveredChain(chain));
        }
        match self {
            ActionSet::Explicit { arms, .. } => arms
                .iter()
                .filter(|a| a.contains(chain))
                .min()
                .cloned()
                .ok_or(Error::UncoveredChain(chain)),
            ActionSet::Matching(m) => Ok(covering_matching(m, chain)),
            ActionSet::Path(p) => match simple_paths(p, cap) {
                Ok(arms) => arms
                    .into_iter()
                    .filter(|a| a.contains(chain))
                    .min()
                    .ok_or(Error::UncoveredChain(chain)),
                Err(Error::CapExceeded(_)) => covering_path(p, chain),
                Err(e) => Err(e),
            },
        }
    }

    /// For each chain, the arm with the smallest canonical id whose support
    /// contains it.
    ///
    /// Path sets are enumerated under `cap`; beyond it a covering path is
    /// built from two breadth-first segments instead.
    pub fn covering_arms(&self, cap: usize) -> Result<Vec<Arm>> {
        let n = self.num_chains();
        match self {
            ActionSet::Explicit { .. } | ActionSet::Matching(_) => {
                (0..n).map(|i| self.covering_arm(i, cap)).collect()
            }
            ActionSet::Path(p) => match simple_paths(p, cap) {
                Ok(mut arms) => {
                    arms.sort();
                    (0..n)
                        .map(|i| {
                            arms.iter()
                                .find(|a| a.contains(i))
                                .cloned()
                                .ok_or(Error::UncoveredChain(i))
                        })
                        .collect()
                }
                Err(Error::CapExceeded(_)) => (0..n).map(|i| covering_path(p, i)).collect(),
                Err(e) => Err(e),
            },
        }
    }
}

fn best_explicit<'a>(arms: &'a [Arm], weights: &[f64], sense: Sense) -> &'a Arm {
    let mut best = &arms[0];
    let mut best_value = best.value(weights);
    for arm in &arms[1..] {
        let v = arm.value(weights);
        if sense.better(v, best_value) || (v == best_value && arm < best) {
            best = arm;
            best_value = v;
        }
    }
    best
}

fn adjacency(p: &PathSet) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new(); p.num_nodes];
    for (e, &(u, v)) in p.edges.iter().enumerate() {
        out[u].push((v, e));
        if !p.directed {
            out[v].push((u, e));
        }
    }
    out
}

fn shortest_path(p: &PathSet, weights: &[f64]) -> Result<Arm> {
    let adj = adjacency(p);
    let n = p.num_nodes;
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut settled = vec![false; n];
    dist[p.source] = 0.0;
    loop {
        let next = (0..n)
            .filter(|&x| !settled[x] && dist[x].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        let Some(u) = next else { break };
        settled[u] = true;
        if u == p.sink {
            break;
        }
        for &(v, e) in &adj[u] {
            if settled[v] {
                continue;
            }
            let nd = dist[u] + weights[e];
            let replace = match pred[v] {
                None => true,
                Some((_, pe)) => nd < dist[v] || (nd == dist[v] && e < pe),
            };
            if replace {
                dist[v] = nd;
                pred[v] = Some((u, e));
            }
        }
    }
    if !settled[p.sink] {
        return Err(Error::NoPath);
    }
    let mut support = Vec::new();
    let mut x = p.sink;
    while let Some((u, e)) = pred[x] {
        support.push(e);
        x = u;
    }
    Arm::unit(p.edges.len(), support)
}

fn simple_paths(p: &PathSet, cap: usize) -> Result<Vec<Arm>> {
    fn dfs(
        node: usize,
        sink: usize,
        adj: &[Vec<(usize, usize)>],
        on_path: &mut [bool],
        edges: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> Result<()> {
        if node == sink {
            if out.len() == cap {
                return Err(Error::CapExceeded(cap));
            }
            out.push(edges.clone());
            return Ok(());
        }
        for &(v, e) in &adj[node] {
            if on_path[v] {
                continue;
            }
            on_path[v] = true;
            edges.push(e);
            dfs(v, sink, adj, on_path, edges, out, cap)?;
            edges.pop();
            on_path[v] = false;
        }
        Ok(())
    }
    let adj = adjacency(p);
    let mut on_path = vec![false; p.num_nodes];
    on_path[p.source] = true;
    let mut raw = Vec::new();
    dfs(p.source, p.sink, &adj, &mut on_path, &mut Vec::new(), &mut raw, cap)?;
    raw.into_iter().map(|s| Arm::unit(p.edges.len(), s)).collect()
}

/// Fewest-hop path from `from` to `to` avoiding `blocked` nodes.
fn bfs_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize, blocked: &[bool]) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = adj.len();
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &(v, e) in &adj[u] {
            if !seen[v] && !blocked[v] {
                seen[v] = true;
                pred[v] = Some((u, e));
                queue.push_back(v);
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let (mut nodes, mut edges) = (vec![to], Vec::new());
    let mut x = to;
    while let Some((u, e)) = pred[x] {
        nodes.push(u);
        edges.push(e);
        x = u;
    }
    Some((nodes, edges))
}

fn covering_path(p: &PathSet, chain: usize) -> Result<Arm> {
    let adj = adjacency(p);
    let (a, b) = p.edges[chain];
    let orientations: &[(usize, usize)] = if p.directed { &[(a, b)] } else { &[(a, b), (b, a)] };
    for &(u, v) in orientations {
        if v == p.source || u == p.sink {
            continue;
        }
        let mut blocked = vec![false; p.num_nodes];
        blocked[v] = true;
        blocked[p.sink] = true;
        let Some((head_nodes, head_edges)) = bfs_path(&adj, p.source, u, &blocked) else {
            continue;
        };
        let mut blocked = vec![false; p.num_nodes];
        for &x in &head_nodes {
            blocked[x] = true;
        }
        if let Some((_, tail_edges)) = bfs_path(&adj, v, p.sink, &blocked) {
            let support = head_edges.into_iter().chain([chain]).chain(tail_edges);
            return Arm::unit(p.edges.len(), support);
        }
    }
    Err(Error::UncoveredChain(chain))
}

fn matching_count(m: &MatchingSet) -> u128 {
    ((m.channels - m.users + 1)..=m.channels).fold(1u128, |acc, c| acc.saturating_mul(c as u128))
}

fn all_matchings(m: &MatchingSet) -> Vec<Arm> {
    fn rec(m: &MatchingSet, user: usize, used: &mut [bool], chosen: &mut Vec<usize>, out: &mut Vec<Arm>) {
        if user == m.users {
            let support = chosen.iter().enumerate().map(|(u, &c)| m.chain(u, c));
            out.push(Arm::unit(m.users * m.channels, support).expect("valid matching"));
            return;
        }
        for c in 0..m.channels {
            if !used[c] {
                used[c] = true;
                chosen.push(c);
                rec(m, user + 1, used, chosen, out);
                chosen.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(m, 0, &mut vec![false; m.channels], &mut Vec::new(), &mut out);
    out
}

fn covering_matching(m: &MatchingSet, chain: usize) -> Arm {
    let (user, channel) = (chain / m.channels, chain % m.channels);
    let mut used = vec![false; m.channels];
    used[channel] = true;
    let support = (0..m.users).map(|u| {
        if u == user {
            m.chain(u, channel)
        } else {
            let c = (0..m.channels).find(|&c| !used[c]).expect("users <= channels");
            used[c] = true;
            m.chain(u, c)
        }
    });
    Arm::unit(m.users * m.channels, support.collect::<Vec<_>>()).expect("valid matching")
}

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// by the shortest augmenting path method with potentials, O(rows^2 cols).
///
/// Returns the column of each row.
pub(crate) fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    debug_assert!(rows <= cols);
    // 1-based arrays; column 0 is a virtual start
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut row_of = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; rows];
    for j in 1..=cols {
        if row_of[j] != 0 {
            out[row_of[j] - 1] = j - 1;
        }
    }
    out
}

fn best_matching(m: &MatchingSet, weights: &[f64], sense: Sense) -> Arm {
    let sign = match sense {
        Sense::Max => -1.0,
        Sense::Min => 1.0,
    };
    let cost: Vec<Vec<f64>> = (0..m.users)
        .map(|u| (0..m.channels).map(|c| sign * weights[m.chain(u, c)]).collect())
        .collect();
    let assignment_cost = |rows: &[usize], cols: &[usize]| -> f64 {
        let sub: Vec<Vec<f64>> = rows
            .iter()
            .map(|&r| cols.iter().map(|&c| cost[r][c]).collect())
            .collect();
        min_cost_assignment(&sub)
            .iter()
            .enumerate()
            .map(|(r, &c)| sub[r][c])
            .sum()
    };
    let all_rows: Vec<usize> = (0..m.users).collect();
    let all_cols: Vec<usize> = (0..m.channels).collect();
    let optimum = assignment_cost(&all_rows, &all_cols);
    let scale: f64 = cost.iter().flatten().map(|c| c.abs()).fold(1.0, f64::max);
    let tol = 1e-12 * scale * m.users as f64;

    // Fix users in order to the smallest channel that keeps the optimum.
    let mut fixed_cost = 0.0;
    let mut free: Vec<usize> = all_cols;
    let mut chosen = Vec::with_capacity(m.users);
    for user in 0..m.users {
        let rest_rows: Vec<usize> = ((user + 1)..m.users).collect();
        let pick = free
            .iter()
            .position(|&c| {
                let rest_cols: Vec<usize> = free.iter().copied().filter(|&x| x != c).collect();
                let total = fixed_cost + cost[user][c] + assignment_cost(&rest_rows, &rest_cols);
                total <= optimum + tol
            })
            .unwrap_or(0);
        let c = free.remove(pick);
        fixed_cost += cost[user][c];
        chosen.push(m.chain(user, c));
    }
    Arm::unit(m.users * m.channels, chosen).expect("valid matching")
}
