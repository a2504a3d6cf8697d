#![allow(dead_code)]

use std::io::Write;
use std::sync::Arc;

use clrmr::markov::validate_chain;
use clrmr::{ActionSet, Arm, ChainSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Valid chain with 2..=max_states states; some entries are zeroed to get
/// sparse structure, retrying until the chain is irreducible and aperiodic.
pub fn random_chain(rng: &mut ChaCha8Rng, max_states: usize) -> ChainSpec {
    loop {
        let s = rng.random_range(2..=max_states);
        let rows: Vec<Vec<f64>> = (0..s)
            .map(|_| {
                let mut row: Vec<f64> = (0..s)
                    .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.01..1.0) })
                    .collect();
                if row.iter().all(|&x| x == 0.0) {
                    row[rng.random_range(0..s)] = 1.0;
                }
                let total: f64 = row.iter().sum();
                row.iter().map(|x| x / total).collect()
            })
            .collect();
        let rewards = (0..s).map(|_| rng.random_range(0.0..1.0)).collect();
        if let Ok(c) = ChainSpec::new("r", rows, rewards, None) {
            if validate_chain(&c).is_ok() {
                return c;
            }
        }
    }
}

pub fn two_state(label: &str, p01: f64, p10: f64, rewards: [f64; 2]) -> ChainSpec {
    ChainSpec::two_state(label, p01, p10, rewards).unwrap()
}

/// Three iid-like chains and two arms: a single-chain optimal arm and a
/// heavily weighted two-chain suboptimal arm, so the gap is wide relative to
/// the exploration bonus within a desk-scale horizon.
pub fn three_chain_scenario() -> (Arc<[ChainSpec]>, Arc<ActionSet>) {
    let chains: Arc<[ChainSpec]> = vec![
        two_state("a", 0.5, 0.5, [0.8, 1.0]),
        two_state("b", 0.5, 0.5, [-1.0, -0.8]),
        two_state("c", 0.5, 0.5, [-1.0, -0.8]),
    ]
    .into();
    let set = ActionSet::explicit(
        3,
        vec![Arm::new(vec![1.0, 0.0, 0.0]).unwrap(), Arm::new(vec![0.0, 3.0, 3.0]).unwrap()],
    )
    .unwrap();
    (chains, Arc::new(set))
}

/// Random explicit family over `n` chains in which every chain is covered.
pub fn random_explicit(rng: &mut ChaCha8Rng, n: usize, arms: usize) -> ActionSet {
    loop {
        let list: Vec<Arm> = (0..arms)
            .map(|_| loop {
                let dense: Vec<f64> = (0..n)
                    .map(|_| if rng.random_bool(0.5) { rng.random_range(1..=3) as f64 } else { 0.0 })
                    .collect();
                if dense.iter().any(|&x| x > 0.0) {
                    break Arm::new(dense).unwrap();
                }
            })
            .collect();
        if (0..n).all(|i| list.iter().any(|a| a.contains(i))) {
            return ActionSet::explicit(n, list).unwrap();
        }
    }
}

/// Writes a line straight to stdout, past the test harness's capture.
pub fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
