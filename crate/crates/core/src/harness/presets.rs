//! Built-in scenarios.
//!
//! `shortest-path-19` carries the 19 link transition pairs of the routing
//! experiment on a stand-in topology: the original graph is only available as
//! a picture, so the links sit on an 8-node DAG (source, three layers of two
//! nodes with a link inside each layer, sink) whose longest source-sink path
//! has 7 links. State 0 of every link is good (delay 0.1), state 1 is bad
//! (delay 1.0).
//!
//! `matching-5x9` carries the 45 user-channel transition pairs of the channel
//! allocation experiment. State 1 is an available channel (reward 1), state 0
//! an occupied one (reward 0).

use super::scenario::{ActionSetDesc, ChainDesc, ExplorationDesc, PolicyKind, ScenarioFile};
use crate::action::Sense;

pub const PRESETS: [&str; 2] = ["shortest-path-19", "matching-5x9"];

/// `(p01, p10)` of links e.1 .. e.19.
pub const LINK_TRANSITIONS: [(f64, f64); 19] = [
    (0.2, 0.8),
    (0.3, 0.9),
    (0.2, 0.7),
    (0.7, 0.1),
    (0.3, 0.9),
    (0.2, 0.7),
    (0.2, 0.8),
    (0.3, 0.8),
    (0.1, 0.9),
    (0.9, 0.1),
    (0.3, 0.8),
    (0.2, 0.7),
    (0.8, 0.1),
    (0.4, 0.8),
    (0.1, 0.8),
    (0.8, 0.1),
    (0.2, 0.7),
    (0.9, 0.1),
    (0.3, 0.8),
];

/// Stand-in topology: node 0 is the source, 7 the sink; layers {1,2}, {3,4}, {5,6}.
pub const LINK_EDGES: [(usize, usize); 19] = [
    (0, 1),
    (0, 2),
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 3),
    (2, 4),
    (3, 4),
    (3, 5),
    (3, 6),
    (4, 5),
    (4, 6),
    (5, 6),
    (5, 7),
    (6, 7),
    (0, 3),
    (2, 5),
    (4, 7),
    (1, 6),
];

/// `(p01, p10)` per user (rows) and channel (columns).
pub const CHANNEL_TRANSITIONS: [[(f64, f64); 9]; 5] = [
    [(0.5, 0.6), (0.2, 0.7), (0.2, 0.9), (0.8, 0.1), (0.2, 0.7), (0.3, 0.7), (0.2, 0.9), (0.2, 0.7), (0.1, 0.9)],
    [(0.3, 0.8), (0.1, 0.9), (0.2, 0.8), (0.3, 0.7), (0.3, 0.6), (0.2, 0.8), (0.4, 0.7), (0.2, 0.8), (0.9, 0.2)],
    [(0.8, 0.1), (0.2, 0.7), (0.3, 0.7), (0.2, 0.8), (0.5, 0.6), (0.2, 0.7), (0.2, 0.7), (0.2, 0.8), (0.1, 0.9)],
    [(0.3, 0.9), (0.2, 0.8), (0.2, 0.9), (0.4, 0.6), (0.9, 0.2), (0.2, 0.9), (0.2, 0.9), (0.2, 0.9), (0.2, 0.9)],
    [(0.5, 0.6), (0.2, 0.7), (0.3, 0.9), (0.2, 0.7), (0.5, 0.5), (0.2, 0.7), (0.8, 0.1), (0.3, 0.9), (0.3, 0.9)],
];

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_SEEDS: u64 = 10;

pub(crate) fn preset(name: &str) -> Option<ScenarioFile> {
    match name {
        "shortest-path-19" => Some(shortest_path_19()),
        "matching-5x9" => Some(matching_5x9()),
        _ => None,
    }
}

fn shortest_path_19() -> ScenarioFile {
    let chains = LINK_TRANSITIONS
        .iter()
        .enumerate()
        .map(|(k, &(p01, p10))| ChainDesc::TwoState {
            label: format!("e.{}", k + 1),
            p01,
            p10,
            rewards: [0.1, 1.0],
            initial_dist: None,
        })
        .collect();
    ScenarioFile {
        name: Some("shortest-path-19".into()),
        sense: Sense::Min,
        chains,
        action_set: ActionSetDesc::Path {
            num_nodes: 8,
            edges: LINK_EDGES.to_vec(),
            source: 0,
            sink: 7,
            directed: true,
        },
        policy: PolicyKind::Clrmr,
        exploration: ExplorationDesc::Constant(1512.0),
        reward_floor: 0.0,
        horizon: DEFAULT_HORIZON,
        seeds: super::scenario::SeedsDesc::Count(DEFAULT_SEEDS),
        master_seed: 0,
        output_dir: None,
    }
}

fn matching_5x9() -> ScenarioFile {
    let mut chains = Vec::with_capacity(45);
    for (u, row) in CHANNEL_TRANSITIONS.iter().enumerate() {
        for (c, &(p01, p10)) in row.iter().enumerate() {
            chains.push(ChainDesc::TwoState {
                label: format!("u.{}/ch.{}", u + 1, c + 1),
                p01,
                p10,
                rewards: [0.0, 1.0],
                initial_dist: None,
            });
        }
    }
    ScenarioFile {
        name: Some("matching-5x9".into()),
        sense: Sense::Max,
        chains,
        action_set: ActionSetDesc::Matching { users: 5, channels: 9 },
        policy: PolicyKind::Clrmr,
        exploration: ExplorationDesc::Constant(1135.0),
        reward_floor: 0.0,
        horizon: DEFAULT_HORIZON,
        seeds: super::scenario::SeedsDesc::Count(DEFAULT_SEEDS),
        master_seed: 0,
        output_dir: None,
    }
}
