#![allow(dead_code)]

pub mod builder;
pub mod model;
pub mod sampler;

use aml_subgraph::builder::{SubgraphLabel, SubgraphRecord};
use aml_subgraph::graph::{BackgroundGraph, Direction, NeighborView, NodeId};
use aml_subgraph::sampler::seeded_rng;
use rand::seq::SliceRandom;

pub fn record(id: usize, nodes: &[u32], label: SubgraphLabel) -> SubgraphRecord {
    SubgraphRecord::new(id, nodes.iter().map(|&n| NodeId(n)).collect(), label)
}

/// A 20-cycle with chords 3-13 and 8-17, and four subgraphs whose closed
/// one-hop neighborhoods are pairwise disjoint.
pub fn vip_toy() -> (BackgroundGraph, Vec<SubgraphRecord>) {
    let mut edges: Vec<(u64, u64)> = (0..20).map(|i| (i, (i + 1) % 20)).collect();
    edges.extend([(3, 13), (8, 17)]);
    let g = BackgroundGraph::from_edges(20, &edges).unwrap();
    let recs = vec![
        record(0, &[0, 1], SubgraphLabel::Licit),
        record(1, &[5, 6], SubgraphLabel::Suspicious),
        record(2, &[10, 11], SubgraphLabel::Licit),
        record(3, &[14, 15, 16], SubgraphLabel::Suspicious),
    ];
    (g, recs)
}

/// Two chorded 10-cycles; subgraphs 0 and 1 share neighborhood in the first.
pub fn overlapping_vip_toy() -> (BackgroundGraph, Vec<SubgraphRecord>) {
    let mut edges = Vec::new();
    for base in [0u64, 10] {
        for i in 0..10 {
            edges.push((base + i, base + (i + 1) % 10));
        }
        edges.push((base, base + 5));
        edges.push((base + 2, base + 7));
    }
    let g = BackgroundGraph::from_edges(20, &edges).unwrap();
    let recs = vec![
        record(0, &[0, 1], SubgraphLabel::Licit),
        record(1, &[3], SubgraphLabel::Suspicious),
        record(2, &[10, 12], SubgraphLabel::Licit),
        record(3, &[15, 16, 17], SubgraphLabel::Suspicious),
    ];
    (g, recs)
}

/// Frontier-membership frequencies of the sampling process, simulated from
/// scratch: a uniform `b`-subset of `train` seeds the frontier, then at
/// every hop each frontier node adds `min(f, d)` uniformly chosen distinct
/// neighbors. `out[h][v]` covers the frontier after `h` hops.
pub fn monte_carlo_frontier(
    g: &BackgroundGraph,
    direction: Direction,
    records: &[SubgraphRecord],
    train: &[usize],
    b: usize,
    fanouts: &[usize],
    trials: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let view = NeighborView::new(g, direction);
    let n = g.node_count();
    let mut rng = seeded_rng(seed);
    let mut counts = vec![vec![0u64; n]; fanouts.len() + 1];
    let mut reached = vec![false; n];
    for _ in 0..trials {
        reached.iter_mut().for_each(|x| *x = false);
        for &r in train.choose_multiple(&mut rng, b) {
            for v in &records[r].nodes {
                reached[v.index()] = true;
            }
        }
        for (h, row) in counts.iter_mut().enumerate() {
            if h > 0 {
                let frontier: Vec<usize> = (0..n).filter(|&v| reached[v]).collect();
                for u in frontier {
                    let nb = view.neighbors(NodeId(u as u32));
                    let k = fanouts[h - 1].min(nb.len());
                    for v in nb.choose_multiple(&mut rng, k) {
                        reached[v.index()] = true;
                    }
                }
            }
            for (c, &r) in row.iter_mut().zip(&reached) {
                *c += r as u64;
            }
        }
    }
    counts
        .into_iter()
        .map(|r| r.into_iter().map(|c| c as f64 / trials as f64).collect())
        .collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}
