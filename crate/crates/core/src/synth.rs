//! Synthetic datasets with a planted boundary signal.
//!
//! Every subgraph is a directed chain of members and every member has
//! exactly one edge leaving the subgraph, so a subgraph's internal structure
//! and its members' degrees carry no class information. Licit members attach
//! to random background nodes. Suspicious members attach to their own peel
//! node; a record's peel nodes form a chain and each one forwards to a
//! shared high-degree sink hub.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::builder::{SubgraphLabel, SubgraphRecord};
use crate::error::{Error, Result};
use crate::graph::{BackgroundGraph, NodeId};
use crate::sampler::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub nodes: usize,
    pub records: usize,
    pub suspicious_fraction: f64,
    pub min_size: usize,
    pub max_size: usize,
    /// Out-edges per background node, to uniformly chosen background nodes.
    pub background_out_degree: usize,
    /// Probability that a suspicious member's boundary edge goes to a peel
    /// node rather than to a background node.
    pub signal: f64,
    pub hubs: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            nodes: 10_000,
            records: 1_000,
            suspicious_fraction: 0.0227,
            min_size: 3,
            max_size: 3,
            background_out_degree: 2,
            signal: 1.0,
            hubs: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    /// External ids are `0..nodes`.
    pub graph: BackgroundGraph,
    pub records: Vec<SubgraphRecord>,
}

impl SynthConfig {
    pub fn suspicious_count(&self) -> usize {
        (self.records as f64 * self.suspicious_fraction).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.suspicious_fraction) {
            return Err(Error::Config("suspicious fraction must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.signal) {
            return Err(Error::Config("signal must lie in [0, 1]".into()));
        }
        if self.min_size == 0 || self.min_size > self.max_size {
            return Err(Error::Config(format!(
                "subgraph sizes {}..={} are not a valid range",
                self.min_size, self.max_size
            )));
        }
        if self.hubs == 0 {
            return Err(Error::Config("at least one sink hub is required".into()));
        }
        // Worst case: every record at max size, every suspicious member with a peel.
        let members = self.records * self.max_size;
        let peels = self.suspicious_count() * self.max_size;
        let needed = members + peels + self.hubs + 2;
        if needed > self.nodes {
            return Err(Error::Config(format!(
                "{} nodes cannot hold {} records of up to {} nodes plus peel nodes, hubs and background (need {needed})",
                self.nodes, self.records, self.max_size
            )));
        }
        Ok(())
    }
}

pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = seeded_rng(seed);
    let mut suspicious = vec![false; cfg.records];
    for i in rand::seq::index::sample(&mut rng, cfg.records, cfg.suspicious_count()) {
        suspicious[i] = true;
    }
    let sizes: Vec<usize> = (0..cfg.records)
        .map(|_| rng.gen_range(cfg.min_size..=cfg.max_size))
        .collect();

    // Node ids are dealt out in a shuffled order so roles do not cluster.
    let mut ids: Vec<u64> = (0..cfg.nodes as u64).collect();
    ids.shuffle(&mut rng);
    let mut next = ids.into_iter();
    let mut fresh = || next.next().expect("validated node budget");

    let hubs: Vec<u64> = (0..cfg.hubs).map(|_| fresh()).collect();
    let members: Vec<Vec<u64>> = sizes.iter().map(|&k| (0..k).map(|_| fresh()).collect()).collect();
    let peels: Vec<Vec<u64>> = members
        .iter()
        .zip(&suspicious)
        .map(|(m, &s)| {
            if s {
                m.iter().map(|_| fresh()).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let background: Vec<u64> = next.collect();

    let mut edges = Vec::new();
    for &u in &background {
        for _ in 0..cfg.background_out_degree {
            let v = background[rng.gen_range(0..background.len())];
            if v != u {
                edges.push((u, v));
            }
        }
    }
    for (i, m) in members.iter().enumerate() {
        edges.extend(m.windows(2).map(|w| (w[0], w[1])));
        for (j, &v) in m.iter().enumerate() {
            if suspicious[i] && rng.gen_bool(cfg.signal) {
                edges.push((v, peels[i][j]));
            } else {
                edges.push((v, background[rng.gen_range(0..background.len())]));
            }
        }
        let p = &peels[i];
        edges.extend(p.windows(2).map(|w| (w[0], w[1])));
        for &q in p {
            edges.push((q, hubs[rng.gen_range(0..hubs.len())]));
        }
    }

    let graph = BackgroundGraph::from_edges(cfg.nodes, &edges)?;
    let records = members
        .into_iter()
        .zip(&suspicious)
        .enumerate()
        .map(|(id, (m, &s))| {
            let label = if s {
                SubgraphLabel::Suspicious
            } else {
                SubgraphLabel::Licit
            };
            SubgraphRecord::new(id, m.into_iter().map(|v| NodeId(v as u32)).collect(), label)
        })
        .collect();
    Ok(SynthDataset { graph, records })
}
