//! Vertex-inclusion probabilities for subgraph minibatches, static feature
//! caching and a communication-volume simulator for partitioned features.
//!
//! Subgraph sampling is reduced to node sampling on an augmented graph: one
//! synthetic node per subgraph, wired to every member. A minibatch picks `B`
//! synthetic nodes out of the training set, the first layer keeps all of
//! their members, and each later layer runs nodewise sampling. The VIP table
//! gives, per layer, the probability that a node is in the sampled frontier.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builder::SubgraphRecord;
use crate::error::{Error, Result};
use crate::graph::{BackgroundGraph, NeighborView, NodeId};
use crate::sampler::{build_subgraph_minibatch, derive_seed, epoch_batches, seeded_rng, Fanouts, Minibatch};

/// The background graph plus one synthetic node per subgraph. Base edges are
/// not copied.
#[derive(Debug, Clone)]
pub struct AugmentedGraph<'g> {
    base: &'g BackgroundGraph,
    members: Vec<Vec<NodeId>>,
}

pub fn augment_graph<'g>(g: &'g BackgroundGraph, records: &[SubgraphRecord]) -> Result<AugmentedGraph<'g>> {
    let mut members = Vec::with_capacity(records.len());
    for r in records {
        let mut m = r.nodes.clone();
        m.sort_unstable();
        m.dedup();
        if let Some(v) = m.iter().find(|v| !g.contains(**v)) {
            return Err(Error::Integrity(format!(
                "subgraph {} references node {v} outside the graph",
                r.id
            )));
        }
        members.push(m);
    }
    Ok(AugmentedGraph { base: g, members })
}

impl<'g> AugmentedGraph<'g> {
    pub fn base(&self) -> &'g BackgroundGraph {
        self.base
    }

    /// |V'| = |V| + number of subgraphs.
    pub fn node_count(&self) -> usize {
        self.base.node_count() + self.members.len()
    }

    pub fn synthetic_count(&self) -> usize {
        self.members.len()
    }

    /// Id of the synthetic node for subgraph `i` in the augmented numbering.
    pub fn synthetic_node(&self, i: usize) -> usize {
        self.base.node_count() + i
    }

    /// Out-neighbors of synthetic node `i`; synthetic nodes have no in-edges.
    pub fn members(&self, i: usize) -> &[NodeId] {
        &self.members[i]
    }

    pub fn synthetic_edge_count(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }
}

/// Probability that a training subgraph lands in a given minibatch. The
/// subgraph-conditioned method always combines subgraphs under the exact
/// uniform-minibatch law; this rule sets the synthetic layer and drives the
/// node-independent method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer0Rule {
    /// `B / #train` (uniform minibatch of size B over the training subgraphs).
    #[default]
    BatchOverTrain,
    /// `#train / |V'|`, the formula as literally stated for node workloads.
    TrainOverNodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VipMethod {
    /// Propagate each training subgraph's cascade conditioned on that
    /// subgraph being in the batch, then take the expectation over a uniform
    /// `B`-subset of training subgraphs, treating cascades as independent.
    #[default]
    SubgraphConditioned,
    /// Treat every node's inclusion as independent of every other node's.
    NodeIndependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VipConfig {
    pub batch_size: usize,
    pub fanouts: Fanouts,
    #[serde(default)]
    pub layer0: Layer0Rule,
    #[serde(default)]
    pub method: VipMethod,
}

/// Per-layer inclusion probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct VipTable {
    /// Layer 0: probability per synthetic node (0 for non-training subgraphs).
    pub synthetic: Vec<f64>,
    /// `frontier[h][v]`: probability that base node `v` is in the frontier
    /// after `h` sampling hops; `frontier[0]` is the member layer.
    pub frontier: Vec<Vec<f64>>,
}

impl VipTable {
    /// Number of augmented layers, counting the synthetic layer.
    pub fn layer_count(&self) -> usize {
        self.frontier.len() + 1
    }

    /// Probability for base node `v` at augmented layer `layer >= 1`.
    pub fn get(&self, layer: usize, v: NodeId) -> f64 {
        self.frontier[layer - 1][v.index()]
    }

    /// Probability that base node `v` is anywhere in a minibatch: the last
    /// frontier, since frontiers only grow. A batch fetches each node's
    /// features once, so this is the expected fetch count per batch.
    pub fn presence(&self) -> &[f64] {
        self.frontier.last().map_or(&[], Vec::as_slice)
    }

    /// Sum over layers: expected number of layers that touch `v` per batch.
    /// Nodes reached at the first hops score high even when rarely sampled
    /// overall, so caching uses [`VipTable::presence`] instead.
    pub fn aggregate(&self) -> Vec<f64> {
        let n = self.frontier.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for layer in &self.frontier {
            for (o, p) in out.iter_mut().zip(layer) {
                *o += p;
            }
        }
        out
    }
}

/// Inclusion probabilities for minibatches of `cfg.batch_size` training
/// subgraphs sampled over `view` with `cfg.fanouts`.
///
/// With `r_h(u) = min(f_h, d(u)) / d(u)`, a node stays in the frontier once
/// reached and is newly reached when some frontier neighbor samples it:
/// `p_{h+1}(v) = 1 - (1 - p_h(v)) * prod_{u: v in N(u)} (1 - p_h(u) r_h(u))`.
pub fn vip_analysis(
    aug: &AugmentedGraph<'_>,
    view: &NeighborView,
    train: &[usize],
    cfg: &VipConfig,
) -> Result<VipTable> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if cfg.batch_size > train.len() {
        return Err(Error::Config(format!(
            "batch size {} exceeds the {} training subgraphs",
            cfg.batch_size,
            train.len()
        )));
    }
    if let Some(&bad) = train.iter().find(|&&i| i >= aug.synthetic_count()) {
        return Err(Error::Contract(format!("training index {bad} out of range")));
    }
    let pi = match cfg.layer0 {
        Layer0Rule::BatchOverTrain => cfg.batch_size as f64 / train.len() as f64,
        Layer0Rule::TrainOverNodes => train.len() as f64 / aug.node_count() as f64,
    }
    .clamp(0.0, 1.0);

    let mut synthetic = vec![0.0; aug.synthetic_count()];
    for &i in train {
        synthetic[i] = pi;
    }
    let frontier = match cfg.method {
        VipMethod::NodeIndependent => node_independent(aug, view, train, pi, &cfg.fanouts),
        VipMethod::SubgraphConditioned => subgraph_conditioned(aug, view, train, cfg.batch_size, &cfg.fanouts),
    };
    Ok(VipTable { synthetic, frontier })
}

#[inline]
fn keep_ratio(view: &NeighborView, u: NodeId, fanout: usize) -> f64 {
    let d = view.degree(u);
    if d == 0 {
        0.0
    } else {
        fanout.min(d) as f64 / d as f64
    }
}

fn node_independent(
    aug: &AugmentedGraph<'_>,
    view: &NeighborView,
    train: &[usize],
    pi: f64,
    fanouts: &Fanouts,
) -> Vec<Vec<f64>> {
    let n = aug.base().node_count();
    let mut log_miss = vec![0.0f64; n];
    for &i in train {
        for &v in aug.members(i) {
            log_miss[v.index()] += (1.0 - pi).ln();
        }
    }
    let mut layers = vec![from_log_miss(&log_miss)];
    for h in 0..fanouts.layers() {
        let prev = layers.last().unwrap();
        let mut log_miss: Vec<f64> = prev.iter().map(|p| (1.0 - p).ln()).collect();
        for u in 0..n {
            let u = NodeId::from(u);
            let q = prev[u.index()] * keep_ratio(view, u, fanouts.get(h));
            if q > 0.0 {
                let term = (1.0 - q).ln();
                for &v in view.neighbors(u) {
                    log_miss[v.index()] += term;
                }
            }
        }
        layers.push(from_log_miss(&log_miss));
    }
    layers
}

fn subgraph_conditioned(
    aug: &AugmentedGraph<'_>,
    view: &NeighborView,
    train: &[usize],
    batch_size: usize,
    fanouts: &Fanouts,
) -> Vec<Vec<f64>> {
    let n = aug.base().node_count();
    let cascades: Vec<Vec<Vec<(NodeId, f64)>>> = train
        .par_iter()
        .map(|&i| conditional_cascade(aug.members(i), view, fanouts))
        .collect();
    (0..=fanouts.layers())
        .map(|h| {
            let mut miss: Vec<Vec<f64>> = vec![Vec::new(); n];
            for c in &cascades {
                for &(v, q) in &c[h] {
                    miss[v.index()].push(1.0 - q);
                }
            }
            miss.par_iter()
                .map(|x| 1.0 - expected_product(x, train.len(), batch_size))
                .map(|p| p.clamp(0.0, 1.0))
                .collect()
        })
        .collect()
}

/// `E[prod_{i in S} x_i]` for a uniform `b`-subset `S` of `t` items, where
/// the items not listed in `x` contribute a factor of 1.
///
/// Items are drawn in sequence: with `k` of the first `i` items chosen, item
/// `i + 1` is chosen with probability `(b - k) / (t - i)`.
fn expected_product(x: &[f64], t: usize, b: usize) -> f64 {
    if x.is_empty() {
        return 1.0;
    }
    let mut dp = vec![0.0f64; b.min(x.len()) + 1];
    dp[0] = 1.0;
    for (i, &xi) in x.iter().enumerate() {
        let rest = (t - i) as f64;
        for k in (0..=i.min(b)).rev() {
            let mass = dp[k];
            if mass == 0.0 {
                continue;
            }
            let pick = (b - k) as f64 / rest;
            if k < b {
                dp[k + 1] += mass * pick * xi;
            }
            dp[k] = mass * (1.0 - pick);
        }
    }
    dp.iter().sum()
}

/// Frontier probabilities of one subgraph's sampling cascade, given that the
/// subgraph is in the batch. Entry `h` covers the frontier after `h` hops.
fn conditional_cascade(members: &[NodeId], view: &NeighborView, fanouts: &Fanouts) -> Vec<Vec<(NodeId, f64)>> {
    let mut current: HashMap<NodeId, f64> = members.iter().map(|&v| (v, 1.0)).collect();
    let mut out = Vec::with_capacity(fanouts.layers() + 1);
    out.push(sorted(&current));
    for h in 0..fanouts.layers() {
        let mut log_miss: HashMap<NodeId, f64> = current
            .iter()
            .map(|(&v, &p)| (v, if p >= 1.0 { f64::NEG_INFINITY } else { (1.0 - p).ln() }))
            .collect();
        for (&u, &p) in &current {
            let q = p * keep_ratio(view, u, fanouts.get(h));
            if q <= 0.0 {
                continue;
            }
            let term = if q >= 1.0 { f64::NEG_INFINITY } else { (1.0 - q).ln() };
            for &v in view.neighbors(u) {
                *log_miss.entry(v).or_insert(0.0) += term;
            }
        }
        current = log_miss.into_iter().map(|(v, l)| (v, 1.0 - l.exp())).collect();
        out.push(sorted(&current));
    }
    out
}

fn sorted(m: &HashMap<NodeId, f64>) -> Vec<(NodeId, f64)> {
    let mut v: Vec<(NodeId, f64)> = m.iter().map(|(&k, &p)| (k, p)).collect();
    v.sort_unstable_by_key(|e| e.0);
    v
}

fn from_log_miss(log_miss: &[f64]) -> Vec<f64> {
    log_miss.iter().map(|l| (1.0 - l.exp()).clamp(0.0, 1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    #[default]
    Random,
    /// Keep each subgraph's nodes together when the balance bound allows.
    SubgraphAware,
}

/// Assignment of every node to one of `parts` partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<u32>,
    parts: usize,
}

impl Partition {
    pub fn parts(&self) -> usize {
        self.parts
    }

    #[inline]
    pub fn of(&self, v: NodeId) -> usize {
        self.assignment[v.index()] as usize
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.parts];
        for &a in &self.assignment {
            s[a as usize] += 1;
        }
        s
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }
}

/// Splits the nodes into `parts` partitions. Random mode deals a seeded
/// permutation round-robin. Subgraph-aware mode places whole subgraphs on
/// the least-loaded partition while sizes stay within
/// `ceil(|V|/P) * (1 + balance)`.
pub fn partition_nodes(
    g: &BackgroundGraph,
    records: &[SubgraphRecord],
    parts: usize,
    seed: u64,
    mode: PartitionMode,
    balance: f64,
) -> Result<Partition> {
    if parts == 0 {
        return Err(Error::Config("partition count must be at least 1".into()));
    }
    let n = g.node_count();
    let mut rng = seeded_rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut assignment = vec![u32::MAX; n];
    match mode {
        PartitionMode::Random => {
            for (i, &v) in order.iter().enumerate() {
                assignment[v] = (i % parts) as u32;
            }
        }
        PartitionMode::SubgraphAware => {
            let cap = ((n.div_ceil(parts)) as f64 * (1.0 + balance.max(0.0))).floor() as usize;
            let mut load = vec![0usize; parts];
            let least = |load: &[usize]| (0..parts).min_by_key(|&p| (load[p], p)).unwrap();
            let mut rec_order: Vec<usize> = (0..records.len()).collect();
            rec_order.shuffle(&mut rng);
            for ri in rec_order {
                let fresh: Vec<usize> = records[ri]
                    .nodes
                    .iter()
                    .map(|v| v.index())
                    .filter(|&v| v < n && assignment[v] == u32::MAX)
                    .collect();
                let p = least(&load);
                if load[p] + fresh.len() <= cap {
                    load[p] += fresh.len();
                    for v in fresh {
                        assignment[v] = p as u32;
                    }
                } else {
                    for v in fresh {
                        let p = least(&load);
                        assignment[v] = p as u32;
                        load[p] += 1;
                    }
                }
            }
            for v in order {
                if assignment[v] == u32::MAX {
                    let p = least(&load);
                    assignment[v] = p as u32;
                    load[p] += 1;
                }
            }
        }
    }
    Ok(Partition { assignment, parts })
}

/// Per-partition sets of cached remote nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachePolicy {
    budget: usize,
    cached: Vec<Vec<NodeId>>,
    lookup: Vec<std::collections::HashSet<NodeId>>,
}

impl CachePolicy {
    fn new(budget: usize, mut cached: Vec<Vec<NodeId>>) -> Self {
        for c in &mut cached {
            c.sort_unstable();
        }
        let lookup = cached.iter().map(|c| c.iter().copied().collect()).collect();
        Self { budget, cached, lookup }
    }

    /// No caching on any of `parts` partitions.
    pub fn empty(parts: usize) -> Self {
        Self::new(0, vec![Vec::new(); parts])
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn parts(&self) -> usize {
        self.cached.len()
    }

    pub fn cached(&self, part: usize) -> &[NodeId] {
        &self.cached[part]
    }

    #[inline]
    pub fn is_cached(&self, part: usize, v: NodeId) -> bool {
        self.lookup[part].contains(&v)
    }
}

/// Each partition caches the `budget` remote nodes with the highest score,
/// ties broken by smaller node id.
pub fn build_cache_policy_from_scores(scores: &[f64], partition: &Partition, budget: usize) -> CachePolicy {
    let cached = (0..partition.parts())
        .map(|p| {
            let mut remote: Vec<NodeId> = (0..partition.node_count())
                .map(NodeId::from)
                .filter(|&v| partition.of(v) != p)
                .collect();
            let key = |v: &NodeId| (std::cmp::Reverse(OrdF64(scores[v.index()])), *v);
            if budget < remote.len() {
                remote.select_nth_unstable_by_key(budget, key);
                remote.truncate(budget);
            }
            remote
        })
        .collect();
    CachePolicy::new(budget, cached)
}

/// VIP-guided static cache scored by minibatch presence probability.
pub fn build_cache_policy(vip: &VipTable, partition: &Partition, budget: usize) -> CachePolicy {
    build_cache_policy_from_scores(vip.presence(), partition, budget)
}

/// Baseline cache holding `budget` uniformly chosen remote nodes per partition.
pub fn build_random_cache_policy(partition: &Partition, budget: usize, seed: u64) -> CachePolicy {
    let mut rng = seeded_rng(seed);
    let cached = (0..partition.parts())
        .map(|p| {
            let mut remote: Vec<NodeId> = (0..partition.node_count())
                .map(NodeId::from)
                .filter(|&v| partition.of(v) != p)
                .collect();
            remote.shuffle(&mut rng);
            remote.truncate(budget);
            remote
        })
        .collect();
    CachePolicy::new(budget, cached)
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CommStats {
    pub batches: usize,
    /// Feature rows needed from other partitions without a cache.
    pub remote_without_cache: u64,
    /// Feature rows still fetched remotely with the cache.
    pub remote_with_cache: u64,
    pub cache_hits: u64,
    /// `cache_hits / remote_without_cache`.
    pub hit_rate: f64,
    /// `1 - remote_with_cache / remote_without_cache`.
    pub reduction_ratio: f64,
}

/// Replays minibatches with every partition acting as the requester of each
/// batch, counting feature rows owned elsewhere. Cached rows cost nothing.
pub fn simulate_comm_volume<'a>(
    partition: &Partition,
    policy: &CachePolicy,
    batches: impl IntoIterator<Item = &'a Minibatch>,
) -> Result<CommStats> {
    if policy.parts() != partition.parts() {
        return Err(Error::Contract(format!(
            "cache policy covers {} partitions, partition has {}",
            policy.parts(),
            partition.parts()
        )));
    }
    let mut stats = CommStats::default();
    for mb in batches {
        stats.batches += 1;
        for v in mb.distinct_nodes() {
            for p in (0..partition.parts()).filter(|&p| p != partition.of(v)) {
                stats.remote_without_cache += 1;
                if policy.is_cached(p, v) {
                    stats.cache_hits += 1;
                } else {
                    stats.remote_with_cache += 1;
                }
            }
        }
    }
    if stats.remote_without_cache > 0 {
        stats.hit_rate = stats.cache_hits as f64 / stats.remote_without_cache as f64;
        stats.reduction_ratio = 1.0 - stats.remote_with_cache as f64 / stats.remote_without_cache as f64;
    }
    Ok(stats)
}

/// `count` training minibatches of `batch_size` subgraphs each, drawn epoch by
/// epoch; the short tail batch of an epoch is skipped.
pub fn training_batches(
    g: &BackgroundGraph,
    view: &NeighborView,
    records: &[SubgraphRecord],
    train: &[usize],
    batch_size: usize,
    fanouts: &Fanouts,
    seed: u64,
    count: usize,
) -> Result<Vec<Minibatch>> {
    if train.is_empty() {
        return Err(Error::Config("no training subgraphs".into()));
    }
    let mut plan = Vec::with_capacity(count);
    let mut epoch = 0u64;
    while plan.len() < count {
        let before = plan.len();
        for (b, batch) in epoch_batches(train, batch_size, seed, epoch)?.into_iter().enumerate() {
            if batch.len() == batch_size && plan.len() < count {
                plan.push((derive_seed(seed, epoch, b as u64), batch));
            }
        }
        if plan.len() == before {
            return Err(Error::Config("batch size larger than the training set".into()));
        }
        epoch += 1;
    }
    plan.into_par_iter()
        .map(|(s, batch)| {
            let recs: Vec<&SubgraphRecord> = batch.iter().map(|&i| &records[i]).collect();
            build_subgraph_minibatch(g, view, &recs, fanouts, &mut seeded_rng(s))
        })
        .collect()
}

/// Empirical per-layer frontier frequencies over `trials` uniformly drawn
/// minibatches of `batch_size` training subgraphs.
pub fn monte_carlo_inclusion(
    g: &BackgroundGraph,
    view: &NeighborView,
    records: &[SubgraphRecord],
    train: &[usize],
    batch_size: usize,
    fanouts: &Fanouts,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = g.node_count();
    let layers = fanouts.layers() + 1;
    let mut counts = vec![vec![0u64; n]; layers];
    let mut rng = seeded_rng(seed);
    let mut pool = train.to_vec();
    for _ in 0..trials {
        let (chosen, _) = pool.partial_shuffle(&mut rng, batch_size);
        let recs: Vec<&SubgraphRecord> = chosen.iter().map(|&i| &records[i]).collect();
        let mb = build_subgraph_minibatch(g, view, &recs, fanouts, &mut rng)?;
        for (h, count) in counts.iter_mut().enumerate() {
            let mut seen: Vec<NodeId> = mb.node_list[..mb.layer_sizes[h]].to_vec();
            seen.sort_unstable();
            seen.dedup();
            for v in seen {
                count[v.index()] += 1;
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|c| c.into_iter().map(|x| x as f64 / trials as f64).collect())
        .collect())
}

/// Pick a uniformly random `k`-subset of `0..n`.
pub fn random_subset(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::SubgraphLabel;
    use crate::graph::Direction;

    fn rec(id: usize, nodes: &[u32]) -> SubgraphRecord {
        SubgraphRecord::new(id, nodes.iter().map(|&n| NodeId(n)).collect(), SubgraphLabel::Licit)
    }

    fn path_graph(n: usize) -> BackgroundGraph {
        let e: Vec<(u64, u64)> = (0..n as u64 - 1).map(|i| (i, i + 1)).collect();
        BackgroundGraph::from_edges(n, &e).unwrap()
    }

    #[test]
    fn augmentation_counts() {
        let g = path_graph(6);
        let aug = augment_graph(&g, &[]).unwrap();
        assert_eq!((aug.node_count(), aug.synthetic_edge_count()), (6, 0));
        let recs = [rec(0, &[0, 1, 2]), rec(1, &[4, 5])];
        let aug = augment_graph(&g, &recs).unwrap();
        assert_eq!((aug.node_count(), aug.synthetic_edge_count()), (8, 5));
        let dup = SubgraphRecord {
            id: 0,
            nodes: vec![NodeId(3), NodeId(3)],
            label: SubgraphLabel::Licit,
        };
        assert_eq!(augment_graph(&g, &[dup]).unwrap().synthetic_edge_count(), 1);
        assert!(augment_graph(&g, &[rec(0, &[17])]).is_err());
    }

    #[test]
    fn full_batch_members_are_certain() {
        let g = path_graph(8);
        let view = NeighborView::new(&g, Direction::Both);
        let recs = [rec(0, &[0, 1]), rec(1, &[5])];
        let aug = augment_graph(&g, &recs).unwrap();
        for method in [VipMethod::SubgraphConditioned, VipMethod::NodeIndependent] {
            let cfg = VipConfig {
                batch_size: 2,
                fanouts: Fanouts::new(vec![1, 1]).unwrap(),
                layer0: Layer0Rule::BatchOverTrain,
                method,
            };
            let t = vip_analysis(&aug, &view, &[0, 1], &cfg).unwrap();
            assert_eq!(t.synthetic, vec![1.0, 1.0]);
            for v in [0, 1, 5] {
                assert_eq!(t.get(1, NodeId(v)), 1.0);
            }
            // Node 3 is two hops from node 5 and node 1; 7 is two hops from 5.
            // None of them can be in the member layer.
            assert_eq!(t.get(1, NodeId(3)), 0.0);
        }
    }

    #[test]
    fn unreachable_nodes_are_zero() {
        // 0-1-2-3-4-5-6, subgraph {0}, two hops reach at most node 2.
        let g = path_graph(7);
        let view = NeighborView::new(&g, Direction::Both);
        let recs = [rec(0, &[0]), rec(1, &[0])];
        let aug = augment_graph(&g, &recs).unwrap();
        let cfg = VipConfig {
            batch_size: 1,
            fanouts: Fanouts::new(vec![2, 2]).unwrap(),
            layer0: Layer0Rule::default(),
            method: VipMethod::default(),
        };
        let t = vip_analysis(&aug, &view, &[0, 1], &cfg).unwrap();
        for l in 1..t.layer_count() {
            for v in 3..7 {
                assert_eq!(t.get(l, NodeId(v)), 0.0);
            }
        }
        assert!(t.get(3, NodeId(2)) > 0.0);
    }

    #[test]
    fn oversized_batch_is_config_error() {
        let g = path_graph(3);
        let view = NeighborView::new(&g, Direction::Both);
        let recs = [rec(0, &[0])];
        let aug = augment_graph(&g, &recs).unwrap();
        let cfg = VipConfig {
            batch_size: 2,
            fanouts: Fanouts::default(),
            layer0: Layer0Rule::default(),
            method: VipMethod::default(),
        };
        assert!(matches!(vip_analysis(&aug, &view, &[0], &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn literal_layer0_rule() {
        let g = path_graph(4);
        let view = NeighborView::new(&g, Direction::Both);
        let recs = [rec(0, &[0]), rec(1, &[3])];
        let aug = augment_graph(&g, &recs).unwrap();
        let cfg = VipConfig {
            batch_size: 1,
            fanouts: Fanouts::default(),
            layer0: Layer0Rule::TrainOverNodes,
            method: VipMethod::default(),
        };
        let t = vip_analysis(&aug, &view, &[0, 1], &cfg).unwrap();
        assert!((t.synthetic[0] - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn expected_product_matches_enumeration() {
        // Every 2-subset of 6 items, two of which carry factors 0.5 and 0.
        let x = [0.5, 0.0];
        let mut total = 0.0;
        let mut count = 0.0;
        for a in 0..6 {
            for b in a + 1..6 {
                let f = |i: usize| if i < 2 { x[i] } else { 1.0 };
                total += f(a) * f(b);
                count += 1.0;
            }
        }
        assert!((expected_product(&x, 6, 2) - total / count).abs() < 1e-12);
        assert!((expected_product(&[0.0; 4], 6, 2) - 1.0 / 15.0).abs() < 1e-12);
        assert_eq!(expected_product(&[], 6, 2), 1.0);
        assert!(expected_product(&[0.3], 1, 1) - 0.3 < 1e-12);
    }

    #[test]
    fn partitions() {
        let g = path_graph(11);
        let one = partition_nodes(&g, &[], 1, 0, PartitionMode::Random, 0.1).unwrap();
        assert!(g.nodes().all(|v| one.of(v) == 0));

        let a = partition_nodes(&g, &[], 2, 5, PartitionMode::Random, 0.1).unwrap();
        assert_eq!(a, partition_nodes(&g, &[], 2, 5, PartitionMode::Random, 0.1).unwrap());
        let s = a.sizes();
        assert!(s[0].abs_diff(s[1]) <= 1);

        let recs = [rec(0, &[2, 6, 9])];
        let p = partition_nodes(&g, &recs, 3, 1, PartitionMode::SubgraphAware, 0.1).unwrap();
        assert_eq!(p.of(NodeId(2)), p.of(NodeId(6)));
        assert_eq!(p.of(NodeId(2)), p.of(NodeId(9)));
        assert!(partition_nodes(&g, &[], 0, 0, PartitionMode::Random, 0.1).is_err());
    }

    #[test]
    fn cache_selection() {
        let g = path_graph(6);
        let part = partition_nodes(&g, &[], 2, 3, PartitionMode::Random, 0.0).unwrap();
        let scores = [0.5, 0.1, 0.9, 0.3, 0.7, 0.2];
        assert!(build_cache_policy_from_scores(&scores, &part, 0).cached(0).is_empty());

        let all = build_cache_policy_from_scores(&scores, &part, 10);
        for p in 0..2 {
            assert_eq!(all.cached(p).len(), 3);
            assert!(all.cached(p).iter().all(|&v| part.of(v) != p));
        }

        let top = build_cache_policy_from_scores(&scores, &part, 2);
        for p in 0..2 {
            let mut remote: Vec<NodeId> = g.nodes().filter(|&v| part.of(v) != p).collect();
            remote.sort_by(|a, b| scores[b.index()].total_cmp(&scores[a.index()]).then(a.cmp(b)));
            let mut want = remote[..2].to_vec();
            want.sort();
            assert_eq!(top.cached(p), want.as_slice());
        }
    }

    #[test]
    fn single_partition_has_no_remote_traffic() {
        let g = path_graph(5);
        let view = NeighborView::new(&g, Direction::Both);
        let recs = vec![rec(0, &[0]), rec(1, &[4])];
        let part = partition_nodes(&g, &recs, 1, 0, PartitionMode::Random, 0.1).unwrap();
        let batches = training_batches(&g, &view, &recs, &[0, 1], 1, &Fanouts::default(), 0, 4).unwrap();
        let stats = simulate_comm_volume(&part, &CachePolicy::empty(1), &batches).unwrap();
        assert_eq!(stats.remote_without_cache, 0);
        assert_eq!(stats.batches, 4);
    }

    #[test]
    fn saturated_cache_removes_remote_traffic() {
        let g = path_graph(9);
        let view = NeighborView::new(&g, Direction::Both);
        let recs = vec![rec(0, &[0, 1]), rec(1, &[7])];
        let part = partition_nodes(&g, &recs, 3, 0, PartitionMode::Random, 0.1).unwrap();
        let batches = training_batches(&g, &view, &recs, &[0, 1], 1, &Fanouts::default(), 2, 6).unwrap();
        let full = build_random_cache_policy(&part, 9, 0);
        let stats = simulate_comm_volume(&part, &full, &batches).unwrap();
        assert!(stats.remote_without_cache > 0);
        assert_eq!(stats.remote_with_cache, 0);
        assert_eq!(stats.reduction_ratio, 1.0);
    }
}
