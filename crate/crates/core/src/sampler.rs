//! Dataset splits, minibatches of subgraphs and nodewise neighborhood sampling.
//!
//! A minibatch of subgraphs is a flat slot list. The first slots hold the
//! member nodes of each subgraph back to back, described by
//! `subgraph_ranges`; the remaining slots hold sampled context nodes. Hop `h`
//! samples up to `fanouts[h-1]` neighbors (without replacement) for every slot
//! reached after `h-1` hops, and slots already reached stay in the frontier.

use std::collections::HashMap;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::builder::SubgraphRecord;
use crate::error::{Error, Result};
use crate::graph::{BackgroundGraph, NeighborView, NodeId};

/// Seeded generator used across the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a global seed with an epoch and a batch index (splitmix64 finalizer),
/// so every batch gets an independent, reproducible stream.
pub fn derive_seed(global: u64, epoch: u64, batch: u64) -> u64 {
    let mut z = global ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ batch.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random split of `0..n`. Validation and test sizes are floored; the
/// remainder goes to training. Each part is returned sorted.
pub fn split_dataset(n: usize, spec: &SplitSpec) -> Result<Split> {
    let ratios = [spec.train, spec.val, spec.test];
    if ratios.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Config(format!("split ratios must be positive, got {ratios:?}")));
    }
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must sum to 1, got {ratios:?}")));
    }
    if n == 0 {
        return Err(Error::Config("cannot split an empty record list".into()));
    }
    let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let (n_val, n_test) = (floor(spec.val), floor(spec.test));
    let n_train = n - n_val - n_test;

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded_rng(spec.seed));
    let part = |r: Range<usize>| {
        let mut v = perm[r].to_vec();
        v.sort_unstable();
        v
    };
    Ok(Split {
        train: part(0..n_train),
        val: part(n_train..n_train + n_val),
        test: part(n_train + n_val..n),
    })
}

/// Shuffles `indices` with `seed` and cuts them into batches; the last batch
/// may be short.
pub fn make_minibatches(indices: &[usize], batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order = indices.to_vec();
    order.shuffle(&mut seeded_rng(seed));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Batches for one training epoch.
pub fn epoch_batches(indices: &[usize], batch_size: usize, global_seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    make_minibatches(indices, batch_size, derive_seed(global_seed, epoch, u64::MAX))
}

/// Per-layer fanouts; `usize::MAX` keeps every neighbor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Fanouts(Vec<usize>);

impl Fanouts {
    pub fn new(per_layer: Vec<usize>) -> Result<Self> {
        if per_layer.is_empty() {
            return Err(Error::Config("at least one fanout is required".into()));
        }
        if per_layer.contains(&0) {
            return Err(Error::Config("fanouts must be positive".into()));
        }
        Ok(Self(per_layer))
    }

    /// Unlimited fanout for `layers` layers.
    pub fn full(layers: usize) -> Self {
        Self(vec![usize::MAX; layers.max(1)])
    }

    pub fn layers(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, layer: usize) -> usize {
        self.0[layer]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Parses `"10,10"`; `all` or `inf` stands for an unlimited fanout.
    pub fn parse(s: &str) -> Result<Self> {
        let per_layer = s
            .split(',')
            .map(|t| match t.trim() {
                "all" | "inf" => Ok(usize::MAX),
                t => t
                    .parse()
                    .map_err(|_| Error::Config(format!("bad fanout {t:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(per_layer)
    }
}

impl Default for Fanouts {
    fn default() -> Self {
        Self(vec![10, 10])
    }
}

impl TryFrom<Vec<usize>> for Fanouts {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Fanouts> for Vec<usize> {
    fn from(f: Fanouts) -> Self {
        f.0
    }
}

/// Sampled multi-hop neighborhood of a seed set, in local ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledLayers {
    /// Distinct nodes; seeds first, then nodes in discovery order.
    pub nodes: Vec<NodeId>,
    /// `layer_sizes[h]` = number of nodes reached within `h` hops.
    pub layer_sizes: Vec<usize>,
    /// `edges[h-1]` holds hop-`h` edges `(target, source)`: the target, reached
    /// within `h-1` hops, sampled the source.
    pub edges: Vec<Vec<(u32, u32)>>,
}

fn sample_neighbors<'a>(
    view: &'a NeighborView,
    u: NodeId,
    fanout: usize,
    rng: &mut impl Rng,
    buf: &'a mut Vec<NodeId>,
) -> &'a [NodeId] {
    let all = view.neighbors(u);
    if fanout >= all.len() {
        return all;
    }
    buf.clear();
    buf.extend(
        rand::seq::index::sample(rng, all.len(), fanout)
            .into_iter()
            .map(|i| all[i]),
    );
    buf
}

/// Nodewise sampling: at each hop every frontier node draws a uniform sample
/// of `min(fanout, degree)` distinct neighbors from `view`.
pub fn nodewise_sample(
    view: &NeighborView,
    seeds: &[NodeId],
    fanouts: &Fanouts,
    rng: &mut impl Rng,
) -> Result<SampledLayers> {
    if seeds.is_empty() {
        return Err(Error::Contract("nodewise sampling needs at least one seed".into()));
    }
    let mut local: HashMap<NodeId, u32> = HashMap::new();
    let mut nodes = Vec::new();
    for &s in seeds {
        if s.index() >= view.node_count() {
            return Err(Error::Integrity(format!("seed node {s} is not in the graph")));
        }
        local.entry(s).or_insert_with(|| {
            nodes.push(s);
            (nodes.len() - 1) as u32
        });
    }
    let mut layer_sizes = vec![nodes.len()];
    let mut edges = Vec::with_capacity(fanouts.layers());
    let mut buf = Vec::new();
    for h in 0..fanouts.layers() {
        let frontier = nodes.len();
        let mut hop = Vec::new();
        for t in 0..frontier {
            let picked = sample_neighbors(view, nodes[t], fanouts.get(h), rng, &mut buf);
            for &v in picked {
                let s = *local.entry(v).or_insert_with(|| {
                    nodes.push(v);
                    (nodes.len() - 1) as u32
                });
                hop.push((t as u32, s));
            }
        }
        layer_sizes.push(nodes.len());
        edges.push(hop);
    }
    Ok(SampledLayers {
        nodes,
        layer_sizes,
        edges,
    })
}

/// A minibatch of subgraphs laid out over slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minibatch {
    /// Node of each slot. The prefix `..layer_sizes[0]` is the concatenation
    /// of the subgraphs' node sets.
    pub node_list: Vec<NodeId>,
    pub subgraph_ranges: Vec<Range<usize>>,
    /// Slots reached within `h` hops occupy `..layer_sizes[h]`.
    pub layer_sizes: Vec<usize>,
    /// `layers[h-1]`: hop-`h` edges as `(target slot, source slot)`.
    pub layers: Vec<Vec<(u32, u32)>>,
    /// Binary targets per subgraph, when known.
    pub labels: Option<Vec<f64>>,
}

impl Minibatch {
    pub fn subgraph_count(&self) -> usize {
        self.subgraph_ranges.len()
    }

    pub fn hops(&self) -> usize {
        self.layers.len()
    }

    pub fn prefix_len(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Node set of subgraph `i`, recovered from the range metadata.
    pub fn subgraph_nodes(&self, i: usize) -> &[NodeId] {
        &self.node_list[self.subgraph_ranges[i].clone()]
    }

    /// Global nodes whose features the batch touches.
    pub fn distinct_nodes(&self) -> Vec<NodeId> {
        let mut v = self.node_list.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn layout_prefix(g: &BackgroundGraph, records: &[&SubgraphRecord]) -> Result<(Vec<NodeId>, Vec<Range<usize>>)> {
    if records.is_empty() {
        return Err(Error::Contract("a minibatch needs at least one subgraph".into()));
    }
    let mut prefix = Vec::new();
    let mut ranges = Vec::with_capacity(records.len());
    for r in records {
        if let Some(v) = r.nodes.iter().find(|v| !g.contains(**v)) {
            return Err(Error::Integrity(format!(
                "subgraph {} references node {v} outside the graph",
                r.id
            )));
        }
        let start = prefix.len();
        prefix.extend_from_slice(&r.nodes);
        ranges.push(start..prefix.len());
    }
    Ok((prefix, ranges))
}

fn record_labels(records: &[&SubgraphRecord]) -> Option<Vec<f64>> {
    records.iter().map(|r| r.label.target()).collect()
}

/// Minibatch over the background graph, sampled from the union of the
/// subgraphs' nodes. A node shared by several subgraphs gets one slot per
/// occurrence; the copies share one sample so their states coincide.
pub fn build_subgraph_minibatch(
    g: &BackgroundGraph,
    view: &NeighborView,
    records: &[&SubgraphRecord],
    fanouts: &Fanouts,
    rng: &mut impl Rng,
) -> Result<Minibatch> {
    let (prefix, subgraph_ranges) = layout_prefix(g, records)?;
    let sampled = nodewise_sample(view, &prefix, fanouts, rng)?;
    let unique_prefix = sampled.layer_sizes[0];

    // Local id -> primary slot, plus extra slots for repeated prefix nodes.
    let mut primary = vec![u32::MAX; sampled.nodes.len()];
    let mut copies: Vec<Vec<u32>> = vec![Vec::new(); unique_prefix];
    let mut first_local: HashMap<NodeId, u32> = HashMap::new();
    let mut next_local = 0u32;
    for (slot, &v) in prefix.iter().enumerate() {
        match first_local.get(&v) {
            Some(&l) => copies[l as usize].push(slot as u32),
            None => {
                first_local.insert(v, next_local);
                primary[next_local as usize] = slot as u32;
                next_local += 1;
            }
        }
    }
    for (l, p) in primary.iter_mut().enumerate().skip(unique_prefix) {
        *p = (prefix.len() + l - unique_prefix) as u32;
    }

    let prefix_len = prefix.len();
    let mut node_list = prefix;
    node_list.extend_from_slice(&sampled.nodes[unique_prefix..]);
    let layer_sizes = sampled
        .layer_sizes
        .iter()
        .map(|&s| prefix_len + s - unique_prefix)
        .collect();
    let layers = sampled
        .edges
        .iter()
        .map(|hop| {
            let mut out = Vec::with_capacity(hop.len());
            for &(t, s) in hop {
                let src = primary[s as usize];
                out.push((primary[t as usize], src));
                if let Some(extra) = copies.get(t as usize) {
                    out.extend(extra.iter().map(|&c| (c, src)));
                }
            }
            out
        })
        .collect();

    Ok(Minibatch {
        node_list,
        subgraph_ranges,
        layer_sizes,
        layers,
        labels: record_labels(records),
    })
}

/// Minibatch in which every subgraph is an isolated graph: only edges with
/// both endpoints in the same subgraph are sampled.
pub fn build_segregated_minibatch(
    g: &BackgroundGraph,
    view: &NeighborView,
    records: &[&SubgraphRecord],
    fanouts: &Fanouts,
    rng: &mut impl Rng,
) -> Result<Minibatch> {
    let (node_list, subgraph_ranges) = layout_prefix(g, records)?;
    let inner = segregated_adjacency(view, &node_list, &subgraph_ranges);
    let mut layers = Vec::with_capacity(fanouts.layers());
    let mut buf = Vec::new();
    for h in 0..fanouts.layers() {
        let mut hop = Vec::new();
        for (t, nbrs) in inner.iter().enumerate() {
            let f = fanouts.get(h);
            if f >= nbrs.len() {
                hop.extend(nbrs.iter().map(|&s| (t as u32, s)));
            } else {
                buf.clear();
                buf.extend(
                    rand::seq::index::sample(rng, nbrs.len(), f)
                        .into_iter()
                        .map(|i| nbrs[i]),
                );
                hop.extend(buf.iter().map(|&s| (t as u32, s)));
            }
        }
        layers.push(hop);
    }
    let n = node_list.len();
    Ok(Minibatch {
        node_list,
        subgraph_ranges,
        layer_sizes: vec![n; fanouts.layers() + 1],
        layers,
        labels: record_labels(records),
    })
}

/// For each prefix slot, the slots of its view-neighbors inside the same
/// subgraph.
pub(crate) fn segregated_adjacency(
    view: &NeighborView,
    node_list: &[NodeId],
    ranges: &[Range<usize>],
) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); node_list.len()];
    for r in ranges {
        let slot_of: HashMap<NodeId, u32> = r.clone().map(|s| (node_list[s], s as u32)).collect();
        for s in r.clone() {
            adj[s] = view
                .neighbors(node_list[s])
                .iter()
                .filter_map(|v| slot_of.get(v).copied())
                .collect();
        }
    }
    adj
}

/// Minibatch without any edges; nodes see only their own features.
pub fn build_isolated_minibatch(g: &BackgroundGraph, records: &[&SubgraphRecord], hops: usize) -> Result<Minibatch> {
    let (node_list, subgraph_ranges) = layout_prefix(g, records)?;
    let n = node_list.len();
    Ok(Minibatch {
        node_list,
        subgraph_ranges,
        layer_sizes: vec![n; hops + 1],
        layers: vec![Vec::new(); hops],
        labels: record_labels(records),
    })
}

/// Line-oriented dump of a minibatch with external node ids.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MinibatchDump {
    pub batch: usize,
    pub record_ids: Vec<usize>,
    pub node_list: Vec<u64>,
    pub ranges: Vec<(usize, usize)>,
    pub layer_sizes: Vec<usize>,
    /// Per hop, `(target slot, source slot)` pairs.
    pub layers: Vec<Vec<(u32, u32)>>,
}

impl MinibatchDump {
    pub fn new(batch: usize, g: &BackgroundGraph, records: &[&SubgraphRecord], mb: &Minibatch) -> Self {
        Self {
            batch,
            record_ids: records.iter().map(|r| r.id).collect(),
            node_list: mb.node_list.iter().map(|&v| g.external_id(v)).collect(),
            ranges: mb.subgraph_ranges.iter().map(|r| (r.start, r.end)).collect(),
            layer_sizes: mb.layer_sizes.clone(),
            layers: mb.layers.clone(),
        }
    }
}
