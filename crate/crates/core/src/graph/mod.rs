//! The background transaction graph.
//!
//! Nodes are clusters, edges are transactions. Internal node ids are dense
//! (`0..N`) and assigned in ascending order of external id, so the same input
//! always produces the same ids. Edges are stored in canonical order sorted by
//! `(src, dst)`; the out-adjacency of a node is therefore a contiguous range of
//! edge ids and is sorted by neighbor id. Parallel edges and self-loops are
//! kept.

mod cache;
mod union_find;
mod view;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub use cache::{read_cache, write_cache, CACHE_MAGIC};
pub use union_find::UnionFind;
pub use view::NeighborView;

/// Dense internal node id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
#[repr(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    #[inline]
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into the canonical edge order.
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
    /// Both directions; for degrees this is the total degree.
    #[default]
    Both,
}

/// Half-open interval `[start, end)` over the timestamp column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct TimeWindow {
    start: i64,
    end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::Config(format!(
                "time window end ({end}) must be greater than start ({start})"
            )));
        }
        Ok(Self { start, end })
    }

    /// A window that admits every representable timestamp.
    pub fn unbounded() -> Self {
        Self {
            start: i64::MIN,
            end: i64::MAX,
        }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.end
    }

    #[inline]
    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Raw node rows as read from a node file.
#[derive(Debug, Clone, Default)]
pub struct NodeTable {
    pub ids: Vec<u64>,
    pub feature_width: usize,
    /// Row-major, `ids.len() * feature_width`.
    pub features: Vec<i64>,
}

impl NodeTable {
    /// Node rows without features.
    pub fn bare(ids: impl IntoIterator<Item = u64>) -> Self {
        Self {
            ids: ids.into_iter().collect(),
            feature_width: 0,
            features: Vec::new(),
        }
    }
}

/// Raw edge rows as read from an edge file.
#[derive(Debug, Clone, Default)]
pub struct EdgeTable {
    pub src: Vec<u64>,
    pub dst: Vec<u64>,
    pub feature_width: usize,
    /// Row-major, `src.len() * feature_width`.
    pub features: Vec<i64>,
}

impl EdgeTable {
    pub fn bare(pairs: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let (src, dst) = pairs.into_iter().unzip();
        Self {
            src,
            dst,
            feature_width: 0,
            features: Vec::new(),
        }
    }

    /// Edges with a single feature column holding a timestamp.
    pub fn timed(rows: impl IntoIterator<Item = (u64, u64, i64)>) -> Self {
        let mut table = Self {
            feature_width: 1,
            ..Default::default()
        };
        for (s, d, t) in rows {
            table.src.push(s);
            table.dst.push(d);
            table.features.push(t);
        }
        table
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub self_loops: usize,
    pub isolated_nodes: usize,
    pub max_total_degree: usize,
}

/// Immutable directed multigraph with node and edge feature matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackgroundGraph {
    external_ids: Vec<u64>,
    node_feature_width: usize,
    node_features: Vec<i64>,
    edge_feature_width: usize,
    edge_features: Vec<i64>,
    timestamp_column: Option<usize>,
    edge_src: Vec<NodeId>,
    edge_dst: Vec<NodeId>,
    out_offsets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeId>,
    in_edges: Vec<EdgeId>,
}

/// Materializes a graph from raw node and edge tables.
///
/// `timestamp_column` indexes into the edge feature columns.
pub fn build_graph(nodes: NodeTable, edges: EdgeTable, timestamp_column: Option<usize>) -> Result<BackgroundGraph> {
    if nodes.features.len() != nodes.ids.len() * nodes.feature_width {
        return Err(Error::Integrity(format!(
            "node feature matrix has {} entries, expected {} rows x {} columns",
            nodes.features.len(),
            nodes.ids.len(),
            nodes.feature_width
        )));
    }
    if edges.src.len() != edges.dst.len() || edges.features.len() != edges.src.len() * edges.feature_width {
        return Err(Error::Integrity("edge table columns have inconsistent lengths".into()));
    }
    if let Some(col) = timestamp_column {
        if col >= edges.feature_width {
            return Err(Error::Config(format!(
                "timestamp column {col} out of range for {} edge feature columns",
                edges.feature_width
            )));
        }
    }

    let mut order: Vec<usize> = (0..nodes.ids.len()).collect();
    order.sort_unstable_by_key(|&i| nodes.ids[i]);
    for w in order.windows(2) {
        if nodes.ids[w[0]] == nodes.ids[w[1]] {
            return Err(Error::Integrity(format!(
                "duplicate node id {} (node rows {} and {})",
                nodes.ids[w[0]],
                w[0].min(w[1]) + 1,
                w[0].max(w[1]) + 1
            )));
        }
    }

    let fv = nodes.feature_width;
    let mut external_ids = Vec::with_capacity(order.len());
    let mut node_features = Vec::with_capacity(nodes.features.len());
    let mut lookup = HashMap::with_capacity(order.len());
    for (internal, &row) in order.iter().enumerate() {
        external_ids.push(nodes.ids[row]);
        node_features.extend_from_slice(&nodes.features[row * fv..(row + 1) * fv]);
        lookup.insert(nodes.ids[row], NodeId::from(internal));
    }

    let resolve = |row: usize, id: u64| {
        lookup.get(&id).copied().ok_or_else(|| {
            Error::Integrity(format!(
                "edge row {}: endpoint {id} does not appear in the node table",
                row + 1
            ))
        })
    };
    let mut pairs = Vec::with_capacity(edges.len());
    for row in 0..edges.len() {
        pairs.push((resolve(row, edges.src[row])?, resolve(row, edges.dst[row])?));
    }

    Ok(BackgroundGraph::from_parts(
        external_ids,
        fv,
        node_features,
        edges.feature_width,
        pairs,
        edges.features,
        timestamp_column,
    ))
}

impl BackgroundGraph {
    /// Assembles a graph from already-resolved parts. Edges are reordered into
    /// canonical `(src, dst, input position)` order.
    pub(crate) fn from_parts(
        external_ids: Vec<u64>,
        node_feature_width: usize,
        node_features: Vec<i64>,
        edge_feature_width: usize,
        pairs: Vec<(NodeId, NodeId)>,
        edge_features: Vec<i64>,
        timestamp_column: Option<usize>,
    ) -> Self {
        let n = external_ids.len();
        let fe = edge_feature_width;
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by_key(|&i| (pairs[i].0, pairs[i].1, i));

        let mut edge_src = Vec::with_capacity(pairs.len());
        let mut edge_dst = Vec::with_capacity(pairs.len());
        let mut sorted_features = Vec::with_capacity(edge_features.len());
        for &i in &order {
            edge_src.push(pairs[i].0);
            edge_dst.push(pairs[i].1);
            sorted_features.extend_from_slice(&edge_features[i * fe..(i + 1) * fe]);
        }

        let out_offsets = offsets(n, &edge_src);
        let mut in_edges: Vec<EdgeId> = (0..edge_dst.len()).collect();
        in_edges.sort_by_key(|&e| (edge_dst[e], edge_src[e], e));
        let in_sources = in_edges.iter().map(|&e| edge_src[e]).collect();
        let in_offsets = offsets(n, &edge_dst);

        Self {
            external_ids,
            node_feature_width,
            node_features,
            edge_feature_width,
            edge_features: sorted_features,
            timestamp_column,
            edge_src,
            edge_dst,
            out_offsets,
            in_offsets,
            in_sources,
            in_edges,
        }
    }

    /// Featureless graph on external ids `0..n`.
    pub fn from_edges(n: usize, edges: &[(u64, u64)]) -> Result<Self> {
        build_graph(
            NodeTable::bare(0..n as u64),
            EdgeTable::bare(edges.iter().copied()),
            None,
        )
    }

    pub fn node_count(&self) -> usize {
        self.external_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external_ids.is_empty()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.node_count()).map(NodeId::from)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.node_count()
    }

    pub fn external_id(&self, v: NodeId) -> u64 {
        self.external_ids[v.index()]
    }

    pub fn external_ids(&self) -> &[u64] {
        &self.external_ids
    }

    /// Internal id for an external id.
    pub fn lookup(&self, external: u64) -> Option<NodeId> {
        self.external_ids.binary_search(&external).ok().map(NodeId::from)
    }

    pub fn node_feature_width(&self) -> usize {
        self.node_feature_width
    }

    pub fn edge_feature_width(&self) -> usize {
        self.edge_feature_width
    }

    pub fn node_features(&self, v: NodeId) -> &[i64] {
        let w = self.node_feature_width;
        &self.node_features[v.index() * w..(v.index() + 1) * w]
    }

    pub fn edge_features(&self, e: EdgeId) -> &[i64] {
        let w = self.edge_feature_width;
        &self.edge_features[e * w..(e + 1) * w]
    }

    pub fn timestamp_column(&self) -> Option<usize> {
        self.timestamp_column
    }

    pub fn timestamp(&self, e: EdgeId) -> Option<i64> {
        self.timestamp_column.map(|c| self.edge_features(e)[c])
    }

    pub fn edge(&self, e: EdgeId) -> (NodeId, NodeId) {
        (self.edge_src[e], self.edge_dst[e])
    }

    /// Out-edge ids of `v`, sorted by destination.
    pub fn out_edges(&self, v: NodeId) -> std::ops::Range<EdgeId> {
        self.out_offsets[v.index()]..self.out_offsets[v.index() + 1]
    }

    /// Out-neighbors of `v` sorted by id, with multiplicity.
    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.edge_dst[self.out_edges(v)]
    }

    /// In-neighbors of `v` sorted by id, with multiplicity.
    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.in_sources[self.in_offsets[v.index()]..self.in_offsets[v.index() + 1]]
    }

    /// In-edge ids of `v`, sorted by source.
    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[self.in_offsets[v.index()]..self.in_offsets[v.index() + 1]]
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_offsets[v.index() + 1] - self.out_offsets[v.index()]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_offsets[v.index() + 1] - self.in_offsets[v.index()]
    }

    pub fn total_degree(&self, v: NodeId) -> usize {
        self.out_degree(v) + self.in_degree(v)
    }

    /// Number of incident edges in `direction`, parallel edges counted with
    /// multiplicity.
    pub fn degree(&self, v: NodeId, direction: Direction) -> Result<usize> {
        if !self.contains(v) {
            return Err(Error::UnknownNode(v.index()));
        }
        Ok(match direction {
            Direction::In => self.in_degree(v),
            Direction::Out => self.out_degree(v),
            Direction::Both => self.total_degree(v),
        })
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            nodes: self.node_count(),
            edges: self.edge_count(),
            self_loops: (0..self.edge_count())
                .filter(|&e| self.edge_src[e] == self.edge_dst[e])
                .count(),
            isolated_nodes: self.nodes().filter(|&v| self.total_degree(v) == 0).count(),
            max_total_degree: self.nodes().map(|v| self.total_degree(v)).max().unwrap_or(0),
        }
    }

    /// Keeps exactly the edges with `start <= t < end`; nodes survive only if
    /// incident to a surviving edge.
    pub fn filter_time_window(&self, window: TimeWindow) -> Result<Self> {
        let col = self
            .timestamp_column
            .ok_or_else(|| Error::Config("time-window filtering needs a timestamp column".into()))?;
        let keep_edge: Vec<bool> = (0..self.edge_count())
            .map(|e| window.contains(self.edge_features(e)[col]))
            .collect();
        let mut keep_node = vec![false; self.node_count()];
        for e in (0..self.edge_count()).filter(|&e| keep_edge[e]) {
            keep_node[self.edge_src[e].index()] = true;
            keep_node[self.edge_dst[e].index()] = true;
        }
        Ok(self.restrict(&keep_node, |e| keep_edge[e]))
    }

    /// Subgraph induced by the nodes with `keep[v] == true`.
    pub fn induced_subgraph(&self, keep: &[bool]) -> Self {
        assert_eq!(keep.len(), self.node_count());
        self.restrict(keep, |e| {
            keep[self.edge_src[e].index()] && keep[self.edge_dst[e].index()]
        })
    }

    /// Induced subgraph on the largest weakly connected component. Ties go to
    /// the component holding the smallest external id.
    pub fn largest_weak_component(&self) -> Self {
        let n = self.node_count();
        if n == 0 {
            return self.clone();
        }
        let mut uf = UnionFind::new(n);
        for e in 0..self.edge_count() {
            uf.union(self.edge_src[e].index(), self.edge_dst[e].index());
        }
        let mut size = vec![0usize; n];
        let mut root_of = vec![0usize; n];
        for (v, root) in root_of.iter_mut().enumerate() {
            *root = uf.find(v);
            size[*root] += 1;
        }
        // Ids ascend with external id, so the first node of the best size wins ties.
        let mut best = root_of[0];
        for &r in &root_of {
            if size[r] > size[best] {
                best = r;
            }
        }
        let keep: Vec<bool> = root_of.iter().map(|&r| r == best).collect();
        self.induced_subgraph(&keep)
    }

    fn restrict(&self, keep_node: &[bool], keep_edge: impl Fn(EdgeId) -> bool) -> Self {
        let mut remap = vec![u32::MAX; self.node_count()];
        let mut external_ids = Vec::new();
        let mut node_features = Vec::new();
        for v in self.nodes() {
            if keep_node[v.index()] {
                remap[v.index()] = external_ids.len() as u32;
                external_ids.push(self.external_id(v));
                node_features.extend_from_slice(self.node_features(v));
            }
        }
        let mut pairs = Vec::new();
        let mut edge_features = Vec::new();
        for e in (0..self.edge_count()).filter(|&e| keep_edge(e)) {
            let (s, d) = self.edge(e);
            pairs.push((NodeId(remap[s.index()]), NodeId(remap[d.index()])));
            edge_features.extend_from_slice(self.edge_features(e));
        }
        Self::from_parts(
            external_ids,
            self.node_feature_width,
            node_features,
            self.edge_feature_width,
            pairs,
            edge_features,
            self.timestamp_column,
        )
    }
}

fn offsets(n: usize, keys: &[NodeId]) -> Vec<usize> {
    let mut off = vec![0usize; n + 1];
    for k in keys {
        off[k.index() + 1] += 1;
    }
    for i in 0..n {
        off[i + 1] += off[i];
    }
    off
}
