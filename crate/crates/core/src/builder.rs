//! Labeled subgraph construction from a transaction graph and cluster labels.
//!
//! Pipeline: restrict to a time window, keep the largest weakly connected
//! component, seed a walk from each labeled cluster's earliest outgoing
//! transactions, enumerate bounded simple paths, classify each path by its
//! endpoints, merge paths that share unknown interior clusters, and emit one
//! labeled subgraph per logically consistent group.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BackgroundGraph, EdgeId, NodeId, TimeWindow, UnionFind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterLabel {
    Licit,
    Illicit,
}

impl std::str::FromStr for ClusterLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "licit" => Ok(ClusterLabel::Licit),
            "illicit" => Ok(ClusterLabel::Illicit),
            other => Err(format!("unknown cluster label {other:?} (expected licit|illicit)")),
        }
    }
}

/// Cluster labels for one graph. Unlabeled nodes are Unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabelMap {
    labels: Vec<Option<ClusterLabel>>,
}

impl ClusterLabelMap {
    pub fn empty(g: &BackgroundGraph) -> Self {
        Self {
            labels: vec![None; g.node_count()],
        }
    }

    /// Labels keyed by external id. Every id must exist in `g`, and an id may
    /// not carry both labels.
    pub fn from_external(g: &BackgroundGraph, pairs: impl IntoIterator<Item = (u64, ClusterLabel)>) -> Result<Self> {
        let mut map = Self::empty(g);
        for (ext, label) in pairs {
            let v = g
                .lookup(ext)
                .ok_or_else(|| Error::Integrity(format!("labeled cluster {ext} is not in the graph")))?;
            match map.labels[v.index()] {
                Some(prev) if prev != label => {
                    return Err(Error::Integrity(format!(
                        "cluster {ext} is labeled both licit and illicit"
                    )))
                }
                _ => map.labels[v.index()] = Some(label),
            }
        }
        Ok(map)
    }

    /// Carries labels over to a graph derived from `from` (same external ids),
    /// dropping labels of nodes that did not survive.
    pub fn restrict(&self, from: &BackgroundGraph, to: &BackgroundGraph) -> Self {
        let mut map = Self::empty(to);
        for v in to.nodes() {
            if let Some(old) = from.lookup(to.external_id(v)) {
                map.labels[v.index()] = self.labels[old.index()];
            }
        }
        map
    }

    #[inline]
    pub fn get(&self, v: NodeId) -> Option<ClusterLabel> {
        self.labels.get(v.index()).copied().flatten()
    }

    pub fn labeled(&self) -> impl Iterator<Item = (NodeId, ClusterLabel)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (NodeId::from(i), l)))
    }

    pub fn len(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathClass {
    Licit,
    Illicit,
    Suspicious,
    Neutral,
}

/// Why a traversal stopped extending a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum StopReason {
    LabeledNode,
    HopBudget,
    EarlyStop,
    DeadEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledPath {
    pub nodes: Vec<NodeId>,
    pub class: PathClass,
    pub stop: StopReason,
}

impl LabeledPath {
    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Nodes strictly between the labeled start and the terminal node.
    pub fn interior(&self) -> &[NodeId] {
        &self.nodes[1..self.nodes.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuilderConfig {
    pub max_hops: usize,
    /// Outgoing transactions taken per labeled cluster.
    pub seed_tx_cap: usize,
    /// An Unknown node whose total degree exceeds this ends the walk.
    pub activity_threshold: usize,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        Self {
            max_hops: 6,
            seed_tx_cap: 50,
            activity_threshold: 1000,
        }
    }
}

impl BuilderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_hops == 0 {
            return Err(Error::Config("max_hops must be at least 1".into()));
        }
        if self.seed_tx_cap == 0 {
            return Err(Error::Config("seed_tx_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// A labeled cluster and one of its outgoing transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    pub source: NodeId,
    pub edge: EdgeId,
    pub target: NodeId,
}

/// Up to `seed_tx_cap` outgoing transactions per labeled node, earliest
/// timestamp first, then smallest destination.
pub fn seed_transactions(g: &BackgroundGraph, labels: &ClusterLabelMap, cfg: &BuilderConfig) -> Vec<Seed> {
    let mut seeds = Vec::new();
    for (source, _) in labels.labeled() {
        let mut edges: Vec<EdgeId> = g.out_edges(source).collect();
        edges.sort_by_key(|&e| (g.timestamp(e).unwrap_or(0), g.edge(e).1, e));
        seeds.extend(edges.into_iter().take(cfg.seed_tx_cap).map(|e| Seed {
            source,
            edge: e,
            target: g.edge(e).1,
        }));
    }
    seeds
}

/// Endpoint classification. Licit-to-illicit walks have no class of their
/// own and are reported as Neutral.
pub fn classify_path(labels: &ClusterLabelMap, path: &[NodeId]) -> Result<PathClass> {
    let (first, last) = match path {
        [first, .., last] => (*first, *last),
        _ => return Err(Error::Contract("a path needs at least two nodes".into())),
    };
    let start = labels
        .get(first)
        .ok_or_else(|| Error::Contract(format!("path starts at unlabeled node {first}")))?;
    Ok(match (start, labels.get(last)) {
        (ClusterLabel::Illicit, Some(ClusterLabel::Licit)) => PathClass::Suspicious,
        (ClusterLabel::Illicit, Some(ClusterLabel::Illicit)) => PathClass::Illicit,
        (ClusterLabel::Licit, Some(ClusterLabel::Licit)) => PathClass::Licit,
        (ClusterLabel::Licit, Some(ClusterLabel::Illicit)) | (_, None) => PathClass::Neutral,
    })
}

/// True for the licit-to-illicit case that [`classify_path`] folds into Neutral.
pub fn is_licit_to_illicit(labels: &ClusterLabelMap, path: &[NodeId]) -> bool {
    matches!(
        (
            path.first().and_then(|&v| labels.get(v)),
            path.last().and_then(|&v| labels.get(v))
        ),
        (Some(ClusterLabel::Licit), Some(ClusterLabel::Illicit))
    )
}

/// Depth-first enumeration of the simple directed paths starting with `seed`.
pub fn traverse_paths(
    g: &BackgroundGraph,
    labels: &ClusterLabelMap,
    seed: Seed,
    cfg: &BuilderConfig,
) -> Vec<LabeledPath> {
    let mut out = Vec::new();
    if seed.source == seed.target {
        return out;
    }
    let mut walk = Walk {
        g,
        labels,
        cfg,
        path: vec![seed.source, seed.target],
        on_path: HashSet::new(),
        out: &mut out,
    };
    walk.on_path.insert(seed.source);
    walk.on_path.insert(seed.target);
    walk.extend();
    out
}

struct Walk<'a> {
    g: &'a BackgroundGraph,
    labels: &'a ClusterLabelMap,
    cfg: &'a BuilderConfig,
    path: Vec<NodeId>,
    on_path: HashSet<NodeId>,
    out: &'a mut Vec<LabeledPath>,
}

impl Walk<'_> {
    fn emit(&mut self, stop: StopReason) {
        let class = classify_path(self.labels, &self.path).expect("walk starts at a labeled node");
        self.out.push(LabeledPath {
            nodes: self.path.clone(),
            class,
            stop,
        });
    }

    fn extend(&mut self) {
        let last = *self.path.last().unwrap();
        if self.labels.get(last).is_some() {
            return self.emit(StopReason::LabeledNode);
        }
        if self.g.total_degree(last) > self.cfg.activity_threshold {
            return self.emit(StopReason::EarlyStop);
        }
        if self.path.len() - 1 >= self.cfg.max_hops {
            return self.emit(StopReason::HopBudget);
        }
        let mut next: Vec<NodeId> = self
            .g
            .out_neighbors(last)
            .iter()
            .copied()
            .filter(|v| !self.on_path.contains(v))
            .collect();
        next.dedup();
        if next.is_empty() {
            return self.emit(StopReason::DeadEnd);
        }
        for v in next {
            self.path.push(v);
            self.on_path.insert(v);
            self.extend();
            self.on_path.remove(&v);
            self.path.pop();
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub licit: usize,
    pub illicit: usize,
    pub suspicious: usize,
    pub neutral: usize,
}

impl ClassCounts {
    pub fn add(&mut self, class: PathClass) {
        match class {
            PathClass::Licit => self.licit += 1,
            PathClass::Illicit => self.illicit += 1,
            PathClass::Suspicious => self.suspicious += 1,
            PathClass::Neutral => self.neutral += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.licit + self.illicit + self.suspicious + self.neutral
    }
}

/// Paths whose unknown interiors are transitively connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathGroup {
    /// Union of the member paths' interiors, sorted.
    pub nodes: Vec<NodeId>,
    /// Indices into the path list handed to [`group_paths`].
    pub paths: Vec<usize>,
    pub classes: ClassCounts,
}

/// Groups paths whose interior node sets intersect. Paths with an empty
/// interior touch no unknown node and join no group. Groups come out ordered
/// by their smallest node.
pub fn group_paths(paths: &[LabeledPath]) -> Vec<PathGroup> {
    let mut slot: HashMap<NodeId, usize> = HashMap::new();
    let mut members: Vec<NodeId> = Vec::new();
    for p in paths {
        for &v in p.interior() {
            slot.entry(v).or_insert_with(|| {
                members.push(v);
                members.len() - 1
            });
        }
    }
    let mut uf = UnionFind::new(members.len());
    for p in paths {
        if let Some((&first, rest)) = p.interior().split_first() {
            for &v in rest {
                uf.union(slot[&first], slot[&v]);
            }
        }
    }

    let mut by_root: BTreeMap<usize, PathGroup> = BTreeMap::new();
    for (i, &v) in members.iter().enumerate() {
        by_root
            .entry(uf.find(i))
            .or_insert_with(|| PathGroup {
                nodes: Vec::new(),
                paths: Vec::new(),
                classes: ClassCounts::default(),
            })
            .nodes
            .push(v);
    }
    for (pi, p) in paths.iter().enumerate() {
        if let Some(first) = p.interior().first() {
            let group = by_root.get_mut(&uf.find(slot[first])).unwrap();
            group.paths.push(pi);
            group.classes.add(p.class);
        }
    }
    let mut groups: Vec<PathGroup> = by_root.into_values().collect();
    for g in &mut groups {
        g.nodes.sort_unstable();
    }
    groups.sort_by_key(|g| g.nodes[0]);
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubgraphLabel {
    Licit,
    Suspicious,
    Unlabeled,
}

impl SubgraphLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubgraphLabel::Licit => "licit",
            SubgraphLabel::Suspicious => "suspicious",
            SubgraphLabel::Unlabeled => "unlabeled",
        }
    }

    /// Binary target: 1 for suspicious.
    pub fn target(&self) -> Option<f64> {
        match self {
            SubgraphLabel::Licit => Some(0.0),
            SubgraphLabel::Suspicious => Some(1.0),
            SubgraphLabel::Unlabeled => None,
        }
    }
}

impl std::str::FromStr for SubgraphLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "licit" => Ok(SubgraphLabel::Licit),
            "suspicious" => Ok(SubgraphLabel::Suspicious),
            "unlabeled" => Ok(SubgraphLabel::Unlabeled),
            other => Err(format!("unknown subgraph label {other:?}")),
        }
    }
}

/// Licit groups hold only licit and neutral paths, suspicious groups only
/// suspicious, illicit and neutral paths; each needs at least one path of its
/// own class. Everything else is Unlabeled.
pub fn label_group(group: &PathGroup) -> SubgraphLabel {
    let c = &group.classes;
    if c.licit > 0 && c.illicit == 0 && c.suspicious == 0 {
        SubgraphLabel::Licit
    } else if c.suspicious > 0 && c.licit == 0 {
        SubgraphLabel::Suspicious
    } else {
        SubgraphLabel::Unlabeled
    }
}

/// A node set inside the background graph with an optional label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphRecord {
    pub id: usize,
    /// Sorted, distinct.
    pub nodes: Vec<NodeId>,
    pub label: SubgraphLabel,
}

impl SubgraphRecord {
    pub fn new(id: usize, mut nodes: Vec<NodeId>, label: SubgraphLabel) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        Self { id, nodes, label }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub records: Vec<SubgraphRecord>,
    /// Groups that could not be labeled consistently, for diagnostics.
    pub unlabeled: Vec<PathGroup>,
}

/// Turns labeled groups into subgraph records. A licit record keeps the
/// interiors of the group's licit paths; a suspicious record keeps the
/// interiors of its suspicious and illicit paths. Nodes reached only by
/// neutral paths are dropped.
pub fn annotate(paths: &[LabeledPath], groups: &[PathGroup]) -> Annotation {
    let mut records = Vec::new();
    let mut unlabeled = Vec::new();
    for group in groups {
        let label = label_group(group);
        let keep = |c: PathClass| match label {
            SubgraphLabel::Licit => c == PathClass::Licit,
            SubgraphLabel::Suspicious => {
                matches!(c, PathClass::Suspicious | PathClass::Illicit)
            }
            SubgraphLabel::Unlabeled => false,
        };
        if label == SubgraphLabel::Unlabeled {
            unlabeled.push(group.clone());
            continue;
        }
        let nodes: Vec<NodeId> = group
            .paths
            .iter()
            .map(|&i| &paths[i])
            .filter(|p| keep(p.class))
            .flat_map(|p| p.interior().iter().copied())
            .collect();
        records.push(SubgraphRecord::new(records.len(), nodes, label));
    }
    Annotation { records, unlabeled }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub licit: usize,
    pub suspicious: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub background_nodes: usize,
    pub background_edges: usize,
    pub labeled_clusters: usize,
    pub seeds: usize,
    pub paths: ClassCounts,
    /// Licit-to-illicit paths; already included in `paths.neutral`.
    pub licit_to_illicit_paths: usize,
    /// Paths with no unknown interior node (direct labeled-to-labeled hops).
    pub empty_interior_paths: usize,
    pub groups: GroupCounts,
    pub records: GroupCounts,
    /// Record size -> number of records, per label.
    pub licit_size_histogram: BTreeMap<usize, usize>,
    pub suspicious_size_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub graph: BackgroundGraph,
    pub labels: ClusterLabelMap,
    pub paths: Vec<LabeledPath>,
    pub groups: Vec<PathGroup>,
    pub records: Vec<SubgraphRecord>,
    pub unlabeled: Vec<PathGroup>,
    pub report: BuildReport,
}

/// Runs the whole construction. With `window == None` every edge is kept.
pub fn build_dataset(
    g: &BackgroundGraph,
    labels: &ClusterLabelMap,
    window: Option<TimeWindow>,
    cfg: &BuilderConfig,
) -> Result<BuildOutput> {
    cfg.validate()?;
    if labels.is_empty() {
        return Err(Error::Config("cluster label map is empty".into()));
    }
    let windowed = match window {
        Some(w) => g.filter_time_window(w)?,
        None => g.clone(),
    };
    let background = windowed.largest_weak_component();
    let labels = labels.restrict(g, &background);

    let seeds = seed_transactions(&background, &labels, cfg);
    let mut paths: Vec<LabeledPath> = seeds
        .par_iter()
        .map(|&s| traverse_paths(&background, &labels, s, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    // Parallel edges give several seeds the same first hop.
    paths.sort();
    paths.dedup_by(|a, b| a.nodes == b.nodes);

    let groups = group_paths(&paths);
    let Annotation { records, unlabeled } = annotate(&paths, &groups);

    let mut report = BuildReport {
        background_nodes: background.node_count(),
        background_edges: background.edge_count(),
        labeled_clusters: labels.len(),
        seeds: seeds.len(),
        ..Default::default()
    };
    for p in &paths {
        report.paths.add(p.class);
        report.licit_to_illicit_paths += is_licit_to_illicit(&labels, &p.nodes) as usize;
        report.empty_interior_paths += p.interior().is_empty() as usize;
    }
    for gr in &groups {
        match label_group(gr) {
            SubgraphLabel::Licit => report.groups.licit += 1,
            SubgraphLabel::Suspicious => report.groups.suspicious += 1,
            SubgraphLabel::Unlabeled => report.groups.unlabeled += 1,
        }
    }
    for r in &records {
        let hist = match r.label {
            SubgraphLabel::Licit => {
                report.records.licit += 1;
                &mut report.licit_size_histogram
            }
            _ => {
                report.records.suspicious += 1;
                &mut report.suspicious_size_histogram
            }
        };
        *hist.entry(r.len()).or_default() += 1;
    }
    report.records.unlabeled = unlabeled.len();

    Ok(BuildOutput {
        graph: background,
        labels,
        paths,
        groups,
        records,
        unlabeled,
        report,
    })
}
