//! The worked construction example and an exhaustive path-enumeration oracle.

use std::collections::{BTreeMap, BTreeSet};

use aml_subgraph::builder::{build_dataset, BuilderConfig, ClusterLabel, ClusterLabelMap, PathClass};
use aml_subgraph::graph::{build_graph, BackgroundGraph, EdgeTable, NodeId, NodeTable};
use rand::Rng;

/// Paths I-III licit, the illicit path, suspicious paths I-III and the
/// neutral path of the worked example.
pub const WORKED_PATHS: [&[u64]; 8] = [
    &[13, 14, 15, 19],
    &[16, 17, 15, 19],
    &[23, 22, 24],
    &[1, 7, 4, 5, 6],
    &[1, 7, 8, 9, 12],
    &[1, 7, 8, 10, 11, 12],
    &[20, 21, 22, 24],
    &[1, 2, 3],
];

pub const WORKED_ILLICIT: [u64; 3] = [1, 6, 20];
pub const WORKED_LICIT: [u64; 6] = [12, 13, 16, 19, 23, 24];

/// Node 0 has only out-edges to the three path sources, so it joins the
/// three pieces into one weak component without starting or extending any walk.
pub const WORKED_BRIDGE: [(u64, u64); 3] = [(0, 1), (0, 13), (0, 20)];

pub fn worked_edges() -> Vec<(u64, u64)> {
    let mut edges: BTreeSet<(u64, u64)> = WORKED_BRIDGE.into_iter().collect();
    for p in WORKED_PATHS {
        edges.extend(p.windows(2).map(|w| (w[0], w[1])));
    }
    edges.into_iter().collect()
}

pub fn worked_labels() -> Vec<(u64, ClusterLabel)> {
    WORKED_ILLICIT
        .iter()
        .map(|&v| (v, ClusterLabel::Illicit))
        .chain(WORKED_LICIT.iter().map(|&v| (v, ClusterLabel::Licit)))
        .collect()
}

pub fn worked_graph() -> BackgroundGraph {
    let nodes: BTreeSet<u64> = worked_edges().iter().flat_map(|&(a, b)| [a, b]).collect();
    build_graph(NodeTable::bare(nodes), EdgeTable::bare(worked_edges()), None).unwrap()
}

/// Writes `nodes.csv`, `edges.csv` and `labels.csv` for the worked example.
pub fn write_worked_csv(dir: &std::path::Path) {
    let nodes: BTreeSet<u64> = worked_edges().iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut n = String::from("node_id\n");
    for v in nodes {
        n += &format!("{v}\n");
    }
    let mut e = String::from("src_id,dst_id\n");
    for (a, b) in worked_edges() {
        e += &format!("{a},{b}\n");
    }
    let mut l = String::from("node_id,label\n");
    for (v, c) in worked_labels() {
        l += &format!("{v},{}\n", if c == ClusterLabel::Licit { "licit" } else { "illicit" });
    }
    std::fs::write(dir.join("nodes.csv"), n).unwrap();
    std::fs::write(dir.join("edges.csv"), e).unwrap();
    std::fs::write(dir.join("labels.csv"), l).unwrap();
}

/// A random connected instance: a randomly oriented spanning tree plus extra
/// edges, every edge with a timestamp.
pub struct RandomInstance {
    pub n: u64,
    pub edges: Vec<(u64, u64, i64)>,
    pub labels: BTreeMap<u64, ClusterLabel>,
    pub cfg: BuilderConfig,
}

pub fn random_instance(rng: &mut impl Rng, max_nodes: u64) -> RandomInstance {
    let n = rng.gen_range(3..=max_nodes);
    let mut pairs = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        pairs.push(if rng.gen_bool(0.5) { (u, v) } else { (v, u) });
    }
    for _ in 0..rng.gen_range(0..=n * 2) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            pairs.push((a, b));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(a, b)| (a, b, rng.gen_range(0..20i64)))
        .collect();
    let labeled_fraction = rng.gen_range(0.05..0.4);
    let mut labels = BTreeMap::new();
    for v in 0..n {
        if rng.gen_bool(labeled_fraction) {
            labels.insert(
                v,
                if rng.gen_bool(0.5) {
                    ClusterLabel::Licit
                } else {
                    ClusterLabel::Illicit
                },
            );
        }
    }
    let cfg = BuilderConfig {
        max_hops: rng.gen_range(1..=4),
        seed_tx_cap: rng.gen_range(1..=4),
        activity_threshold: rng.gen_range(2..=12),
    };
    RandomInstance { n, edges, labels, cfg }
}

impl RandomInstance {
    pub fn graph(&self) -> BackgroundGraph {
        build_graph(
            NodeTable::bare(0..self.n),
            EdgeTable::timed(self.edges.iter().copied()),
            Some(0),
        )
        .unwrap()
    }
}

/// Expected outcome in external ids.
#[derive(Debug, PartialEq, Eq)]
pub struct OracleOutput {
    /// Distinct emitted paths with their class name.
    pub paths: BTreeSet<(Vec<u64>, &'static str)>,
    /// `(label, sorted nodes)` per record.
    pub records: BTreeSet<(&'static str, Vec<u64>)>,
    pub unlabeled_groups: BTreeSet<Vec<u64>>,
}

/// Exhaustive enumeration of every simple path from a labeled node. A path
/// `[s, v1, .., vk]` is emitted when its first hop is one of `s`'s first
/// `seed_tx_cap` transactions (by timestamp, then destination), every
/// interior node is unknown, at most `activity_threshold` busy and reached
/// within the hop budget, and its last node ends the walk: it is labeled,
/// busy, at the hop budget, or has no out-neighbor off the path.
pub fn oracle(inst: &RandomInstance) -> OracleOutput {
    let mut out: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    let mut degree: BTreeMap<u64, usize> = BTreeMap::new();
    for &(a, b, _) in &inst.edges {
        out.entry(a).or_default().insert(b);
        *degree.entry(a).or_default() += 1;
        *degree.entry(b).or_default() += 1;
    }
    let labeled = |v: u64| inst.labels.get(&v).copied();
    let busy = |v: u64| degree.get(&v).copied().unwrap_or(0) > inst.cfg.activity_threshold;
    let class = |p: &[u64]| -> &'static str {
        match (labeled(p[0]).unwrap(), labeled(*p.last().unwrap())) {
            (ClusterLabel::Illicit, Some(ClusterLabel::Licit)) => "suspicious",
            (ClusterLabel::Illicit, Some(ClusterLabel::Illicit)) => "illicit",
            (ClusterLabel::Licit, Some(ClusterLabel::Licit)) => "licit",
            _ => "neutral",
        }
    };

    let mut paths = BTreeSet::new();
    for (&s, _) in &inst.labels {
        let mut seeds: Vec<(i64, u64)> = inst.edges.iter().filter(|e| e.0 == s).map(|e| (e.2, e.1)).collect();
        seeds.sort();
        let firsts: BTreeSet<u64> = seeds.iter().take(inst.cfg.seed_tx_cap).map(|x| x.1).collect();
        // All simple paths s -> first -> ... up to max_hops.
        let mut stack: Vec<Vec<u64>> = firsts.iter().map(|&f| vec![s, f]).collect();
        while let Some(p) = stack.pop() {
            let last = *p.last().unwrap();
            let interior_ok = p[1..p.len() - 1].iter().all(|&v| labeled(v).is_none() && !busy(v));
            if !interior_ok {
                continue;
            }
            let hops = p.len() - 1;
            let onward: Vec<u64> = out
                .get(&last)
                .map(|o| o.iter().copied().filter(|v| !p.contains(v)).collect())
                .unwrap_or_default();
            let terminal = labeled(last).is_some() || busy(last) || hops == inst.cfg.max_hops || onward.is_empty();
            if terminal {
                paths.insert((p.clone(), class(&p)));
            } else {
                for v in onward {
                    let mut q = p.clone();
                    q.push(v);
                    stack.push(q);
                }
            }
        }
    }

    // Merge interiors that share a node until nothing changes.
    let with_interior: Vec<(&Vec<u64>, &str)> = paths
        .iter()
        .filter(|(p, _)| p.len() > 2)
        .map(|(p, c)| (p, *c))
        .collect();
    let mut groups: Vec<(BTreeSet<u64>, Vec<usize>)> = with_interior
        .iter()
        .enumerate()
        .map(|(i, (p, _))| (p[1..p.len() - 1].iter().copied().collect(), vec![i]))
        .collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if !groups[i].0.is_disjoint(&groups[j].0) {
                    let (nodes, members) = groups.remove(j);
                    groups[i].0.extend(nodes);
                    groups[i].1.extend(members);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut records = BTreeSet::new();
    let mut unlabeled_groups = BTreeSet::new();
    for (nodes, members) in groups {
        let classes: BTreeSet<&str> = members.iter().map(|&i| with_interior[i].1).collect();
        let label = if classes.contains("licit") && classes.iter().all(|c| ["licit", "neutral"].contains(c)) {
            "licit"
        } else if classes.contains("suspicious") && !classes.contains("licit") {
            "suspicious"
        } else {
            unlabeled_groups.insert(nodes.into_iter().collect());
            continue;
        };
        let keep: &[&str] = if label == "licit" {
            &["licit"]
        } else {
            &["suspicious", "illicit"]
        };
        let kept: BTreeSet<u64> = members
            .iter()
            .filter(|&&i| keep.contains(&with_interior[i].1))
            .flat_map(|&i| {
                let p = with_interior[i].0;
                p[1..p.len() - 1].to_vec()
            })
            .collect();
        records.insert((label, kept.into_iter().collect()));
    }
    OracleOutput {
        paths,
        records,
        unlabeled_groups,
    }
}

fn ext(g: &BackgroundGraph, nodes: &[NodeId]) -> Vec<u64> {
    let mut v: Vec<u64> = nodes.iter().map(|&n| g.external_id(n)).collect();
    v.sort_unstable();
    v
}

/// Runs the builder on `inst` and compares it with [`oracle`]. Returns the
/// number of paths checked.
pub fn check_against_oracle(inst: &RandomInstance) -> Result<usize, String> {
    let g = inst.graph();
    let labels = ClusterLabelMap::from_external(&g, inst.labels.iter().map(|(&v, &l)| (v, l))).unwrap();
    let expected = oracle(inst);
    if labels.is_empty() {
        return if expected.paths.is_empty() {
            Ok(0)
        } else {
            Err("paths without labels".into())
        };
    }
    let out = build_dataset(&g, &labels, None, &inst.cfg).map_err(|e| e.to_string())?;
    if out.graph.node_count() as u64 != inst.n {
        return Err(format!("instance of {} nodes is not connected", inst.n));
    }
    let class = |c: PathClass| match c {
        PathClass::Licit => "licit",
        PathClass::Illicit => "illicit",
        PathClass::Suspicious => "suspicious",
        PathClass::Neutral => "neutral",
    };
    let got = OracleOutput {
        paths: out
            .paths
            .iter()
            .map(|p| {
                (
                    p.nodes.iter().map(|&v| out.graph.external_id(v)).collect(),
                    class(p.class),
                )
            })
            .collect(),
        records: out
            .records
            .iter()
            .map(|r| (r.label.as_str(), ext(&out.graph, &r.nodes)))
            .collect(),
        unlabeled_groups: out.unlabeled.iter().map(|gr| ext(&out.graph, &gr.nodes)).collect(),
    };
    if got.paths.len() != out.paths.len() {
        return Err("builder emitted a path twice".into());
    }
    if got != expected {
        return Err(format!(
            "n = {}, {:?}: builder {got:?} vs oracle {expected:?}",
            inst.n, inst.cfg
        ));
    }
    Ok(out.paths.len())
}
