use std::collections::{BTreeMap, BTreeSet};

use aml_subgraph::graph::{build_graph, read_cache, write_cache, BackgroundGraph, EdgeTable, NodeTable, TimeWindow};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Rows {
    ids: Vec<u64>,
    /// `(src index, dst index, timestamp, extra feature)` into `ids`.
    edges: Vec<(usize, usize, i64, i64)>,
}

fn rows() -> impl Strategy<Value = Rows> {
    prop::collection::btree_set(any::<u64>(), 1..40).prop_flat_map(|ids| {
        let ids: Vec<u64> = ids.into_iter().collect();
        let n = ids.len();
        (
            Just(ids).prop_shuffle(),
            prop::collection::vec((0..n, 0..n, -50i64..50, any::<i64>()), 0..100),
        )
            .prop_map(|(ids, edges)| Rows { ids, edges })
    })
}

impl Rows {
    fn graph(&self) -> BackgroundGraph {
        let nodes = NodeTable {
            ids: self.ids.clone(),
            feature_width: 1,
            features: self.ids.iter().map(|&i| (i % 7) as i64).collect(),
        };
        let mut edges = EdgeTable {
            feature_width: 2,
            ..Default::default()
        };
        for &(s, d, t, x) in &self.edges {
            edges.src.push(self.ids[s]);
            edges.dst.push(self.ids[d]);
            edges.features.extend([t, x]);
        }
        build_graph(nodes, edges, Some(0)).unwrap()
    }

    /// `(src, dst, timestamp, extra)` multiset in external ids.
    fn edge_multiset(&self) -> BTreeMap<(u64, u64, i64, i64), usize> {
        let mut m = BTreeMap::new();
        for &(s, d, t, x) in &self.edges {
            *m.entry((self.ids[s], self.ids[d], t, x)).or_default() += 1;
        }
        m
    }
}

fn graph_edges(g: &BackgroundGraph) -> BTreeMap<(u64, u64, i64, i64), usize> {
    let mut m = BTreeMap::new();
    for e in 0..g.edge_count() {
        let (s, d) = g.edge(e);
        let f = g.edge_features(e);
        *m.entry((g.external_id(s), g.external_id(d), f[0], f[1])).or_default() += 1;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn csr_holds_exactly_the_input_edges(r in rows()) {
        let g = r.graph();
        prop_assert_eq!(g.node_count(), r.ids.len());
        prop_assert_eq!(graph_edges(&g), r.edge_multiset());
        let mut out_total = 0;
        for v in g.nodes() {
            let ext = g.external_id(v);
            prop_assert_eq!(g.lookup(ext), Some(v));
            prop_assert_eq!(g.node_features(v), &[(ext % 7) as i64][..]);
            let mut out: Vec<u64> = g.out_neighbors(v).iter().map(|&u| g.external_id(u)).collect();
            let mut expect: Vec<u64> = r.edges.iter().filter(|e| r.ids[e.0] == ext).map(|e| r.ids[e.1]).collect();
            out.sort_unstable();
            expect.sort_unstable();
            prop_assert_eq!(out, expect);
            let mut inn: Vec<u64> = g.in_neighbors(v).iter().map(|&u| g.external_id(u)).collect();
            let mut expect: Vec<u64> = r.edges.iter().filter(|e| r.ids[e.1] == ext).map(|e| r.ids[e.0]).collect();
            inn.sort_unstable();
            expect.sort_unstable();
            prop_assert_eq!(inn, expect);
            prop_assert_eq!(g.total_degree(v), g.in_degree(v) + g.out_degree(v));
            out_total += g.out_degree(v);
        }
        prop_assert_eq!(out_total, r.edges.len());
    }

    #[test]
    fn binary_cache_round_trips(r in rows()) {
        let g = r.graph();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.sgf");
        write_cache(&g, &path).unwrap();
        prop_assert_eq!(read_cache(&path).unwrap(), g);
    }

    #[test]
    fn largest_component_is_connected_and_largest(r in rows()) {
        let g = r.graph();
        let c = g.largest_weak_component();
        // Independent component sizes by repeated relaxation.
        let n = r.ids.len();
        let mut label: Vec<usize> = (0..n).collect();
        loop {
            let mut changed = false;
            for &(s, d, _, _) in &r.edges {
                let m = label[s].min(label[d]);
                if label[s] != m || label[d] != m {
                    label[s] = m;
                    label[d] = m;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for &l in &label {
            *sizes.entry(l).or_default() += 1;
        }
        let largest = *sizes.values().max().unwrap();
        prop_assert_eq!(c.node_count(), largest);
        let kept: BTreeSet<u64> = c.nodes().map(|v| c.external_id(v)).collect();
        let comp = label[r.ids.iter().position(|id| kept.contains(id)).unwrap()];
        for (i, &id) in r.ids.iter().enumerate() {
            prop_assert_eq!(kept.contains(&id), label[i] == comp);
        }
        let expect: BTreeMap<_, _> = r.edge_multiset().into_iter().filter(|((s, _, _, _), _)| kept.contains(s)).collect();
        prop_assert_eq!(graph_edges(&c), expect);
    }

    #[test]
    fn time_window_keeps_exactly_edges_inside(r in rows(), a in -60i64..60, len in 1i64..80) {
        let g = r.graph();
        let w = TimeWindow::new(a, a + len).unwrap();
        let f = g.filter_time_window(w).unwrap();
        let expect: BTreeMap<_, _> = r
            .edge_multiset()
            .into_iter()
            .filter(|((_, _, t, _), _)| a <= *t && *t < a + len)
            .collect();
        let endpoints: BTreeSet<u64> = expect.keys().flat_map(|k| [k.0, k.1]).collect();
        prop_assert_eq!(graph_edges(&f), expect);
        prop_assert_eq!(f.nodes().map(|v| f.external_id(v)).collect::<BTreeSet<_>>(), endpoints);
    }
}

#[test]
fn duplicate_node_id_is_rejected() {
    let r = build_graph(NodeTable::bare([1, 2, 1]), EdgeTable::bare([(1, 2)]), None);
    assert!(matches!(r, Err(aml_subgraph::Error::Integrity(_))));
}

#[test]
fn edge_to_unknown_node_is_rejected() {
    let r = build_graph(NodeTable::bare([1, 2]), EdgeTable::bare([(1, 3)]), None);
    assert!(r.is_err());
}
