use std::collections::BTreeSet;

use aml_subgraph::builder::{SubgraphLabel, SubgraphRecord};
use aml_subgraph::graph::{BackgroundGraph, Direction, NeighborView, NodeId};
use aml_subgraph::sampler::{
    build_segregated_minibatch, build_subgraph_minibatch, epoch_batches, nodewise_sample, seeded_rng, Fanouts,
    MinibatchDump,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub edges: Vec<(u64, u64)>,
    pub direction: Direction,
    pub fanouts: Vec<usize>,
    pub records: Vec<Vec<u32>>,
    pub seed: u64,
}

pub fn instance() -> impl Strategy<Value = Instance> {
    (1usize..40).prop_flat_map(|n| {
        let node = 0..n as u64;
        (
            Just(n),
            prop::collection::vec((node.clone(), node), 0..120),
            prop_oneof![Just(Direction::In), Just(Direction::Out), Just(Direction::Both)],
            prop::collection::vec(prop_oneof![1usize..6, Just(usize::MAX)], 1..=3),
            prop::collection::vec(prop::collection::vec(0..n as u32, 1..6), 1..5),
            any::<u64>(),
        )
            .prop_map(|(n, edges, direction, fanouts, records, seed)| Instance {
                n,
                edges,
                direction,
                fanouts,
                records,
                seed,
            })
    })
}

/// `(indices, batch size, seed, epoch)` for the epoch planner.
pub fn epoch_plan() -> impl Strategy<Value = (Vec<usize>, usize, u64, u64)> {
    (
        prop::collection::btree_set(0usize..10_000, 0..300).prop_map(|s| s.into_iter().collect()),
        1usize..64,
        any::<u64>(),
        0u64..1000,
    )
}

/// Distinct neighbors of `v` straight from the edge list.
fn neighbors(edges: &[(u64, u64)], direction: Direction, v: u64) -> BTreeSet<u64> {
    edges
        .iter()
        .filter_map(|&(a, b)| match direction {
            Direction::Out if a == v => Some(b),
            Direction::In if b == v => Some(a),
            Direction::Both if a == v => Some(b),
            Direction::Both if b == v => Some(a),
            _ => None,
        })
        .filter(|&u| u != v)
        .collect()
}

impl Instance {
    fn graph(&self) -> BackgroundGraph {
        BackgroundGraph::from_edges(self.n, &self.edges).unwrap()
    }

    fn subgraphs(&self) -> Vec<SubgraphRecord> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| SubgraphRecord::new(i, r.iter().map(|&v| NodeId(v)).collect(), SubgraphLabel::Licit))
            .collect()
    }
}

pub fn check_fanout_exactness(inst: &Instance) -> Result<(), TestCaseError> {
    let g = inst.graph();
    let view = NeighborView::new(&g, inst.direction);
    let seeds: Vec<NodeId> = inst.records[0].iter().map(|&v| NodeId(v)).collect();
    let fanouts = Fanouts::new(inst.fanouts.clone()).unwrap();
    let s = nodewise_sample(&view, &seeds, &fanouts, &mut seeded_rng(inst.seed)).unwrap();
    for (h, hop) in s.edges.iter().enumerate() {
        for t in 0..s.layer_sizes[h] {
            let picked: Vec<u32> = hop.iter().filter(|e| e.0 as usize == t).map(|e| e.1).collect();
            let distinct: BTreeSet<u32> = picked.iter().copied().collect();
            let degree = neighbors(&inst.edges, inst.direction, s.nodes[t].0 as u64).len();
            prop_assert_eq!(picked.len(), distinct.len());
            prop_assert_eq!(picked.len(), inst.fanouts[h].min(degree));
        }
        prop_assert!(hop.iter().all(|e| (e.0 as usize) < s.layer_sizes[h]));
    }
    Ok(())
}

pub fn check_edges_in_graph(inst: &Instance) -> Result<(), TestCaseError> {
    let g = inst.graph();
    let view = NeighborView::new(&g, inst.direction);
    let records = inst.subgraphs();
    let refs: Vec<&SubgraphRecord> = records.iter().collect();
    let fanouts = Fanouts::new(inst.fanouts.clone()).unwrap();
    let mut rng = seeded_rng(inst.seed);
    for mb in [
        build_subgraph_minibatch(&g, &view, &refs, &fanouts, &mut rng).unwrap(),
        build_segregated_minibatch(&g, &view, &refs, &fanouts, &mut rng).unwrap(),
    ] {
        for (h, hop) in mb.layers.iter().enumerate() {
            for &(t, s) in hop {
                prop_assert!((t as usize) < mb.layer_sizes[h]);
                prop_assert!((s as usize) < mb.layer_sizes[h + 1]);
                let (tv, sv) = (mb.node_list[t as usize].0 as u64, mb.node_list[s as usize].0 as u64);
                prop_assert!(neighbors(&inst.edges, inst.direction, tv).contains(&sv));
            }
        }
    }
    Ok(())
}

pub fn check_ranges_round_trip(inst: &Instance) -> Result<(), TestCaseError> {
    let g = inst.graph();
    let view = NeighborView::new(&g, inst.direction);
    let records = inst.subgraphs();
    let refs: Vec<&SubgraphRecord> = records.iter().collect();
    let fanouts = Fanouts::new(inst.fanouts.clone()).unwrap();
    let mb = build_subgraph_minibatch(&g, &view, &refs, &fanouts, &mut seeded_rng(inst.seed)).unwrap();
    prop_assert_eq!(mb.subgraph_count(), records.len());
    let mut end = 0;
    for (i, r) in records.iter().enumerate() {
        prop_assert_eq!(mb.subgraph_ranges[i].start, end);
        end = mb.subgraph_ranges[i].end;
        prop_assert_eq!(mb.subgraph_nodes(i), &r.nodes[..]);
    }
    prop_assert_eq!(end, mb.prefix_len());

    let dump = MinibatchDump::new(0, &g, &refs, &mb);
    let back: MinibatchDump = serde_json::from_str(&serde_json::to_string(&dump).unwrap()).unwrap();
    for (i, r) in records.iter().enumerate() {
        let (a, b) = back.ranges[i];
        let ids: Vec<u64> = r.nodes.iter().map(|&v| g.external_id(v)).collect();
        prop_assert_eq!(&back.node_list[a..b], &ids[..]);
    }
    prop_assert_eq!(back, dump);
    Ok(())
}

pub fn check_epoch_partition(
    (indices, batch_size, seed, epoch): &(Vec<usize>, usize, u64, u64),
) -> Result<(), TestCaseError> {
    let batches = epoch_batches(indices, *batch_size, *seed, *epoch).unwrap();
    prop_assert_eq!(batches.len(), indices.len().div_ceil(*batch_size));
    for (i, b) in batches.iter().enumerate() {
        if i + 1 < batches.len() {
            prop_assert_eq!(b.len(), *batch_size);
        } else {
            prop_assert!(!b.is_empty() && b.len() <= *batch_size);
        }
    }
    let mut all: Vec<usize> = batches.concat();
    all.sort_unstable();
    prop_assert_eq!(&all, indices);
    Ok(())
}
