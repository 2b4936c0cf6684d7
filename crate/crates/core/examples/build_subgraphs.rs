//! Builds labeled subgraphs from a small hand-made transaction graph and
//! prints the path classes and resulting records.
//!
//! `cargo run --example build_subgraphs`

use aml_subgraph::builder::{build_dataset, BuilderConfig, ClusterLabel, ClusterLabelMap};
use aml_subgraph::graph::{build_graph, EdgeTable, NodeTable};

fn main() -> aml_subgraph::Result<()> {
    // Cluster 1 is illicit, 9 and 12 are licit exchanges, the rest unknown.
    let edges = [
        (1, 2, 10),
        (2, 3, 11),
        (3, 9, 12),
        (1, 4, 13),
        (4, 5, 14),
        (5, 12, 15),
        (12, 6, 16),
        (6, 7, 17),
        (7, 9, 18),
    ];
    let g = build_graph(
        NodeTable::bare([1, 2, 3, 4, 5, 6, 7, 9, 12]),
        EdgeTable::timed(edges),
        Some(0),
    )?;
    let labels = ClusterLabelMap::from_external(
        &g,
        [
            (1, ClusterLabel::Illicit),
            (9, ClusterLabel::Licit),
            (12, ClusterLabel::Licit),
        ],
    )?;
    let out = build_dataset(&g, &labels, None, &BuilderConfig::default())?;

    for p in &out.paths {
        let ids: Vec<u64> = p.nodes.iter().map(|&v| out.graph.external_id(v)).collect();
        println!("{:<10} {ids:?}", format!("{:?}", p.class));
    }
    for r in &out.records {
        let ids: Vec<u64> = r.nodes.iter().map(|&v| out.graph.external_id(v)).collect();
        println!("record {} {:<10} {ids:?}", r.id, r.label.as_str());
    }
    println!("{}", serde_json::to_string_pretty(&out.report).unwrap());
    Ok(())
}
