//! Writes a generated graph to CSV, reloads it, keeps the largest weakly
//! connected component and round-trips it through the binary cache.
//!
//! `cargo run --example graph_cache`

use aml_subgraph::graph::{build_graph, read_cache, write_cache};
use aml_subgraph::io::{read_edges, read_nodes, write_edges, write_nodes, Columns};
use aml_subgraph::synth::{generate, SynthConfig};

fn main() -> aml_subgraph::Result<()> {
    let dir = std::env::temp_dir().join("aml-subgraph-graph-cache");
    std::fs::create_dir_all(&dir).map_err(|e| aml_subgraph::Error::io(&dir, e))?;
    let d = generate(
        &SynthConfig {
            nodes: 2_000,
            records: 100,
            ..Default::default()
        },
        1,
    )?;
    write_nodes(&dir.join("nodes.csv"), &d.graph)?;
    write_edges(&dir.join("edges.csv"), &d.graph)?;

    let cols = Columns::default();
    let nodes = read_nodes(&dir.join("nodes.csv"), &cols, None)?;
    let (edges, ts) = read_edges(&dir.join("edges.csv"), &cols, None, None)?;
    let g = build_graph(nodes, edges, ts)?.largest_weak_component();
    println!(
        "{} nodes, {} edges in the largest component",
        g.node_count(),
        g.edge_count()
    );

    let cache = dir.join("graph.sgf");
    write_cache(&g, &cache)?;
    assert_eq!(read_cache(&cache)?, g);
    println!("cache round trip ok: {}", cache.display());
    Ok(())
}
