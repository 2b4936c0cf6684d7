//! Samples one minibatch of subgraphs and shows how the range metadata maps
//! rows of the node list back to subgraphs.
//!
//! `cargo run --example sample_minibatch`

use aml_subgraph::builder::SubgraphRecord;
use aml_subgraph::graph::{Direction, NeighborView};
use aml_subgraph::sampler::{build_subgraph_minibatch, seeded_rng, Fanouts};
use aml_subgraph::synth::{generate, SynthConfig};

fn main() -> aml_subgraph::Result<()> {
    let d = generate(
        &SynthConfig {
            nodes: 1_000,
            records: 50,
            ..Default::default()
        },
        3,
    )?;
    let view = NeighborView::new(&d.graph, Direction::Both);
    let batch: Vec<&SubgraphRecord> = d.records.iter().take(4).collect();
    let fanouts = Fanouts::parse("3,2")?;
    let mb = build_subgraph_minibatch(&d.graph, &view, &batch, &fanouts, &mut seeded_rng(7))?;

    for (i, r) in batch.iter().enumerate() {
        println!("subgraph {} -> rows {:?}", r.id, mb.subgraph_ranges[i]);
    }
    println!("layer sizes {:?}", mb.layer_sizes);
    for (h, hop) in mb.layers.iter().enumerate() {
        println!("hop {}: {} sampled edges", h + 1, hop.len());
    }
    Ok(())
}
