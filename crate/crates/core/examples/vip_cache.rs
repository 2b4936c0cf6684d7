//! Computes vertex-inclusion probabilities for subgraph minibatches and
//! compares the communication volume of a VIP cache, a random cache and no
//! cache on a partitioned graph.
//!
//! `cargo run --release --example vip_cache`

use aml_subgraph::graph::{Direction, NeighborView};
use aml_subgraph::sampler::{split_dataset, Fanouts, SplitSpec};
use aml_subgraph::synth::{generate, SynthConfig};
use aml_subgraph::vip::*;

fn main() -> aml_subgraph::Result<()> {
    let d = generate(&SynthConfig::default(), 42)?;
    let view = NeighborView::new(&d.graph, Direction::Both);
    let split = split_dataset(d.records.len(), &SplitSpec::default())?;
    let fanouts = Fanouts::parse("10,10")?;
    let cfg = VipConfig {
        batch_size: 64,
        fanouts: fanouts.clone(),
        layer0: Layer0Rule::default(),
        method: VipMethod::default(),
    };
    let aug = augment_graph(&d.graph, &d.records)?;
    let table = vip_analysis(&aug, &view, &split.train, &cfg)?;

    let parts = 4;
    let budget = 200;
    let partition = partition_nodes(&d.graph, &d.records, parts, 0, PartitionMode::Random, 0.1)?;
    let batches = training_batches(&d.graph, &view, &d.records, &split.train, 64, &fanouts, 0, 100)?;
    for (name, policy) in [
        ("vip", build_cache_policy(&table, &partition, budget)),
        ("random", build_random_cache_policy(&partition, budget, 0)),
        ("none", CachePolicy::empty(parts)),
    ] {
        let s = simulate_comm_volume(&partition, &policy, &batches)?;
        println!(
            "{name:<7} remote rows {:>8} -> {:>8}  reduction {:.3}",
            s.remote_without_cache, s.remote_with_cache, s.reduction_ratio
        );
    }
    Ok(())
}
