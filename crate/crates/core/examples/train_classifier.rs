//! Trains the labeling-trick model and the mean-pooling baseline on the
//! planted-boundary synthetic dataset and reports test metrics.
//!
//! `cargo run --release --example train_classifier`

use aml_subgraph::builder::SubgraphLabel;
use aml_subgraph::metrics::{confusion, micro_f1, pr_auc, roc_auc};
use aml_subgraph::model::Mode;
use aml_subgraph::sampler::{split_dataset, SplitSpec};
use aml_subgraph::synth::{generate, SynthConfig};
use aml_subgraph::train::{predict_scores, train, TrainConfig};

fn main() -> aml_subgraph::Result<()> {
    let d = generate(&SynthConfig::default(), 42)?;
    let split = split_dataset(
        d.records.len(),
        &SplitSpec {
            seed: 42,
            ..Default::default()
        },
    )?;
    let labels: Vec<bool> = split
        .test
        .iter()
        .map(|&i| d.records[i].label == SubgraphLabel::Suspicious)
        .collect();

    for mode in [Mode::Glass, Mode::MeanPool] {
        let cfg = TrainConfig {
            mode,
            epochs: 200,
            ..Default::default()
        };
        let out = train(&d.graph, &d.records, &split, &cfg, 42)?;
        let scores = predict_scores(&out.params, &d.graph, &d.records, &split.test, &cfg, 42)?;
        let cm = confusion(&scores, &labels, 0.5)?;
        println!(
            "{:<9} loss {:.4}  f1 {:.3}  pr-auc {:.3}  roc-auc {:.3}",
            mode.as_str(),
            out.history.last().map_or(f64::NAN, |e| e.loss),
            micro_f1(&cm)?,
            pr_auc(&scores, &labels)?,
            roc_auc(&scores, &labels)?,
        );
    }
    Ok(())
}
