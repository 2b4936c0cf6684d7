//! Derives micro-F1, precision and recall from a confusion matrix, and
//! ranking metrics from scores.
//!
//! `cargo run --example metrics_from_counts`

use aml_subgraph::metrics::{accuracy, micro_f1, pr_auc, precision, recall, roc_auc, threshold_sweep, ConfusionMatrix};

fn main() -> aml_subgraph::Result<()> {
    let cm = ConfusionMatrix {
        tp: 245,
        fn_: 46,
        fp: 765,
        tn: 11_125,
    };
    println!("micro-F1  {:.4}", micro_f1(&cm)?);
    println!("accuracy  {:.4}", accuracy(&cm)?);
    println!("precision {:.4}", precision(&cm)?);
    println!("recall    {:.4}", recall(&cm)?);

    let scores = [0.9, 0.8, 0.7, 0.6, 0.55, 0.4, 0.3, 0.2];
    let labels = [true, false, true, false, false, true, false, false];
    println!(
        "roc-auc {:.4}  pr-auc {:.4}",
        roc_auc(&scores, &labels)?,
        pr_auc(&scores, &labels)?
    );
    for p in threshold_sweep(&scores, &labels)? {
        println!(
            "t >= {:.2}: precision {:.3} recall {:.3}",
            p.threshold, p.precision, p.recall
        );
    }
    Ok(())
}
