use aml_subgraph::builder::{SubgraphLabel, SubgraphRecord};
use aml_subgraph::graph::{BackgroundGraph, Direction, NeighborView, NodeId};
use aml_subgraph::model::*;
use aml_subgraph::sampler::*;
use rand::Rng;

/// A random small batch in the given mode: 8-14 nodes, 2-3 subgraphs.
pub fn random_batch(mode: Mode, seed: u64) -> (Minibatch, InputFeatures, Vec<f64>) {
    let mut rng = seeded_rng(seed);
    let n = rng.gen_range(8..=14);
    let mut edges = Vec::new();
    for v in 1..n as u64 {
        edges.push((rng.gen_range(0..v), v));
    }
    for _ in 0..n {
        edges.push((rng.gen_range(0..n as u64), rng.gen_range(0..n as u64)));
    }
    let g = BackgroundGraph::from_edges(n, &edges).unwrap();
    let view = NeighborView::new(&g, Direction::Both);
    let recs: Vec<SubgraphRecord> = (0..rng.gen_range(2..=3))
        .map(|i| {
            let k = rng.gen_range(1..=3);
            let nodes = (0..k).map(|_| NodeId(rng.gen_range(0..n as u32))).collect();
            let label = if i % 2 == 0 {
                SubgraphLabel::Licit
            } else {
                SubgraphLabel::Suspicious
            };
            SubgraphRecord::new(i, nodes, label)
        })
        .collect();
    let refs: Vec<&SubgraphRecord> = recs.iter().collect();
    let fanouts = Fanouts::new(vec![rng.gen_range(1..=3), rng.gen_range(1..=3)]).unwrap();
    let mb = match mode {
        Mode::Glass => build_subgraph_minibatch(&g, &view, &refs, &fanouts, &mut rng),
        Mode::GnnSeg => build_segregated_minibatch(&g, &view, &refs, &fanouts, &mut rng),
        Mode::MeanPool => build_isolated_minibatch(&g, &refs, 2),
    }
    .unwrap();
    let x = input_features(&g, &view, &mb, mode, false);
    let labels = mb.labels.clone().unwrap();
    (mb, x, labels)
}

/// Parameters with every entry drawn uniformly from (-1, 1).
pub fn dense_params(dims: &[usize], seed: u64) -> ModelParams {
    let mut p = ModelParams::zeros(dims).unwrap();
    let mut rng = seeded_rng(seed);
    for v in &mut p.values {
        *v = rng.gen_range(-1.0..1.0);
    }
    p
}

pub struct GradientCheck {
    /// Worst relative disagreement, 0 where the absolute one is below the floor.
    pub rel: f64,
    pub max_abs_diff: f64,
    pub max_abs_grad: f64,
    /// Where `rel` was attained.
    pub at: String,
}

/// Compares the analytic gradient with central differences of step `h`.
/// Entries whose absolute difference is below `floor` count as agreeing.
pub fn gradient_check(
    params: &ModelParams,
    mb: &Minibatch,
    x: &InputFeatures,
    labels: &[f64],
    pos_weight: f64,
    h: f64,
    floor: f64,
) -> GradientCheck {
    let (_, analytic) = loss_and_grad(params, mb, x, labels, pos_weight).unwrap();
    let mut out = GradientCheck {
        rel: 0.0,
        max_abs_diff: 0.0,
        max_abs_grad: 0.0,
        at: String::new(),
    };
    for t in params.tensors() {
        for k in t.range() {
            let mut p = params.clone();
            p.values[k] += h;
            let up = batch_loss(&p, mb, x, labels, pos_weight).unwrap();
            p.values[k] -= 2.0 * h;
            let down = batch_loss(&p, mb, x, labels, pos_weight).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let diff = (a - numeric).abs();
            out.max_abs_diff = out.max_abs_diff.max(diff);
            out.max_abs_grad = out.max_abs_grad.max(a.abs());
            let rel = if diff < floor {
                0.0
            } else {
                diff / a.abs().max(numeric.abs())
            };
            if rel > out.rel {
                out.rel = rel;
                out.at = format!("{}[{}]: analytic {a}, numeric {numeric}", t.name, k - t.offset);
            }
        }
    }
    out
}
