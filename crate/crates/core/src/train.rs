//! Epoch loop, validation-based early stopping and per-record scoring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builder::SubgraphRecord;
use crate::error::{Error, Result};
use crate::graph::{BackgroundGraph, Direction, NeighborView};
use crate::metrics::{pr_auc, roc_auc};
use crate::model::{forward, init_params, input_features, input_width, sigmoid, train_step, Adam, Mode, ModelParams};
use crate::sampler::{
    build_isolated_minibatch, build_segregated_minibatch, build_subgraph_minibatch, derive_seed, epoch_batches,
    seeded_rng, Fanouts, Minibatch, Split,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight on the positive class; `None` uses `#neg / #pos` of the
    /// training split.
    pub pos_weight: Option<f64>,
    pub mode: Mode,
    pub hidden: usize,
    /// Stop after this many epochs without a better validation PR-AUC.
    pub patience: Option<usize>,
    pub fanouts: Fanouts,
    pub direction: Direction,
    pub node_features: bool,
    /// Score with sampled neighborhoods instead of full ones.
    pub sampled_inference: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            batch_size: 4000,
            epochs: 100,
            pos_weight: None,
            mode: Mode::Glass,
            hidden: 16,
            patience: None,
            fanouts: Fanouts::default(),
            direction: Direction::Both,
            node_features: false,
            sampled_inference: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden dimension must be at least 1".into()));
        }
        if let Some(w) = self.pos_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!(
                    "positive-class weight must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self, g: &BackgroundGraph) -> Vec<usize> {
        let mut d = vec![input_width(g, self.node_features)];
        d.extend(std::iter::repeat_n(self.hidden, self.fanouts.layers()));
        d
    }
}

/// Builds the minibatch layout each mode trains on.
pub fn build_batch(
    g: &BackgroundGraph,
    view: &NeighborView,
    records: &[&SubgraphRecord],
    mode: Mode,
    fanouts: &Fanouts,
    seed: u64,
) -> Result<Minibatch> {
    let mut rng = seeded_rng(seed);
    match mode {
        Mode::Glass => build_subgraph_minibatch(g, view, records, fanouts, &mut rng),
        Mode::GnnSeg => build_segregated_minibatch(g, view, records, fanouts, &mut rng),
        Mode::MeanPool => build_isolated_minibatch(g, records, fanouts.layers()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_pr_auc: Option<f64>,
    pub val_roc_auc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Parameters of the epoch with the best validation PR-AUC, or of the
    /// last epoch when validation is undefined.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub pos_weight: f64,
}

fn targets(records: &[SubgraphRecord], idx: &[usize]) -> Result<Vec<f64>> {
    idx.iter()
        .map(|&i| {
            records[i]
                .label
                .target()
                .ok_or_else(|| Error::Config(format!("subgraph {} has no class label", records[i].id)))
        })
        .collect()
}

pub fn train(
    g: &BackgroundGraph,
    records: &[SubgraphRecord],
    split: &Split,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let view = NeighborView::new(g, cfg.direction);
    let train_y = targets(records, &split.train)?;
    let pos = train_y.iter().filter(|&&y| y == 1.0).count();
    let pos_weight = match cfg.pos_weight {
        Some(w) => w,
        None if pos == 0 => 1.0,
        None => (train_y.len() - pos) as f64 / pos as f64,
    };
    let val_y: Vec<bool> = targets(records, &split.val)?.iter().map(|&y| y == 1.0).collect();
    let val_defined = val_y.iter().any(|&y| y) && val_y.iter().any(|&y| !y);

    let mut params = init_params(&cfg.dims(g), seed)?;
    let mut opt = Adam::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 0..cfg.epochs {
        let plan = epoch_batches(&split.train, cfg.batch_size, seed, epoch as u64)?;
        let prepared: Vec<_> = plan
            .par_iter()
            .enumerate()
            .map(|(b, idx)| {
                let refs: Vec<&SubgraphRecord> = idx.iter().map(|&i| &records[i]).collect();
                let mb = build_batch(
                    g,
                    &view,
                    &refs,
                    cfg.mode,
                    &cfg.fanouts,
                    derive_seed(seed, epoch as u64, b as u64),
                )?;
                let x = input_features(g, &view, &mb, cfg.mode, cfg.node_features);
                let y = targets(records, idx)?;
                Ok((mb, x, y))
            })
            .collect::<Result<_>>()?;

        let mut loss_sum = 0.0;
        for (mb, x, y) in &prepared {
            let out = train_step(&mut params, &mut opt, mb, x, y, cfg.lr, pos_weight)?;
            loss_sum += out.loss * y.len() as f64;
        }
        let loss = loss_sum / split.train.len() as f64;

        let (val_pr_auc, val_roc_auc) = if val_defined {
            let scores = predict_scores(&params, g, records, &split.val, cfg, seed)?;
            (Some(pr_auc(&scores, &val_y)?), Some(roc_auc(&scores, &val_y)?))
        } else {
            (None, None)
        };
        history.push(EpochRecord {
            epoch,
            loss,
            val_pr_auc,
            val_roc_auc,
        });

        if let Some(ap) = val_pr_auc {
            if best.as_ref().is_none_or(|b| ap > b.0) {
                best = Some((ap, epoch, params.clone()));
            }
            if let (Some(p), Some(b)) = (cfg.patience, &best) {
                if epoch - b.1 >= p {
                    break;
                }
            }
        }
    }
    let last = history.len().saturating_sub(1);
    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, last),
    };
    Ok(TrainOutput {
        params,
        history,
        best_epoch,
        pos_weight,
    })
}

/// Scores in `[0, 1]` for `records[idx]`, one record per batch so that in
/// GLASS mode only that record's nodes carry the indicator. Neighborhoods
/// are complete unless `cfg.sampled_inference` is set, in which case they
/// are sampled with per-record seeds derived from `seed`.
pub fn predict_scores(
    params: &ModelParams,
    g: &BackgroundGraph,
    records: &[SubgraphRecord],
    idx: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let view = NeighborView::new(g, cfg.direction);
    let full = Fanouts::full(cfg.fanouts.layers());
    let fanouts = if cfg.sampled_inference { &cfg.fanouts } else { &full };
    idx.par_iter()
        .map(|&i| {
            let r = records
                .get(i)
                .ok_or_else(|| Error::Contract(format!("record index {i} out of range")))?;
            let mb = build_batch(g, &view, &[r], cfg.mode, fanouts, derive_seed(seed, u64::MAX, i as u64))?;
            let x = input_features(g, &view, &mb, cfg.mode, cfg.node_features);
            let logit = forward(params, &mb, &x)?.logits[0];
            if logit.is_nan() {
                return Err(Error::Numeric(format!("record {} scored NaN", r.id)));
            }
            Ok(sigmoid(logit))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::SubgraphLabel;
    use crate::graph::NodeId;
    use crate::model::ModelParams;

    fn data() -> (BackgroundGraph, Vec<SubgraphRecord>) {
        let g = BackgroundGraph::from_edges(8, &[(0, 1), (1, 2), (3, 4), (4, 5), (5, 6), (6, 7), (7, 5)]).unwrap();
        let recs = vec![
            SubgraphRecord::new(0, vec![NodeId(0), NodeId(1)], SubgraphLabel::Licit),
            SubgraphRecord::new(1, vec![NodeId(3), NodeId(4)], SubgraphLabel::Suspicious),
            SubgraphRecord::new(2, vec![NodeId(2)], SubgraphLabel::Licit),
            SubgraphRecord::new(3, vec![NodeId(3), NodeId(4)], SubgraphLabel::Suspicious),
        ];
        (g, recs)
    }

    #[test]
    fn zero_model_scores_half() {
        let (g, recs) = data();
        let cfg = TrainConfig::default();
        let p = ModelParams::zeros(&cfg.dims(&g)).unwrap();
        let s = predict_scores(&p, &g, &recs, &[0, 1, 2], &cfg, 0).unwrap();
        assert_eq!(s, vec![0.5; 3]);
    }

    #[test]
    fn duplicate_records_score_alike() {
        let (g, recs) = data();
        let cfg = TrainConfig::default();
        let p = init_params(&cfg.dims(&g), 3).unwrap();
        let s = predict_scores(&p, &g, &recs, &[1, 3], &cfg, 0).unwrap();
        assert_eq!(s[0], s[1]);
    }

    #[test]
    fn empty_train_split_is_config_error() {
        let (g, recs) = data();
        let split = Split {
            train: vec![],
            val: vec![0],
            test: vec![1],
        };
        let r = train(&g, &recs, &split, &TrainConfig::default(), 0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let (g, recs) = data();
        let split = Split {
            train: vec![0, 1, 2],
            val: vec![2, 3],
            test: vec![],
        };
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 2,
            lr: 0.01,
            ..Default::default()
        };
        let a = train(&g, &recs, &split, &cfg, 7).unwrap();
        let b = train(&g, &recs, &split, &cfg, 7).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }
}
