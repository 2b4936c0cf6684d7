//! TOML pipeline configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::builder::BuilderConfig;
use crate::error::{Error, Result};
use crate::graph::TimeWindow;
use crate::io::Columns;
use crate::sampler::{Fanouts, SplitSpec};
use crate::synth::SynthConfig;
use crate::train::TrainConfig;
use crate::vip::{Layer0Rule, PartitionMode, VipMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    /// Cluster labels, `node_id,label`.
    pub labels: PathBuf,
    pub subgraphs: PathBuf,
    pub subgraph_labels: PathBuf,
    /// Binary graph cache; written after the first CSV load and read in
    /// preference to the CSV files when present.
    pub graph_cache: Option<PathBuf>,
    /// Model checkpoint; defaults to `model.sgm` in the output directory.
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            nodes: "nodes.csv".into(),
            edges: "edges.csv".into(),
            labels: "labels.csv".into(),
            subgraphs: "subgraphs.csv".into(),
            subgraph_labels: "subgraph_labels.csv".into(),
            graph_cache: None,
            checkpoint: None,
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphSection {
    #[serde(flatten)]
    pub columns: Columns,
    pub timestamp: Option<String>,
    pub node_features: Option<usize>,
    pub edge_features: Option<usize>,
    pub window_start: Option<i64>,
    pub window_end: Option<i64>,
}

impl GraphSection {
    pub fn window(&self) -> Result<Option<TimeWindow>> {
        match (self.window_start, self.window_end) {
            (None, None) => Ok(None),
            (s, e) => TimeWindow::new(s.unwrap_or(i64::MIN), e.unwrap_or(i64::MAX)).map(Some),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VipSection {
    pub batch_size: usize,
    pub fanouts: Fanouts,
    pub partitions: usize,
    pub cache_budget: usize,
    /// Minibatches simulated for the communication report.
    pub trials: usize,
    pub layer0: Layer0Rule,
    pub method: VipMethod,
    pub partition_mode: PartitionMode,
    pub balance: f64,
}

impl Default for VipSection {
    fn default() -> Self {
        Self {
            batch_size: 64,
            fanouts: Fanouts::default(),
            partitions: 4,
            cache_budget: 100,
            trials: 100,
            layer0: Layer0Rule::default(),
            method: VipMethod::default(),
            partition_mode: PartitionMode::default(),
            balance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// Score threshold for the confusion matrix in `eval`.
    pub threshold: f64,
    pub paths: Paths,
    pub graph: GraphSection,
    pub builder: BuilderConfig,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub vip: VipSection,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            threshold: 0.5,
            paths: Paths::default(),
            graph: GraphSection::default(),
            builder: BuilderConfig::default(),
            split: SplitSpec::default(),
            train: TrainConfig::default(),
            vip: VipSection::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            cfg.paths.resolve_against(dir);
        }
        Ok(cfg)
    }
}

impl Paths {
    fn resolve_against(&mut self, dir: &Path) {
        for p in [
            &mut self.nodes,
            &mut self.edges,
            &mut self.labels,
            &mut self.subgraphs,
            &mut self.subgraph_labels,
            &mut self.out,
        ] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        for p in [&mut self.graph_cache, &mut self.checkpoint] {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = dir.join(&*p);
            }
        }
    }
}
