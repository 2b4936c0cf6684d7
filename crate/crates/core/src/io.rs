//! CSV and JSON readers and writers for graphs, labels, subgraphs and reports.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::builder::{ClusterLabel, SubgraphLabel, SubgraphRecord};
use crate::error::{Error, Result};
use crate::graph::{BackgroundGraph, EdgeTable, NodeTable};
use crate::metrics::SweepPoint;
use crate::vip::VipTable;

/// Column names used to find ids in the node and edge files. Every other
/// column is a feature, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Columns {
    pub node_id: String,
    pub src: String,
    pub dst: String,
}

impl Default for Columns {
    fn default() -> Self {
        Self {
            node_id: "node_id".into(),
            src: "src_id".into(),
            dst: "dst_id".into(),
        }
    }
}

struct Csv {
    path: PathBuf,
    reader: csv::Reader<File>,
    header: Vec<String>,
}

impl Csv {
    fn open(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let header = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_owned)
            .collect();
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            header,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Format {
            path: self.path.clone(),
            message: format!("header has no {name:?} column (found {})", self.header.join(",")),
        })
    }

    /// Calls `f(line, row)` for every data row.
    fn rows(&mut self, mut f: impl FnMut(u64, &csv::StringRecord) -> Result<()>) -> Result<()> {
        let mut row = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut row) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = row.position().map_or(0, |p| p.line());
                    f(line, &row)?;
                }
                Err(e) => return Err(csv_error(&self.path, e)),
            }
        }
    }

    fn field<T: FromStr>(&self, line: u64, row: &csv::StringRecord, idx: usize, what: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = row.get(idx).unwrap_or("");
        raw.parse().map_err(|e: T::Err| Error::Parse {
            path: self.path.clone(),
            line,
            message: format!("{what} {raw:?}: {e}"),
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: match kind {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                other => format!("{other:?}"),
            },
        },
    }
}

fn check_width(path: &Path, kind: &str, found: usize, expected: Option<usize>) -> Result<()> {
    match expected {
        Some(w) if w != found => Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("header has {found} {kind} feature columns, configuration expects {w}"),
        }),
        _ => Ok(()),
    }
}

/// Reads a node table. `expected_width`, when set, must equal the number of
/// feature columns in the header.
pub fn read_nodes(path: &Path, columns: &Columns, expected_width: Option<usize>) -> Result<NodeTable> {
    let mut csv = Csv::open(path)?;
    let id = csv.column(&columns.node_id)?;
    let feats: Vec<usize> = (0..csv.header.len()).filter(|&i| i != id).collect();
    check_width(path, "node", feats.len(), expected_width)?;
    let mut table = NodeTable {
        ids: Vec::new(),
        feature_width: feats.len(),
        features: Vec::new(),
    };
    let header = csv.header.clone();
    let mut rows = Vec::new();
    csv.rows(|line, row| {
        rows.push((line, row.clone()));
        Ok(())
    })?;
    for (line, row) in rows {
        table.ids.push(csv.field(line, &row, id, "node id")?);
        for &f in &feats {
            table
                .features
                .push(csv.field(line, &row, f, &format!("feature {}", header[f]))?);
        }
    }
    Ok(table)
}

/// Reads an edge table and resolves the optional timestamp column name to a
/// feature index.
pub fn read_edges(
    path: &Path,
    columns: &Columns,
    expected_width: Option<usize>,
    timestamp: Option<&str>,
) -> Result<(EdgeTable, Option<usize>)> {
    let mut csv = Csv::open(path)?;
    let (src, dst) = (csv.column(&columns.src)?, csv.column(&columns.dst)?);
    let feats: Vec<usize> = (0..csv.header.len()).filter(|&i| i != src && i != dst).collect();
    check_width(path, "edge", feats.len(), expected_width)?;
    let ts = match timestamp {
        None => None,
        Some(name) => {
            let col = csv.column(name)?;
            Some(
                feats
                    .iter()
                    .position(|&f| f == col)
                    .ok_or_else(|| Error::Config(format!("timestamp column {name:?} is an id column")))?,
            )
        }
    };
    let header = csv.header.clone();
    let mut rows = Vec::new();
    csv.rows(|line, row| {
        rows.push((line, row.clone()));
        Ok(())
    })?;
    let mut table = EdgeTable {
        src: Vec::with_capacity(rows.len()),
        dst: Vec::with_capacity(rows.len()),
        feature_width: feats.len(),
        features: Vec::with_capacity(rows.len() * feats.len()),
    };
    for (line, row) in rows {
        table.src.push(csv.field(line, &row, src, "source id")?);
        table.dst.push(csv.field(line, &row, dst, "destination id")?);
        for &f in &feats {
            table
                .features
                .push(csv.field(line, &row, f, &format!("feature {}", header[f]))?);
        }
    }
    Ok((table, ts))
}

/// `node_id,label` rows with label `licit` or `illicit`.
pub fn read_cluster_labels(path: &Path) -> Result<Vec<(u64, ClusterLabel)>> {
    let mut csv = Csv::open(path)?;
    let (id, label) = (csv.column("node_id")?, csv.column("label")?);
    let mut rows = Vec::new();
    csv.rows(|line, row| {
        rows.push((line, row.clone()));
        Ok(())
    })?;
    rows.iter()
        .map(|(line, row)| {
            Ok((
                csv.field(*line, row, id, "node id")?,
                csv.field(*line, row, label, "label")?,
            ))
        })
        .collect()
}

/// Membership rows `(subgraph id, external node id, line)`.
pub fn read_membership(path: &Path) -> Result<Vec<(usize, u64, u64)>> {
    let mut csv = Csv::open(path)?;
    let (sid, nid) = (csv.column("subgraph_id")?, csv.column("node_id")?);
    let mut rows = Vec::new();
    csv.rows(|line, row| {
        rows.push((line, row.clone()));
        Ok(())
    })?;
    rows.iter()
        .map(|(line, row)| {
            Ok((
                csv.field(*line, row, sid, "subgraph id")?,
                csv.field(*line, row, nid, "node id")?,
                *line,
            ))
        })
        .collect()
}

/// `subgraph_id,label` rows.
pub fn read_subgraph_labels(path: &Path) -> Result<BTreeMap<usize, SubgraphLabel>> {
    let mut csv = Csv::open(path)?;
    let (sid, label) = (csv.column("subgraph_id")?, csv.column("label")?);
    let mut out = BTreeMap::new();
    let mut rows = Vec::new();
    csv.rows(|line, row| {
        rows.push((line, row.clone()));
        Ok(())
    })?;
    for (line, row) in rows {
        let id: usize = csv.field(line, &row, sid, "subgraph id")?;
        let l: SubgraphLabel = csv.field(line, &row, label, "label")?;
        if out.insert(id, l).is_some_and(|prev| prev != l) {
            return Err(Error::Integrity(format!(
                "{} line {line}: subgraph {id} has two different labels",
                path.display()
            )));
        }
    }
    Ok(out)
}

/// Subgraph records against `g`, ordered by subgraph id.
pub fn read_subgraphs(members: &Path, labels: &Path, g: &BackgroundGraph) -> Result<Vec<SubgraphRecord>> {
    let labels_by_id = read_subgraph_labels(labels)?;
    let mut nodes: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    for (sid, ext, line) in read_membership(members)? {
        let v = g.lookup(ext).ok_or_else(|| {
            Error::Integrity(format!(
                "{} line {line}: node {ext} of subgraph {sid} is not in the graph",
                members.display()
            ))
        })?;
        nodes.entry(sid).or_default().push(v);
    }
    if let Some(id) = labels_by_id.keys().find(|id| !nodes.contains_key(id)) {
        return Err(Error::Integrity(format!("subgraph {id} has a label but no members")));
    }
    nodes
        .into_iter()
        .map(|(id, n)| {
            let label = *labels_by_id
                .get(&id)
                .ok_or_else(|| Error::Integrity(format!("subgraph {id} has no label")))?;
            Ok(SubgraphRecord::new(id, n, label))
        })
        .collect()
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(std::io::BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_nodes(path: &Path, g: &BackgroundGraph) -> Result<()> {
    let header = std::iter::once("node_id".to_string())
        .chain((0..g.node_feature_width()).map(|i| format!("f{i}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows = g.nodes().map(|v| {
        std::iter::once(g.external_id(v).to_string())
            .chain(g.node_features(v).iter().map(i64::to_string))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path, std::iter::once(header).chain(rows))
}

pub fn write_edges(path: &Path, g: &BackgroundGraph) -> Result<()> {
    let header = ["src_id".to_string(), "dst_id".to_string()]
        .into_iter()
        .chain((0..g.edge_feature_width()).map(|i| format!("e{i}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows = (0..g.edge_count()).map(|e| {
        let (s, d) = g.edge(e);
        [g.external_id(s).to_string(), g.external_id(d).to_string()]
            .into_iter()
            .chain(g.edge_features(e).iter().map(i64::to_string))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path, std::iter::once(header).chain(rows))
}

pub fn write_subgraphs(path: &Path, g: &BackgroundGraph, records: &[SubgraphRecord]) -> Result<()> {
    let mut rows = vec!["subgraph_id,node_id".to_string()];
    for r in records {
        let mut ext: Vec<u64> = r.nodes.iter().map(|&v| g.external_id(v)).collect();
        ext.sort_unstable();
        rows.extend(ext.into_iter().map(|x| format!("{},{x}", r.id)));
    }
    write_lines(path, rows)
}

pub fn write_subgraph_labels(path: &Path, records: &[SubgraphRecord]) -> Result<()> {
    let rows = records.iter().map(|r| format!("{},{}", r.id, r.label.as_str()));
    write_lines(path, std::iter::once("subgraph_id,label".to_string()).chain(rows))
}

pub fn write_cluster_labels(path: &Path, labels: &[(u64, ClusterLabel)]) -> Result<()> {
    let rows = labels.iter().map(|(id, l)| {
        let name = match l {
            ClusterLabel::Licit => "licit",
            ClusterLabel::Illicit => "illicit",
        };
        format!("{id},{name}")
    });
    write_lines(path, std::iter::once("node_id,label".to_string()).chain(rows))
}

/// `node_id,layer,probability` for every nonzero entry. Layer 1 is the
/// member layer and layer `h + 1` the frontier after `h` sampling hops.
pub fn write_vip_csv(path: &Path, g: &BackgroundGraph, table: &VipTable) -> Result<()> {
    let mut rows = vec!["node_id,layer,probability".to_string()];
    for (h, layer) in table.frontier.iter().enumerate() {
        for v in g.nodes() {
            let p = layer[v.index()];
            if p > 0.0 {
                rows.push(format!("{},{},{p}", g.external_id(v), h + 1));
            }
        }
    }
    write_lines(path, rows)
}

pub fn write_sweep_csv(path: &Path, sweep: &[SweepPoint]) -> Result<()> {
    let rows = sweep
        .iter()
        .map(|p| format!("{},{},{}", p.threshold, p.precision, p.recall));
    write_lines(
        path,
        std::iter::once("threshold,precision,recall".to_string()).chain(rows),
    )
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub min: usize,
    pub median: f64,
    pub mean: f64,
    pub max: usize,
}

impl SizeStats {
    pub fn of(sizes: &[usize]) -> Option<Self> {
        if sizes.is_empty() {
            return None;
        }
        let mut s = sizes.to_vec();
        s.sort_unstable();
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2] as f64
        } else {
            (s[n / 2 - 1] + s[n / 2]) as f64 / 2.0
        };
        Some(Self {
            min: s[0],
            median,
            mean: s.iter().sum::<usize>() as f64 / n as f64,
            max: s[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub nodes: Option<usize>,
    pub edges: Option<usize>,
    pub subgraphs: usize,
    pub licit: usize,
    pub suspicious: usize,
    pub licit_sizes: Option<SizeStats>,
    pub suspicious_sizes: Option<SizeStats>,
}

/// Counts from membership rows and labels; the graph part is optional.
pub fn dataset_stats(
    graph: Option<&BackgroundGraph>,
    membership: &[(usize, u64, u64)],
    labels: &BTreeMap<usize, SubgraphLabel>,
) -> DatasetStats {
    let mut sizes: BTreeMap<usize, std::collections::BTreeSet<u64>> = BTreeMap::new();
    for &(sid, node, _) in membership {
        sizes.entry(sid).or_default().insert(node);
    }
    let of = |class: SubgraphLabel| -> Vec<usize> {
        sizes
            .iter()
            .filter(|(id, _)| labels.get(id) == Some(&class))
            .map(|(_, s)| s.len())
            .collect()
    };
    let (licit, suspicious) = (of(SubgraphLabel::Licit), of(SubgraphLabel::Suspicious));
    DatasetStats {
        nodes: graph.map(BackgroundGraph::node_count),
        edges: graph.map(BackgroundGraph::edge_count),
        subgraphs: sizes.len(),
        licit: licit.len(),
        suspicious: suspicious.len(),
        licit_sizes: SizeStats::of(&licit),
        suspicious_sizes: SizeStats::of(&suspicious),
    }
}

/// Provenance written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub outputs: Vec<String>,
}

/// SHA-256 of the JSON encoding of `config`, hex.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configuration serializes");
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, seed: u64, config: &T, outputs: &[&str]) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_hash: config_hash(config),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }
}
