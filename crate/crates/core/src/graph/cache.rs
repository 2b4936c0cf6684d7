//! Binary graph cache.
//!
//! Layout, all integers little-endian 64-bit:
//!
//! ```text
//! "SGF1"
//! N, E, F_v, F_e
//! external ids                       N
//! out offsets, out neighbors         N+1, E
//! in offsets, in neighbors           N+1, E
//! node features (row-major, signed)  N*F_v
//! edge features (row-major, signed)  E*F_e   in out-adjacency order
//! timestamp column                   1       (u64::MAX when absent)
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{BackgroundGraph, NodeId};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"SGF1";

const NO_TIMESTAMP: u64 = u64::MAX;

pub fn write_cache(g: &BackgroundGraph, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode(g)).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<BackgroundGraph> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

pub(crate) fn encode(g: &BackgroundGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    let mut put = |x: u64| out.extend_from_slice(&x.to_le_bytes());
    put(g.node_count() as u64);
    put(g.edge_count() as u64);
    put(g.node_feature_width as u64);
    put(g.edge_feature_width as u64);
    g.external_ids.iter().for_each(|&x| put(x));
    g.out_offsets.iter().for_each(|&x| put(x as u64));
    g.edge_dst.iter().for_each(|x| put(x.0 as u64));
    g.in_offsets.iter().for_each(|&x| put(x as u64));
    g.in_sources.iter().for_each(|x| put(x.0 as u64));
    g.node_features.iter().for_each(|&x| put(x as u64));
    g.edge_features.iter().for_each(|&x| put(x as u64));
    put(g.timestamp_column.map_or(NO_TIMESTAMP, |c| c as u64));
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u64(&mut self) -> std::result::Result<u64, String> {
        let end = self.pos + 8;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        self.pos = end;
        Ok(u64::from_le_bytes(chunk.try_into().unwrap()))
    }

    fn vec(&mut self, len: usize) -> std::result::Result<Vec<u64>, String> {
        if self.bytes.len().saturating_sub(self.pos) / 8 < len {
            return Err(format!("truncated: expected {len} more words at byte {}", self.pos));
        }
        (0..len).map(|_| self.u64()).collect()
    }
}

pub(crate) fn decode(bytes: &[u8]) -> std::result::Result<BackgroundGraph, String> {
    if bytes.get(..4) != Some(CACHE_MAGIC.as_slice()) {
        return Err("bad magic (expected SGF1)".into());
    }
    let mut r = Reader { bytes, pos: 4 };
    let n = r.u64()? as usize;
    let e = r.u64()? as usize;
    let fv = r.u64()? as usize;
    let fe = r.u64()? as usize;
    if n > u32::MAX as usize {
        return Err(format!("node count {n} exceeds 32-bit id space"));
    }

    let external_ids = r.vec(n)?;
    if external_ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err("external ids are not strictly ascending".into());
    }
    let out_offsets = r.vec(n + 1)?;
    let out_neighbors = r.vec(e)?;
    let in_offsets = r.vec(n + 1)?;
    let in_neighbors = r.vec(e)?;
    let node_features: Vec<i64> = r.vec(n * fv)?.into_iter().map(|x| x as i64).collect();
    let edge_features: Vec<i64> = r.vec(e * fe)?.into_iter().map(|x| x as i64).collect();
    let ts = r.u64()?;
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }

    if out_offsets[0] != 0 || out_offsets[n] as usize != e || out_offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err("out offsets are not a valid CSR index".into());
    }
    let mut pairs = Vec::with_capacity(e);
    for v in 0..n {
        for k in out_offsets[v] as usize..out_offsets[v + 1] as usize {
            let d = out_neighbors[k];
            if d as usize >= n {
                return Err(format!("neighbor {d} out of range"));
            }
            pairs.push((NodeId::from(v), NodeId(d as u32)));
        }
    }
    if pairs.windows(2).any(|w| w[0] > w[1]) {
        return Err("out adjacency is not in canonical order".into());
    }
    let timestamp_column = match ts {
        NO_TIMESTAMP => None,
        c if (c as usize) < fe => Some(c as usize),
        c => return Err(format!("timestamp column {c} out of range")),
    };

    let g = BackgroundGraph::from_parts(
        external_ids,
        fv,
        node_features,
        fe,
        pairs,
        edge_features,
        timestamp_column,
    );
    let in_ok = g.in_offsets.iter().map(|&x| x as u64).eq(in_offsets)
        && g.in_sources.iter().map(|x| x.0 as u64).eq(in_neighbors);
    if !in_ok {
        return Err("in adjacency disagrees with out adjacency".into());
    }
    Ok(g)
}
