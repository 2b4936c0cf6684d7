use super::{BackgroundGraph, Direction, NodeId};

/// Distinct-neighbor adjacency used for sampling and message passing.
///
/// Parallel edges collapse to one neighbor and self-loops are dropped, so the
/// view degree of `v` is the number of distinct other nodes adjacent to `v` in
/// the chosen direction. With [`Direction::Both`] the graph is treated as
/// undirected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborView {
    direction: Direction,
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl NeighborView {
    pub fn new(g: &BackgroundGraph, direction: Direction) -> Self {
        let mut offsets = Vec::with_capacity(g.node_count() + 1);
        let mut targets = Vec::new();
        let mut scratch = Vec::new();
        offsets.push(0);
        for v in g.nodes() {
            scratch.clear();
            if matches!(direction, Direction::Out | Direction::Both) {
                scratch.extend_from_slice(g.out_neighbors(v));
            }
            if matches!(direction, Direction::In | Direction::Both) {
                scratch.extend_from_slice(g.in_neighbors(v));
            }
            scratch.sort_unstable();
            scratch.dedup();
            targets.extend(scratch.iter().copied().filter(|&u| u != v));
            offsets.push(targets.len());
        }
        Self {
            direction,
            offsets,
            targets,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v.index()]..self.offsets[v.index() + 1]]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v.index() + 1] - self.offsets[v.index()]
    }

    /// Nodes that list `v` among their neighbors, i.e. the nodes whose
    /// sampling step can reach `v`.
    pub fn reverse(&self) -> NeighborView {
        let n = self.node_count();
        let mut lists = vec![Vec::new(); n];
        for u in 0..n {
            for &v in self.neighbors(NodeId::from(u)) {
                lists[v.index()].push(NodeId::from(u));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for l in lists {
            targets.extend(l);
            offsets.push(targets.len());
        }
        let direction = match self.direction {
            Direction::In => Direction::Out,
            Direction::Out => Direction::In,
            Direction::Both => Direction::Both,
        };
        NeighborView {
            direction,
            offsets,
            targets,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_parallel_edges_and_self_loops() {
        let g = BackgroundGraph::from_edges(3, &[(0, 1), (0, 1), (1, 1), (2, 1)]).unwrap();
        let both = NeighborView::new(&g, Direction::Both);
        assert_eq!(both.neighbors(NodeId(1)), &[NodeId(0), NodeId(2)]);
        assert_eq!(both.degree(NodeId(0)), 1);
        let out = NeighborView::new(&g, Direction::Out);
        assert_eq!(out.degree(NodeId(1)), 0);
        assert_eq!(out.reverse().neighbors(NodeId(1)), &[NodeId(0), NodeId(2)]);
    }
}
