use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geo::{haversine_m, GeoPoint};
use crate::ingestion::{RoadEdge, RoadNetwork};

/// Compressed adjacency over the subset of edges admitted by a mode filter.
/// Each edge carries a length and a traversal time.
#[derive(Clone, Debug)]
pub(crate) struct Csr {
    pub points: Vec<GeoPoint>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    length: Vec<f64>,
    time: Vec<f64>,
    /// Nodes touched by at least one admitted edge.
    pub active: Vec<usize>,
}

/// Single-source result: distance-shortest paths, with the traversal time
/// accumulated along the same paths.
#[derive(Clone, Debug)]
pub struct ShortestTree {
    pub dist: Vec<f64>,
    pub time: Vec<f64>,
    pred: Vec<usize>,
}

const NO_PRED: usize = usize::MAX;

impl ShortestTree {
    /// Node sequence from the source to `target`, or `None` if unreachable.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        if !self.dist[target].is_finite() {
            return None;
        }
        let mut out = vec![target];
        let mut cur = target;
        while self.pred[cur] != NO_PRED {
            cur = self.pred[cur];
            out.push(cur);
        }
        out.reverse();
        Some(out)
    }
}

#[derive(PartialEq)]
struct Label {
    dist: f64,
    node: usize,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node id for determinism
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Csr {
    pub fn build(
        net: &RoadNetwork,
        admit: impl Fn(&RoadEdge) -> bool,
        time_of: impl Fn(&RoadEdge) -> f64,
    ) -> Self {
        let n = net.nodes.len();
        let mut degree = vec![0usize; n + 1];
        let mut touched = vec![false; n];
        for e in net.edges.iter().filter(|e| admit(e)) {
            degree[e.from + 1] += 1;
            touched[e.from] = true;
            touched[e.to] = true;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let m = offsets[n];
        let mut fill = offsets.clone();
        let mut targets = vec![0; m];
        let mut length = vec![0.0; m];
        let mut time = vec![0.0; m];
        for e in net.edges.iter().filter(|e| admit(e)) {
            let slot = fill[e.from];
            fill[e.from] += 1;
            targets[slot] = e.to;
            length[slot] = e.length_m;
            time[slot] = time_of(e);
        }
        Csr {
            points: net.nodes.iter().map(|(_, p)| *p).collect(),
            offsets,
            targets,
            length,
            time,
            active: (0..n).filter(|&i| touched[i]).collect(),
        }
    }

    /// Nearest admitted node to `p` and its great-circle offset.
    pub fn snap(&self, p: GeoPoint) -> Option<(usize, f64)> {
        self.active
            .iter()
            .map(|&i| (i, haversine_m(p, self.points[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    pub fn dijkstra(&self, source: usize) -> ShortestTree {
        let n = self.points.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut time = vec![f64::INFINITY; n];
        let mut pred = vec![NO_PRED; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        time[source] = 0.0;
        heap.push(Label { dist: 0.0, node: source });
        while let Some(Label { dist: d, node: u }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for k in self.offsets[u]..self.offsets[u + 1] {
                let v = self.targets[k];
                let nd = d + self.length[k];
                if nd < dist[v] {
                    dist[v] = nd;
                    time[v] = time[u] + self.time[k];
                    pred[v] = u;
                    heap.push(Label { dist: nd, node: v });
                }
            }
        }
        ShortestTree { dist, time, pred }
    }
}
