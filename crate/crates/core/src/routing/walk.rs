use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::graph::{Csr, ShortestTree};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::ingestion::{DropOffSpot, RoadNetwork};
use crate::par::Exec;

pub const DEFAULT_WALK_SPEED_MPS: f64 = 1.2;
pub const DEFAULT_SNAP_TOLERANCE_M: f64 = 500.0;

/// The walking subgraph of a road network.
#[derive(Clone, Debug)]
pub struct WalkGraph {
    csr: Csr,
    walk_speed_mps: f64,
    snap_tolerance_m: f64,
    has_overrides: bool,
}

/// Pairwise walking distances and durations between spots. Unreachable
/// pairs hold `f64::INFINITY`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkMatrix {
    pub spot_ids: Vec<usize>,
    dist_m: Vec<f64>,
    dura_s: Vec<f64>,
    position: Vec<Option<usize>>,
    pub walk_speed_mps: f64,
    /// True when every duration is distance over a constant speed.
    pub constant_speed: bool,
}

impl WalkMatrix {
    /// Builds a matrix from explicit row-major distances, durations derived
    /// at constant speed. Mostly useful for fixtures.
    pub fn from_distances(spot_ids: Vec<usize>, dist_m: Vec<f64>, walk_speed_mps: f64) -> Result<Self> {
        let dura_s = dist_m.iter().map(|d| d / walk_speed_mps).collect();
        Self::from_parts(spot_ids, dist_m, dura_s, walk_speed_mps, true)
    }

    pub fn from_parts(
        spot_ids: Vec<usize>,
        dist_m: Vec<f64>,
        dura_s: Vec<f64>,
        walk_speed_mps: f64,
        constant_speed: bool,
    ) -> Result<Self> {
        let n = spot_ids.len();
        if dist_m.len() != n * n || dura_s.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "walk matrix for {n} spots needs {} entries",
                n * n
            )));
        }
        let max_id = spot_ids.iter().copied().max().map_or(0, |m| m + 1);
        let mut position = vec![None; max_id];
        for (i, &id) in spot_ids.iter().enumerate() {
            if position[id].replace(i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate spot id {id} in walk matrix")));
            }
        }
        Ok(Self {
            spot_ids,
            dist_m,
            dura_s,
            position,
            walk_speed_mps,
            constant_speed,
        })
    }

    pub fn len(&self) -> usize {
        self.spot_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spot_ids.is_empty()
    }

    pub fn contains(&self, spot_id: usize) -> bool {
        self.position.get(spot_id).copied().flatten().is_some()
    }

    fn pos(&self, spot_id: usize) -> usize {
        self.position
            .get(spot_id)
            .copied()
            .flatten()
            .unwrap_or_else(|| panic!("spot {spot_id} is not in the walk matrix"))
    }

    /// Walking distance in meters between two spot ids.
    ///
    /// Panics if either spot is not covered by the matrix.
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.dist_m[self.pos(a) * self.len() + self.pos(b)]
    }

    pub fn dura(&self, a: usize, b: usize) -> f64 {
        self.dura_s[self.pos(a) * self.len() + self.pos(b)]
    }
}

impl WalkGraph {
    pub fn new(network: &RoadNetwork, walk_speed_mps: f64) -> Result<Self> {
        if !(walk_speed_mps > 0.0) {
            return Err(Error::InvalidInput(format!("walk speed must be positive, got {walk_speed_mps}")));
        }
        let csr = Csr::build(
            network,
            |e| e.modes.walk,
            |e| e.walk_dura_s.unwrap_or(e.length_m / walk_speed_mps),
        );
        let has_overrides = network.edges.iter().any(|e| e.modes.walk && e.walk_dura_s.is_some());
        Ok(Self {
            csr,
            walk_speed_mps,
            snap_tolerance_m: DEFAULT_SNAP_TOLERANCE_M,
            has_overrides,
        })
    }

    pub fn with_snap_tolerance(mut self, meters: f64) -> Self {
        self.snap_tolerance_m = meters;
        self
    }

    pub fn walk_speed_mps(&self) -> f64 {
        self.walk_speed_mps
    }

    pub fn node_point(&self, node: usize) -> GeoPoint {
        self.csr.points[node]
    }

    /// Nearest walkable node within the snap tolerance.
    pub fn snap(&self, p: GeoPoint) -> Option<(usize, f64)> {
        self.csr.snap(p).filter(|&(_, d)| d <= self.snap_tolerance_m)
    }

    fn snap_spot(&self, spot: &DropOffSpot) -> Result<(usize, f64)> {
        self.snap(spot.location).ok_or_else(|| Error::SpotNotSnappable {
            spot_id: spot.spot_id,
            name: spot.name.clone(),
            tolerance_m: self.snap_tolerance_m,
        })
    }

    pub fn tree_from(&self, node: usize) -> ShortestTree {
        self.csr.dijkstra(node)
    }

    /// One label-setting run per spot over the walking subgraph. `progress`
    /// is called with `(finished, total)` after each run.
    pub fn matrix(
        &self,
        spots: &[DropOffSpot],
        exec: Exec,
        progress: Option<&(dyn Fn(usize, usize) + Sync)>,
    ) -> Result<WalkMatrix> {
        let snaps = spots
            .iter()
            .map(|s| self.snap_spot(s))
            .collect::<Result<Vec<_>>>()?;
        let n = spots.len();
        let finished = AtomicUsize::new(0);
        let rows: Vec<(Vec<f64>, Vec<f64>)> = exec.map_range(0..n, |i| {
            let (src, off_i) = snaps[i];
            let tree = self.csr.dijkstra(src);
            let mut dist = Vec::with_capacity(n);
            let mut dura = Vec::with_capacity(n);
            for (j, &(dst, off_j)) in snaps.iter().enumerate() {
                if i == j {
                    dist.push(0.0);
                    dura.push(0.0);
                } else if tree.dist[dst].is_finite() {
                    let d = off_i + tree.dist[dst] + off_j;
                    dist.push(d);
                    if self.has_overrides {
                        dura.push(tree.time[dst] + (off_i + off_j) / self.walk_speed_mps);
                    } else {
                        dura.push(d / self.walk_speed_mps);
                    }
                } else {
                    dist.push(f64::INFINITY);
                    dura.push(f64::INFINITY);
                }
            }
            let done = finished.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(cb) = progress {
                cb(done, n);
            }
            (dist, dura)
        });
        let (dist_m, dura_s): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        WalkMatrix::from_parts(
            spots.iter().map(|s| s.spot_id).collect(),
            dist_m.concat(),
            dura_s.concat(),
            self.walk_speed_mps,
            !self.has_overrides,
        )
    }

    /// Walking distance and duration from an arbitrary point to each target
    /// point. Targets that do not snap are unreachable.
    pub fn from_point(&self, origin: GeoPoint, targets: &[GeoPoint]) -> Vec<(f64, f64)> {
        let Some((src, off)) = self.snap(origin) else {
            return vec![(f64::INFINITY, f64::INFINITY); targets.len()];
        };
        let tree = self.csr.dijkstra(src);
        targets
            .iter()
            .map(|&t| match self.snap(t) {
                Some((dst, off_t)) if tree.dist[dst].is_finite() => {
                    if origin == t {
                        return (0.0, 0.0);
                    }
                    let d = off + tree.dist[dst] + off_t;
                    (d, tree.time[dst] + (off + off_t) / self.walk_speed_mps)
                }
                _ => (f64::INFINITY, f64::INFINITY),
            })
            .collect()
    }

    /// Walking polyline between two points through their snapped nodes.
    pub fn path(&self, from: GeoPoint, to: GeoPoint) -> Option<Vec<GeoPoint>> {
        let (a, _) = self.snap(from)?;
        let (b, _) = self.snap(to)?;
        let nodes = self.csr.dijkstra(a).path_to(b)?;
        let mut out = Vec::with_capacity(nodes.len() + 2);
        out.push(from);
        out.extend(nodes.into_iter().map(|n| self.csr.points[n]));
        out.push(to);
        Some(out)
    }
}

/// Convenience wrapper: builds the walking graph and the full spot matrix.
pub fn walk_shortest(network: &RoadNetwork, spots: &[DropOffSpot], walk_speed_mps: f64) -> Result<WalkMatrix> {
    WalkGraph::new(network, walk_speed_mps)?.matrix(spots, Exec::default(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::destination;
    use crate::ingestion::Modes;

    fn spot(id: usize, p: GeoPoint) -> DropOffSpot {
        DropOffSpot { spot_id: id, location: p, name: format!("S{id}"), order_count: 1 }
    }

    /// A(1) -300m- B(2) -400m- C(3) heading east, plus an isolated node D(4).
    fn line() -> (RoadNetwork, [GeoPoint; 4]) {
        let a = GeoPoint::new(22.5, 113.9);
        let b = destination(a, 90.0, 300.0);
        let c = destination(b, 90.0, 400.0);
        let d = destination(a, 0.0, 300.0);
        let mut net = RoadNetwork::new();
        for (i, p) in [a, b, c, d].iter().enumerate() {
            net.add_node(i as u64 + 1, *p).unwrap();
        }
        for (x, y, len) in [(1, 2, 300.0), (2, 3, 400.0)] {
            net.add_edge(x, y, len, Modes::BOTH, None).unwrap();
            net.add_edge(y, x, len, Modes::BOTH, None).unwrap();
        }
        // D only has a drive edge, so it is not walkable
        net.add_edge(4, 1, 300.0, Modes::DRIVE, None).unwrap();
        (net, [a, b, c, d])
    }

    #[test]
    fn line_graph_distances() {
        let (net, [a, b, c, _]) = line();
        let spots = vec![spot(0, a), spot(1, b), spot(2, c)];
        let m = walk_shortest(&net, &spots, 1.2).unwrap();
        assert!((m.dist(0, 2) - 700.0).abs() < 1e-9);
        assert!((m.dist(2, 0) - 700.0).abs() < 1e-9);
        assert!((m.dura(0, 2) - 700.0 / 1.2).abs() < 1e-9);
        assert_eq!(m.dist(1, 1), 0.0);
        assert!(m.constant_speed);
    }

    #[test]
    fn spots_on_same_node_are_zero_apart() {
        let (net, [a, ..]) = line();
        let m = walk_shortest(&net, &[spot(0, a), spot(1, a)], 1.2).unwrap();
        assert_eq!(m.dist(0, 1), 0.0);
    }

    #[test]
    fn disconnected_pair_is_infinite() {
        let (mut net, [a, ..]) = line();
        let far = destination(a, 180.0, 2000.0);
        let far2 = destination(far, 90.0, 100.0);
        net.add_node(10, far).unwrap();
        net.add_node(11, far2).unwrap();
        net.add_edge(10, 11, 100.0, Modes::WALK, None).unwrap();
        let m = walk_shortest(&net, &[spot(0, a), spot(1, far)], 1.2).unwrap();
        assert!(m.dist(0, 1).is_infinite());
        assert!(m.dura(1, 0).is_infinite());
    }

    #[test]
    fn unsnappable_spot_is_named() {
        let (net, [a, ..]) = line();
        let lost = destination(a, 180.0, 5_000.0);
        let err = walk_shortest(&net, &[spot(0, a), spot(7, lost)], 1.2).unwrap_err();
        match err {
            Error::SpotNotSnappable { spot_id, name, .. } => {
                assert_eq!(spot_id, 7);
                assert_eq!(name, "S7");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn walk_duration_override_changes_duration_not_distance() {
        let (mut net, [a, b, c, _]) = line();
        // a slow footbridge on B->C
        net.edges.retain(|e| !(e.from == 1 && e.to == 2));
        net.add_edge(2, 3, 400.0, Modes::WALK, Some(900.0)).unwrap();
        let m = walk_shortest(&net, &[spot(0, a), spot(1, b), spot(2, c)], 1.2).unwrap();
        assert!(!m.constant_speed);
        assert!((m.dist(0, 2) - 700.0).abs() < 1e-9);
        assert!((m.dura(0, 2) - (300.0 / 1.2 + 900.0)).abs() < 1e-9);
        assert!((m.dura(2, 0) - 700.0 / 1.2).abs() < 1e-9);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let (net, [a, b, c, _]) = line();
        let g = WalkGraph::new(&net, 1.2).unwrap();
        let spots = vec![spot(0, a), spot(1, b), spot(2, c)];
        let s = g.matrix(&spots, Exec::Sequential, None).unwrap();
        let p = g.matrix(&spots, Exec::Parallel, None).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.dist(i, j).to_bits(), p.dist(i, j).to_bits());
            }
        }
    }

    #[test]
    fn path_follows_the_line() {
        let (net, [a, _, c, _]) = line();
        let g = WalkGraph::new(&net, 1.2).unwrap();
        let path = g.path(a, c).unwrap();
        assert_eq!(path.len(), 5);
        let d = g.from_point(a, &[c, a]);
        assert!((d[0].0 - 700.0).abs() < 1e-9);
        assert_eq!(d[1].0, 0.0);
    }
}
