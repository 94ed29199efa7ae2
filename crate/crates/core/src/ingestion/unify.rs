use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::TripRecord;
use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoPoint};

pub const DEFAULT_UNIFY_RADIUS_M: f64 = 150.0;

/// A unified destination aggregating near-duplicate trip destinations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropOffSpot {
    pub spot_id: usize,
    pub location: GeoPoint,
    pub name: String,
    pub order_count: u64,
}

#[derive(Clone, Debug)]
pub struct Unification {
    pub spots: Vec<DropOffSpot>,
    /// `record_spot[i]` is the spot of `records[i]`.
    pub record_spot: Vec<usize>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when two distinct sets were joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // keep the smaller index as root so component order is stable
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Calls `f(i, j)` for every pair of points within `radius_m`, using a grid
/// whose cells are at least `radius_m` wide so only neighbouring cells need
/// checking.
fn for_each_close_pair(points: &[GeoPoint], radius_m: f64, mut f: impl FnMut(usize, usize)) {
    let max_abs_lat = points.iter().map(|p| p.lat.abs()).fold(0.0, f64::max);
    let lat_cell = (radius_m / 111_000.0) * 1.01 + 1e-12;
    let lon_cell = lat_cell / max_abs_lat.min(89.0).to_radians().cos();
    let key = |p: &GeoPoint| {
        (
            (p.lat / lat_cell).floor() as i64,
            (p.lon / lon_cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    for (i, p) in points.iter().enumerate() {
        let (r, c) = key(p);
        for dr in -1..=1 {
            for dc in -1..=1 {
                if let Some(cell) = grid.get(&(r + dr, c + dc)) {
                    for &j in cell {
                        if j > i && haversine_m(*p, points[j]) <= radius_m {
                            f(i, j);
                        }
                    }
                }
            }
        }
    }
}

struct Component {
    members: Vec<usize>,
    centroid: GeoPoint,
}

fn components(ds: &mut DisjointSet, points: &[GeoPoint], weights: &[u64]) -> Vec<Component> {
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..points.len() {
        by_root.entry(ds.find(i)).or_default().push(i);
    }
    by_root
        .into_values()
        .map(|members| {
            let total: f64 = members.iter().map(|&i| weights[i] as f64).sum();
            let lat = members
                .iter()
                .map(|&i| points[i].lat * weights[i] as f64)
                .sum::<f64>()
                / total;
            let lon = members
                .iter()
                .map(|&i| points[i].lon * weights[i] as f64)
                .sum::<f64>()
                / total;
            Component {
                members,
                centroid: GeoPoint::new(lat, lon),
            }
        })
        .collect()
}

/// Merges trip destinations into drop-off spots by single linkage: two
/// destinations share a spot when a chain of hops, each at most `radius_m`,
/// connects them. Spots whose centroids still fall within `radius_m` of each
/// other are merged as well, so the output spots are pairwise farther apart
/// than the radius.
pub fn unify_locations(records: &[TripRecord], radius_m: f64) -> Result<Unification> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no trip records to unify".into()));
    }
    if !(radius_m >= 0.0) {
        return Err(Error::InvalidInput(format!("bad unification radius {radius_m}")));
    }

    // Distinct coordinates, in order of first appearance.
    let mut index_of: HashMap<(u64, u64), usize> = HashMap::new();
    let mut points: Vec<GeoPoint> = Vec::new();
    let mut weights: Vec<u64> = Vec::new();
    let mut record_point = Vec::with_capacity(records.len());
    for r in records {
        let k = (r.destination.lat.to_bits(), r.destination.lon.to_bits());
        let idx = *index_of.entry(k).or_insert_with(|| {
            points.push(r.destination);
            weights.push(0);
            points.len() - 1
        });
        weights[idx] += 1;
        record_point.push(idx);
    }

    let mut ds = DisjointSet::new(points.len());
    for_each_close_pair(&points, radius_m, |i, j| {
        ds.union(i, j);
    });

    let comps = loop {
        let comps = components(&mut ds, &points, &weights);
        let centroids: Vec<GeoPoint> = comps.iter().map(|c| c.centroid).collect();
        let mut merged = false;
        for_each_close_pair(&centroids, radius_m, |a, b| {
            merged |= ds.union(comps[a].members[0], comps[b].members[0]);
        });
        if !merged {
            break comps;
        }
    };

    // Spot ids follow the first record that lands in each component.
    let mut point_comp = vec![0usize; points.len()];
    for (ci, c) in comps.iter().enumerate() {
        for &m in &c.members {
            point_comp[m] = ci;
        }
    }
    let mut comp_spot: Vec<Option<usize>> = vec![None; comps.len()];
    let mut order: Vec<usize> = Vec::new();
    let record_spot: Vec<usize> = record_point
        .iter()
        .map(|&p| {
            let c = point_comp[p];
            *comp_spot[c].get_or_insert_with(|| {
                order.push(c);
                order.len() - 1
            })
        })
        .collect();

    let mut labels: Vec<BTreeMap<&str, u64>> = vec![BTreeMap::new(); order.len()];
    for (r, &s) in records.iter().zip(&record_spot) {
        *labels[s].entry(r.destination_raw.as_str()).or_default() += 1;
    }

    let spots = order
        .iter()
        .enumerate()
        .map(|(spot_id, &c)| {
            let comp = &comps[c];
            // BTreeMap iterates labels ascending, so max_by keeping the first
            // maximum picks the lexicographically smallest among ties.
            let name = labels[spot_id]
                .iter()
                .fold(None::<(&str, u64)>, |best, (&l, &n)| match best {
                    Some((_, bn)) if bn >= n => best,
                    _ => Some((l, n)),
                })
                .map(|(l, _)| l.to_string())
                .unwrap_or_default();
            DropOffSpot {
                spot_id,
                location: comp.centroid,
                name,
                order_count: comp.members.iter().map(|&m| weights[m]).sum(),
            }
        })
        .collect();

    Ok(Unification { spots, record_spot })
}
