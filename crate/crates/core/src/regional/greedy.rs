use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::routing::WalkMatrix;

pub const DEFAULT_THRESHOLD_M: f64 = 1_000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionalCluster {
    pub direction_id: usize,
    /// Dense within a direction, in creation order.
    pub region_id: usize,
    /// Seed first, then members in the order the scan admitted them.
    pub member_spot_ids: Vec<usize>,
    pub order_total: u64,
    pub seed_spot_id: usize,
}

impl RegionalCluster {
    pub fn contains(&self, spot_id: usize) -> bool {
        self.member_spot_ids.contains(&spot_id)
    }
}

fn fits(walk: &WalkMatrix, members: &[usize], candidate: usize, threshold_m: f64) -> bool {
    members
        .iter()
        .all(|&m| walk.dist(m, candidate) <= threshold_m && walk.dist(candidate, m) <= threshold_m)
}

/// Nearest-first clique grown from `seed` over `remaining` (positions into
/// `ids`).
fn seed_set(ids: &[usize], remaining: &[usize], seed: usize, walk: &WalkMatrix, threshold_m: f64) -> Vec<usize> {
    let seed_id = ids[seed];
    let mut order: Vec<usize> = remaining.iter().copied().filter(|&p| p != seed).collect();
    order.sort_by(|&a, &b| {
        walk.dist(seed_id, ids[a])
            .total_cmp(&walk.dist(seed_id, ids[b]))
            .then(ids[a].cmp(&ids[b]))
    });
    let mut members = vec![seed_id];
    for p in order {
        if fits(walk, &members, ids[p], threshold_m) {
            members.push(ids[p]);
        }
    }
    members
}

pub fn greedy_regions(
    direction_id: usize,
    spot_ids: &[usize],
    weights: &[u64],
    walk: &WalkMatrix,
    threshold_m: f64,
) -> Result<Vec<RegionalCluster>> {
    greedy_regions_with(direction_id, spot_ids, weights, walk, threshold_m, Exec::default())
}

/// Partitions one direction's spots into regions whose members are pairwise
/// within `threshold_m` walking distance.
///
/// Every remaining spot seeds a candidate set: starting from the seed, the
/// other remaining spots are scanned by ascending walking distance from it
/// (ties by spot id) and admitted when within the threshold of every member
/// so far. The largest candidate becomes the next region, ties going to the
/// larger order total and then the smaller seed id. Its members are removed
/// and the process repeats until no spot is left.
pub fn greedy_regions_with(
    direction_id: usize,
    spot_ids: &[usize],
    weights: &[u64],
    walk: &WalkMatrix,
    threshold_m: f64,
    exec: Exec,
) -> Result<Vec<RegionalCluster>> {
    if spot_ids.is_empty() {
        return Err(Error::InvalidInput("no spots to partition".into()));
    }
    if weights.len() != spot_ids.len() {
        return Err(Error::InvalidInput("one weight per spot is required".into()));
    }
    if let Some(&missing) = spot_ids.iter().find(|&&s| !walk.contains(s)) {
        return Err(Error::InvalidInput(format!("spot {missing} is not in the walk matrix")));
    }
    let weight_of = |id: usize| weights[spot_ids.iter().position(|&s| s == id).expect("known id")];

    let mut remaining: Vec<usize> = (0..spot_ids.len()).collect();
    let mut regions = Vec::new();
    while !remaining.is_empty() {
        let sets = exec.map(&remaining, |&seed| {
            let members = seed_set(spot_ids, &remaining, seed, walk, threshold_m);
            let total: u64 = members.iter().map(|&m| weight_of(m)).sum();
            (members, total, spot_ids[seed])
        });
        let (members, order_total, seed_spot_id) = sets
            .into_iter()
            .reduce(|best, cand| {
                let better = cand.0.len() > best.0.len()
                    || (cand.0.len() == best.0.len()
                        && (cand.1 > best.1 || (cand.1 == best.1 && cand.2 < best.2)));
                if better {
                    cand
                } else {
                    best
                }
            })
            .expect("remaining is non-empty");
        remaining.retain(|&p| !members.contains(&spot_ids[p]));
        regions.push(RegionalCluster {
            direction_id,
            region_id: regions.len(),
            member_spot_ids: members,
            order_total,
            seed_spot_id,
        });
    }
    Ok(regions)
}
