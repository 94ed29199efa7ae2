//! Travel-direction clustering.
//!
//! Each drop-off spot is embedded as the unit vector of its bearing from the
//! workplace, `(cos θ, sin θ)`, and clustered with order-count-weighted
//! k-means. The silhouette-vs-K curve and per-direction angle box plots are
//! advisory: the planner picks K.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{angle_diff_deg, bearing_deg, normalize_deg, GeoPoint};
use crate::ingestion::DropOffSpot;
use crate::par::Exec;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalConfig {
    /// Independent k-means++ starts; the lowest objective wins.
    pub restarts: usize,
    pub max_iter: usize,
    /// Weight points by order count.
    pub weighted: bool,
}

impl Default for DirectionalConfig {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            weighted: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalClustering {
    pub k: usize,
    pub seed: u64,
    pub spot_ids: Vec<usize>,
    /// Direction of `spot_ids[i]`. Directions are numbered by ascending
    /// centroid bearing.
    pub assignment: Vec<usize>,
    /// Circular mean bearing of each direction, degrees in `[0, 360)`.
    pub centroids: Vec<f64>,
    pub weighted: bool,
    /// Weighted within-cluster sum of squares after every Lloyd update of
    /// the winning start.
    pub objective_trace: Vec<f64>,
}

impl DirectionalClustering {
    pub fn direction_of(&self, spot_id: usize) -> Option<usize> {
        self.spot_ids
            .iter()
            .position(|&s| s == spot_id)
            .map(|i| self.assignment[i])
    }

    /// Spot ids of one direction, in input order.
    pub fn members(&self, direction: usize) -> Vec<usize> {
        self.spot_ids
            .iter()
            .zip(&self.assignment)
            .filter(|(_, &d)| d == direction)
            .map(|(&s, _)| s)
            .collect()
    }

    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteCurve {
    pub points: Vec<(usize, f64)>,
    /// Highest-scoring k; the smallest k wins ties.
    pub argmax: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    pub direction_id: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
    pub order_total: u64,
}

fn embed(bearing_deg: f64) -> [f64; 2] {
    let t = bearing_deg.to_radians();
    [t.cos(), t.sin()]
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

fn nearest(p: [f64; 2], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, &center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Outcome of one weighted k-means run over bearing embeddings.
#[derive(Clone, Debug)]
pub struct KMeansRun {
    pub labels: Vec<usize>,
    pub centers: Vec<[f64; 2]>,
    pub objective_trace: Vec<f64>,
}

impl KMeansRun {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn kmeans_pp(points: &[[f64; 2]], weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let first = WeightedIndex::new(weights).map_or(0, |d| d.sample(rng));
    chosen.push(first);
    let mut d2: Vec<f64> = points.iter().map(|&p| sq_dist(p, points[first])).collect();
    while chosen.len() < k {
        let scores: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        let next = match WeightedIndex::new(&scores) {
            Ok(dist) => dist.sample(rng),
            // every remaining point coincides with a center
            Err(_) => (0..n).find(|i| !chosen.contains(i)).unwrap_or(0),
        };
        chosen.push(next);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i]).collect()
}

fn weighted_centers(points: &[[f64; 2]], weights: &[f64], labels: &[usize], k: usize) -> Vec<[f64; 2]> {
    let mut acc = vec![[0.0f64; 3]; k];
    for ((p, w), &l) in points.iter().zip(weights).zip(labels) {
        acc[l][0] += w * p[0];
        acc[l][1] += w * p[1];
        acc[l][2] += w;
    }
    acc.into_iter()
        .map(|[x, y, w]| if w > 0.0 { [x / w, y / w] } else { [0.0, 0.0] })
        .collect()
}

fn objective(points: &[[f64; 2]], weights: &[f64], labels: &[usize], centers: &[[f64; 2]]) -> f64 {
    points
        .iter()
        .zip(weights)
        .zip(labels)
        .map(|((&p, w), &l)| w * sq_dist(p, centers[l]))
        .sum()
}

/// Gives every empty cluster the point farthest from its current center,
/// taken from clusters that keep at least one member.
fn repair_empty(points: &[[f64; 2]], labels: &mut [usize], centers: &[[f64; 2]], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                sq_dist(points[a], centers[labels[a]])
                    .total_cmp(&sq_dist(points[b], centers[labels[b]]))
                    .then(b.cmp(&a))
            });
        match donor {
            Some(i) => labels[i] = empty,
            None => return,
        }
    }
}

fn lloyd(points: &[[f64; 2]], weights: &[f64], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> KMeansRun {
    let mut centers = kmeans_pp(points, weights, k, rng);
    let mut labels: Vec<usize> = points.iter().map(|&p| nearest(p, &centers).0).collect();
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        repair_empty(points, &mut labels, &centers, k);
        centers = weighted_centers(points, weights, &labels, k);
        trace.push(objective(points, weights, &labels, &centers));
        let next: Vec<usize> = points.iter().map(|&p| nearest(p, &centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    KMeansRun { labels, centers, objective_trace: trace }
}

/// Weighted k-means over bearings (degrees). Runs `cfg.restarts`
/// independent k-means++ starts derived from `seed` and keeps the lowest
/// final objective (earliest start on ties).
pub fn kmeans_bearings(
    bearings: &[f64],
    weights: &[f64],
    k: usize,
    seed: u64,
    cfg: &DirectionalConfig,
    exec: Exec,
) -> Result<KMeansRun> {
    if k < 1 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if k > bearings.len() {
        return Err(Error::TooFewSpots { k, spots: bearings.len() });
    }
    let points: Vec<[f64; 2]> = bearings.iter().map(|&b| embed(b)).collect();
    let runs = exec.map_range(0..cfg.restarts.max(1), |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        lloyd(&points, weights, k, cfg.max_iter, &mut rng)
    });
    Ok(runs
        .into_iter()
        .reduce(|best, run| if run.objective() < best.objective() { run } else { best })
        .expect("at least one restart"))
}

fn spot_inputs(spots: &[DropOffSpot], workplace: GeoPoint, weighted: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let bearings = spots
        .iter()
        .map(|s| bearing_deg(workplace, s.location))
        .collect::<Result<Vec<_>>>()?;
    let weights = spots
        .iter()
        .map(|s| if weighted { s.order_count as f64 } else { 1.0 })
        .collect();
    Ok((bearings, weights))
}

/// Circular mean of bearings in degrees, `[0, 360)`.
pub fn circular_mean(bearings: &[f64], weights: &[f64]) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for (&b, &w) in bearings.iter().zip(weights) {
        let [x, y] = embed(b);
        c += w * x;
        s += w * y;
    }
    normalize_deg(s.atan2(c).to_degrees())
}

/// Clusters bearings and numbers directions by ascending circular-mean
/// bearing.
pub fn cluster_bearings(
    spot_ids: Vec<usize>,
    bearings: &[f64],
    weights: &[f64],
    k: usize,
    seed: u64,
    cfg: &DirectionalConfig,
    exec: Exec,
) -> Result<DirectionalClustering> {
    let run = kmeans_bearings(bearings, weights, k, seed, cfg, exec)?;
    let means: Vec<f64> = (0..k)
        .map(|c| {
            let (b, w): (Vec<f64>, Vec<f64>) = run
                .labels
                .iter()
                .zip(bearings.iter().zip(weights))
                .filter(|(&l, _)| l == c)
                .map(|(_, (&b, &w))| (b, w))
                .unzip();
            circular_mean(&b, &w)
        })
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    Ok(DirectionalClustering {
        k,
        seed,
        spot_ids,
        assignment: run.labels.iter().map(|&l| relabel[l]).collect(),
        centroids: order.iter().map(|&old| means[old]).collect(),
        weighted: cfg.weighted,
        objective_trace: run.objective_trace,
    })
}

pub fn cluster_directions(
    spots: &[DropOffSpot],
    workplace: GeoPoint,
    k: usize,
    seed: u64,
) -> Result<DirectionalClustering> {
    cluster_directions_with(spots, workplace, k, seed, &DirectionalConfig::default(), Exec::default())
}

pub fn cluster_directions_with(
    spots: &[DropOffSpot],
    workplace: GeoPoint,
    k: usize,
    seed: u64,
    cfg: &DirectionalConfig,
    exec: Exec,
) -> Result<DirectionalClustering> {
    if k > spots.len() {
        return Err(Error::TooFewSpots { k, spots: spots.len() });
    }
    let (bearings, weights) = spot_inputs(spots, workplace, cfg.weighted)?;
    cluster_bearings(
        spots.iter().map(|s| s.spot_id).collect(),
        &bearings,
        &weights,
        k,
        seed,
        cfg,
        exec,
    )
}

/// Weighted silhouette over bearing embeddings. For point `i` in cluster
/// `A`, `a` is the weighted mean distance to the other members of `A` and
/// `b` the smallest weighted mean distance to another cluster; the point
/// scores `(b - a) / max(a, b)`, or 0 when alone in its cluster or when
/// `a = b = 0`. The result is the weighted mean score.
pub fn silhouette_bearings(bearings: &[f64], weights: &[f64], labels: &[usize], k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::SilhouetteUndefined);
    }
    let points: Vec<[f64; 2]> = bearings.iter().map(|&b| embed(b)).collect();
    let n = points.len();
    let mut total_w = 0.0;
    let mut acc = 0.0;
    let mut sum = vec![0.0f64; k];
    let mut wsum = vec![0.0f64; k];
    for i in 0..n {
        sum.iter_mut().for_each(|s| *s = 0.0);
        wsum.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = sq_dist(points[i], points[j]).sqrt();
            sum[labels[j]] += weights[j] * d;
            wsum[labels[j]] += weights[j];
        }
        let own = labels[i];
        let s = if wsum[own] == 0.0 {
            0.0
        } else {
            let a = sum[own] / wsum[own];
            let b = (0..k)
                .filter(|&c| c != own && wsum[c] > 0.0)
                .map(|c| sum[c] / wsum[c])
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                0.0
            } else {
                let m = a.max(b);
                if m == 0.0 {
                    0.0
                } else {
                    (b - a) / m
                }
            }
        };
        acc += weights[i] * s;
        total_w += weights[i];
    }
    Ok(if total_w > 0.0 { acc / total_w } else { 0.0 })
}

pub fn silhouette(clustering: &DirectionalClustering, spots: &[DropOffSpot], workplace: GeoPoint) -> Result<f64> {
    let (bearings, weights) = spot_inputs(spots, workplace, clustering.weighted)?;
    let labels = spots
        .iter()
        .map(|s| {
            clustering
                .direction_of(s.spot_id)
                .ok_or_else(|| Error::InvalidInput(format!("spot {} is not clustered", s.spot_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    silhouette_bearings(&bearings, &weights, &labels, clustering.k)
}

pub fn silhouette_curve(
    spots: &[DropOffSpot],
    workplace: GeoPoint,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<SilhouetteCurve> {
    silhouette_curve_with(spots, workplace, k_min, k_max, seed, &DirectionalConfig::default(), Exec::default())
}

pub fn silhouette_curve_with(
    spots: &[DropOffSpot],
    workplace: GeoPoint,
    k_min: usize,
    k_max: usize,
    seed: u64,
    cfg: &DirectionalConfig,
    exec: Exec,
) -> Result<SilhouetteCurve> {
    if k_min < 2 || k_min > k_max || k_max + 1 > spots.len() {
        return Err(Error::InvalidInput(format!(
            "k range [{k_min}, {k_max}] must satisfy 2 <= k_min <= k_max <= {}",
            spots.len().saturating_sub(1)
        )));
    }
    let (bearings, weights) = spot_inputs(spots, workplace, cfg.weighted)?;
    let values = exec.map_range(k_min..k_max + 1, |k| -> Result<(usize, f64)> {
        let run = kmeans_bearings(&bearings, &weights, k, seed, cfg, exec)?;
        Ok((k, silhouette_bearings(&bearings, &weights, &run.labels, k)?))
    });
    let points = values.into_iter().collect::<Result<Vec<_>>>()?;
    let argmax = points
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((k, v)),
        })
        .map(|(k, _)| k)
        .expect("non-empty range");
    Ok(SilhouetteCurve { points, argmax })
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-number summaries of member bearings per direction, unwrapped into
/// the ±180° frame around each direction's circular mean.
pub fn angle_stats(
    clustering: &DirectionalClustering,
    spots: &[DropOffSpot],
    workplace: GeoPoint,
) -> Result<Vec<AngleStats>> {
    let mut per_dir: Vec<(Vec<f64>, u64)> = vec![(Vec::new(), 0); clustering.k];
    for s in spots {
        let Some(d) = clustering.direction_of(s.spot_id) else {
            continue;
        };
        let center = clustering.centroids[d];
        let b = bearing_deg(workplace, s.location)?;
        per_dir[d].0.push(center + angle_diff_deg(center, b));
        per_dir[d].1 += s.order_count;
    }
    Ok(per_dir
        .into_iter()
        .enumerate()
        .filter(|(_, (v, _))| !v.is_empty())
        .map(|(direction_id, (mut v, order_total))| {
            v.sort_by(f64::total_cmp);
            AngleStats {
                direction_id,
                min: v[0],
                q1: quantile_sorted(&v, 0.25),
                median: quantile_sorted(&v, 0.5),
                q3: quantile_sorted(&v, 0.75),
                max: v[v.len() - 1],
                n: v.len(),
                order_total,
            }
        })
        .collect())
}
