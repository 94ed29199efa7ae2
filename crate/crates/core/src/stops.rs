//! Per-stop walking metrics inside a regional cluster.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::DropOffSpot;
use crate::regional::RegionalCluster;
use crate::routing::WalkMatrix;

pub const DEFAULT_BUCKETS_M: [u32; 5] = [200, 400, 600, 800, 1000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopMetricsConfig {
    pub buckets_m: Vec<u32>,
    /// Count the candidate's own orders (at distance 0) in every mean.
    pub include_self: bool,
}

impl Default for StopMetricsConfig {
    fn default() -> Self {
        Self { buckets_m: DEFAULT_BUCKETS_M.to_vec(), include_self: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopMetrics {
    pub spot_id: usize,
    pub order_count: u64,
    pub avg_dist: f64,
    pub avg_dura: f64,
    pub reach: BTreeMap<u32, f64>,
    pub dist_cost: f64,
    /// Σw the means were taken over.
    pub weight_total: u64,
}

impl StopMetrics {
    pub fn reach_at(&self, bucket_m: u32) -> Option<f64> {
        self.reach.get(&bucket_m).copied()
    }

    pub fn value(&self, key: MetricKey) -> Option<f64> {
        match key {
            MetricKey::AvgDist => Some(self.avg_dist),
            MetricKey::AvgDura => Some(self.avg_dura),
            MetricKey::DistCost => Some(self.dist_cost),
            MetricKey::Reach(b) => self.reach_at(b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKey {
    AvgDist,
    AvgDura,
    DistCost,
    Reach(u32),
}

impl MetricKey {
    /// Lower is better.
    pub fn is_cost(&self) -> bool {
        !matches!(self, MetricKey::Reach(_))
    }
}

impl FromStr for MetricKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg_dist" => Ok(MetricKey::AvgDist),
            "avg_dura" => Ok(MetricKey::AvgDura),
            "dist_cost" => Ok(MetricKey::DistCost),
            _ => s
                .strip_prefix("reach")
                .map(|b| b.strip_prefix('_').unwrap_or(b))
                .and_then(|b| b.parse::<u32>().ok())
                .map(MetricKey::Reach)
                .ok_or_else(|| Error::UnknownMetric(s.to_string())),
        }
    }
}

impl fmt::Display for MetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKey::AvgDist => f.write_str("avg_dist"),
            MetricKey::AvgDura => f.write_str("avg_dura"),
            MetricKey::DistCost => f.write_str("dist_cost"),
            MetricKey::Reach(b) => write!(f, "reach{b}"),
        }
    }
}

impl Serialize for MetricKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MetricKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn order_count(spots: &[DropOffSpot], spot_id: usize) -> Result<u64> {
    spots
        .get(spot_id)
        .filter(|s| s.spot_id == spot_id)
        .map(|s| s.order_count)
        .ok_or_else(|| Error::InvalidInput(format!("unknown spot id {spot_id}")))
}

/// Walking metrics of `candidate` as the stop for `region`. `spots` is the
/// full spot table indexed by spot id.
///
/// Members are accumulated in ascending spot-id order so results do not
/// depend on member order. `dist_cost` is stored as `avg_dist * Σw`, which
/// keeps that identity exact in floating point; it agrees with the direct
/// sum Σ w·dist to rounding.
pub fn stop_metrics(
    candidate: usize,
    region: &RegionalCluster,
    spots: &[DropOffSpot],
    walk: &WalkMatrix,
    cfg: &StopMetricsConfig,
) -> Result<StopMetrics> {
    if !region.contains(candidate) {
        return Err(Error::SpotNotInRegion {
            spot_id: candidate,
            region_id: region.region_id,
        });
    }
    let mut members = region.member_spot_ids.clone();
    members.sort_unstable();

    let mut weight_total = 0u64;
    let mut dist_sum = 0.0;
    let mut dura_sum = 0.0;
    let mut within: Vec<u64> = vec![0; cfg.buckets_m.len()];
    for &m in &members {
        if m == candidate && !cfg.include_self {
            continue;
        }
        let w = order_count(spots, m)?;
        let (d, t) = if m == candidate { (0.0, 0.0) } else { (walk.dist(candidate, m), walk.dura(candidate, m)) };
        weight_total += w;
        dist_sum += w as f64 * d;
        dura_sum += w as f64 * t;
        for (slot, &b) in within.iter_mut().zip(&cfg.buckets_m) {
            if d <= b as f64 {
                *slot += w;
            }
        }
    }

    let (avg_dist, avg_dura, reach) = if weight_total == 0 {
        (0.0, 0.0, cfg.buckets_m.iter().map(|&b| (b, 1.0)).collect())
    } else {
        let wt = weight_total as f64;
        (
            dist_sum / wt,
            dura_sum / wt,
            cfg.buckets_m
                .iter()
                .zip(&within)
                .map(|(&b, &n)| (b, n as f64 / wt))
                .collect(),
        )
    };
    Ok(StopMetrics {
        spot_id: candidate,
        order_count: order_count(spots, candidate)?,
        avg_dist,
        avg_dura,
        reach,
        dist_cost: avg_dist * weight_total as f64,
        weight_total,
    })
}

/// Metrics for every member of `region`, in ascending spot-id order.
pub fn region_metrics(
    region: &RegionalCluster,
    spots: &[DropOffSpot],
    walk: &WalkMatrix,
    cfg: &StopMetricsConfig,
) -> Result<Vec<StopMetrics>> {
    let mut members = region.member_spot_ids.clone();
    members.sort_unstable();
    members
        .into_iter()
        .map(|m| stop_metrics(m, region, spots, walk, cfg))
        .collect()
}

/// Ties on the metric go to the stop with more orders, then the smaller id.
fn tie_break(a: &StopMetrics, b: &StopMetrics) -> Ordering {
    b.order_count.cmp(&a.order_count).then(a.spot_id.cmp(&b.spot_id))
}

/// The member with the smallest `avg_dist`.
pub fn recommend_stop(region: &RegionalCluster, spots: &[DropOffSpot], walk: &WalkMatrix) -> Result<usize> {
    if region.member_spot_ids.is_empty() {
        return Err(Error::InvalidInput(format!("region {} is empty", region.region_id)));
    }
    let ranked = rank_stops(region, spots, walk, &StopMetricsConfig::default(), MetricKey::AvgDist)?;
    Ok(ranked[0].spot_id)
}

/// Members ordered best first: ascending for cost metrics, descending for
/// reach buckets. Unreachable stops (infinite cost) sort last.
pub fn rank_stops(
    region: &RegionalCluster,
    spots: &[DropOffSpot],
    walk: &WalkMatrix,
    cfg: &StopMetricsConfig,
    key: MetricKey,
) -> Result<Vec<StopMetrics>> {
    if let MetricKey::Reach(b) = key {
        if !cfg.buckets_m.contains(&b) {
            return Err(Error::UnknownMetric(key.to_string()));
        }
    }
    let mut all = region_metrics(region, spots, walk, cfg)?;
    all.sort_by(|a, b| {
        let (x, y) = (a.value(key).unwrap(), b.value(key).unwrap());
        let primary = if key.is_cost() { x.total_cmp(&y) } else { y.total_cmp(&x) };
        primary.then_with(|| tie_break(a, b))
    });
    Ok(all)
}
