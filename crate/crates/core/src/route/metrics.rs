use chrono::{NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{timetable, PlanContext, ShuttleRoute};
use crate::directional::DirectionalClustering;
use crate::error::{Error, Result};
use crate::ingestion::TripRecord;
use crate::regional::RegionalCluster;
use crate::stops::{stop_metrics, StopMetricsConfig};

pub const DEFAULT_WINDOW_MIN: u32 = 10;
pub const DEFAULT_BIN_MIN: u32 = 5;
const DAY_S: i64 = 86_400;

/// The six radar axes of a route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteMetrics {
    /// Leg durations plus dwell at every stop but the last.
    pub driving_dura: f64,
    /// Ends at the last stop.
    pub driving_dist: f64,
    pub walk_reach800: f64,
    pub walk_avg_dura: f64,
    pub walk_avg_dist: f64,
    pub nums: u64,
}

/// Trips whose destination spot falls in `direction_id`.
pub fn direction_trips<'a>(
    records: &'a [TripRecord],
    record_spot: &[usize],
    clustering: &DirectionalClustering,
    direction_id: usize,
) -> Vec<&'a TripRecord> {
    records
        .iter()
        .zip(record_spot)
        .filter(|(_, &s)| clustering.direction_of(s) == Some(direction_id))
        .map(|(r, _)| r)
        .collect()
}

fn seconds_of_day(t: NaiveDateTime) -> i64 {
    t.time().num_seconds_from_midnight() as i64
}

/// Whether `a` and `b` are within `window_s` of each other as times of day.
pub(crate) fn within_window(a: NaiveDateTime, b: NaiveDateTime, window_s: i64) -> bool {
    let d = (seconds_of_day(a) - seconds_of_day(b)).rem_euclid(DAY_S);
    d.min(DAY_S - d) <= window_s
}

/// Number of `trips` leaving within `window_min` minutes of `departure`,
/// compared as times of day so that multi-day records pool together.
pub fn count_near(trips: &[&TripRecord], departure: NaiveDateTime, window_min: u32) -> u64 {
    let w = window_min as i64 * 60;
    trips.iter().filter(|t| within_window(t.departure_time, departure, w)).count() as u64
}

/// Radar metrics of `route`. Walking axes weight each region's chosen-stop
/// metrics by the region's order total. `trips` are the direction's records.
pub fn route_metrics(
    route: &ShuttleRoute,
    regions: &[RegionalCluster],
    trips: &[&TripRecord],
    ctx: &PlanContext<'_>,
    window_min: u32,
) -> Result<RouteMetrics> {
    let tt = timetable(route);
    let cfg = StopMetricsConfig::default();
    let mut w_total = 0.0;
    let (mut reach, mut dura, mut dist) = (0.0, 0.0, 0.0);
    for stop in &route.stops {
        let region = regions
            .iter()
            .find(|r| r.direction_id == route.direction_id && r.region_id == stop.region_id)
            .ok_or_else(|| Error::InvalidInput(format!("route stop in unknown region {}", stop.region_id)))?;
        let m = stop_metrics(stop.spot_id, region, ctx.spots, ctx.walk, &cfg)?;
        let w = region.order_total as f64;
        w_total += w;
        reach += w * m.reach_at(800).expect("default buckets include 800");
        dura += w * m.avg_dura;
        dist += m.dist_cost;
    }
    let (walk_reach800, walk_avg_dura, walk_avg_dist) = if w_total > 0.0 {
        (reach / w_total, dura / w_total, dist / w_total)
    } else {
        (1.0, 0.0, 0.0)
    };
    Ok(RouteMetrics {
        driving_dura: tt.total_duration_s(),
        driving_dist: tt.total_distance_m(),
        walk_reach800,
        walk_avg_dura,
        walk_avg_dist,
        nums: count_near(trips, route.departure_time, window_min),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start: NaiveTime,
    pub count: u64,
}

/// Departures counted in `bin_min`-minute bins of the day, aligned to
/// midnight. Bins run over the observed range, empty ones included; a
/// range that crosses midnight starts after the longest empty stretch.
pub fn departure_histogram(trips: &[&TripRecord], bin_min: u32) -> Result<Vec<HistogramBin>> {
    if bin_min == 0 {
        return Err(Error::InvalidInput("histogram bin must be at least one minute".into()));
    }
    let bin_s = bin_min as i64 * 60;
    let nbins = ((DAY_S + bin_s - 1) / bin_s) as usize;
    let mut counts = vec![0u64; nbins];
    for t in trips {
        counts[(seconds_of_day(t.departure_time) / bin_s) as usize] += 1;
    }
    let occupied: Vec<usize> = (0..nbins).filter(|&i| counts[i] > 0).collect();
    let Some(&first) = occupied.first() else {
        return Ok(Vec::new());
    };
    // the largest circular gap between occupied bins decides where to cut
    let mut start = first;
    let mut best_gap = first + nbins - occupied[occupied.len() - 1];
    for w in occupied.windows(2) {
        if w[1] - w[0] > best_gap {
            best_gap = w[1] - w[0];
            start = w[1];
        }
    }
    let len = nbins - best_gap + 1;
    Ok((0..len)
        .map(|i| {
            let b = (start + i) % nbins;
            let secs = (b as i64 * bin_s) as u32;
            HistogramBin {
                start: NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("within a day"),
                count: counts[b],
            }
        })
        .collect())
}
