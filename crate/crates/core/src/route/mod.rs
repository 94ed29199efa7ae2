//! Routes: stringing one stop per region, timetables, radar metrics,
//! criteria checks and comparisons.

mod compare;
mod criteria;
mod diff;
mod metrics;

pub use compare::{compare_routes, Candidate, CandidateList, RadarAxis, RadarEntry, RadarPayload, MAX_CANDIDATES};
pub use criteria::{check_criteria, CriteriaWarning, WarningKind, REGRESSION_TOLERANCE_M, ZIGZAG_LIMIT_DEG};
pub use diff::{diff_routes, reference_route, DiffReport, OverlayStop, ReferenceRoute, RouteOverlay, SpotDelta, REFERENCE_SNAP_M};
pub use metrics::{
    count_near, departure_histogram, direction_trips, route_metrics, HistogramBin, RouteMetrics, DEFAULT_BIN_MIN, DEFAULT_WINDOW_MIN,
};

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoPoint};
use crate::ingestion::{DropOffSpot, WORKPLACE_REF};
use crate::regional::RegionalCluster;
use crate::routing::{DriveLeg, LegResolver, WalkMatrix, Waypoint};
use crate::stops::recommend_stop;

pub const DEFAULT_DWELL_S: f64 = 30.0;

/// Everything a route needs besides its own choices.
#[derive(Clone, Copy, Debug)]
pub struct PlanContext<'a> {
    /// Indexed by spot id.
    pub spots: &'a [DropOffSpot],
    pub walk: &'a WalkMatrix,
    pub workplace: GeoPoint,
    pub legs: LegResolver<'a>,
    pub dwell_s: f64,
}

impl PlanContext<'_> {
    fn spot(&self, spot_id: usize) -> Result<&DropOffSpot> {
        self.spots
            .get(spot_id)
            .filter(|s| s.spot_id == spot_id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown spot id {spot_id}")))
    }

    fn workplace_waypoint(&self) -> Waypoint {
        Waypoint::new(WORKPLACE_REF, self.workplace)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteStop {
    pub region_id: usize,
    pub spot_id: usize,
    pub name: String,
    pub location: GeoPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuttleRoute {
    pub direction_id: usize,
    pub departure_time: NaiveDateTime,
    pub dwell_s: f64,
    pub stops: Vec<RouteStop>,
    /// `legs[0]` leaves the workplace; `legs[i]` ends at `stops[i]`.
    pub legs: Vec<DriveLeg>,
}

impl ShuttleRoute {
    /// Workplace followed by every stop.
    pub fn waypoints(&self, workplace: GeoPoint) -> Vec<GeoPoint> {
        std::iter::once(workplace).chain(self.stops.iter().map(|s| s.location)).collect()
    }

    /// Concatenated leg polylines, falling back to the stop chord when a
    /// leg has none.
    pub fn polyline(&self) -> Vec<GeoPoint> {
        let mut out: Vec<GeoPoint> = Vec::new();
        for leg in &self.legs {
            let part = if leg.polyline.len() >= 2 {
                leg.polyline.clone()
            } else {
                vec![leg.from.point, leg.to.point]
            };
            for p in part {
                if out.last() != Some(&p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

pub(crate) fn add_seconds(t: NaiveDateTime, s: f64) -> NaiveDateTime {
    t + Duration::nanoseconds((s * 1e9).round() as i64)
}

/// Driving legs through `stops` in the given order. Each leg leaves when
/// the previous one arrived plus the dwell time.
pub(crate) fn chain_legs(
    ctx: &PlanContext<'_>,
    stops: &[Waypoint],
    departure: NaiveDateTime,
) -> Result<Vec<DriveLeg>> {
    let mut legs = Vec::with_capacity(stops.len());
    let mut from = ctx.workplace_waypoint();
    let mut offset = 0.0;
    for (i, to) in stops.iter().enumerate() {
        if i > 0 {
            offset += ctx.dwell_s;
        }
        let leg = ctx.legs.resolve(&from, to, add_seconds(departure, offset))?;
        offset += leg.duration_s;
        legs.push(leg);
        from = to.clone();
    }
    Ok(legs)
}

/// Builds the route of one direction: the override stop of each region if
/// any, otherwise its recommended stop, ordered by distance from the
/// workplace.
///
/// The ordering uses the driving distance at `departure` when every
/// workplace leg has a profile, else great-circle distance for all stops.
/// Ties go to the smaller region id.
pub fn string_route(
    direction_id: usize,
    regions: &[RegionalCluster],
    overrides: &BTreeMap<usize, usize>,
    departure: NaiveDateTime,
    ctx: &PlanContext<'_>,
) -> Result<ShuttleRoute> {
    if regions.is_empty() {
        return Err(Error::InvalidInput(format!("direction {direction_id} has no regions")));
    }
    let mut stops = Vec::with_capacity(regions.len());
    for r in regions {
        if r.direction_id != direction_id {
            return Err(Error::InvalidInput(format!(
                "region {} belongs to direction {}, not {direction_id}",
                r.region_id, r.direction_id
            )));
        }
        let spot_id = match overrides.get(&r.region_id) {
            Some(&s) if r.contains(s) => s,
            Some(&s) => {
                return Err(Error::SpotNotInRegion {
                    spot_id: s,
                    region_id: r.region_id,
                })
            }
            None => recommend_stop(r, ctx.spots, ctx.walk)?,
        };
        let spot = ctx.spot(spot_id)?;
        stops.push(RouteStop {
            region_id: r.region_id,
            spot_id,
            name: spot.name.clone(),
            location: spot.location,
        });
    }
    if let Some(&region_id) = overrides.keys().find(|k| !regions.iter().any(|r| r.region_id == **k)) {
        return Err(Error::InvalidInput(format!("override for unknown region {region_id}")));
    }

    let wp = ctx.workplace_waypoint();
    let waypoint = |s: &RouteStop| Waypoint::new(s.name.clone(), s.location);
    let by_drive = stops.iter().all(|s| ctx.legs.has_profile(&wp, &waypoint(s)));
    let mut keyed = Vec::with_capacity(stops.len());
    for s in stops {
        let d = if by_drive {
            ctx.legs.resolve(&wp, &waypoint(&s), departure)?.distance_m
        } else {
            haversine_m(ctx.workplace, s.location)
        };
        keyed.push((d, s));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.region_id.cmp(&b.1.region_id)));
    let stops: Vec<RouteStop> = keyed.into_iter().map(|(_, s)| s).collect();

    let points: Vec<Waypoint> = stops.iter().map(waypoint).collect();
    let legs = chain_legs(ctx, &points, departure)?;
    Ok(ShuttleRoute {
        direction_id,
        departure_time: departure,
        dwell_s: ctx.dwell_s,
        stops,
        legs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimetableEntry {
    pub seq: usize,
    pub region_id: usize,
    pub spot_id: usize,
    pub name: String,
    pub arrival: NaiveDateTime,
    /// Seconds after the route's departure.
    pub arrival_offset_s: f64,
    pub cumulative_distance_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timetable {
    pub departure_time: NaiveDateTime,
    pub entries: Vec<TimetableEntry>,
}

impl Timetable {
    pub fn total_duration_s(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.arrival_offset_s)
    }

    pub fn total_distance_m(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.cumulative_distance_m)
    }
}

/// Arrival at each stop: the first after its leg, every later one after
/// the dwell at the previous stop plus its own leg.
pub fn timetable(route: &ShuttleRoute) -> Timetable {
    let mut offset = 0.0;
    let mut dist = 0.0;
    let entries = route
        .stops
        .iter()
        .zip(&route.legs)
        .enumerate()
        .map(|(seq, (stop, leg))| {
            if seq > 0 {
                offset += route.dwell_s;
            }
            offset += leg.duration_s;
            dist += leg.distance_m;
            TimetableEntry {
                seq: seq + 1,
                region_id: stop.region_id,
                spot_id: stop.spot_id,
                name: stop.name.clone(),
                arrival: add_seconds(route.departure_time, offset),
                arrival_offset_s: offset,
                cumulative_distance_m: dist,
            }
        })
        .collect();
    Timetable {
        departure_time: route.departure_time,
        entries,
    }
}
