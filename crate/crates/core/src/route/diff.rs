use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::count_near;
use super::{chain_legs, PlanContext, RouteMetrics, ShuttleRoute};
use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoPoint};
use crate::ingestion::{parse_timestamp, TripRecord};
use crate::routing::{WalkGraph, Waypoint};

/// Reference stops farther than this from every known spot stay free points.
pub const REFERENCE_SNAP_M: f64 = 300.0;

/// Reference stops this close to the workplace are the start of the line,
/// not a stop.
const WORKPLACE_EPS_M: f64 = 1.0;

/// A route drawn outside the planner, such as an existing daytime line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRoute {
    pub departure_time: Option<NaiveDateTime>,
    pub stops: Vec<GeoPoint>,
}

fn point_of(coord: &Value) -> Result<GeoPoint> {
    let c = coord
        .as_array()
        .filter(|c| c.len() >= 2)
        .ok_or_else(|| Error::InvalidInput("coordinate must be [lon, lat]".into()))?;
    let (lon, lat) = (c[0].as_f64(), c[1].as_f64());
    match (lat, lon) {
        (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).validated(),
        _ => Err(Error::InvalidInput("coordinate must be numeric".into())),
    }
}

/// Reads a reference route from GeoJSON. Stops are the Point features in
/// document order (features whose `kind` property is something other than
/// `stop` are skipped); without any, the vertices of the first LineString.
/// A `departure_time` property on any feature or on the collection sets
/// the departure.
pub fn reference_route(geojson: &Value) -> Result<ReferenceRoute> {
    let features: Vec<&Value> = match geojson.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => geojson
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidInput("FeatureCollection without features".into()))?
            .iter()
            .collect(),
        Some("Feature") => vec![geojson],
        Some(_) => Vec::new(),
        None => return Err(Error::InvalidInput("not a GeoJSON object".into())),
    };
    let geometry_of = |f: &'_ Value| -> Option<Value> {
        if f.get("type").and_then(Value::as_str) == Some("Feature") {
            f.get("geometry").cloned()
        } else {
            Some(f.clone())
        }
    };
    let bare = features.is_empty();
    let geometries: Vec<(Option<&Value>, Value)> = if bare {
        vec![(None, geojson.clone())]
    } else {
        features
            .iter()
            .filter_map(|f| geometry_of(f).map(|g| (f.get("properties"), g)))
            .collect()
    };

    let mut departure_time = geojson
        .get("properties")
        .and_then(|p| p.get("departure_time"))
        .and_then(Value::as_str)
        .and_then(parse_timestamp);
    let mut points = Vec::new();
    let mut line: Option<Vec<GeoPoint>> = None;
    for (props, g) in &geometries {
        if departure_time.is_none() {
            departure_time = props
                .and_then(|p| p.get("departure_time"))
                .and_then(Value::as_str)
                .and_then(parse_timestamp);
        }
        let kind = props.and_then(|p| p.get("kind")).and_then(Value::as_str);
        match g.get("type").and_then(Value::as_str) {
            Some("Point") if kind.is_none_or(|k| k == "stop") => {
                points.push(point_of(g.get("coordinates").unwrap_or(&Value::Null))?);
            }
            Some("LineString") if line.is_none() && kind.is_none_or(|k| k == "route") => {
                let coords = g
                    .get("coordinates")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::InvalidInput("LineString without coordinates".into()))?;
                line = Some(coords.iter().map(point_of).collect::<Result<_>>()?);
            }
            _ => {}
        }
    }
    let stops = if points.is_empty() { line.unwrap_or_default() } else { points };
    if stops.is_empty() {
        return Err(Error::InvalidInput("reference route has no stops".into()));
    }
    Ok(ReferenceRoute { departure_time, stops })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayStop {
    pub location: GeoPoint,
    /// The known spot this stop snapped to, if any.
    pub spot_id: Option<usize>,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteOverlay {
    pub departure_time: NaiveDateTime,
    pub stops: Vec<OverlayStop>,
    pub polyline: Vec<GeoPoint>,
    pub metrics: RouteMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotDelta {
    pub spot_id: usize,
    /// Walk distance from the nearest stop of our route.
    pub ours_m: f64,
    pub reference_m: f64,
    /// `reference_m - ours_m`; 0 when both are equal, including both
    /// unreachable.
    pub delta_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub ours: RouteOverlay,
    pub reference: RouteOverlay,
    pub spot_deltas: Vec<SpotDelta>,
}

/// Walking distance and duration from each stop to each demand spot.
fn walk_table(stops: &[OverlayStop], demand: &[usize], ctx: &PlanContext<'_>, graph: Option<&WalkGraph>) -> Vec<Vec<(f64, f64)>> {
    stops
        .iter()
        .map(|s| match s.spot_id {
            Some(id) => demand.iter().map(|&j| (ctx.walk.dist(id, j), ctx.walk.dura(id, j))).collect(),
            None => match graph {
                Some(g) => {
                    let targets: Vec<GeoPoint> = demand.iter().map(|&j| ctx.spots[j].location).collect();
                    g.from_point(s.location, &targets)
                }
                None => vec![(f64::INFINITY, f64::INFINITY); demand.len()],
            },
        })
        .collect()
}

/// Per demand spot, the walk to the stop with the shortest walking distance
/// (earlier stop on ties).
fn nearest(table: &[Vec<(f64, f64)>], n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|j| {
            table
                .iter()
                .map(|row| row[j])
                .fold((f64::INFINITY, f64::INFINITY), |best, x| if x.0 < best.0 { x } else { best })
        })
        .collect()
}

fn overlay(
    stops: Vec<OverlayStop>,
    departure: NaiveDateTime,
    demand: &[usize],
    trips: &[&TripRecord],
    ctx: &PlanContext<'_>,
    graph: Option<&WalkGraph>,
    window_min: u32,
) -> Result<(RouteOverlay, Vec<f64>)> {
    let waypoints: Vec<Waypoint> = stops.iter().map(|s| Waypoint::new(s.name.clone(), s.location)).collect();
    let legs = chain_legs(ctx, &waypoints, departure)?;
    let driving_dura = legs.iter().map(|l| l.duration_s).sum::<f64>() + ctx.dwell_s * legs.len().saturating_sub(1) as f64;
    let driving_dist = legs.iter().map(|l| l.distance_m).sum::<f64>();
    let route = ShuttleRoute {
        direction_id: 0,
        departure_time: departure,
        dwell_s: ctx.dwell_s,
        stops: Vec::new(),
        legs,
    };

    let walks = nearest(&walk_table(&stops, demand, ctx, graph), demand.len());
    let (mut w_total, mut dist, mut dura, mut within) = (0.0, 0.0, 0.0, 0.0);
    for (&j, &(d, t)) in demand.iter().zip(&walks) {
        let w = ctx.spots[j].order_count as f64;
        w_total += w;
        dist += w * d;
        dura += w * t;
        if d <= 800.0 {
            within += w;
        }
    }
    let (walk_reach800, walk_avg_dist, walk_avg_dura) =
        if w_total > 0.0 { (within / w_total, dist / w_total, dura / w_total) } else { (1.0, 0.0, 0.0) };
    Ok((
        RouteOverlay {
            departure_time: departure,
            stops,
            polyline: route.polyline(),
            metrics: RouteMetrics {
                driving_dura,
                driving_dist,
                walk_reach800,
                walk_avg_dura,
                walk_avg_dist,
                nums: count_near(trips, departure, window_min),
            },
        },
        walks.into_iter().map(|w| w.0).collect(),
    ))
}

/// Overlays our route and a reference route on the same demand.
///
/// `demand` lists the spot ids whose residents both routes should serve;
/// each is assigned to the nearest stop of each route by walking distance,
/// so the two routes are measured by one rule. Reference stops snap to the
/// nearest known spot within 300 m; the rest stay free points that serve
/// as stops but carry no demand of their own, walked to over `graph` (or
/// unreachable without one). Legs without a profile use the context's
/// fallback.
pub fn diff_routes(
    ours: &ShuttleRoute,
    reference: &ReferenceRoute,
    demand: &[usize],
    trips: &[&TripRecord],
    ctx: &PlanContext<'_>,
    graph: Option<&WalkGraph>,
    window_min: u32,
) -> Result<DiffReport> {
    if let Some(&bad) = demand.iter().find(|&&j| ctx.spots.get(j).is_none_or(|s| s.spot_id != j)) {
        return Err(Error::InvalidInput(format!("unknown spot id {bad}")));
    }
    let our_stops: Vec<OverlayStop> = ours
        .stops
        .iter()
        .map(|s| OverlayStop { location: s.location, spot_id: Some(s.spot_id), name: s.name.clone() })
        .collect();

    let mut ref_stops = Vec::new();
    for (i, &p) in reference.stops.iter().enumerate() {
        if haversine_m(p, ctx.workplace) <= WORKPLACE_EPS_M {
            continue;
        }
        let snapped = ctx
            .spots
            .iter()
            .map(|s| (haversine_m(p, s.location), s))
            .filter(|(d, _)| *d <= REFERENCE_SNAP_M)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.spot_id.cmp(&b.1.spot_id)));
        ref_stops.push(match snapped {
            Some((_, s)) => OverlayStop { location: s.location, spot_id: Some(s.spot_id), name: s.name.clone() },
            None => OverlayStop { location: p, spot_id: None, name: format!("reference-stop-{}", i + 1) },
        });
    }
    if ref_stops.is_empty() {
        return Err(Error::InvalidInput("reference route has no stops away from the workplace".into()));
    }

    let (ours_overlay, ours_walk) = overlay(our_stops, ours.departure_time, demand, trips, ctx, graph, window_min)?;
    let departure = reference.departure_time.unwrap_or(ours.departure_time);
    let (ref_overlay, ref_walk) = overlay(ref_stops, departure, demand, trips, ctx, graph, window_min)?;
    let spot_deltas = demand
        .iter()
        .zip(ours_walk.iter().zip(&ref_walk))
        .map(|(&spot_id, (&o, &r))| SpotDelta {
            spot_id,
            ours_m: o,
            reference_m: r,
            delta_m: if o == r { 0.0 } else { r - o },
        })
        .collect();
    Ok(DiffReport { ours: ours_overlay, reference: ref_overlay, spot_deltas })
}
