//! GeoJSON and CSV renderings of clusters, routes and metrics.

use serde_json::{json, Map, Value};

use crate::directional::DirectionalClustering;
use crate::error::Result;
use crate::geo::GeoPoint;
use crate::ingestion::{format_timestamp, DropOffSpot};
use crate::regional::{RegionalCluster, VoronoiGrid};
use crate::route::{timetable, RouteMetrics, ShuttleRoute, Timetable};
use crate::routing::{WalkGraph, WalkMatrix};
use crate::stops::{stop_metrics, StopMetrics, StopMetricsConfig};

/// Upper bounds of the walking reach bands, in meters.
pub const REACH_BANDS_M: [u32; 4] = [200, 400, 600, 800];

pub fn reach_band(dist_m: f64) -> String {
    REACH_BANDS_M
        .iter()
        .find(|&&b| dist_m <= b as f64)
        .map_or_else(|| ">800".to_string(), |b| format!("<={b}"))
}

fn coords(points: &[GeoPoint]) -> Value {
    Value::Array(points.iter().map(|p| json!([p.lon, p.lat])).collect())
}

fn feature(geometry: Value, properties: Value) -> Value {
    json!({"type": "Feature", "geometry": geometry, "properties": properties})
}

fn collection(features: Vec<Value>) -> Value {
    json!({"type": "FeatureCollection", "features": features})
}

fn region_of(regions: &[RegionalCluster], spot_id: usize) -> Option<&RegionalCluster> {
    regions.iter().find(|r| r.contains(spot_id))
}

/// Voronoi cells (polygons tagged with their spot, direction and region)
/// and classified edges.
pub fn voronoi_geojson(grid: &VoronoiGrid, directional: &DirectionalClustering, regions: &[RegionalCluster]) -> Value {
    let mut features = Vec::with_capacity(grid.cells.len() + grid.edges.len());
    for cell in &grid.cells {
        let region = region_of(regions, cell.spot_id);
        features.push(feature(
            json!({"type": "Polygon", "coordinates": [coords(&cell.polygon)]}),
            json!({
                "kind": "cell",
                "spot_id": cell.spot_id,
                "direction_id": directional.direction_of(cell.spot_id),
                "region_id": region.map(|r| r.region_id),
            }),
        ));
    }
    for e in &grid.edges {
        features.push(feature(
            json!({"type": "LineString", "coordinates": coords(&[e.segment.0, e.segment.1])}),
            json!({
                "kind": "edge",
                "class": e.class.as_str(),
                "site_a": e.site_a,
                "site_b": e.site_b,
            }),
        ));
    }
    collection(features)
}

fn metrics_properties(m: &StopMetrics) -> Map<String, Value> {
    let mut props = Map::new();
    props.insert("avg_dist".into(), json!(finite_or_null(m.avg_dist)));
    props.insert("avg_dura".into(), json!(finite_or_null(m.avg_dura)));
    props.insert("dist_cost".into(), json!(finite_or_null(m.dist_cost)));
    for (b, r) in &m.reach {
        props.insert(format!("reach{b}"), json!(r));
    }
    props
}

fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// The route line, one point per stop with its arrival and stop metrics,
/// and a walking path from each stop to every other member of its region
/// tagged with its reach band. Paths follow `graph` when given and are
/// straight segments otherwise.
pub fn route_geojson(
    route: &ShuttleRoute,
    metrics: &RouteMetrics,
    regions: &[RegionalCluster],
    spots: &[DropOffSpot],
    walk: &WalkMatrix,
    graph: Option<&WalkGraph>,
) -> Result<Value> {
    let tt = timetable(route);
    let mut features = vec![feature(
        json!({"type": "LineString", "coordinates": coords(&route.polyline())}),
        json!({
            "kind": "route",
            "direction_id": route.direction_id,
            "departure_time": format_timestamp(route.departure_time),
            "driving_dura": metrics.driving_dura,
            "driving_dist": metrics.driving_dist,
        }),
    )];
    let cfg = StopMetricsConfig::default();
    for (stop, entry) in route.stops.iter().zip(&tt.entries) {
        let region = regions
            .iter()
            .find(|r| r.direction_id == route.direction_id && r.region_id == stop.region_id);
        let mut props = Map::new();
        props.insert("kind".into(), json!("stop"));
        props.insert("region_id".into(), json!(stop.region_id));
        props.insert("spot_id".into(), json!(stop.spot_id));
        props.insert("name".into(), json!(stop.name));
        props.insert("arrival".into(), json!(format_timestamp(entry.arrival)));
        if let Some(r) = region {
            props.extend(metrics_properties(&stop_metrics(stop.spot_id, r, spots, walk, &cfg)?));
        }
        features.push(feature(
            json!({"type": "Point", "coordinates": [stop.location.lon, stop.location.lat]}),
            Value::Object(props),
        ));
        let Some(r) = region else { continue };
        let mut members = r.member_spot_ids.clone();
        members.sort_unstable();
        for m in members.into_iter().filter(|&m| m != stop.spot_id) {
            let to = spots[m].location;
            let d = walk.dist(stop.spot_id, m);
            let path = graph
                .and_then(|g| g.path(stop.location, to))
                .unwrap_or_else(|| vec![stop.location, to]);
            features.push(feature(
                json!({"type": "LineString", "coordinates": coords(&path)}),
                json!({
                    "kind": "walk",
                    "region_id": stop.region_id,
                    "from_spot_id": stop.spot_id,
                    "to_spot_id": m,
                    "dist_m": finite_or_null(d),
                    "reach_band": reach_band(d),
                }),
            ));
        }
    }
    Ok(collection(features))
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// `seq,region_id,spot_name,arrival_iso,cumulative_km`.
pub fn timetable_csv(tt: &Timetable) -> Result<String> {
    let mut rows = vec![["seq", "region_id", "spot_name", "arrival_iso", "cumulative_km"]
        .iter()
        .map(|s| s.to_string())
        .collect()];
    for e in &tt.entries {
        rows.push(vec![
            e.seq.to_string(),
            e.region_id.to_string(),
            e.name.clone(),
            format_timestamp(e.arrival),
            format!("{:.3}", e.cumulative_distance_m / 1000.0),
        ]);
    }
    csv_string(rows)
}

/// One row per candidate stop: `region_id,spot_id,name,avg_dist_m,
/// avg_dura_s,reach<b>...,dist_cost`. Unreachable values are written as
/// `inf`.
pub fn stop_metrics_csv(rows: &[(usize, &DropOffSpot, &StopMetrics)], buckets_m: &[u32]) -> Result<String> {
    let mut header: Vec<String> = ["region_id", "spot_id", "name", "avg_dist_m", "avg_dura_s"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(buckets_m.iter().map(|b| format!("reach{b}")));
    header.push("dist_cost".into());
    let mut out = vec![header];
    for &(region_id, spot, m) in rows {
        let mut row = vec![
            region_id.to_string(),
            spot.spot_id.to_string(),
            spot.name.clone(),
            format!("{:.3}", m.avg_dist),
            format!("{:.3}", m.avg_dura),
        ];
        row.extend(buckets_m.iter().map(|b| m.reach_at(*b).map_or(String::new(), |r| format!("{r:.6}"))));
        row.push(format!("{:.3}", m.dist_cost));
        out.push(row);
    }
    csv_string(out)
}
