//! Planning session state and the operations that read or change it.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use shuttle_core::directional::{angle_stats, cluster_directions, silhouette_curve, DirectionalClustering};
use shuttle_core::export::{route_geojson, stop_metrics_csv, timetable_csv, voronoi_geojson};
use shuttle_core::ingestion::{format_timestamp, parse_clock, parse_timestamp, TripRecord};
use shuttle_core::regional::{build_voronoi, greedy_regions, RegionalCluster, VoronoiGrid};
use shuttle_core::route::{
    check_criteria, compare_routes, departure_histogram, diff_routes, direction_trips, reference_route, route_metrics,
    string_route, timetable, CandidateList, PlanContext, RouteMetrics, ShuttleRoute, DEFAULT_DWELL_S,
    DEFAULT_WINDOW_MIN,
};
use shuttle_core::routing::{Fallback, LegResolver};
use shuttle_core::stops::{rank_stops, recommend_stop, MetricKey, StopMetricsConfig};

use crate::dataset::{Dataset, DatasetRef};
use crate::error::ApiError;

pub type ApiResult<T> = Result<T, ApiError>;

/// A state change, as recorded in the session's event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Event {
    Create { dataset: DatasetRef },
    SetK { k: usize, seed: u64 },
    BuildRegions { threshold_m: f64 },
    Override { direction_id: usize, region_id: usize, spot_id: usize },
    AddCandidate { direction_id: usize, departure_time: String, label: Option<String> },
    RemoveCandidate { direction_id: usize, label: String },
}

pub struct Session {
    pub id: String,
    pub dataset_ref: DatasetRef,
    pub data: Arc<Dataset>,
    pub revision: u64,
    k: Option<(usize, u64)>,
    directional: Option<DirectionalClustering>,
    threshold_m: Option<f64>,
    regional: Option<BTreeMap<usize, Vec<RegionalCluster>>>,
    voronoi: Option<VoronoiGrid>,
    voronoi_error: Option<String>,
    /// direction → region → spot.
    overrides: BTreeMap<usize, BTreeMap<usize, usize>>,
    candidates: BTreeMap<usize, CandidateList>,
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

impl Session {
    pub fn new(id: String, dataset_ref: DatasetRef, data: Arc<Dataset>) -> Self {
        Self {
            id,
            dataset_ref,
            data,
            revision: 0,
            k: None,
            directional: None,
            threshold_m: None,
            regional: None,
            voronoi: None,
            voronoi_error: None,
            overrides: BTreeMap::new(),
            candidates: BTreeMap::new(),
        }
    }

    fn ctx(&self) -> PlanContext<'_> {
        PlanContext {
            spots: self.data.spots(),
            walk: &self.data.walk,
            workplace: self.data.workplace,
            legs: LegResolver::new(&self.data.profiles).with_fallback(Fallback::Network(&self.data.drive_graph)),
            dwell_s: DEFAULT_DWELL_S,
        }
    }

    fn directional(&self) -> ApiResult<&DirectionalClustering> {
        self.directional
            .as_ref()
            .ok_or_else(|| ApiError::unprocessable("k_not_set", "choose K before this step"))
    }

    fn regions(&self, direction_id: usize) -> ApiResult<&[RegionalCluster]> {
        let k = self.directional()?.k;
        if direction_id >= k {
            return Err(ApiError::not_found("unknown_direction", format!("no direction {direction_id} (K = {k})")));
        }
        let all = self
            .regional
            .as_ref()
            .ok_or_else(|| ApiError::unprocessable("regions_not_built", "build regional clusters before this step"))?;
        Ok(all.get(&direction_id).map(Vec::as_slice).unwrap_or(&[]))
    }

    fn trips(&self, direction_id: usize) -> ApiResult<Vec<&TripRecord>> {
        Ok(direction_trips(
            &self.data.trips,
            &self.data.unification.record_spot,
            self.directional()?,
            direction_id,
        ))
    }

    fn parse_departure(&self, s: &str) -> ApiResult<NaiveDateTime> {
        if let Some(t) = parse_timestamp(s) {
            return Ok(t);
        }
        let clock = parse_clock(s)
            .ok_or_else(|| ApiError::unprocessable("invalid_departure", format!("cannot read departure {s:?}")))?;
        let date = self.data.service_date.ok_or_else(|| {
            ApiError::unprocessable("invalid_departure", "profiles carry no date; give a full timestamp")
        })?;
        Ok(date.and_time(clock))
    }

    /// Applies a state change and bumps the revision.
    pub fn apply(&mut self, event: &Event) -> ApiResult<Value> {
        let out = match event {
            Event::Create { .. } => return Err(ApiError::bad_request("session already exists")),
            Event::SetK { k, seed } => self.set_k(*k, *seed)?,
            Event::BuildRegions { threshold_m } => self.build_regions(*threshold_m)?,
            Event::Override { direction_id, region_id, spot_id } => {
                self.set_override(*direction_id, *region_id, *spot_id)?
            }
            Event::AddCandidate { direction_id, departure_time, label } => {
                self.add_candidate(*direction_id, departure_time, label.as_deref())?
            }
            Event::RemoveCandidate { direction_id, label } => self.remove_candidate(*direction_id, label)?,
        };
        self.revision += 1;
        Ok(out)
    }

    pub fn summary(&self) -> Value {
        json!({
            "session_id": self.id,
            "revision": self.revision,
            "dataset": self.dataset_ref,
            "workplace": self.data.workplace,
            "records": self.data.trips.len(),
            "rejects": self.data.rejects,
            "overridden_rows": self.data.overridden_rows,
            "spots": self.data.spots().len(),
            "service_date": self.data.service_date,
            "k": self.k.map(|(k, _)| k),
            "seed": self.k.map(|(_, s)| s),
            "threshold_m": self.threshold_m,
        })
    }

    pub fn silhouette(&self, k_min: usize, k_max: usize, seed: u64) -> ApiResult<Value> {
        let curve = silhouette_curve(self.data.spots(), self.data.workplace, k_min, k_max, seed)?;
        Ok(json!(curve))
    }

    fn set_k(&mut self, k: usize, seed: u64) -> ApiResult<Value> {
        if k < 1 {
            return Err(ApiError::unprocessable("invalid_input", "K must be at least 1"));
        }
        let clustering = cluster_directions(self.data.spots(), self.data.workplace, k, seed)?;
        self.k = Some((k, seed));
        self.directional = Some(clustering);
        self.threshold_m = None;
        self.regional = None;
        self.voronoi = None;
        self.voronoi_error = None;
        self.overrides.clear();
        self.candidates.clear();
        self.clustering_view()
    }

    pub fn clustering_view(&self) -> ApiResult<Value> {
        let c = self.directional()?;
        let stats = angle_stats(c, self.data.spots(), self.data.workplace)?;
        let directions: Vec<Value> = (0..c.k)
            .map(|d| {
                let members = c.members(d);
                let records = self.trips(d).map(|t| t.len()).unwrap_or(0);
                json!({
                    "direction_id": d,
                    "centroid_bearing": c.centroids[d],
                    "spot_ids": members,
                    "records": records,
                    "angle_stats": stats.iter().find(|s| s.direction_id == d),
                })
            })
            .collect();
        Ok(json!({"k": c.k, "seed": c.seed, "directions": directions}))
    }

    fn build_regions(&mut self, threshold_m: f64) -> ApiResult<Value> {
        if !(threshold_m > 0.0) {
            return Err(ApiError::unprocessable("invalid_input", "threshold must be positive"));
        }
        let c = self.directional()?.clone();
        let spots = self.data.spots();
        let mut regional = BTreeMap::new();
        for d in 0..c.k {
            let members = c.members(d);
            if members.is_empty() {
                continue;
            }
            let weights: Vec<u64> = members.iter().map(|&m| spots[m].order_count).collect();
            regional.insert(d, greedy_regions(d, &members, &weights, &self.data.walk, threshold_m)?);
        }
        let all: Vec<RegionalCluster> = regional.values().flatten().cloned().collect();
        let (voronoi, voronoi_error) = match build_voronoi(spots, &c, &all, None) {
            Ok(g) => (Some(g), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.threshold_m = Some(threshold_m);
        self.regional = Some(regional);
        self.voronoi = voronoi;
        self.voronoi_error = voronoi_error;
        self.overrides.clear();
        self.candidates.clear();
        self.regions_view()
    }

    /// Regional clusters of every direction and the Voronoi grid. Fewer
    /// than three distinct, non-collinear spots leave the grid out and
    /// say why in `voronoi_error`.
    pub fn regions_view(&self) -> ApiResult<Value> {
        let c = self.directional()?;
        let regional = self
            .regional
            .as_ref()
            .ok_or_else(|| ApiError::unprocessable("regions_not_built", "build regional clusters before this step"))?;
        let all: Vec<RegionalCluster> = regional.values().flatten().cloned().collect();
        Ok(json!({
            "threshold_m": self.threshold_m,
            "regions": all,
            "voronoi": self.voronoi.as_ref().map(|g| voronoi_geojson(g, c, &all)),
            "voronoi_error": self.voronoi_error,
        }))
    }

    pub fn stops(&self, direction_id: usize, metric: &str) -> ApiResult<Value> {
        let key: MetricKey = metric.parse()?;
        let regions = self.regions(direction_id)?;
        let cfg = StopMetricsConfig::default();
        let spots = self.data.spots();
        let overrides = self.overrides.get(&direction_id);
        let mut out = Vec::with_capacity(regions.len());
        for r in regions {
            let ranked = rank_stops(r, spots, &self.data.walk, &cfg, key)?;
            let recommended = recommend_stop(r, spots, &self.data.walk)?;
            let selected = overrides.and_then(|o| o.get(&r.region_id)).copied().unwrap_or(recommended);
            let stops: Vec<Value> = ranked
                .iter()
                .map(|m| json!({"spot_id": m.spot_id, "name": spots[m.spot_id].name, "metrics": m}))
                .collect();
            out.push(json!({
                "region_id": r.region_id,
                "order_total": r.order_total,
                "recommended_spot_id": recommended,
                "selected_spot_id": selected,
                "stops": stops,
            }));
        }
        Ok(json!({"direction_id": direction_id, "metric": key, "cost_like": key.is_cost(), "regions": out}))
    }

    fn candidate_view(&self, direction_id: usize, label: &str, route: &ShuttleRoute) -> ApiResult<Value> {
        let metrics = self.metrics_of(direction_id, route)?;
        let legs: Vec<Value> = route
            .legs
            .iter()
            .map(|l| {
                json!({
                    "from": l.from.reference,
                    "to": l.to.reference,
                    "depart": format_timestamp(l.depart),
                    "duration_s": l.duration_s,
                    "distance_m": l.distance_m,
                    "source": l.source,
                    "extrapolated": l.extrapolated,
                })
            })
            .collect();
        Ok(json!({
            "label": label,
            "direction_id": direction_id,
            "departure_time": format_timestamp(route.departure_time),
            "stops": route.stops,
            "legs": legs,
            "timetable": timetable(route),
            "metrics": metrics,
            "warnings": check_criteria(route, self.data.workplace),
        }))
    }

    fn metrics_of(&self, direction_id: usize, route: &ShuttleRoute) -> ApiResult<RouteMetrics> {
        let regions = self.regions(direction_id)?;
        let trips = self.trips(direction_id)?;
        Ok(route_metrics(route, regions, &trips, &self.ctx(), DEFAULT_WINDOW_MIN)?)
    }

    fn restring(&self, direction_id: usize, departure: NaiveDateTime) -> ApiResult<ShuttleRoute> {
        let regions = self.regions(direction_id)?;
        let empty = BTreeMap::new();
        let overrides = self.overrides.get(&direction_id).unwrap_or(&empty);
        Ok(string_route(direction_id, regions, overrides, departure, &self.ctx())?)
    }

    fn set_override(&mut self, direction_id: usize, region_id: usize, spot_id: usize) -> ApiResult<Value> {
        let regions = self.regions(direction_id)?;
        let region = regions
            .iter()
            .find(|r| r.region_id == region_id)
            .ok_or_else(|| ApiError::not_found("unknown_region", format!("direction {direction_id} has no region {region_id}")))?;
        if !region.contains(spot_id) {
            return Err(ApiError::unprocessable(
                "spot_not_in_region",
                format!("spot {spot_id} is not in region {region_id} of direction {direction_id}"),
            ));
        }
        // recompute first so a failing leg leaves the session untouched
        let mut overrides = self.overrides.clone();
        overrides.entry(direction_id).or_default().insert(region_id, spot_id);
        let previous = std::mem::replace(&mut self.overrides, overrides);
        let mut list = self.candidates.get(&direction_id).cloned().unwrap_or_default();
        for c in list.routes_mut() {
            match self.restring(direction_id, c.route.departure_time) {
                Ok(r) => c.route = r,
                Err(e) => {
                    self.overrides = previous;
                    return Err(e);
                }
            }
        }
        let views = list
            .routes()
            .iter()
            .map(|c| self.candidate_view(direction_id, &c.label, &c.route))
            .collect::<ApiResult<Vec<_>>>();
        let views = match views {
            Ok(v) => v,
            Err(e) => {
                self.overrides = previous;
                return Err(e);
            }
        };
        self.candidates.insert(direction_id, list);
        Ok(json!({
            "direction_id": direction_id,
            "region_id": region_id,
            "spot_id": spot_id,
            "candidates": views,
        }))
    }

    pub fn histogram(&self, direction_id: usize, bin_min: u32) -> ApiResult<Value> {
        let k = self.directional()?.k;
        if direction_id >= k {
            return Err(ApiError::not_found("unknown_direction", format!("no direction {direction_id} (K = {k})")));
        }
        let trips = self.trips(direction_id)?;
        let bins = departure_histogram(&trips, bin_min)?;
        let bins: Vec<Value> = bins
            .iter()
            .map(|b| json!({"start": b.start.format("%H:%M").to_string(), "count": b.count}))
            .collect();
        Ok(json!({"direction_id": direction_id, "bin_min": bin_min, "records": trips.len(), "bins": bins}))
    }

    fn add_candidate(&mut self, direction_id: usize, departure: &str, label: Option<&str>) -> ApiResult<Value> {
        let regions = self.regions(direction_id)?;
        if regions.is_empty() {
            return Err(ApiError::unprocessable("no_regions", format!("direction {direction_id} has no regions")));
        }
        let list = self.candidates.get(&direction_id).cloned().unwrap_or_default();
        if list.len() >= shuttle_core::route::MAX_CANDIDATES {
            return Err(ApiError::conflict("candidate_list_full", "a direction holds at most three candidates"));
        }
        let departure = self.parse_departure(departure)?;
        let label = match label {
            Some(l) if !l.trim().is_empty() => l.trim().to_string(),
            _ => departure.format("%H:%M").to_string(),
        };
        if list.routes().iter().any(|c| c.label == label) {
            return Err(ApiError::conflict("duplicate_label", format!("candidate {label:?} already exists")));
        }
        let route = self.restring(direction_id, departure)?;
        let view = self.candidate_view(direction_id, &label, &route)?;
        let mut list = list;
        list.push(label, route)?;
        self.candidates.insert(direction_id, list);
        Ok(view)
    }

    fn remove_candidate(&mut self, direction_id: usize, label: &str) -> ApiResult<Value> {
        self.regions(direction_id)?;
        let removed = self
            .candidates
            .get_mut(&direction_id)
            .and_then(|l| l.remove(label))
            .ok_or_else(|| ApiError::not_found("unknown_candidate", format!("no candidate {label:?}")))?;
        Ok(json!({"direction_id": direction_id, "removed": removed.label}))
    }

    pub fn candidates(&self, direction_id: usize) -> ApiResult<Value> {
        self.regions(direction_id)?;
        let views = self
            .candidates
            .get(&direction_id)
            .map(|l| {
                l.routes()
                    .iter()
                    .map(|c| self.candidate_view(direction_id, &c.label, &c.route))
                    .collect::<ApiResult<Vec<_>>>()
            })
            .transpose()?
            .unwrap_or_default();
        Ok(json!({"direction_id": direction_id, "candidates": views}))
    }

    pub fn compare(&self, direction_id: usize) -> ApiResult<Value> {
        self.regions(direction_id)?;
        let list = self
            .candidates
            .get(&direction_id)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| ApiError::unprocessable("no_candidates", format!("direction {direction_id} has no candidates")))?;
        let entries = list
            .routes()
            .iter()
            .map(|c| Ok((c.label.clone(), self.metrics_of(direction_id, &c.route)?)))
            .collect::<ApiResult<Vec<_>>>()?;
        Ok(json!(compare_routes(&entries)?))
    }

    pub fn diff(&self, direction_id: usize, reference: &Value, label: Option<&str>) -> ApiResult<Value> {
        self.regions(direction_id)?;
        let list = self.candidates.get(&direction_id);
        let ours = match label {
            Some(l) => list.and_then(|l2| l2.routes().iter().find(|c| c.label == l)),
            None => list.and_then(|l| l.routes().first()),
        }
        .ok_or_else(|| ApiError::unprocessable("no_candidates", "add a candidate to compare against"))?;
        let reference = reference_route(reference)?;
        let demand = self.directional()?.members(direction_id);
        let trips = self.trips(direction_id)?;
        let report = diff_routes(
            &ours.route,
            &reference,
            &demand,
            &trips,
            &self.ctx(),
            Some(&self.data.walk_graph),
            DEFAULT_WINDOW_MIN,
        )?;
        Ok(json!({"label": ours.label, "report": report}))
    }

    /// Every artifact of the session as named files. Contains nothing
    /// that varies between replays of the same events.
    pub fn export(&self) -> ApiResult<Value> {
        let mut files: BTreeMap<String, String> = BTreeMap::new();
        let state = json!({
            "revision": self.revision,
            "dataset": self.dataset_ref,
            "k": self.k.map(|(k, _)| k),
            "seed": self.k.map(|(_, s)| s),
            "threshold_m": self.threshold_m,
            "overrides": self.overrides.iter().map(|(d, m)| (d.to_string(), m.iter().map(|(r, s)| (r.to_string(), *s)).collect::<BTreeMap<_, _>>())).collect::<BTreeMap<_, _>>(),
        });
        files.insert("session.json".into(), serde_json::to_string_pretty(&state).expect("json value"));
        if self.directional.is_some() {
            files.insert("directions.json".into(), serde_json::to_string_pretty(&self.clustering_view()?).expect("json value"));
        }
        if let (Some(c), Some(regional)) = (&self.directional, &self.regional) {
            let all: Vec<RegionalCluster> = regional.values().flatten().cloned().collect();
            if let Some(g) = &self.voronoi {
                files.insert("voronoi.geojson".into(), voronoi_geojson(g, c, &all).to_string());
            }
            let spots = self.data.spots();
            let cfg = StopMetricsConfig::default();
            for (d, regions) in regional {
                let mut rows = Vec::new();
                for r in regions {
                    for m in rank_stops(r, spots, &self.data.walk, &cfg, MetricKey::AvgDist)? {
                        rows.push((r.region_id, m));
                    }
                }
                let refs: Vec<_> = rows.iter().map(|(r, m)| (*r, &spots[m.spot_id], m)).collect();
                files.insert(format!("direction-{d}/stop_metrics.csv"), stop_metrics_csv(&refs, &cfg.buckets_m)?);
                let Some(list) = self.candidates.get(d).filter(|l| !l.is_empty()) else {
                    continue;
                };
                for cand in list.routes() {
                    let metrics = self.metrics_of(*d, &cand.route)?;
                    let name = sanitize(&cand.label);
                    let geo = route_geojson(&cand.route, &metrics, regions, spots, &self.data.walk, Some(&self.data.walk_graph))?;
                    files.insert(format!("direction-{d}/{name}.route.geojson"), geo.to_string());
                    files.insert(format!("direction-{d}/{name}.timetable.csv"), timetable_csv(&timetable(&cand.route))?);
                }
                files.insert(
                    format!("direction-{d}/compare.json"),
                    serde_json::to_string_pretty(&self.compare(*d)?).expect("json value"),
                );
            }
        }
        Ok(json!({"revision": self.revision, "files": files}))
    }
}
