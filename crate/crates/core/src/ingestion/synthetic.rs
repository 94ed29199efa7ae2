//! Deterministic synthetic datasets with planted directions, regions,
//! departure peaks and congestion, standing in for proprietary trip data and
//! crawled travel-time profiles.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::{
    write_trips, Modes, ProfileSample, RoadNetwork, TravelTimeProfile, TravelTimeProfiles,
    TripRecord, WORKPLACE_REF,
};
use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoPoint, LocalProjection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeparturePeak {
    pub at: NaiveTime,
    pub weight: f64,
    pub sd_min: f64,
}

/// One breakpoint of the congestion schedule. Factors between breakpoints
/// are linearly interpolated and clamped outside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CongestionPoint {
    pub at: NaiveTime,
    pub duration_factor: f64,
    pub distance_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    pub start: NaiveTime,
    pub end: NaiveTime,
    pub step_min: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub workplace: GeoPoint,
    pub directions: usize,
    pub first_bearing_deg: f64,
    /// Total angular width occupied by the spots of one direction.
    pub angular_spread_deg: f64,
    pub regions_per_direction: usize,
    pub spots_per_region: usize,
    pub orders_per_spot: [u32; 2],
    pub first_region_distance_m: f64,
    pub region_spacing_m: f64,
    pub spot_ring_radius_m: f64,
    pub destination_jitter_m: f64,
    pub departure_peaks: Vec<DeparturePeak>,
    pub service_date: NaiveDate,
    pub days: u32,
    pub grid_spacing_m: f64,
    pub grid_margin_m: f64,
    pub drive_speed_mps: f64,
    pub road_detour: f64,
    pub first_leg_window: SampleWindow,
    pub inter_stop_window: SampleWindow,
    pub congestion: Vec<CongestionPoint>,
}

fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).expect("valid clock time")
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            workplace: GeoPoint::new(22.5405, 113.9345),
            directions: 9,
            first_bearing_deg: 15.0,
            angular_spread_deg: 8.0,
            regions_per_direction: 3,
            spots_per_region: 3,
            orders_per_spot: [6, 14],
            first_region_distance_m: 4_000.0,
            region_spacing_m: 2_500.0,
            spot_ring_radius_m: 250.0,
            destination_jitter_m: 20.0,
            departure_peaks: vec![
                DeparturePeak { at: hm(21, 30), weight: 0.6, sd_min: 3.0 },
                DeparturePeak { at: hm(21, 55), weight: 0.4, sd_min: 3.0 },
            ],
            service_date: NaiveDate::from_ymd_opt(2019, 7, 1).expect("valid date"),
            days: 5,
            grid_spacing_m: 100.0,
            grid_margin_m: 1_000.0,
            drive_speed_mps: 8.0,
            road_detour: 1.3,
            first_leg_window: SampleWindow { start: hm(21, 0), end: hm(22, 30), step_min: 5 },
            inter_stop_window: SampleWindow { start: hm(21, 0), end: hm(23, 30), step_min: 1 },
            congestion: Vec::new(),
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("synthetic spec: {m}")));
        if self.directions < 1 {
            return bad("at least one direction is required");
        }
        if self.departure_peaks.is_empty() {
            return bad("departure peak mixture is empty");
        }
        if self.departure_peaks.iter().any(|p| !(p.weight > 0.0) || !(p.sd_min >= 0.0)) {
            return bad("peak weights must be positive and spreads non-negative");
        }
        if self.regions_per_direction < 1 || self.spots_per_region < 1 {
            return bad("need at least one region and one spot per region");
        }
        let [lo, hi] = self.orders_per_spot;
        if lo < 1 || lo > hi {
            return bad("orders_per_spot must satisfy 1 <= min <= max");
        }
        if self.days < 1 || !(self.grid_spacing_m > 0.0) || !(self.drive_speed_mps > 0.0) {
            return bad("days, grid spacing and drive speed must be positive");
        }
        if self.first_leg_window.step_min == 0 || self.inter_stop_window.step_min == 0 {
            return bad("sample window steps must be positive");
        }
        if self
            .congestion
            .iter()
            .any(|c| !(c.duration_factor > 0.0) || !(c.distance_factor > 0.0))
        {
            return bad("congestion factors must be positive");
        }
        Ok(())
    }

    /// Duration and distance inflation at a clock time.
    pub fn congestion_at(&self, t: NaiveTime) -> (f64, f64) {
        let pts = &self.congestion;
        match pts.len() {
            0 => (1.0, 1.0),
            _ if t <= pts[0].at => (pts[0].duration_factor, pts[0].distance_factor),
            _ if t >= pts[pts.len() - 1].at => {
                let p = &pts[pts.len() - 1];
                (p.duration_factor, p.distance_factor)
            }
            _ => {
                let i = pts.iter().position(|p| p.at > t).expect("bracketed");
                let (a, b) = (&pts[i - 1], &pts[i]);
                let span = (b.at - a.at).num_milliseconds() as f64;
                let u = (t - a.at).num_milliseconds() as f64 / span;
                (
                    a.duration_factor + u * (b.duration_factor - a.duration_factor),
                    a.distance_factor + u * (b.distance_factor - a.distance_factor),
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpot {
    pub name: String,
    pub direction: usize,
    pub region: usize,
    pub location: GeoPoint,
}

/// Ground truth for scoring recovered structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMetadata {
    pub seed: u64,
    pub workplace: GeoPoint,
    pub direction_labels: Vec<usize>,
    pub direction_bearings: Vec<f64>,
    pub spots: Vec<PlantedSpot>,
    pub planted_peaks: Vec<NaiveTime>,
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub trips: Vec<TripRecord>,
    pub network: RoadNetwork,
    pub profiles: TravelTimeProfiles,
    pub metadata: SyntheticMetadata,
}

impl SyntheticDataset {
    /// Serialized files keyed by file name.
    pub fn to_files(&self) -> Result<BTreeMap<&'static str, Vec<u8>>> {
        let mut files = BTreeMap::new();
        let mut buf = Vec::new();
        write_trips(&mut buf, &self.trips)?;
        files.insert("trips.csv", buf);
        let (mut nodes, mut edges) = (Vec::new(), Vec::new());
        self.network.write(&mut nodes, &mut edges)?;
        files.insert("nodes.csv", nodes);
        files.insert("edges.csv", edges);
        let mut buf = Vec::new();
        self.profiles.to_json(&mut buf)?;
        files.insert("profiles.json", buf);
        files.insert("metadata.json", serde_json::to_vec_pretty(&self.metadata)?);
        Ok(files)
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in self.to_files()? {
            let mut f = std::fs::File::create(dir.join(name))?;
            f.write_all(&bytes)?;
        }
        Ok(())
    }
}

fn window_times(date: NaiveDate, w: &SampleWindow) -> Vec<NaiveDateTime> {
    let mut out = Vec::new();
    let mut t = date.and_time(w.start);
    let end = date.and_time(w.end);
    while t <= end {
        out.push(t);
        t += Duration::minutes(w.step_min as i64);
    }
    out
}

/// Generates trips, a grid road network and travel-time profiles with
/// planted structure. Identical `(spec, seed)` give identical output.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj = LocalProjection::new(spec.workplace);
    let wp = spec.workplace;

    // Spots.
    let mut planted = Vec::new();
    let mut bearings = Vec::new();
    for d in 0..spec.directions {
        let bearing = spec.first_bearing_deg + d as f64 * 360.0 / spec.directions as f64;
        bearings.push(crate::geo::normalize_deg(bearing));
        for r in 0..spec.regions_per_direction {
            let dist = spec.first_region_distance_m + r as f64 * spec.region_spacing_m;
            let ring_dev = (spec.spot_ring_radius_m / dist).min(1.0).asin().to_degrees();
            let slack = (spec.angular_spread_deg / 2.0 - ring_dev).max(0.0);
            let center_bearing = bearing + rng.gen_range(-slack..=slack);
            let center = crate::geo::destination(wp, center_bearing, dist);
            let phase: f64 = rng.gen_range(0.0..360.0);
            for s in 0..spec.spots_per_region {
                let location = if spec.spots_per_region == 1 {
                    center
                } else {
                    let a = phase + s as f64 * 360.0 / spec.spots_per_region as f64;
                    crate::geo::destination(center, a, spec.spot_ring_radius_m)
                };
                planted.push(PlantedSpot {
                    name: format!("Dir{d}-Reg{r}-Spot{s}"),
                    direction: d,
                    region: r,
                    location,
                });
            }
        }
    }

    // Trips.
    let weights: Vec<f64> = spec.departure_peaks.iter().map(|p| p.weight).collect();
    let peak_pick = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidInput(format!("synthetic spec: {e}")))?;
    let mut trips = Vec::new();
    for spot in &planted {
        let n = rng.gen_range(spec.orders_per_spot[0]..=spec.orders_per_spot[1]);
        for i in 0..n {
            let peak = &spec.departure_peaks[peak_pick.sample(&mut rng)];
            // centred mid-bin so the planted minute's 5-minute bin holds the mode
            let offset = if peak.sd_min > 0.0 {
                let z: f64 = Normal::new(2.5, peak.sd_min).expect("finite sd").sample(&mut rng);
                z.floor().clamp(-30.0, 30.0) as i64
            } else {
                0
            };
            let date = spec.service_date + Duration::days(rng.gen_range(0..spec.days) as i64);
            let departure = date.and_time(peak.at) + Duration::minutes(offset);
            let jitter_r = spec.destination_jitter_m * rng.gen::<f64>().sqrt();
            let dest = crate::geo::destination(spot.location, rng.gen_range(0.0..360.0), jitter_r);
            let road_m = haversine_m(wp, dest) * spec.road_detour;
            let ride_min = ((road_m / spec.drive_speed_mps) / 60.0).round().max(1.0) as i64;
            let label = if i % 4 == 3 {
                format!("{} Gate 2", spot.name)
            } else {
                spot.name.clone()
            };
            trips.push(TripRecord {
                employee_id: String::new(),
                departure_time: departure,
                arrival_time: departure + Duration::minutes(ride_min),
                origin: wp,
                destination_raw: label,
                destination: dest,
                payment: ((8.0 + road_m / 1000.0 * 2.6) * 100.0).round() / 100.0,
            });
        }
    }
    trips.shuffle(&mut rng);
    let employees = (trips.len() / 3).max(1);
    for t in trips.iter_mut() {
        t.employee_id = format!("E{:05}", rng.gen_range(0..employees));
    }

    // Grid road network covering the workplace and every spot.
    let mut lo = [0.0f64, 0.0f64];
    let mut hi = [0.0f64, 0.0f64];
    for s in &planted {
        let [x, y] = proj.forward(s.location);
        lo = [lo[0].min(x), lo[1].min(y)];
        hi = [hi[0].max(x), hi[1].max(y)];
    }
    let step = spec.grid_spacing_m;
    let margin = spec.grid_margin_m;
    let x0 = ((lo[0] - margin) / step).floor() * step;
    let y0 = ((lo[1] - margin) / step).floor() * step;
    let cols = (((hi[0] + margin) - x0) / step).ceil() as usize + 1;
    let rows = (((hi[1] + margin) - y0) / step).ceil() as usize + 1;
    let mut network = RoadNetwork::new();
    for r in 0..rows {
        for c in 0..cols {
            let p = proj.inverse([x0 + c as f64 * step, y0 + r as f64 * step]);
            network.add_node((r * cols + c + 1) as u64, p)?;
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let a = (r * cols + c + 1) as u64;
            let mut link = |b: u64| -> Result<()> {
                let (pa, pb) = (network.point(a as usize - 1), network.point(b as usize - 1));
                let len = haversine_m(pa, pb);
                network.add_edge(a, b, len, Modes::BOTH, None)?;
                network.add_edge(b, a, len, Modes::BOTH, None)
            };
            if c + 1 < cols {
                link(a + 1)?;
            }
            if r + 1 < rows {
                link(a + cols as u64)?;
            }
        }
    }

    // Travel-time profiles: workplace to every spot, and forward legs between
    // spots of consecutive regions within a direction.
    let leg = |from: GeoPoint, to: GeoPoint, t: NaiveDateTime| {
        let (fd, fs) = spec.congestion_at(t.time());
        let base = haversine_m(from, to) * spec.road_detour;
        let (a, b) = (proj.forward(from), proj.forward(to));
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let bend = 0.5 * (fs - 1.0).max(0.0);
        let mid = [a[0] + dx / 2.0 - dy * bend, a[1] + dy / 2.0 + dx * bend];
        ProfileSample {
            depart: t,
            duration_s: base / spec.drive_speed_mps * fd,
            distance_m: base * fs,
            polyline: vec![from, proj.inverse(mid), to],
        }
    };
    let mut profiles = TravelTimeProfiles::new();
    let first_times = window_times(spec.service_date, &spec.first_leg_window);
    let inter_times = window_times(spec.service_date, &spec.inter_stop_window);
    for s in &planted {
        profiles.insert(TravelTimeProfile {
            from: WORKPLACE_REF.to_string(),
            to: s.name.clone(),
            samples: first_times.iter().map(|&t| leg(wp, s.location, t)).collect(),
        })?;
    }
    for a in &planted {
        for b in &planted {
            if a.direction == b.direction && b.region == a.region + 1 {
                profiles.insert(TravelTimeProfile {
                    from: a.name.clone(),
                    to: b.name.clone(),
                    samples: inter_times.iter().map(|&t| leg(a.location, b.location, t)).collect(),
                })?;
            }
        }
    }

    let metadata = SyntheticMetadata {
        seed,
        workplace: wp,
        direction_labels: (0..spec.directions).collect(),
        direction_bearings: bearings,
        spots: planted,
        planted_peaks: spec.departure_peaks.iter().map(|p| p.at).collect(),
    };
    Ok(SyntheticDataset {
        trips,
        network,
        profiles,
        metadata,
    })
}
