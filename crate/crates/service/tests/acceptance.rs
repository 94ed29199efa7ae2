//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use axum::Router;
use chrono::{NaiveDateTime, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use shuttle_core::directional::{cluster_directions, silhouette, silhouette_curve, DirectionalClustering};
use shuttle_core::ingestion::{
    generate_synthetic, unify_locations, CongestionPoint, DropOffSpot, ProfileSample, SyntheticSpec,
    TravelTimeProfile, TravelTimeProfiles, DEFAULT_UNIFY_RADIUS_M, WORKPLACE_REF,
};
use shuttle_core::regional::{build_voronoi, greedy_regions, EdgeClass, RegionalCluster, DEFAULT_THRESHOLD_M};
use shuttle_core::route::{
    compare_routes, direction_trips, route_metrics, string_route, timetable, PlanContext, DEFAULT_DWELL_S,
    DEFAULT_WINDOW_MIN,
};
use shuttle_core::routing::{drive_leg, LegResolver, WalkGraph, WalkMatrix, Waypoint, DEFAULT_WALK_SPEED_MPS};
use shuttle_core::stops::{stop_metrics, StopMetricsConfig, DEFAULT_BUCKETS_M};
use shuttle_core::{Exec, GeoPoint};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const WP: GeoPoint = GeoPoint { lat: 22.5405, lon: 113.9345 };
const EARTH_R: f64 = 6_371_008.8;

/// Point `(east, north)` meters from `origin` on a flat-earth offset.
fn offset(origin: GeoPoint, east: f64, north: f64) -> GeoPoint {
    let lat = origin.lat + (north / EARTH_R).to_degrees();
    let lon = origin.lon + (east / (EARTH_R * origin.lat.to_radians().cos())).to_degrees();
    GeoPoint::new(lat, lon)
}

fn spot(id: usize, at: GeoPoint, w: u64) -> DropOffSpot {
    DropOffSpot { spot_id: id, location: at, name: format!("s{id}"), order_count: w }
}

// ---------------------------------------------------------------- 1

/// Initial bearing in degrees, from the spherical law of the azimuth.
fn oracle_bearing(from: GeoPoint, to: GeoPoint) -> f64 {
    let (p1, p2) = (from.lat.to_radians(), to.lat.to_radians());
    let dl = (to.lon - from.lon).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    y.atan2(x).to_degrees()
}

/// Weighted silhouette with chord distance between bearings, written out
/// per point straight from the definition.
fn oracle_silhouette(bearings: &[f64], weights: &[f64], labels: &[usize]) -> f64 {
    let chord = |a: f64, b: f64| 2.0 * ((a - b).to_radians() / 2.0).sin().abs();
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    let mean_to = |i: usize, c: usize| -> Option<f64> {
        let (mut s, mut w) = (0.0, 0.0);
        for j in 0..bearings.len() {
            if j != i && labels[j] == c {
                s += weights[j] * chord(bearings[i], bearings[j]);
                w += weights[j];
            }
        }
        (w > 0.0).then(|| s / w)
    };
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..bearings.len() {
        let score = match mean_to(i, labels[i]) {
            None => 0.0,
            Some(a) => {
                let b = clusters
                    .iter()
                    .filter(|&&c| c != labels[i])
                    .filter_map(|&c| mean_to(i, c))
                    .fold(f64::INFINITY, f64::min);
                if b.is_infinite() || a.max(b) == 0.0 {
                    0.0
                } else {
                    (b - a) / a.max(b)
                }
            }
        };
        num += weights[i] * score;
        den += weights[i];
    }
    num / den
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let k = rng.gen_range(2..=6);
        let n = rng.gen_range(k + 1..=50);
        let spots: Vec<DropOffSpot> = (0..n)
            .map(|i| {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = rng.gen_range(300.0..8000.0);
                spot(i, offset(WP, r * theta.sin(), r * theta.cos()), rng.gen_range(1..30))
            })
            .collect();
        let seed = rng.gen();
        let c = cluster_directions(&spots, WP, k, seed).map_err(|e| format!("case {case}: {e}"))?;
        let engine = silhouette(&c, &spots, WP).map_err(|e| format!("case {case}: {e}"))?;
        let bearings: Vec<f64> = spots.iter().map(|s| oracle_bearing(WP, s.location)).collect();
        let weights: Vec<f64> = spots.iter().map(|s| s.order_count as f64).collect();
        let labels: Vec<usize> = spots.iter().map(|s| c.direction_of(s.spot_id).unwrap()).collect();
        let oracle = oracle_silhouette(&bearings, &weights, &labels);
        let err = (engine - oracle).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-9, "case {case}: engine {engine} vs oracle {oracle}");
    }
    Ok(format!("100 instances, max |diff| = {worst:.1e}"))
}

// ---------------------------------------------------------------- 2

/// Greedy set grown from `seed` over `pool`, nearest first, ties by id.
fn oracle_seed_set(seed: usize, pool: &BTreeSet<usize>, d: &dyn Fn(usize, usize) -> f64, t: f64) -> Vec<usize> {
    let mut others: Vec<usize> = pool.iter().copied().filter(|&p| p != seed).collect();
    others.sort_by(|&a, &b| d(seed, a).partial_cmp(&d(seed, b)).unwrap().then(a.cmp(&b)));
    let mut set = vec![seed];
    for p in others {
        if set.iter().all(|&m| d(m, p) <= t && d(p, m) <= t) {
            set.push(p);
        }
    }
    set
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut regions_seen = 0;
    for case in 0..200 {
        let n = rng.gen_range(1..=40);
        let side = rng.gen_range(500.0..4000.0);
        let threshold = rng.gen_range(200.0..1500.0);
        let mut ids: Vec<usize> = (0..3 * n).collect();
        ids.shuffle(&mut rng);
        ids.truncate(n);
        let pts: HashMap<usize, (f64, f64)> =
            ids.iter().map(|&id| (id, (rng.gen_range(0.0..side), rng.gen_range(0.0..side)))).collect();
        // grid walking
        let d = |a: usize, b: usize| {
            let (p, q) = (pts[&a], pts[&b]);
            (p.0 - q.0).abs() + (p.1 - q.1).abs()
        };
        let flat: Vec<f64> = ids.iter().flat_map(|&a| ids.iter().map(move |&b| (a, b))).map(|(a, b)| d(a, b)).collect();
        let walk = WalkMatrix::from_distances(ids.clone(), flat, 1.2).unwrap();
        let weights: Vec<u64> = ids.iter().map(|_| rng.gen_range(1..20)).collect();
        let regions = greedy_regions(0, &ids, &weights, &walk, threshold).map_err(|e| format!("case {case}: {e}"))?;

        let mut covered = BTreeSet::new();
        let mut pool: BTreeSet<usize> = ids.iter().copied().collect();
        for r in &regions {
            for &a in &r.member_spot_ids {
                for &b in &r.member_spot_ids {
                    ensure!(d(a, b) <= threshold, "case {case}: {a}-{b} at {} > {threshold}", d(a, b));
                }
                ensure!(covered.insert(a), "case {case}: spot {a} in two regions");
            }
            let best = pool.iter().map(|&s| oracle_seed_set(s, &pool, &d, threshold).len()).max().unwrap();
            ensure!(
                r.member_spot_ids.len() >= best,
                "case {case}: region {} has {} spots, a seed reaches {best}",
                r.region_id,
                r.member_spot_ids.len()
            );
            for m in &r.member_spot_ids {
                pool.remove(m);
            }
        }
        ensure!(covered == ids.iter().copied().collect::<BTreeSet<_>>(), "case {case}: regions do not cover all spots");
        regions_seen += regions.len();
    }
    Ok(format!("200 instances, {regions_seen} regions checked"))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    // 0 at the center, 1..4 the corners of a 2 km square counter-clockwise
    // from south-west. Directions {0,1,2} and {3,4}; regions {0,1}, {2}, {3,4}.
    let proj = shuttle_core::geo::LocalProjection::new(WP);
    let planar = [[0.0, 0.0], [-1000.0, -1000.0], [1000.0, -1000.0], [1000.0, 1000.0], [-1000.0, 1000.0]];
    let spots: Vec<DropOffSpot> = planar.iter().enumerate().map(|(i, &xy)| spot(i, proj.inverse(xy), 1)).collect();
    let dirs = DirectionalClustering {
        k: 2,
        seed: 0,
        spot_ids: vec![0, 1, 2, 3, 4],
        assignment: vec![0, 0, 0, 1, 1],
        centroids: vec![200.0, 20.0],
        weighted: true,
        objective_trace: vec![],
    };
    let region = |d, r, m: Vec<usize>| RegionalCluster {
        direction_id: d,
        region_id: r,
        order_total: m.len() as u64,
        seed_spot_id: m[0],
        member_spot_ids: m,
    };
    let regions = vec![region(0, 0, vec![0, 1]), region(0, 1, vec![2]), region(1, 0, vec![3, 4])];
    let grid = build_voronoi(&spots, &dirs, &regions, None).map_err(|e| e.to_string())?;

    let expected: BTreeMap<(usize, usize), EdgeClass> = [
        ((0, 1), EdgeClass::Removed),
        ((0, 2), EdgeClass::Dashed),
        ((0, 3), EdgeClass::Solid),
        ((0, 4), EdgeClass::Solid),
        ((1, 2), EdgeClass::Dashed),
        ((2, 3), EdgeClass::Solid),
        ((3, 4), EdgeClass::Removed),
        ((1, 4), EdgeClass::Solid),
    ]
    .into_iter()
    .collect();
    let adjacency: BTreeSet<(usize, usize)> = grid.delaunay_edges.iter().copied().collect();
    ensure!(
        adjacency == expected.keys().copied().collect(),
        "adjacency {adjacency:?}"
    );
    let found: BTreeMap<(usize, usize), EdgeClass> = grid
        .edges
        .iter()
        .map(|e| ((e.site_a.min(e.site_b), e.site_a.max(e.site_b)), e.class))
        .collect();
    ensure!(found == expected, "edge classes {found:?}");

    let total: f64 = grid.cells.iter().map(|c| c.planar_area()).sum();
    let rel = (total - grid.clip.area()).abs() / grid.clip.area();
    ensure!(rel <= 1e-6, "cell areas {total} vs clip {} (rel {rel:.2e})", grid.clip.area());
    let center = grid.cells.iter().find(|c| c.spot_id == 0).unwrap().planar_area();
    ensure!((center / 2.0e6 - 1.0).abs() < 1e-3, "center cell area {center}");
    Ok(format!("8 edges classified, area rel err {rel:.1e}"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let include = StopMetricsConfig::default();
    let exclude = StopMetricsConfig { include_self: false, ..StopMetricsConfig::default() };
    let mut checked = 0;
    for case in 0..500 {
        let n = rng.gen_range(1..=12);
        let spots: Vec<DropOffSpot> = (0..n)
            .map(|i| spot(i, offset(WP, rng.gen_range(0.0..1500.0), rng.gen_range(0.0..1500.0)), rng.gen_range(1..25)))
            .collect();
        let dist: Vec<f64> = (0..n * n)
            .map(|ij| if ij / n == ij % n { 0.0 } else { rng.gen_range(0.0..1200.0) })
            .collect();
        let walk = WalkMatrix::from_distances((0..n).collect(), dist.clone(), DEFAULT_WALK_SPEED_MPS).unwrap();
        let region = RegionalCluster {
            direction_id: 0,
            region_id: 0,
            member_spot_ids: (0..n).rev().collect(),
            order_total: spots.iter().map(|s| s.order_count).sum(),
            seed_spot_id: n - 1,
        };
        for c in 0..n {
            let inc = stop_metrics(c, &region, &spots, &walk, &include).map_err(|e| e.to_string())?;
            let exc = stop_metrics(c, &region, &spots, &walk, &exclude).map_err(|e| e.to_string())?;
            for m in [&inc, &exc] {
                ensure!(
                    m.avg_dist * m.weight_total as f64 == m.dist_cost,
                    "case {case} stop {c}: avg_dist*W = {} != dist_cost {}",
                    m.avg_dist * m.weight_total as f64,
                    m.dist_cost
                );
                let reach: Vec<f64> = DEFAULT_BUCKETS_M.iter().map(|&b| m.reach_at(b).unwrap()).collect();
                ensure!(reach.windows(2).all(|w| w[0] <= w[1]), "case {case} stop {c}: reach {reach:?}");
            }
            let direct: f64 = (0..n).filter(|&j| j != c).map(|j| spots[j].order_count as f64 * dist[c * n + j]).sum();
            ensure!(
                (inc.dist_cost - direct).abs() <= 1e-12 * direct.max(1.0),
                "case {case} stop {c}: dist_cost {} vs Σw·d {direct}",
                inc.dist_cost
            );
            let own = spots[c].order_count;
            ensure!(inc.weight_total == exc.weight_total + own, "case {case} stop {c}: weights");
            let (wi, we) = (inc.weight_total as f64, exc.weight_total as f64);
            ensure!(
                (inc.avg_dist * wi - exc.avg_dist * we).abs() <= 1e-9 * direct.max(1.0),
                "case {case} stop {c}: weighted distance sums differ"
            );
            for &b in &DEFAULT_BUCKETS_M {
                let (ri, re) = (inc.reach_at(b).unwrap(), exc.reach_at(b).unwrap());
                let within_inc = (ri * wi).round() as u64;
                let within_exc = if exc.weight_total == 0 { 0 } else { (re * we).round() as u64 };
                ensure!(within_inc == within_exc + own, "case {case} stop {c}: reach{b} counts");
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} candidate stops"))
}

// ---------------------------------------------------------------- 5

fn shifted(profiles: &TravelTimeProfiles, delta: chrono::Duration) -> TravelTimeProfiles {
    let mut out = TravelTimeProfiles::new();
    for p in profiles.iter() {
        let mut p = p.clone();
        p.samples.iter_mut().for_each(|s| s.depart += delta);
        out.insert(p).unwrap();
    }
    out
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let date = chrono::NaiveDate::from_ymd_opt(2019, 7, 1).unwrap();
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.gen_range(1..=6);
        let heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let spots: Vec<DropOffSpot> = (0..n)
            .map(|i| {
                let r = 1500.0 * (i + 1) as f64 + rng.gen_range(-300.0..300.0);
                spot(i, offset(WP, r * heading.sin(), r * heading.cos()), rng.gen_range(1..20))
            })
            .collect();
        let walk = WalkMatrix::from_distances((0..n).collect(), vec![0.0; n * n], DEFAULT_WALK_SPEED_MPS).unwrap();
        let regions: Vec<RegionalCluster> = (0..n)
            .map(|i| RegionalCluster {
                direction_id: 0,
                region_id: i,
                member_spot_ids: vec![i],
                order_total: spots[i].order_count,
                seed_spot_id: i,
            })
            .collect();
        let mut names: Vec<String> = spots.iter().map(|s| s.name.clone()).collect();
        names.push(WORKPLACE_REF.into());
        let mut profiles = TravelTimeProfiles::new();
        for a in &names {
            for b in names.iter().filter(|&b| b != a && b != WORKPLACE_REF) {
                let samples = (0..=30)
                    .map(|i| ProfileSample {
                        depart: date.and_hms_opt(21, 0, 0).unwrap() + chrono::Duration::minutes(5 * i),
                        duration_s: rng.gen_range(60.0..1200.0),
                        distance_m: rng.gen_range(400.0..9000.0),
                        polyline: vec![],
                    })
                    .collect();
                profiles.insert(TravelTimeProfile { from: a.clone(), to: b.clone(), samples }).unwrap();
            }
        }
        let ctx = PlanContext {
            spots: &spots,
            walk: &walk,
            workplace: WP,
            legs: LegResolver::new(&profiles),
            dwell_s: DEFAULT_DWELL_S,
        };
        let depart = date.and_hms_opt(21, 0, 0).unwrap() + chrono::Duration::seconds(rng.gen_range(0..2 * 3600));
        let route = string_route(0, &regions, &BTreeMap::new(), depart, &ctx).map_err(|e| format!("case {case}: {e}"))?;
        let tt = timetable(&route);
        ensure!(tt.entries.len() == n, "case {case}: {} stops", tt.entries.len());
        ensure!(tt.entries[0].arrival > depart, "case {case}: first arrival not after departure");
        ensure!(tt.entries.windows(2).all(|w| w[0].arrival < w[1].arrival), "case {case}: arrivals not increasing");
        let legs_total: f64 = route.legs.iter().map(|l| l.distance_m).sum();
        let m = route_metrics(&route, &regions, &[], &ctx, DEFAULT_WINDOW_MIN).map_err(|e| e.to_string())?;
        let final_cum = tt.entries.last().unwrap().cumulative_distance_m;
        ensure!(m.driving_dist == final_cum, "case {case}: driving_dist {} vs {final_cum}", m.driving_dist);
        ensure!((legs_total - final_cum).abs() <= 1e-9 * legs_total, "case {case}: leg sum {legs_total}");

        let delta = chrono::Duration::seconds(rng.gen_range(-3 * 86_400..3 * 86_400));
        let moved = shifted(&profiles, delta);
        let ctx2 = PlanContext { legs: LegResolver::new(&moved), ..ctx };
        let route2 = string_route(0, &regions, &BTreeMap::new(), depart + delta, &ctx2).map_err(|e| e.to_string())?;
        ensure!(
            route.stops.iter().map(|s| s.spot_id).eq(route2.stops.iter().map(|s| s.spot_id)),
            "case {case}: stop order changed under translation"
        );
        for (a, b) in route.legs.iter().zip(&route2.legs) {
            let err = (a.duration_s - b.duration_s).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-9, "case {case}: leg duration {} vs {}", a.duration_s, b.duration_s);
            ensure!(b.depart - a.depart == delta, "case {case}: leg departure not shifted");
        }
        let (from, to) = (Waypoint::new(WORKPLACE_REF, WP), Waypoint::new("s0", spots[0].location));
        for _ in 0..20 {
            let t = date.and_hms_opt(20, 30, 0).unwrap() + chrono::Duration::milliseconds(rng.gen_range(0..4 * 3_600_000));
            let a = drive_leg(&profiles, &from, &to, t).unwrap();
            let b = drive_leg(&moved, &from, &to, t + delta).unwrap();
            let err = (a.duration_s - b.duration_s).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-9, "case {case}: lookup at {t}: {} vs {}", a.duration_s, b.duration_s);
        }
    }
    Ok(format!("100 routes, max translation error {worst:.1e} s"))
}

// ---------------------------------------------------------------- 6

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

fn adjusted_rand(a: &[usize], b: &[usize]) -> f64 {
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ra: HashMap<usize, u64> = HashMap::new();
    let mut rb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sa: f64 = ra.values().map(|&n| choose2(n)).sum();
    let sb: f64 = rb.values().map(|&n| choose2(n)).sum();
    let expected = sa * sb / choose2(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

fn criterion_6() -> Outcome {
    let spec = SyntheticSpec::default();
    ensure!(spec.directions == 9 && spec.angular_spread_deg <= 10.0, "fixture spec drifted");
    let mut report = Vec::new();
    for seed in [11, 12, 13] {
        let data = generate_synthetic(&spec, seed).map_err(|e| e.to_string())?;
        let wp = data.metadata.workplace;
        let uni = unify_locations(&data.trips, DEFAULT_UNIFY_RADIUS_M).map_err(|e| e.to_string())?;
        let planted: HashMap<&str, usize> = data.metadata.spots.iter().map(|s| (s.name.as_str(), s.direction)).collect();
        let curve = silhouette_curve(&uni.spots, wp, 2, 12, 0).map_err(|e| e.to_string())?;
        ensure!(curve.argmax == 9, "seed {seed}: argmax {} ({:?})", curve.argmax, curve.points);
        let c = cluster_directions(&uni.spots, wp, 9, 0).map_err(|e| e.to_string())?;
        let truth: Vec<usize> = uni.spots.iter().map(|s| planted[s.name.as_str()]).collect();
        let found: Vec<usize> = uni.spots.iter().map(|s| c.direction_of(s.spot_id).unwrap()).collect();
        let ari = adjusted_rand(&truth, &found);
        ensure!(ari >= 0.95, "seed {seed}: ARI {ari}");
        report.push(format!("seed {seed} ARI {ari:.3}"));
    }
    Ok(format!("argmax 9; {}", report.join(", ")))
}

// ---------------------------------------------------------------- 7

fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).unwrap()
}

fn criterion_7() -> Outcome {
    const DIST_FACTOR: f64 = 1.30;
    const DURA_FACTOR: f64 = 1.18;
    let congested = |at| CongestionPoint { at, duration_factor: DURA_FACTOR, distance_factor: DIST_FACTOR };
    let clear = |at| CongestionPoint { at, duration_factor: 1.0, distance_factor: 1.0 };
    let spec = SyntheticSpec {
        first_region_distance_m: 3_000.0,
        region_spacing_m: 2_000.0,
        // every leg of a 21:30 trip leaves inside the congested stretch and
        // every leg of a 21:55 trip after it
        congestion: vec![congested(hm(21, 0)), congested(hm(21, 50)), clear(hm(21, 54)), clear(hm(23, 59))],
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec, 7).map_err(|e| e.to_string())?;
    let wp = data.metadata.workplace;
    let uni = unify_locations(&data.trips, DEFAULT_UNIFY_RADIUS_M).map_err(|e| e.to_string())?;
    let walk = WalkGraph::new(&data.network, DEFAULT_WALK_SPEED_MPS)
        .and_then(|g| g.matrix(&uni.spots, Exec::default(), None))
        .map_err(|e| e.to_string())?;
    let dirs = cluster_directions(&uni.spots, wp, 9, 0).map_err(|e| e.to_string())?;
    let ctx = PlanContext {
        spots: &uni.spots,
        walk: &walk,
        workplace: wp,
        legs: LegResolver::new(&data.profiles),
        dwell_s: DEFAULT_DWELL_S,
    };
    let early = spec.service_date.and_hms_opt(21, 30, 0).unwrap();
    let late = spec.service_date.and_hms_opt(21, 55, 0).unwrap();
    let (mut dist_ratios, mut dura_ratios) = (Vec::new(), Vec::new());
    for d in 0..9 {
        let members = dirs.members(d);
        let weights: Vec<u64> = members.iter().map(|&m| uni.spots[m].order_count).collect();
        let regions = greedy_regions(d, &members, &weights, &walk, DEFAULT_THRESHOLD_M).map_err(|e| e.to_string())?;
        let trips = direction_trips(&data.trips, &uni.record_spot, &dirs, d);
        let plan = |t: NaiveDateTime| -> Result<_, String> {
            let r = string_route(d, &regions, &BTreeMap::new(), t, &ctx).map_err(|e| e.to_string())?;
            let m = route_metrics(&r, &regions, &trips, &ctx, DEFAULT_WINDOW_MIN).map_err(|e| e.to_string())?;
            Ok((r, m))
        };
        let (r_early, m_early) = plan(early)?;
        let (r_late, m_late) = plan(late)?;
        ensure!(
            r_early.stops.iter().map(|s| s.spot_id).eq(r_late.stops.iter().map(|s| s.spot_id)),
            "direction {d}: the two departures pick different stops"
        );
        let radar = compare_routes(&[("21:30".into(), m_early.clone()), ("21:55".into(), m_late.clone())])
            .map_err(|e| e.to_string())?;
        for axis in ["driving_dura", "driving_dist", "nums"] {
            let i = radar.axes.iter().position(|a| a.name == axis).unwrap();
            let (e, l) = (radar.routes[0].normalized[i], radar.routes[1].normalized[i]);
            ensure!(e > l, "direction {d}: 21:30 not higher on {axis} ({e} vs {l})");
        }
        ensure!(m_early.nums > m_late.nums, "direction {d}: nums {} vs {}", m_early.nums, m_late.nums);

        let dist_ratio = m_early.driving_dist / m_late.driving_dist;
        let moving = |r: &shuttle_core::route::ShuttleRoute| r.legs.iter().map(|l| l.duration_s).sum::<f64>();
        let dura_ratio = moving(&r_early) / moving(&r_late);
        let dwell_total = DEFAULT_DWELL_S * (r_early.stops.len() - 1) as f64;
        let moving_from_metrics = (m_early.driving_dura - dwell_total) / (m_late.driving_dura - dwell_total);
        ensure!(
            (dist_ratio / DIST_FACTOR - 1.0).abs() <= 0.01,
            "direction {d}: distance ratio {dist_ratio:.4}"
        );
        ensure!(
            (dura_ratio / DURA_FACTOR - 1.0).abs() <= 0.01,
            "direction {d}: in-motion duration ratio {dura_ratio:.4}"
        );
        ensure!(
            (moving_from_metrics - dura_ratio).abs() <= 1e-9,
            "direction {d}: driving_dura minus dwell disagrees with leg durations"
        );
        dist_ratios.push(dist_ratio);
        dura_ratios.push(dura_ratio);
    }
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!("{lo:.4}..{hi:.4}")
    };
    Ok(format!(
        "9 directions; distance ratio {}, in-motion duration ratio {}",
        span(&dist_ratios),
        span(&dura_ratios)
    ))
}

// ---------------------------------------------------------------- 8

/// The twelve-step planning session. Returns the raw export bytes.
async fn run_session(app: &Router) -> Result<Vec<u8>, String> {
    use common::call;
    let step = |n: usize, want: StatusCode, got: (StatusCode, Value)| -> Result<Value, String> {
        if got.0 == want {
            Ok(got.1)
        } else {
            Err(format!("step {n}: {} {}", got.0, got.1))
        }
    };
    let req = |m: Method, uri: String, body: Option<Value>| async move {
        let (s, _, b) = call(app, m, &uri, body, None).await;
        (s, b)
    };
    let created = step(1, StatusCode::CREATED, req(Method::POST, "/sessions".into(), Some(json!({"dataset": "data"}))).await)?;
    let id = created["session_id"].as_str().unwrap().to_string();
    let s = |path: &str| format!("/sessions/{id}{path}");
    let curve = step(2, StatusCode::OK, req(Method::GET, s("/silhouette?kmin=2&kmax=12"), None).await)?;
    if curve["argmax"] != 9 {
        return Err(format!("step 2: argmax {}", curve["argmax"]));
    }
    step(3, StatusCode::OK, req(Method::PUT, s("/k"), Some(json!({"k": 9, "seed": 0}))).await)?;
    step(4, StatusCode::OK, req(Method::POST, s("/regions"), Some(json!({"threshold_m": 1000.0}))).await)?;
    let stops = step(5, StatusCode::OK, req(Method::GET, s("/directions/0/stops?metric=avg_dist"), None).await)?;
    step(6, StatusCode::OK, req(Method::GET, s("/directions/0/histogram?bin=5"), None).await)?;
    let body = |t: &str| Some(json!({"departure_time": t}));
    step(7, StatusCode::CREATED, req(Method::POST, s("/directions/0/candidates"), body("21:30")).await)?;
    step(8, StatusCode::CREATED, req(Method::POST, s("/directions/0/candidates"), body("21:55")).await)?;
    let region = stops["regions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["stops"].as_array().unwrap().len() > 1)
        .ok_or("step 9: no region with an alternative stop")?;
    let alt = json!({"region_id": region["region_id"], "spot_id": region["stops"][1]["spot_id"]});
    step(9, StatusCode::OK, req(Method::PUT, s("/directions/0/override"), Some(alt)).await)?;
    step(10, StatusCode::OK, req(Method::GET, s("/directions/0/compare"), None).await)?;
    let line: Vec<Value> = [0.0, 4000.0, 6500.0, 9000.0]
        .iter()
        .map(|&r| {
            let p = shuttle_core::geo::destination(WP, 15.0, r);
            json!([p.lon, p.lat])
        })
        .collect();
    let reference = json!({"type": "LineString", "coordinates": line});
    step(11, StatusCode::OK, req(Method::POST, s("/directions/0/diff?label=21:30"), Some(reference)).await)?;
    let (status, _, _) = call(app, Method::GET, &s("/export"), None, None).await;
    if status != StatusCode::OK {
        return Err(format!("step 12: {status}"));
    }
    Ok(common::call_bytes(app, &s("/export")).await)
}

fn criterion_8() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    rt.block_on(async {
        let data = tempfile::TempDir::new().unwrap();
        common::write_dataset(data.path(), "data", &SyntheticSpec::default(), common::SEED);
        let (log_a, log_b) = (tempfile::TempDir::new().unwrap(), tempfile::TempDir::new().unwrap());
        let (app_a, _) = common::app_for(data.path(), Some(log_a.path()));
        let (app_b, _) = common::app_for(data.path(), Some(log_b.path()));
        let first = run_session(&app_a).await?;
        let second = run_session(&app_b).await?;
        ensure!(first == second, "two runs of the session exported different bundles");

        // restart from the recorded log twice
        let id = std::fs::read_dir(log_a.path())
            .unwrap()
            .filter_map(|e| {
                let path = e.ok()?.path();
                (path.extension()? == "jsonl").then(|| path.file_stem()?.to_str().map(String::from))?
            })
            .next()
            .ok_or("no session log written")?;
        let mut replays = Vec::new();
        for _ in 0..2 {
            let (app, _) = common::app_for(data.path(), Some(log_a.path()));
            replays.push(common::call_bytes(&app, &format!("/sessions/{id}/export")).await);
        }
        ensure!(replays.iter().all(|r| *r == first), "replayed export differs from the live one");
        let bundle: Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
        let files = bundle["files"].as_object().ok_or("export has no files")?;
        Ok(format!("{} files, {} bytes, identical across 2 runs and 2 replays", files.len(), first.len()))
    })
}

fn main() {
    let started = Instant::now();
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 8] = [
        ("1 silhouette oracle equivalence", criterion_1, Some(Duration::from_secs(10))),
        ("2 regional clustering invariants", criterion_2, Some(Duration::from_secs(20))),
        ("3 voronoi square+center fixture", criterion_3, None),
        ("4 stop metric algebra", criterion_4, None),
        ("5 timetable and route consistency", criterion_5, None),
        ("6 planted direction recovery", criterion_6, Some(Duration::from_secs(60))),
        ("7 congestion fixture decision pattern", criterion_7, None),
        ("8 service replay determinism", criterion_8, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = t.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{elapsed:.1?}]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} [{elapsed:.1?}]: {why}");
            }
        }
    }
    let total = started.elapsed();
    println!("acceptance: {} of 8 passed in {total:.1?}", 8 - failed);
    if total > Duration::from_secs(180) {
        println!("FAIL total runtime {total:.1?} exceeds 3 minutes");
        failed += 1;
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
