use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use proptest::prelude::*;
use shuttle_core::directional::{cluster_bearings, kmeans_bearings, silhouette_bearings, DirectionalConfig};
use shuttle_core::ingestion::{
    generate_synthetic, parse_trips, write_trips, DropOffSpot, ProfileSample, SyntheticSpec, TravelTimeProfile,
    TravelTimeProfiles, TripRecord,
};
use shuttle_core::regional::{greedy_regions_with, RegionalCluster};
use shuttle_core::routing::{drive_leg, WalkMatrix, Waypoint};
use shuttle_core::stops::{rank_stops, MetricKey, StopMetricsConfig};
use shuttle_core::{Exec, GeoPoint};

fn chord(a: f64, b: f64) -> f64 {
    2.0 * ((a - b).to_radians() / 2.0).sin().abs()
}

/// Unweighted textbook silhouette, one point at a time.
fn naive_silhouette(bearings: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = bearings.len();
    let mut total = 0.0;
    for i in 0..n {
        let mean = |c: usize| {
            let ds: Vec<f64> = (0..n).filter(|&j| j != i && labels[j] == c).map(|j| chord(bearings[i], bearings[j])).collect();
            (!ds.is_empty()).then(|| ds.iter().sum::<f64>() / ds.len() as f64)
        };
        let s = match mean(labels[i]) {
            None => 0.0,
            Some(a) => match (0..k).filter(|&c| c != labels[i]).filter_map(mean).reduce(f64::min) {
                Some(b) if a.max(b) > 0.0 => (b - a) / a.max(b),
                _ => 0.0,
            },
        };
        total += s;
    }
    total / n as f64
}

fn bearings_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, usize)> {
    (2usize..6).prop_flat_map(|k| {
        (prop::collection::vec((0.0..360.0f64, 0..k), 2..40), Just(k))
            .prop_map(|(pts, k)| (pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect(), k))
    })
}

fn manhattan_matrix(pts: &[(f64, f64)]) -> WalkMatrix {
    let n = pts.len();
    let d = (0..n * n)
        .map(|ij| {
            let (a, b) = (pts[ij / n], pts[ij % n]);
            (a.0 - b.0).abs() + (a.1 - b.1).abs()
        })
        .collect();
    WalkMatrix::from_distances((0..n).collect(), d, 1.2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn unit_weight_silhouette_is_the_textbook_one((bearings, labels, k) in bearings_and_labels()) {
        let w = vec![1.0; bearings.len()];
        let engine = silhouette_bearings(&bearings, &w, &labels, k).unwrap();
        prop_assert!((engine - naive_silhouette(&bearings, &labels, k)).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&engine));
    }

    #[test]
    fn silhouette_ignores_rotation((bearings, labels, k) in bearings_and_labels(), turn in 0.0..360.0f64) {
        let w: Vec<f64> = (0..bearings.len()).map(|i| 1.0 + (i % 7) as f64).collect();
        let turned: Vec<f64> = bearings.iter().map(|b| (b + turn) % 360.0).collect();
        let a = silhouette_bearings(&bearings, &w, &labels, k).unwrap();
        let b = silhouette_bearings(&turned, &w, &labels, k).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn kmeans_objective_never_increases(
        bearings in prop::collection::vec(0.0..360.0f64, 3..60),
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        prop_assume!(k <= bearings.len());
        let w: Vec<f64> = (0..bearings.len()).map(|i| 1.0 + (i % 5) as f64).collect();
        let run = kmeans_bearings(&bearings, &w, k, seed, &DirectionalConfig::default(), Exec::Sequential).unwrap();
        for pair in run.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-9, "{:?}", run.objective_trace);
        }
    }

    #[test]
    fn clustering_is_the_same_sequential_or_parallel(
        bearings in prop::collection::vec(0.0..360.0f64, 3..60),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        prop_assume!(k <= bearings.len());
        let w = vec![1.0; bearings.len()];
        let ids: Vec<usize> = (0..bearings.len()).collect();
        let cfg = DirectionalConfig::default();
        let a = cluster_bearings(ids.clone(), &bearings, &w, k, seed, &cfg, Exec::Sequential).unwrap();
        let b = cluster_bearings(ids, &bearings, &w, k, seed, &cfg, Exec::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn greedy_regions_do_not_depend_on_input_order(
        pts in prop::collection::vec((0.0..3000.0f64, 0.0..3000.0f64, 1u64..20), 1..30),
        threshold in 200.0..1500.0f64,
        rotate in 0usize..30,
    ) {
        let walk = manhattan_matrix(&pts.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>());
        let ids: Vec<usize> = (0..pts.len()).collect();
        let weights: Vec<u64> = pts.iter().map(|p| p.2).collect();
        let seq = greedy_regions_with(0, &ids, &weights, &walk, threshold, Exec::Sequential).unwrap();
        let par = greedy_regions_with(0, &ids, &weights, &walk, threshold, Exec::Parallel).unwrap();
        prop_assert_eq!(&seq, &par);

        let r = rotate % ids.len();
        let (mut ids2, mut w2) = (ids.clone(), weights.clone());
        ids2.rotate_left(r);
        w2.rotate_left(r);
        let moved = greedy_regions_with(0, &ids2, &w2, &walk, threshold, Exec::Sequential).unwrap();
        prop_assert_eq!(&seq, &moved);
        let total: u64 = seq.iter().map(|r| r.order_total).sum();
        prop_assert_eq!(total, weights.iter().sum::<u64>());
    }

    #[test]
    fn rankings_are_sorted_by_the_chosen_metric(
        pts in prop::collection::vec((0.0..1500.0f64, 0.0..1500.0f64, 1u64..20), 1..12),
        which in 0usize..4,
    ) {
        let walk = manhattan_matrix(&pts.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>());
        let spots: Vec<DropOffSpot> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| DropOffSpot { spot_id: i, location: GeoPoint::new(0.0, 0.0), name: format!("s{i}"), order_count: p.2 })
            .collect();
        let region = RegionalCluster {
            direction_id: 0,
            region_id: 0,
            member_spot_ids: (0..pts.len()).collect(),
            order_total: pts.iter().map(|p| p.2).sum(),
            seed_spot_id: 0,
        };
        let key = [MetricKey::AvgDist, MetricKey::AvgDura, MetricKey::DistCost, MetricKey::Reach(400)][which];
        let ranked = rank_stops(&region, &spots, &walk, &StopMetricsConfig::default(), key).unwrap();
        prop_assert_eq!(ranked.len(), pts.len());
        for pair in ranked.windows(2) {
            let (a, b) = (pair[0].value(key), pair[1].value(key));
            if key.is_cost() {
                prop_assert!(a <= b);
            } else {
                prop_assert!(a >= b);
            }
        }
    }

    #[test]
    fn leg_durations_stay_between_bracketing_samples(
        durations in prop::collection::vec(30.0..2000.0f64, 2..20),
        at_ms in 0i64..(3 * 3_600_000),
    ) {
        let start = NaiveDate::from_ymd_opt(2019, 7, 1).unwrap().and_hms_opt(21, 0, 0).unwrap();
        let samples: Vec<ProfileSample> = durations
            .iter()
            .enumerate()
            .map(|(i, &d)| ProfileSample { depart: start + Duration::minutes(5 * i as i64), duration_s: d, distance_m: 1000.0, polyline: vec![] })
            .collect();
        let mut profiles = TravelTimeProfiles::new();
        profiles.insert(TravelTimeProfile { from: "a".into(), to: "b".into(), samples: samples.clone() }).unwrap();
        let depart = start + Duration::milliseconds(at_ms);
        let leg = drive_leg(&profiles, &Waypoint::new("a", GeoPoint::new(0.0, 0.0)), &Waypoint::new("b", GeoPoint::new(0.0, 0.01)), depart).unwrap();
        let after = samples.iter().position(|s| s.depart >= depart);
        let (lo, hi) = match after {
            None => (durations[durations.len() - 1], durations[durations.len() - 1]),
            Some(0) => (durations[0], durations[0]),
            Some(i) => (durations[i - 1].min(durations[i]), durations[i - 1].max(durations[i])),
        };
        prop_assert!(leg.duration_s >= lo - 1e-9 && leg.duration_s <= hi + 1e-9);
        prop_assert_eq!(leg.extrapolated, after.is_none());
    }

    #[test]
    fn written_trips_parse_back(rows in prop::collection::vec(trip_row(), 1..40)) {
        let mut buf = Vec::new();
        write_trips(&mut buf, &rows).unwrap();
        let parsed = parse_trips(buf.as_slice(), WORKPLACE).unwrap();
        prop_assert!(parsed.rejects.is_empty(), "{:?}", parsed.rejects);
        prop_assert_eq!(parsed.records, rows);
    }
}

const WORKPLACE: GeoPoint = GeoPoint { lat: 22.5405, lon: 113.9345 };

fn trip_row() -> impl Strategy<Value = TripRecord> {
    (
        "[A-Z][0-9]{3,6}",
        0i64..(365 * 86_400),
        0i64..7200,
        "[A-Za-z][A-Za-z0-9 ,\"']{0,20}[A-Za-z0-9]",
        -80.0..80.0f64,
        -179.0..179.0f64,
        0.0..500.0f64,
    )
        .prop_map(|(id, dep, ride, name, lat, lon, pay)| {
            let base: NaiveDateTime = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
            let departure_time = base + Duration::seconds(dep);
            TripRecord {
                employee_id: id,
                departure_time,
                arrival_time: departure_time + Duration::seconds(ride),
                origin: WORKPLACE,
                destination_raw: name,
                destination: GeoPoint::new(lat, lon),
                payment: pay,
            }
        })
}

#[test]
fn thousand_generated_rows_round_trip() {
    let spec = SyntheticSpec { orders_per_spot: [12, 20], ..SyntheticSpec::default() };
    let data = generate_synthetic(&spec, 3).unwrap();
    assert!(data.trips.len() >= 1000, "{}", data.trips.len());
    let rows = &data.trips[..1000];
    let mut buf = Vec::new();
    write_trips(&mut buf, rows).unwrap();
    let parsed = parse_trips(buf.as_slice(), data.metadata.workplace).unwrap();
    assert!(parsed.rejects.is_empty());
    assert_eq!(parsed.records, rows);
    let mut again = Vec::new();
    write_trips(&mut again, &parsed.records).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn greedy_regions_cover_each_spot_once() {
    let pts: Vec<(f64, f64)> = (0..25).map(|i| ((i % 5) as f64 * 350.0, (i / 5) as f64 * 350.0)).collect();
    let walk = manhattan_matrix(&pts);
    let ids: Vec<usize> = (0..pts.len()).collect();
    let regions = greedy_regions_with(0, &ids, &vec![1; pts.len()], &walk, 700.0, Exec::default()).unwrap();
    let mut seen = BTreeMap::new();
    for r in &regions {
        for &m in &r.member_spot_ids {
            *seen.entry(m).or_insert(0) += 1;
        }
    }
    assert_eq!(seen.len(), 25);
    assert!(seen.values().all(|&c| c == 1));
}
