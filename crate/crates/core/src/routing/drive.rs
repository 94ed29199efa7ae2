use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::graph::Csr;
use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoPoint};
use crate::ingestion::{ProfileSample, RoadNetwork, TravelTimeProfiles};

/// Maximum distance from a stop to the drive node it is routed from.
const DRIVE_SNAP_TOLERANCE_M: f64 = 1_000.0;

/// A named location that driving legs start or end at. `reference` is the
/// key used in travel-time profiles (the spot name, or
/// [`WORKPLACE_REF`](crate::ingestion::WORKPLACE_REF)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub reference: String,
    pub point: GeoPoint,
}

impl Waypoint {
    pub fn new(reference: impl Into<String>, point: GeoPoint) -> Self {
        Self { reference: reference.into(), point }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegSource {
    Profile,
    Network,
    Straight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveLeg {
    pub from: Waypoint,
    pub to: Waypoint,
    pub depart: NaiveDateTime,
    pub duration_s: f64,
    pub distance_m: f64,
    pub polyline: Vec<GeoPoint>,
    /// The departure fell outside the sampled range and was clamped.
    pub extrapolated: bool,
    pub source: LegSource,
}

fn seconds_between(a: NaiveDateTime, b: NaiveDateTime) -> f64 {
    let d = b - a;
    match d.num_nanoseconds() {
        Some(ns) => ns as f64 * 1e-9,
        None => d.num_milliseconds() as f64 * 1e-3,
    }
}

/// Looks up a driving leg at `depart`. The duration is linearly interpolated
/// between the bracketing samples; distance and polyline come from the
/// nearer sample (the earlier one on an exact tie). Departures outside the
/// sampled range clamp to the nearest end and are flagged `extrapolated`.
pub fn drive_leg(
    profiles: &TravelTimeProfiles,
    from: &Waypoint,
    to: &Waypoint,
    depart: NaiveDateTime,
) -> Result<DriveLeg> {
    let profile = profiles
        .get(&from.reference, &to.reference)
        .ok_or_else(|| Error::MissingLeg {
            from: from.reference.clone(),
            to: to.reference.clone(),
        })?;
    let samples = &profile.samples;
    let after = samples.partition_point(|s| s.depart <= depart);

    let make = |s: &ProfileSample, duration_s: f64, extrapolated: bool| DriveLeg {
        from: from.clone(),
        to: to.clone(),
        depart,
        duration_s,
        distance_m: s.distance_m,
        polyline: s.polyline.clone(),
        extrapolated,
        source: LegSource::Profile,
    };

    if after == 0 {
        let s = &samples[0];
        return Ok(make(s, s.duration_s, true));
    }
    let lo = &samples[after - 1];
    if lo.depart == depart {
        return Ok(make(lo, lo.duration_s, false));
    }
    if after == samples.len() {
        return Ok(make(lo, lo.duration_s, true));
    }
    let hi = &samples[after];
    let span = seconds_between(lo.depart, hi.depart);
    let into = seconds_between(lo.depart, depart);
    let u = into / span;
    let duration = lo.duration_s + u * (hi.duration_s - lo.duration_s);
    let nearer = if into <= span - into { lo } else { hi };
    Ok(make(nearer, duration, false))
}

/// The driving subgraph, used to synthesize legs that no profile covers.
#[derive(Clone, Debug)]
pub struct DriveGraph {
    csr: Csr,
    speed_mps: f64,
}

impl DriveGraph {
    pub fn new(network: &RoadNetwork, speed_mps: f64) -> Result<Self> {
        if !(speed_mps > 0.0) {
            return Err(Error::InvalidInput(format!("drive speed must be positive, got {speed_mps}")));
        }
        let csr = Csr::build(network, |e| e.modes.drive, |e| e.length_m / speed_mps);
        Ok(Self { csr, speed_mps })
    }

    pub fn leg(&self, from: &Waypoint, to: &Waypoint, depart: NaiveDateTime) -> Result<DriveLeg> {
        let missing = || Error::MissingLeg {
            from: from.reference.clone(),
            to: to.reference.clone(),
        };
        let snap = |p| self.csr.snap(p).filter(|&(_, d)| d <= DRIVE_SNAP_TOLERANCE_M);
        let (a, off_a) = snap(from.point).ok_or_else(missing)?;
        let (b, off_b) = snap(to.point).ok_or_else(missing)?;
        let tree = self.csr.dijkstra(a);
        let nodes = tree.path_to(b).ok_or_else(missing)?;
        let distance_m = (off_a + tree.dist[b] + off_b).max(f64::MIN_POSITIVE);
        let mut polyline = vec![from.point];
        polyline.extend(nodes.into_iter().map(|n| self.csr.points[n]));
        polyline.push(to.point);
        Ok(DriveLeg {
            from: from.clone(),
            to: to.clone(),
            depart,
            duration_s: distance_m / self.speed_mps,
            distance_m,
            polyline,
            extrapolated: false,
            source: LegSource::Network,
        })
    }
}

/// What to do when no profile covers a requested leg.
#[derive(Clone, Copy, Debug)]
pub enum Fallback<'a> {
    /// Fail with [`Error::MissingLeg`].
    None,
    /// Route over the driving subgraph at constant speed.
    Network(&'a DriveGraph),
    /// Straight line scaled by a detour factor, at constant speed.
    Straight { speed_mps: f64, detour: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct LegResolver<'a> {
    pub profiles: &'a TravelTimeProfiles,
    pub fallback: Fallback<'a>,
}

impl<'a> LegResolver<'a> {
    pub fn new(profiles: &'a TravelTimeProfiles) -> Self {
        Self { profiles, fallback: Fallback::None }
    }

    pub fn with_fallback(mut self, fallback: Fallback<'a>) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn has_profile(&self, from: &Waypoint, to: &Waypoint) -> bool {
        self.profiles.get(&from.reference, &to.reference).is_some()
    }

    pub fn resolve(&self, from: &Waypoint, to: &Waypoint, depart: NaiveDateTime) -> Result<DriveLeg> {
        match drive_leg(self.profiles, from, to, depart) {
            Err(Error::MissingLeg { .. }) => match self.fallback {
                Fallback::None => Err(Error::MissingLeg {
                    from: from.reference.clone(),
                    to: to.reference.clone(),
                }),
                Fallback::Network(g) => g.leg(from, to, depart),
                Fallback::Straight { speed_mps, detour } => {
                    let distance_m = (haversine_m(from.point, to.point) * detour).max(f64::MIN_POSITIVE);
                    Ok(DriveLeg {
                        from: from.clone(),
                        to: to.clone(),
                        depart,
                        duration_s: distance_m / speed_mps,
                        distance_m,
                        polyline: vec![from.point, to.point],
                        extrapolated: false,
                        source: LegSource::Straight,
                    })
                }
            },
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::destination;
    use crate::ingestion::{Modes, TravelTimeProfile};
    use chrono::{Duration, NaiveDate};

    fn t(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2019, 7, 1).unwrap().and_hms_opt(h, m, 0).unwrap()
    }

    fn wp(r: &str) -> Waypoint {
        Waypoint::new(r, GeoPoint::new(22.5, 113.9))
    }

    fn sample(at: NaiveDateTime, dur: f64, dist: f64) -> ProfileSample {
        ProfileSample { depart: at, duration_s: dur, distance_m: dist, polyline: vec![] }
    }

    fn profiles() -> TravelTimeProfiles {
        let mut p = TravelTimeProfiles::new();
        p.insert(TravelTimeProfile {
            from: "workplace".into(),
            to: "A".into(),
            samples: vec![sample(t(21, 30), 600.0, 5000.0), sample(t(21, 32), 660.0, 5200.0)],
        })
        .unwrap();
        p
    }

    #[test]
    fn exact_sample_is_verbatim() {
        let leg = drive_leg(&profiles(), &wp("workplace"), &wp("A"), t(21, 32)).unwrap();
        assert_eq!(leg.duration_s, 660.0);
        assert_eq!(leg.distance_m, 5200.0);
        assert!(!leg.extrapolated);
    }

    #[test]
    fn interpolates_between_samples() {
        let leg = drive_leg(&profiles(), &wp("workplace"), &wp("A"), t(21, 31)).unwrap();
        assert!((leg.duration_s - 630.0).abs() < 1e-9);
        // equidistant: distance from the earlier sample
        assert_eq!(leg.distance_m, 5000.0);
        let later = t(21, 31) + Duration::seconds(30);
        let leg = drive_leg(&profiles(), &wp("workplace"), &wp("A"), later).unwrap();
        assert!((leg.duration_s - 645.0).abs() < 1e-9);
        assert_eq!(leg.distance_m, 5200.0);
    }

    #[test]
    fn clamps_outside_range() {
        let early = drive_leg(&profiles(), &wp("workplace"), &wp("A"), t(21, 0)).unwrap();
        assert_eq!(early.duration_s, 600.0);
        assert!(early.extrapolated);
        let late = drive_leg(&profiles(), &wp("workplace"), &wp("A"), t(22, 0)).unwrap();
        assert_eq!(late.duration_s, 660.0);
        assert!(late.extrapolated);
    }

    #[test]
    fn missing_leg_and_fallbacks() {
        let p = profiles();
        let (a, b) = (wp("A"), Waypoint::new("B", destination(GeoPoint::new(22.5, 113.9), 90.0, 1000.0)));
        assert!(matches!(
            LegResolver::new(&p).resolve(&a, &b, t(21, 30)),
            Err(Error::MissingLeg { .. })
        ));
        let straight = LegResolver::new(&p)
            .with_fallback(Fallback::Straight { speed_mps: 10.0, detour: 1.5 })
            .resolve(&a, &b, t(21, 30))
            .unwrap();
        assert!((straight.distance_m - 1500.0).abs() < 1e-6);
        assert!((straight.duration_s - 150.0).abs() < 1e-6);
        assert_eq!(straight.source, LegSource::Straight);

        let mut net = RoadNetwork::new();
        net.add_node(1, a.point).unwrap();
        net.add_node(2, b.point).unwrap();
        net.add_edge(1, 2, 1100.0, Modes::DRIVE, None).unwrap();
        let g = DriveGraph::new(&net, 10.0).unwrap();
        let via_net = LegResolver::new(&p)
            .with_fallback(Fallback::Network(&g))
            .resolve(&a, &b, t(21, 30))
            .unwrap();
        assert!((via_net.distance_m - 1100.0).abs() < 1e-9);
        assert_eq!(via_net.source, LegSource::Network);
        // one-way street
        assert!(g.leg(&b, &a, t(21, 30)).is_err());
    }
}
