use serde::{Deserialize, Serialize};

use super::ShuttleRoute;
use crate::geo::{angle_diff_deg, bearing_deg, haversine_m, GeoPoint};

pub const ZIGZAG_LIMIT_DEG: f64 = 90.0;
pub const REGRESSION_TOLERANCE_M: f64 = 200.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    MoveForward,
    Zigzag,
    LegRegression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaWarning {
    pub kind: WarningKind,
    /// Spot ids involved; the workplace is not a spot and is left out.
    pub spot_ids: Vec<usize>,
    /// Meters for distance checks, degrees for the turn check.
    pub value: f64,
    pub message: String,
}

/// Advisory checks of route shape. Never fails; every violation becomes a
/// warning.
///
/// * move forward: great-circle distance from the workplace must strictly
///   increase along the stops;
/// * zigzag: consecutive leg chords may turn by at most 90°;
/// * leg regression: no leg may end more than 200 m closer to the
///   workplace than it started.
pub fn check_criteria(route: &ShuttleRoute, workplace: GeoPoint) -> Vec<CriteriaWarning> {
    let mut out = Vec::new();
    let radial: Vec<f64> = route.stops.iter().map(|s| haversine_m(workplace, s.location)).collect();

    for i in 1..route.stops.len() {
        if radial[i] <= radial[i - 1] {
            let (a, b) = (&route.stops[i - 1], &route.stops[i]);
            out.push(CriteriaWarning {
                kind: WarningKind::MoveForward,
                spot_ids: vec![a.spot_id, b.spot_id],
                value: radial[i - 1] - radial[i],
                message: format!(
                    "{} ({:.0} m from the workplace) follows {} ({:.0} m)",
                    b.name, radial[i], a.name, radial[i - 1]
                ),
            });
        }
    }

    let points = route.waypoints(workplace);
    let chords: Vec<Option<f64>> = points.windows(2).map(|w| bearing_deg(w[0], w[1]).ok()).collect();
    for i in 1..chords.len() {
        if let (Some(a), Some(b)) = (chords[i - 1], chords[i]) {
            let turn = angle_diff_deg(a, b).abs();
            if turn > ZIGZAG_LIMIT_DEG {
                let stop = &route.stops[i - 1];
                out.push(CriteriaWarning {
                    kind: WarningKind::Zigzag,
                    spot_ids: vec![stop.spot_id],
                    value: turn,
                    message: format!("route turns {turn:.1}° at {}", stop.name),
                });
            }
        }
    }

    for i in 1..route.stops.len() {
        let back = radial[i - 1] - radial[i];
        if back > REGRESSION_TOLERANCE_M {
            let (a, b) = (&route.stops[i - 1], &route.stops[i]);
            out.push(CriteriaWarning {
                kind: WarningKind::LegRegression,
                spot_ids: vec![a.spot_id, b.spot_id],
                value: back,
                message: format!("leg {} -> {} moves {back:.0} m back toward the workplace", a.name, b.name),
            });
        }
    }
    out
}
