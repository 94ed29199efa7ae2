use std::collections::BTreeMap;
use std::io::Read;

use super::TripRecord;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// Manually calibrated coordinates keyed by raw destination label.
pub type LocationOverrides = BTreeMap<String, GeoPoint>;

/// Reads `overrides.csv` (`label,lat,lon`).
pub fn parse_overrides<R: Read>(source: R) -> Result<LocationOverrides> {
    let mut rd = csv::Reader::from_reader(source);
    let h = rd.headers().map_err(|e| Error::MalformedHeader(e.to_string()))?.clone();
    let col = |name: &str| {
        h.iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::MalformedHeader(format!("overrides: missing column {name:?}")))
    };
    let (cl, clat, clon) = (col("label")?, col("lat")?, col("lon")?);
    let mut out = LocationOverrides::new();
    for row in rd.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let get = |i| row.get(i).unwrap_or("").trim();
        let p = match (get(clat).parse::<f64>(), get(clon).parse::<f64>()) {
            (Ok(lat), Ok(lon)) => GeoPoint::new(lat, lon),
            _ => {
                return Err(Error::Parse {
                    what: "overrides",
                    line,
                    reason: "unparsable coordinate".into(),
                })
            }
        };
        let p = p.validated().map_err(|e| Error::Parse {
            what: "overrides",
            line,
            reason: e.to_string(),
        })?;
        out.insert(get(cl).to_string(), p);
    }
    Ok(out)
}

/// Replaces the destination of every record whose raw label has a manual
/// override. Returns the number of records changed.
pub fn apply_overrides(records: &mut [TripRecord], overrides: &LocationOverrides) -> usize {
    let mut changed = 0;
    for r in records.iter_mut() {
        if let Some(p) = overrides.get(&r.destination_raw) {
            r.destination = *p;
            changed += 1;
        }
    }
    changed
}
