//! Input datasets: trip records, road network, travel-time profiles, manual
//! calibration overrides, plus destination unification and a deterministic
//! synthetic generator.

mod network;
mod overrides;
mod profiles;
pub mod synthetic;
mod trips;
mod unify;

pub use network::{Modes, RoadEdge, RoadNetwork};
pub use overrides::{apply_overrides, parse_overrides, LocationOverrides};
pub use profiles::{ProfileSample, TravelTimeProfile, TravelTimeProfiles, WORKPLACE_REF};
pub use synthetic::{
    generate_synthetic, CongestionPoint, DeparturePeak, PlantedSpot, SampleWindow, SyntheticDataset, SyntheticMetadata,
    SyntheticSpec,
};
pub use trips::{first_origin, parse_trips, write_trips, RowReject, TripParse, TripRecord};
pub use unify::{unify_locations, DropOffSpot, Unification, DEFAULT_UNIFY_RADIUS_M};

use chrono::{NaiveDateTime, NaiveTime};

pub(crate) const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_clock(s: &str) -> Option<NaiveTime> {
    let s = s.trim();
    NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .ok()
}
