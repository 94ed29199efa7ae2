use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("{what}:{line}: {reason}")]
    Parse {
        what: &'static str,
        line: u64,
        reason: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("spot {name} (id {spot_id}) has no walkable node within {tolerance_m} m")]
    SpotNotSnappable {
        spot_id: usize,
        name: String,
        tolerance_m: f64,
    },

    #[error("bearing is undefined when origin equals destination")]
    UndefinedBearing,

    #[error("k = {k} exceeds the number of spots ({spots})")]
    TooFewSpots { k: usize, spots: usize },

    #[error("silhouette is undefined for k < 2")]
    SilhouetteUndefined,

    #[error("degenerate site set: {0}")]
    DegenerateSites(String),

    #[error("no travel-time profile for leg {from} -> {to}")]
    MissingLeg { from: String, to: String },

    #[error("spot {spot_id} not in region {region_id}")]
    SpotNotInRegion { spot_id: usize, region_id: usize },

    #[error("candidate list already holds {0} routes")]
    CandidateListFull(usize),

    #[error("unknown metric key {0:?}")]
    UnknownMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
