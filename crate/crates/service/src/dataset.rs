//! Loading and precomputing one dataset for a session.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use shuttle_core::geo::GeoPoint;
use shuttle_core::ingestion::{
    apply_overrides, first_origin, parse_overrides, parse_trips, unify_locations, DropOffSpot, RoadNetwork, RowReject,
    TravelTimeProfiles, TripRecord, Unification, DEFAULT_UNIFY_RADIUS_M,
};
use shuttle_core::routing::{DriveGraph, WalkGraph, WalkMatrix};
use shuttle_core::{Error, Exec, Result};

pub const DEFAULT_DRIVE_SPEED_MPS: f64 = 8.0;

/// Where a session's data comes from. Either `dataset` names a directory
/// holding `trips.csv`, `nodes.csv`, `edges.csv`, `profiles.json` and
/// optionally `overrides.csv`, or the files are given one by one. Relative
/// paths resolve against the service's data directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trips: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<String>,
    /// Defaults to the origin of the first trip record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workplace: Option<GeoPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unify_radius_m: Option<f64>,
}

struct Paths {
    trips: PathBuf,
    nodes: PathBuf,
    edges: PathBuf,
    profiles: PathBuf,
    overrides: Option<PathBuf>,
}

impl DatasetRef {
    fn paths(&self, data_dir: &Path) -> Result<Paths> {
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                data_dir.join(p)
            }
        };
        let base = self.dataset.as_deref().map(resolve);
        let pick = |explicit: &Option<String>, file: &str| -> Result<PathBuf> {
            match (explicit, &base) {
                (Some(p), _) => Ok(resolve(p)),
                (None, Some(dir)) => Ok(dir.join(file)),
                (None, None) => Err(Error::InvalidInput(format!("no path for {file}"))),
            }
        };
        let overrides = match (&self.overrides, &base) {
            (Some(p), _) => Some(resolve(p)),
            (None, Some(dir)) if dir.join("overrides.csv").is_file() => Some(dir.join("overrides.csv")),
            _ => None,
        };
        Ok(Paths {
            trips: pick(&self.trips, "trips.csv")?,
            nodes: pick(&self.nodes, "nodes.csv")?,
            edges: pick(&self.edges, "edges.csv")?,
            profiles: pick(&self.profiles, "profiles.json")?,
            overrides,
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// Everything derived from the input files that does not depend on
/// planner choices.
pub struct Dataset {
    pub workplace: GeoPoint,
    pub trips: Vec<TripRecord>,
    pub rejects: Vec<RowReject>,
    pub overridden_rows: usize,
    pub unification: Unification,
    pub profiles: TravelTimeProfiles,
    pub service_date: Option<NaiveDate>,
    pub walk_graph: WalkGraph,
    pub walk: WalkMatrix,
    pub drive_graph: DriveGraph,
}

impl Dataset {
    pub fn spots(&self) -> &[DropOffSpot] {
        &self.unification.spots
    }

    /// Reads and validates every file, unifies destinations and computes
    /// the walking matrix, calling `progress(done, total)` as rows finish.
    pub fn load(
        r: &DatasetRef,
        data_dir: &Path,
        walk_speed_mps: f64,
        drive_speed_mps: f64,
        progress: &(dyn Fn(usize, usize) + Sync),
    ) -> Result<Self> {
        let paths = r.paths(data_dir)?;
        let workplace = match r.workplace {
            Some(w) => w.validated()?,
            None => first_origin(open(&paths.trips)?)?
                .ok_or_else(|| Error::InvalidInput("trips file has no records".into()))?,
        };
        let parsed = parse_trips(open(&paths.trips)?, workplace)?;
        let mut trips = parsed.records;
        let overridden_rows = match &paths.overrides {
            Some(p) => apply_overrides(&mut trips, &parse_overrides(open(p)?)?),
            None => 0,
        };
        let unification = unify_locations(&trips, r.unify_radius_m.unwrap_or(DEFAULT_UNIFY_RADIUS_M))?;
        let network = RoadNetwork::parse(open(&paths.nodes)?, open(&paths.edges)?)?;
        let profiles = TravelTimeProfiles::from_json(open(&paths.profiles)?)?;
        let walk_graph = WalkGraph::new(&network, walk_speed_mps)?;
        let walk = walk_graph.matrix(&unification.spots, Exec::default(), Some(progress))?;
        let drive_graph = DriveGraph::new(&network, drive_speed_mps)?;
        Ok(Self {
            workplace,
            trips,
            rejects: parsed.rejects,
            overridden_rows,
            service_date: profiles.service_date(),
            unification,
            profiles,
            walk_graph,
            walk,
            drive_graph,
        })
    }
}
