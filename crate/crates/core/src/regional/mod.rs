//! Walk-bounded regional clusters inside each travel direction, and the
//! Voronoi map whose edges show direction and region boundaries.

mod greedy;
mod voronoi;

pub use greedy::{greedy_regions, greedy_regions_with, RegionalCluster, DEFAULT_THRESHOLD_M};
pub use voronoi::{build_voronoi, ClipRect, EdgeClass, VoronoiCell, VoronoiEdge, VoronoiGrid};
