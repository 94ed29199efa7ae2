//! Shortest paths over the road network and time-dependent driving legs.

mod drive;
mod graph;
mod walk;

pub use drive::{drive_leg, DriveGraph, DriveLeg, Fallback, LegResolver, LegSource, Waypoint};
pub use graph::ShortestTree;
pub use walk::{walk_shortest, WalkGraph, WalkMatrix, DEFAULT_SNAP_TOLERANCE_M, DEFAULT_WALK_SPEED_MPS};
