//! Planning engine for demand-driven night shuttle routes.
//!
//! The pipeline runs in four stages, each exposed as plain functions over
//! immutable inputs:
//!
//! 1. [`directional`]: cluster drop-off spots by bearing from the workplace
//!    and report the silhouette-vs-K curve plus per-direction angle spreads.
//! 2. [`regional`]: split each direction into walk-bounded regional clusters
//!    and build the classified Voronoi map.
//! 3. [`stops`]: score every candidate stop inside a region.
//! 4. [`route`]: string one stop per region into a route, derive timetables,
//!    radar metrics and comparisons.
//!
//! Data enters through [`ingestion`]; distances and driving legs come from
//! [`routing`]. Heavy inner loops run on rayon when the `parallel` feature is
//! enabled (the default) and fall back to sequential iteration otherwise.

// `!(x > 0.0)` is used on purpose so NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod directional;
pub mod error;
pub mod export;
pub mod geo;
pub mod ingestion;
pub mod par;
pub mod regional;
pub mod route;
pub mod routing;
pub mod stops;

pub use error::{Error, Result};
pub use geo::GeoPoint;
pub use par::Exec;
