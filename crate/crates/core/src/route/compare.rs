use serde::{Deserialize, Serialize};

use super::{RouteMetrics, ShuttleRoute};
use crate::error::{Error, Result};

pub const MAX_CANDIDATES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub route: ShuttleRoute,
}

/// Up to three routes of one direction held side by side.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    routes: Vec<Candidate>,
}

impl CandidateList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn routes(&self) -> &[Candidate] {
        &self.routes
    }

    pub fn routes_mut(&mut self) -> &mut [Candidate] {
        &mut self.routes
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn push(&mut self, label: impl Into<String>, route: ShuttleRoute) -> Result<()> {
        if self.routes.len() >= MAX_CANDIDATES {
            return Err(Error::CandidateListFull(MAX_CANDIDATES));
        }
        self.routes.push(Candidate { label: label.into(), route });
        Ok(())
    }

    pub fn remove(&mut self, label: &str) -> Option<Candidate> {
        let i = self.routes.iter().position(|c| c.label == label)?;
        Some(self.routes.remove(i))
    }

    pub fn clear(&mut self) {
        self.routes.clear();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarAxis {
    pub name: String,
    /// Lower is better.
    pub cost_like: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarEntry {
    pub label: String,
    pub metrics: RouteMetrics,
    /// One value per axis, in axis order.
    pub normalized: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarPayload {
    pub axes: Vec<RadarAxis>,
    pub routes: Vec<RadarEntry>,
}

const AXES: [(&str, bool); 6] = [
    ("driving_dura", true),
    ("driving_dist", true),
    ("walk_reach800", false),
    ("walk_avg_dura", true),
    ("walk_avg_dist", true),
    ("nums", false),
];

fn axis_values(m: &RouteMetrics) -> [f64; 6] {
    [
        m.driving_dura,
        m.driving_dist,
        m.walk_reach800,
        m.walk_avg_dura,
        m.walk_avg_dist,
        m.nums as f64,
    ]
}

/// Min–max normalization per axis: the smallest value maps to 0, the
/// largest to 1, and an axis where every route ties maps to 1 for all.
/// Infinite values map to 1 and finite ones to 0 on that axis.
fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![1.0; values.len()];
    }
    if !hi.is_finite() {
        return values.iter().map(|v| if v.is_finite() { 0.0 } else { 1.0 }).collect();
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Radar payload for one to three labelled route metrics.
pub fn compare_routes(entries: &[(String, RouteMetrics)]) -> Result<RadarPayload> {
    if entries.is_empty() {
        return Err(Error::InvalidInput("nothing to compare".into()));
    }
    if entries.len() > MAX_CANDIDATES {
        return Err(Error::CandidateListFull(MAX_CANDIDATES));
    }
    let values: Vec<[f64; 6]> = entries.iter().map(|(_, m)| axis_values(m)).collect();
    let columns: Vec<Vec<f64>> = (0..AXES.len())
        .map(|a| normalize(&values.iter().map(|v| v[a]).collect::<Vec<_>>()))
        .collect();
    Ok(RadarPayload {
        axes: AXES
            .iter()
            .map(|&(name, cost_like)| RadarAxis { name: name.to_string(), cost_like })
            .collect(),
        routes: entries
            .iter()
            .enumerate()
            .map(|(i, (label, m))| RadarEntry {
                label: label.clone(),
                metrics: m.clone(),
                normalized: columns.iter().map(|c| c[i]).collect(),
            })
            .collect(),
    })
}
