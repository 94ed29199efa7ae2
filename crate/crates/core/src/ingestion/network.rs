use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoPoint};

/// Edge lengths may undershoot the great-circle distance by this factor to
/// absorb projection rounding in source data.
const LENGTH_SLACK: f64 = 0.99;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modes {
    pub walk: bool,
    pub drive: bool,
}

impl Modes {
    pub const WALK: Modes = Modes { walk: true, drive: false };
    pub const DRIVE: Modes = Modes { walk: false, drive: true };
    pub const BOTH: Modes = Modes { walk: true, drive: true };

    fn parse(s: &str) -> Option<Modes> {
        let mut m = Modes::default();
        for part in s.split(['|', ';', '+', ' ']).filter(|p| !p.is_empty()) {
            match part.trim().to_ascii_lowercase().as_str() {
                "walk" => m.walk = true,
                "drive" => m.drive = true,
                "both" => m = Modes::BOTH,
                _ => return None,
            }
        }
        (m.walk || m.drive).then_some(m)
    }

    fn as_str(&self) -> &'static str {
        match (self.walk, self.drive) {
            (true, true) => "walk|drive",
            (true, false) => "walk",
            (false, true) => "drive",
            (false, false) => "",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadEdge {
    /// Index into [`RoadNetwork::nodes`].
    pub from: usize,
    pub to: usize,
    pub length_m: f64,
    pub modes: Modes,
    /// Walking time override for legs where distance misleads (footbridges,
    /// underpasses).
    pub walk_dura_s: Option<f64>,
}

/// Directed road graph. Nodes keep their external ids; edges refer to nodes
/// by position.
#[derive(Clone, Debug, Default)]
pub struct RoadNetwork {
    pub nodes: Vec<(u64, GeoPoint)>,
    pub edges: Vec<RoadEdge>,
    index: HashMap<u64, usize>,
}

impl RoadNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: u64, at: GeoPoint) -> Result<usize> {
        at.validated()?;
        if self.index.contains_key(&id) {
            return Err(Error::InvalidInput(format!("duplicate node id {id}")));
        }
        self.nodes.push((id, at));
        self.index.insert(id, self.nodes.len() - 1);
        Ok(self.nodes.len() - 1)
    }

    pub fn node_index(&self, id: u64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn point(&self, idx: usize) -> GeoPoint {
        self.nodes[idx].1
    }

    /// Adds an edge between two node ids after checking the length
    /// invariants.
    pub fn add_edge(
        &mut self,
        from: u64,
        to: u64,
        length_m: f64,
        modes: Modes,
        walk_dura_s: Option<f64>,
    ) -> Result<()> {
        let f = self
            .node_index(from)
            .ok_or_else(|| Error::InvalidInput(format!("edge references unknown node {from}")))?;
        let t = self
            .node_index(to)
            .ok_or_else(|| Error::InvalidInput(format!("edge references unknown node {to}")))?;
        if !(length_m > 0.0) || !length_m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "edge {from}->{to} has non-positive length {length_m}"
            )));
        }
        let gc = haversine_m(self.point(f), self.point(t));
        if length_m < gc * LENGTH_SLACK {
            return Err(Error::InvalidInput(format!(
                "edge {from}->{to} length {length_m} m is shorter than the straight-line {gc:.3} m"
            )));
        }
        if let Some(d) = walk_dura_s {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "edge {from}->{to} has invalid walk duration {d}"
                )));
            }
        }
        self.edges.push(RoadEdge {
            from: f,
            to: t,
            length_m,
            modes,
            walk_dura_s,
        });
        Ok(())
    }

    /// Reads `nodes.csv` (`id,lat,lon`) and `edges.csv`
    /// (`from,to,length_m,modes[,walk_dura_s]`).
    pub fn parse<N: Read, E: Read>(nodes: N, edges: E) -> Result<Self> {
        let mut net = RoadNetwork::new();

        let mut rd = csv::Reader::from_reader(nodes);
        let h = rd.headers().map_err(|e| Error::MalformedHeader(e.to_string()))?.clone();
        let col = |name: &str| {
            h.iter()
                .position(|c| c.trim() == name)
                .ok_or_else(|| Error::MalformedHeader(format!("nodes: missing column {name:?}")))
        };
        let (ci, clat, clon) = (col("id")?, col("lat")?, col("lon")?);
        for row in rd.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let perr = |reason: String| Error::Parse { what: "nodes", line, reason };
            let id: u64 = field(&row, ci).parse().map_err(|_| perr("bad id".into()))?;
            let lat: f64 = field(&row, clat).parse().map_err(|_| perr("bad lat".into()))?;
            let lon: f64 = field(&row, clon).parse().map_err(|_| perr("bad lon".into()))?;
            net.add_node(id, GeoPoint::new(lat, lon))
                .map_err(|e| perr(e.to_string()))?;
        }

        let mut rd = csv::Reader::from_reader(edges);
        let h = rd.headers().map_err(|e| Error::MalformedHeader(e.to_string()))?.clone();
        let col = |name: &str| {
            h.iter()
                .position(|c| c.trim() == name)
                .ok_or_else(|| Error::MalformedHeader(format!("edges: missing column {name:?}")))
        };
        let (cf, ct, cl, cm) = (col("from")?, col("to")?, col("length_m")?, col("modes")?);
        let cw = h.iter().position(|c| c.trim() == "walk_dura_s");
        for row in rd.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let perr = |reason: String| Error::Parse { what: "edges", line, reason };
            let from: u64 = field(&row, cf).parse().map_err(|_| perr("bad from".into()))?;
            let to: u64 = field(&row, ct).parse().map_err(|_| perr("bad to".into()))?;
            let len: f64 = field(&row, cl).parse().map_err(|_| perr("bad length_m".into()))?;
            let modes = Modes::parse(field(&row, cm))
                .ok_or_else(|| perr(format!("bad modes {:?}", field(&row, cm))))?;
            let walk = match cw.map(|c| field(&row, c)).filter(|s| !s.is_empty()) {
                Some(s) => Some(s.parse::<f64>().map_err(|_| perr("bad walk_dura_s".into()))?),
                None => None,
            };
            net.add_edge(from, to, len, modes, walk)
                .map_err(|e| perr(e.to_string()))?;
        }
        Ok(net)
    }

    pub fn write<N: Write, E: Write>(&self, nodes: N, edges: E) -> Result<()> {
        let mut w = csv::Writer::from_writer(nodes);
        w.write_record(["id", "lat", "lon"])?;
        for (id, p) in &self.nodes {
            w.write_record([id.to_string(), p.lat.to_string(), p.lon.to_string()])?;
        }
        w.flush()?;

        let has_override = self.edges.iter().any(|e| e.walk_dura_s.is_some());
        let mut w = csv::Writer::from_writer(edges);
        if has_override {
            w.write_record(["from", "to", "length_m", "modes", "walk_dura_s"])?;
        } else {
            w.write_record(["from", "to", "length_m", "modes"])?;
        }
        for e in &self.edges {
            let mut rec = vec![
                self.nodes[e.from].0.to_string(),
                self.nodes[e.to].0.to_string(),
                e.length_m.to_string(),
                e.modes.as_str().to_string(),
            ];
            if has_override {
                rec.push(e.walk_dura_s.map(|d| d.to_string()).unwrap_or_default());
            }
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn field(row: &csv::StringRecord, i: usize) -> &str {
    row.get(i).unwrap_or("").trim()
}
