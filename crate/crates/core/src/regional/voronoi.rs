use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, HasPosition, Point2, Triangulation};

use super::RegionalCluster;
use crate::directional::DirectionalClustering;
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, LocalProjection};
use crate::ingestion::DropOffSpot;

/// Margin added on every side of the sites' bounding box, as a fraction of
/// its larger side, when no clip rectangle is given.
const CLIP_INFLATION: f64 = 0.2;

/// Axis-aligned rectangle in the local planar frame (meters).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipRect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl ClipRect {
    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.min[0] && p[0] < self.max[0] && p[1] > self.min[1] && p[1] < self.max[1]
    }

    fn corners(&self) -> Vec<[f64; 2]> {
        vec![
            self.min,
            [self.max[0], self.min[1]],
            self.max,
            [self.min[0], self.max[1]],
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeClass {
    /// Sites in different directions.
    Solid,
    /// Same direction, different regions.
    Dashed,
    /// Same region.
    Removed,
}

impl EdgeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeClass::Solid => "solid",
            EdgeClass::Dashed => "dashed",
            EdgeClass::Removed => "removed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiCell {
    pub spot_id: usize,
    /// Closed ring (first vertex repeated at the end).
    pub polygon: Vec<GeoPoint>,
    pub planar: Vec<[f64; 2]>,
}

impl VoronoiCell {
    pub fn planar_area(&self) -> f64 {
        shoelace(&self.planar)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiEdge {
    pub site_a: usize,
    pub site_b: usize,
    pub segment: (GeoPoint, GeoPoint),
    pub planar: [[f64; 2]; 2],
    pub class: EdgeClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiGrid {
    pub center: GeoPoint,
    pub clip: ClipRect,
    pub cells: Vec<VoronoiCell>,
    pub edges: Vec<VoronoiEdge>,
    /// Undirected Delaunay edges as `(smaller spot id, larger spot id)`.
    pub delaunay_edges: Vec<(usize, usize)>,
}

fn shoelace(ring: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for w in ring.windows(2) {
        a += w[0][0] * w[1][1] - w[1][0] * w[0][1];
    }
    a.abs() / 2.0
}

/// True when every point lies within a relative 1e-9 of one line.
fn collinear(points: &[[f64; 2]]) -> bool {
    let o = points[0];
    let far = points
        .iter()
        .copied()
        .max_by(|a, b| (a[0] - o[0]).hypot(a[1] - o[1]).total_cmp(&(b[0] - o[0]).hypot(b[1] - o[1])))
        .unwrap();
    let (dx, dy) = (far[0] - o[0], far[1] - o[1]);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return true;
    }
    points
        .iter()
        .all(|p| ((p[0] - o[0]) * dy - (p[1] - o[1]) * dx).abs() / len <= 1e-9 * len)
}

struct Site {
    pos: Point2<f64>,
    idx: usize,
}

impl HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

/// A convex polygon whose edge `i` runs from `verts[i]` to `verts[i + 1]`
/// and was produced by the bisector with site `tags[i]` (`None` for the clip
/// rectangle).
struct TaggedPolygon {
    verts: Vec<[f64; 2]>,
    tags: Vec<Option<usize>>,
}

impl TaggedPolygon {
    /// Keeps the part where `(p - mid) · normal <= 0`.
    fn clip(&mut self, mid: [f64; 2], normal: [f64; 2], tag: usize) {
        let f = |p: [f64; 2]| (p[0] - mid[0]) * normal[0] + (p[1] - mid[1]) * normal[1];
        let n = self.verts.len();
        let mut verts = Vec::with_capacity(n + 1);
        let mut tags = Vec::with_capacity(n + 1);
        for i in 0..n {
            let (p, q) = (self.verts[i], self.verts[(i + 1) % n]);
            let (fp, fq) = (f(p), f(q));
            let cross = |fp: f64, fq: f64| {
                let t = fp / (fp - fq);
                [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
            };
            match (fp <= 0.0, fq <= 0.0) {
                (true, true) => {
                    verts.push(p);
                    tags.push(self.tags[i]);
                }
                (true, false) => {
                    verts.push(p);
                    tags.push(self.tags[i]);
                    verts.push(cross(fp, fq));
                    tags.push(Some(tag));
                }
                (false, true) => {
                    verts.push(cross(fp, fq));
                    tags.push(self.tags[i]);
                }
                (false, false) => {}
            }
        }
        // drop zero-length edges
        let scale = verts
            .iter()
            .fold(1.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()));
        let eps = scale * 1e-12;
        let mut i = 0;
        while verts.len() > 1 && i < verts.len() {
            let j = (i + 1) % verts.len();
            if (verts[i][0] - verts[j][0]).abs() <= eps && (verts[i][1] - verts[j][1]).abs() <= eps {
                verts.remove(i);
                tags.remove(i);
            } else {
                i += 1;
            }
        }
        self.verts = verts;
        self.tags = tags;
    }

    fn edge_with(&self, tag: usize) -> Option<[[f64; 2]; 2]> {
        let n = self.verts.len();
        (0..n)
            .filter(|&i| self.tags[i] == Some(tag))
            .map(|i| [self.verts[i], self.verts[(i + 1) % n]])
            .max_by(|a, b| seg_len(a).total_cmp(&seg_len(b)))
    }
}

fn seg_len(s: &[[f64; 2]; 2]) -> f64 {
    (s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1])
}

/// Voronoi grid of drop-off spots, with each edge classified by the
/// direction and region of the two sites it separates.
///
/// Sites are projected azimuthal-equidistantly around their centroid and
/// triangulated; each cell is the clip rectangle cut by the bisectors with
/// the site's Delaunay neighbours. `clip` defaults to the sites' bounding
/// box inflated on every side.
pub fn build_voronoi(
    spots: &[DropOffSpot],
    directional: &DirectionalClustering,
    regions: &[RegionalCluster],
    clip: Option<ClipRect>,
) -> Result<VoronoiGrid> {
    if spots.len() < 3 {
        return Err(Error::DegenerateSites(format!("{} sites, need at least 3", spots.len())));
    }
    let proj = LocalProjection::around(&spots.iter().map(|s| s.location).collect::<Vec<_>>());
    let planar: Vec<[f64; 2]> = spots.iter().map(|s| proj.forward(s.location)).collect();

    if collinear(&planar) {
        return Err(Error::DegenerateSites("all sites are collinear".into()));
    }

    let mut tri: DelaunayTriangulation<Site> = DelaunayTriangulation::new();
    for (idx, p) in planar.iter().enumerate() {
        tri.insert(Site { pos: Point2::new(p[0], p[1]), idx })
            .map_err(|e| Error::DegenerateSites(format!("site {idx}: {e:?}")))?;
    }
    if tri.num_vertices() < spots.len() {
        return Err(Error::DegenerateSites("duplicate site locations".into()));
    }
    if tri.num_inner_faces() == 0 {
        return Err(Error::DegenerateSites("all sites are collinear".into()));
    }

    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); spots.len()];
    let mut delaunay: Vec<(usize, usize)> = Vec::new();
    for e in tri.undirected_edges() {
        let [a, b] = e.vertices().map(|v| v.data().idx);
        neighbours[a].push(b);
        neighbours[b].push(a);
        delaunay.push((a.min(b), a.max(b)));
    }
    delaunay.sort_unstable();
    for n in neighbours.iter_mut() {
        n.sort_unstable();
    }

    let clip = match clip {
        Some(c) => c,
        None => {
            let mut lo = planar[0];
            let mut hi = planar[0];
            for p in &planar {
                lo = [lo[0].min(p[0]), lo[1].min(p[1])];
                hi = [hi[0].max(p[0]), hi[1].max(p[1])];
            }
            let m = CLIP_INFLATION * (hi[0] - lo[0]).max(hi[1] - lo[1]);
            ClipRect {
                min: [lo[0] - m, lo[1] - m],
                max: [hi[0] + m, hi[1] + m],
            }
        }
    };
    if let Some(i) = planar.iter().position(|&p| !clip.contains(p)) {
        return Err(Error::InvalidInput(format!(
            "clip rectangle does not contain spot {}",
            spots[i].spot_id
        )));
    }

    let polygons: Vec<TaggedPolygon> = (0..spots.len())
        .map(|i| {
            let mut poly = TaggedPolygon {
                verts: clip.corners(),
                tags: vec![None; 4],
            };
            let a = planar[i];
            for &j in &neighbours[i] {
                let b = planar[j];
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                poly.clip(mid, [b[0] - a[0], b[1] - a[1]], j);
            }
            poly
        })
        .collect();

    let mut membership: HashMap<usize, (Option<usize>, Option<(usize, usize)>)> = HashMap::new();
    for s in spots {
        membership.insert(s.spot_id, (directional.direction_of(s.spot_id), None));
    }
    for r in regions {
        for &m in &r.member_spot_ids {
            if let Some(entry) = membership.get_mut(&m) {
                entry.1 = Some((r.direction_id, r.region_id));
            }
        }
    }
    let classify = |a: usize, b: usize| {
        let (da, ra) = membership[&a];
        let (db, rb) = membership[&b];
        match (da, db) {
            (Some(x), Some(y)) if x == y => {
                if ra.is_some() && ra == rb {
                    EdgeClass::Removed
                } else {
                    EdgeClass::Dashed
                }
            }
            _ => EdgeClass::Solid,
        }
    };

    let scale = (clip.max[0] - clip.min[0]).max(clip.max[1] - clip.min[1]);
    let mut edges = Vec::new();
    for &(i, j) in &delaunay {
        let Some(seg) = polygons[i].edge_with(j) else {
            continue;
        };
        if seg_len(&seg) <= scale * 1e-9 {
            continue;
        }
        let (a, b) = (spots[i].spot_id, spots[j].spot_id);
        edges.push(VoronoiEdge {
            site_a: a,
            site_b: b,
            segment: (proj.inverse(seg[0]), proj.inverse(seg[1])),
            planar: seg,
            class: classify(a, b),
        });
    }

    let cells = polygons
        .into_iter()
        .enumerate()
        .map(|(i, poly)| {
            let mut ring = poly.verts;
            ring.push(ring[0]);
            VoronoiCell {
                spot_id: spots[i].spot_id,
                polygon: ring.iter().map(|&p| proj.inverse(p)).collect(),
                planar: ring,
            }
        })
        .collect();

    Ok(VoronoiGrid {
        center: proj.center(),
        clip,
        cells,
        edges,
        delaunay_edges: delaunay
            .into_iter()
            .map(|(i, j)| {
                let (a, b) = (spots[i].spot_id, spots[j].spot_id);
                (a.min(b), a.max(b))
            })
            .collect(),
    })
}
