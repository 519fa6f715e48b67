//! Hexagonal tiling mathematics.
//!
//! Tiles are identified by integer axial coordinates relative to a
//! [`HexFrame`]; floating-point centers are always recomputed from the
//! indices so that two sensors sharing a frame agree bit-for-bit on every
//! center they derive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for "is this a lattice point" checks.
pub const EPS_POS: f64 = 1e-6;

/// Distance slack under which two candidate centers are considered tied.
const TIE_EPS: f64 = 1e-9;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} is not finite")]
    NonFinite(usize),
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("polygon has no interior sample points at resolution {0}")]
    EmptyPolygon(f64),
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, bearing: f64) -> Self {
        Self::new(radius * bearing.cos(), radius * bearing.sin())
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    /// Point reached after moving `d` meters from `self` toward `target`,
    /// clamped at `target`.
    pub fn toward(self, target: Point, d: f64) -> Point {
        let len = self.dist(target);
        if len <= d || len == 0.0 {
            return target;
        }
        self + (target - self).scale(d / len)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn approx_eq(self, other: Point) -> bool {
        self.dist(other) <= EPS_POS
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

/// Integer tile index relative to a frame. Ordering is lexicographic on
/// `(q, r)`, which is also the boundary tie-break order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Axial {
    pub q: i32,
    pub r: i32,
}

impl Axial {
    /// Neighbor offsets, in bearing order `theta + 30° + k·60°`.
    pub const DIRECTIONS: [Axial; 6] = [
        Axial { q: 1, r: 0 },
        Axial { q: 0, r: 1 },
        Axial { q: -1, r: 1 },
        Axial { q: -1, r: 0 },
        Axial { q: 0, r: -1 },
        Axial { q: 1, r: -1 },
    ];

    pub const ORIGIN: Axial = Axial { q: 0, r: 0 };

    pub const fn new(q: i32, r: i32) -> Self {
        Self { q, r }
    }

    pub fn neighbors(self) -> [Axial; 6] {
        Self::DIRECTIONS.map(|d| Axial::new(self.q + d.q, self.r + d.r))
    }

    /// Number of tile steps between two tiles.
    pub fn distance(self, other: Axial) -> u32 {
        let dq = self.q - other.q;
        let dr = self.r - other.r;
        ((dq.abs() + dr.abs() + (dq + dr).abs()) / 2) as u32
    }

    pub fn is_adjacent(self, other: Axial) -> bool {
        self.distance(other) == 1
    }
}

/// Identity of a tiling portion: the starter's timestamp, then the
/// starter's ID. Smaller is older.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortionId {
    pub starter_ts: f64,
    pub starter_id: u32,
}

impl PortionId {
    pub fn is_older_than(&self, other: &PortionId) -> bool {
        self.cmp_age(other) == std::cmp::Ordering::Less
    }

    pub fn cmp_age(&self, other: &PortionId) -> std::cmp::Ordering {
        self.starter_ts
            .total_cmp(&other.starter_ts)
            .then(self.starter_id.cmp(&other.starter_id))
    }
}

impl Eq for PortionId {}

/// A tiling portion's lattice: origin tile center, orientation, side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HexFrame {
    pub origin: Point,
    pub theta: f64,
    pub side: f64,
    pub starter_ts: f64,
    pub starter_id: u32,
}

impl HexFrame {
    pub fn new(origin: Point, theta: f64, side: f64, starter_ts: f64, starter_id: u32) -> Self {
        assert!(side > 0.0, "hex side must be positive");
        assert!(starter_ts >= 0.0, "starter timestamp must be non-negative");
        Self {
            origin,
            theta: normalize_theta(theta),
            side,
            starter_ts,
            starter_id,
        }
    }

    pub fn portion(&self) -> PortionId {
        PortionId {
            starter_ts: self.starter_ts,
            starter_id: self.starter_id,
        }
    }

    pub fn apothem(&self) -> f64 {
        self.side * SQRT3 / 2.0
    }

    /// Center-to-center distance of edge-adjacent tiles.
    pub fn spacing(&self) -> f64 {
        self.side * SQRT3
    }

    fn basis(&self) -> (Point, Point) {
        let s = self.spacing();
        (
            Point::from_polar(s, self.theta + PI / 6.0),
            Point::from_polar(s, self.theta + PI / 2.0),
        )
    }

    pub fn center(&self, tile: Axial) -> Point {
        let (a1, a2) = self.basis();
        self.origin + a1.scale(tile.q as f64) + a2.scale(tile.r as f64)
    }

    fn fractional(&self, p: Point) -> (f64, f64) {
        let (a1, a2) = self.basis();
        let d = p - self.origin;
        let det = a1.cross(a2);
        (d.cross(a2) / det, a1.cross(d) / det)
    }

    /// The tile owning `p`: nearest center, ties to the lexicographically
    /// smaller index.
    pub fn tile_of(&self, p: Point) -> Axial {
        let (fq, fr) = self.fractional(p);
        let guess = cube_round(fq, fr);
        let mut best = guess;
        let mut best_d = p.dist(self.center(guess));
        for cand in guess.neighbors() {
            let d = p.dist(self.center(cand));
            if d < best_d - TIE_EPS || ((d - best_d).abs() <= TIE_EPS && cand < best) {
                best = cand;
                best_d = d;
            }
        }
        best
    }

    /// `Some(tile)` if `p` is within [`EPS_POS`] of a lattice center.
    pub fn lattice_tile(&self, p: Point) -> Option<Axial> {
        let t = self.tile_of(p);
        (p.dist(self.center(t)) <= EPS_POS).then_some(t)
    }

    /// Unit outward normals of the six hexagon edges.
    fn edge_normals(&self) -> [Point; 6] {
        std::array::from_fn(|k| Point::from_polar(1.0, self.theta + PI / 6.0 + k as f64 * PI / 3.0))
    }

    /// Vertices of the hexagon centered at `center`.
    pub fn hex_vertices(&self, center: Point) -> [Point; 6] {
        std::array::from_fn(|k| {
            center + Point::from_polar(self.side, self.theta + k as f64 * PI / 3.0)
        })
    }

    /// Point where the segment from `from` toward `center` first enters the
    /// hexagon around `center`. Returns `from` if already inside.
    pub fn entry_point(&self, from: Point, center: Point) -> Point {
        let dir = center - from;
        let len = dir.norm();
        if len == 0.0 {
            return from;
        }
        // Largest t in [0,1] at which the ray leaves the exterior of some
        // half-plane: the hexagon is the intersection of six of them.
        let mut t_enter: f64 = 0.0;
        for n in self.edge_normals() {
            let rel = from - center;
            let s0 = rel.dot(n) - self.apothem();
            if s0 > 0.0 {
                let ds = dir.dot(n);
                if ds < 0.0 {
                    t_enter = t_enter.max(s0 / -ds);
                }
            }
        }
        from + dir.scale(t_enter.min(1.0))
    }

    /// Tiles whose hexagon overlaps the interior of `aoi`.
    pub fn tiles_overlapping(&self, aoi: &Polygon) -> Vec<Axial> {
        let (lo, hi) = aoi.bbox();
        let margin = self.side;
        let corners = [
            Point::new(lo.x - margin, lo.y - margin),
            Point::new(hi.x + margin, lo.y - margin),
            Point::new(lo.x - margin, hi.y + margin),
            Point::new(hi.x + margin, hi.y + margin),
        ];
        let fr: Vec<(f64, f64)> = corners.iter().map(|c| self.fractional(*c)).collect();
        let qmin = fr.iter().map(|f| f.0).fold(f64::INFINITY, f64::min).floor() as i32 - 1;
        let qmax = fr
            .iter()
            .map(|f| f.0)
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil() as i32
            + 1;
        let rmin = fr.iter().map(|f| f.1).fold(f64::INFINITY, f64::min).floor() as i32 - 1;
        let rmax = fr
            .iter()
            .map(|f| f.1)
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil() as i32
            + 1;
        let mut out = Vec::new();
        for q in qmin..=qmax {
            for r in rmin..=rmax {
                let t = Axial::new(q, r);
                if self.tile_overlaps(t, aoi) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Whether the hexagon of `tile` has positive-area overlap with `aoi`.
    pub fn tile_overlaps(&self, tile: Axial, aoi: &Polygon) -> bool {
        let c = self.center(tile);
        let (lo, hi) = aoi.bbox();
        if c.x < lo.x - self.side
            || c.x > hi.x + self.side
            || c.y < lo.y - self.side
            || c.y > hi.y + self.side
        {
            return false;
        }
        // Shrink slightly so tiles merely touching the outline do not count.
        let shrunk = HexFrame {
            side: self.side * (1.0 - 1e-6),
            ..*self
        };
        let hex = shrunk.hex_vertices(c);
        if aoi.contains(c) || hex.iter().any(|v| aoi.contains(*v)) {
            return true;
        }
        if aoi.vertices.iter().any(|v| point_in_convex(*v, &hex)) {
            return true;
        }
        for i in 0..6 {
            let (a, b) = (hex[i], hex[(i + 1) % 6]);
            for (c0, d0) in aoi.edges() {
                if segments_cross(a, b, c0, d0) {
                    return true;
                }
            }
        }
        false
    }
}

/// Reduce an orientation to `[0, π/3)`.
pub fn normalize_theta(theta: f64) -> f64 {
    let period = PI / 3.0;
    let t = theta.rem_euclid(period);
    if t >= period {
        0.0
    } else {
        t
    }
}

fn cube_round(fq: f64, fr: f64) -> Axial {
    let fs = -fq - fr;
    let (mut q, mut r, s) = (fq.round(), fr.round(), fs.round());
    let (dq, dr, ds) = ((q - fq).abs(), (r - fr).abs(), (s - fs).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    Axial::new(q as i32, r as i32)
}

fn point_in_convex(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut sign = 0.0;
    for i in 0..n {
        let c = (poly[(i + 1) % n] - poly[i]).cross(p - poly[i]);
        if c == 0.0 {
            return false;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

/// Proper intersection of two segments (shared endpoints excluded).
fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Centers of the six edge-adjacent hexagons of `center`, at bearings
/// `theta + 30° + k·60°`.
pub fn adjacent_centers(center: Point, frame: &HexFrame) -> [Point; 6] {
    let tile = frame.tile_of(center);
    tile.neighbors().map(|t| frame.center(t))
}

/// Whether `p` lies in the hexagon centered at `center`. Points on a shared
/// edge belong to the tile with the lexicographically smaller index.
pub fn point_in_hex(p: Point, center: Point, frame: &HexFrame) -> bool {
    let rel = p - center;
    if rel.norm() > frame.side + TIE_EPS {
        return false;
    }
    let ap = frame.apothem();
    let mut on_edge = false;
    for n in frame.edge_normals() {
        let s = rel.dot(n);
        if s > ap + TIE_EPS {
            return false;
        }
        if s >= ap - TIE_EPS {
            on_edge = true;
        }
    }
    if !on_edge {
        return true;
    }
    frame.center(frame.tile_of(p)).dist(center) <= EPS_POS
}

/// The lattice center whose hexagon contains `p`.
pub fn owning_center(p: Point, frame: &HexFrame) -> Point {
    frame.center(frame.tile_of(p))
}

/// A simple (possibly non-convex) polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = GeometryError;
    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        let n = vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_cross(a, b, c, d) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
        .expect("rectangle is a valid polygon")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    pub fn area(&self) -> f64 {
        self.edges().map(|(a, b)| a.cross(b)).sum::<f64>().abs() / 2.0
    }

    pub fn centroid(&self) -> Point {
        let mut a = 0.0;
        let mut c = Point::default();
        for (p, q) in self.edges() {
            let w = p.cross(q);
            a += w;
            c = c + (p + q).scale(w);
        }
        c.scale(1.0 / (3.0 * a))
    }

    /// Even-odd point containment. Points exactly on the outline may go
    /// either way.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (vi, vj) = (self.vertices[i], self.vertices[j]);
            if (vi.y > p.y) != (vj.y > p.y) {
                let x = vj.x + (p.y - vj.y) * (vi.x - vj.x) / (vi.y - vj.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Shortest distance from `p` to the outline.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let ab = b - a;
                let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                p.dist(a + ab.scale(t))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Square-grid samples of an AoI with per-sample coverage counters, so
/// sensing disks can be added and removed incrementally.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    origin: Point,
    resolution: f64,
    cols: usize,
    rows: usize,
    /// `-1` for samples outside the AoI, otherwise the number of disks
    /// covering the sample.
    counts: Vec<i32>,
    interior: usize,
    covered: usize,
    r_s: f64,
}

impl CoverageGrid {
    pub fn new(aoi: &Polygon, r_s: f64, resolution: f64) -> Result<Self, GeometryError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(GeometryError::BadResolution(resolution));
        }
        let (lo, hi) = aoi.bbox();
        let cols = ((hi.x - lo.x) / resolution).ceil().max(1.0) as usize;
        let rows = ((hi.y - lo.y) / resolution).ceil().max(1.0) as usize;
        let mut counts = vec![-1; cols * rows];
        let mut interior = 0;
        for j in 0..rows {
            for i in 0..cols {
                let p = Point::new(
                    lo.x + (i as f64 + 0.5) * resolution,
                    lo.y + (j as f64 + 0.5) * resolution,
                );
                if aoi.contains(p) {
                    counts[j * cols + i] = 0;
                    interior += 1;
                }
            }
        }
        if interior == 0 {
            return Err(GeometryError::EmptyPolygon(resolution));
        }
        Ok(Self {
            origin: lo,
            resolution,
            cols,
            rows,
            counts,
            interior,
            covered: 0,
            r_s,
        })
    }

    fn update_disk(&mut self, c: Point, delta: i32) {
        let res = self.resolution;
        let i0 = (((c.x - self.r_s - self.origin.x) / res).floor().max(0.0)) as usize;
        let j0 = (((c.y - self.r_s - self.origin.y) / res).floor().max(0.0)) as usize;
        let i1 = (((c.x + self.r_s - self.origin.x) / res).ceil().max(0.0) as usize).min(self.cols);
        let j1 = (((c.y + self.r_s - self.origin.y) / res).ceil().max(0.0) as usize).min(self.rows);
        let r2 = self.r_s * self.r_s;
        for j in j0..j1 {
            let y = self.origin.y + (j as f64 + 0.5) * res;
            for i in i0..i1 {
                let idx = j * self.cols + i;
                if self.counts[idx] < 0 {
                    continue;
                }
                let x = self.origin.x + (i as f64 + 0.5) * res;
                if (x - c.x).powi(2) + (y - c.y).powi(2) <= r2 {
                    let before = self.counts[idx];
                    self.counts[idx] += delta;
                    if before == 0 && self.counts[idx] > 0 {
                        self.covered += 1;
                    } else if before > 0 && self.counts[idx] == 0 {
                        self.covered -= 1;
                    }
                }
            }
        }
    }

    pub fn add(&mut self, c: Point) {
        self.update_disk(c, 1);
    }

    pub fn remove(&mut self, c: Point) {
        self.update_disk(c, -1);
    }

    pub fn fraction(&self) -> f64 {
        self.covered as f64 / self.interior as f64
    }
}

/// Fraction of AoI sample points (square grid of spacing `resolution`)
/// within `r_s` of some snapped position.
pub fn coverage_fraction(
    snapped: &[Point],
    aoi: &Polygon,
    r_s: f64,
    resolution: f64,
) -> Result<f64, GeometryError> {
    let mut grid = CoverageGrid::new(aoi, r_s, resolution)?;
    for p in snapped {
        grid.add(*p);
    }
    Ok(grid.fraction())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(theta: f64) -> HexFrame {
        HexFrame::new(Point::new(0.0, 0.0), theta, 5.0, 0.0, 0)
    }

    #[test]
    fn adjacent_first_center_at_thirty_degrees() {
        let c = adjacent_centers(Point::default(), &frame(0.0));
        assert!((c[0].x - 7.5).abs() < 1e-4 && (c[0].y - 4.3301).abs() < 1e-4);
        for p in c {
            assert!((p.norm() - 8.660_254).abs() < 1e-6);
        }
    }

    #[test]
    fn rotation_by_sixty_degrees_is_same_lattice() {
        let mut a: Vec<(i64, i64)> = adjacent_centers(Point::default(), &frame(0.0))
            .iter()
            .map(|p| ((p.x * 1e4).round() as i64, (p.y * 1e4).round() as i64))
            .collect();
        let f2 = HexFrame::new(Point::default(), PI / 3.0, 5.0, 0.0, 0);
        assert_eq!(f2.theta, 0.0);
        let mut b: Vec<(i64, i64)> = adjacent_centers(Point::default(), &f2)
            .iter()
            .map(|p| ((p.x * 1e4).round() as i64, (p.y * 1e4).round() as i64))
            .collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn hex_membership_basics() {
        let f = frame(0.2);
        let c = f.center(Axial::new(2, -1));
        assert!(point_in_hex(c, c, &f));
        assert!(!point_in_hex(c + Point::from_polar(5.01, 1.0), c, &f));
        let n = Point::from_polar(1.0, f.theta + PI / 6.0);
        assert!(point_in_hex(c + n.scale(f.apothem() - 1e-6), c, &f));
        assert!(!point_in_hex(c + n.scale(f.apothem() + 1e-6), c, &f));
    }

    #[test]
    fn edge_point_goes_to_smaller_index() {
        let f = frame(0.0);
        let a = Axial::new(0, 0);
        let b = Axial::new(1, 0);
        let mid = (f.center(a) + f.center(b)).scale(0.5);
        assert!(point_in_hex(mid, f.center(a), &f));
        assert!(!point_in_hex(mid, f.center(b), &f));
        assert_eq!(f.tile_of(mid), a);
    }

    #[test]
    fn lattice_tile_detection() {
        let f = frame(0.4);
        let c = f.center(Axial::new(-3, 7));
        assert_eq!(f.lattice_tile(c), Some(Axial::new(-3, 7)));
        assert_eq!(f.lattice_tile(c + Point::new(1e-3, 0.0)), None);
    }

    #[test]
    fn entry_point_is_on_boundary() {
        let f = frame(0.1);
        let c = f.center(Axial::new(1, 0));
        let from = Point::new(0.5, -0.3);
        let e = f.entry_point(from, c);
        let rel = e - c;
        let max = f
            .edge_normals()
            .iter()
            .map(|n| rel.dot(*n))
            .fold(f64::MIN, f64::max);
        assert!((max - f.apothem()).abs() < 1e-9);
    }

    #[test]
    fn polygon_validation() {
        assert_eq!(
            Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]),
            Err(GeometryError::TooFewVertices(2))
        );
        let bowtie = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(matches!(
            Polygon::new(bowtie),
            Err(GeometryError::SelfIntersecting(..))
        ));
    }

    #[test]
    fn coverage_of_single_disk() {
        let aoi = Polygon::rectangle(0.0, 0.0, 10.0, 10.0);
        assert_eq!(coverage_fraction(&[], &aoi, 5.0, 0.05).unwrap(), 0.0);
        let f = coverage_fraction(&[Point::new(5.0, 5.0)], &aoi, 5.0, 0.05).unwrap();
        assert!((f - 0.7854).abs() < 0.01, "{f}");
        assert!(coverage_fraction(&[], &aoi, 5.0, 0.0).is_err());
    }

    #[test]
    fn full_lattice_covers_everything() {
        let aoi = Polygon::rectangle(0.0, 0.0, 40.0, 30.0);
        let f = HexFrame::new(Point::new(13.0, 7.0), 0.3, 5.0, 0.0, 0);
        let centers: Vec<Point> = f
            .tiles_overlapping(&aoi)
            .into_iter()
            .map(|t| f.center(t))
            .collect();
        assert_eq!(coverage_fraction(&centers, &aoi, 5.0, 0.25).unwrap(), 1.0);
    }

    #[test]
    fn axial_distance() {
        assert_eq!(Axial::new(0, 0).distance(Axial::new(2, -1)), 2);
        assert_eq!(Axial::new(0, 0).distance(Axial::new(-1, 1)), 1);
        assert_eq!(Axial::new(3, 0).distance(Axial::new(0, 3)), 3);
    }
}
