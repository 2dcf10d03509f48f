//! Polygonal Jordan disks and the planar statistics built on them.

mod fill;
mod stats;

pub use fill::fill_union;
pub use stats::{
    modulus_lower_bound, pseudo_hyperbolic_ball, shape_stats, ModulusBound, ModulusMethod,
    ShapeStats, SURROGATE_DISTORTION,
};

use std::f64::consts::TAU;

use geo::{Coord, LineString};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DynError, Result};

/// Default number of boundary samples for constructed disks.
pub const BOUNDARY_RESOLUTION: usize = 512;
/// Adjacent boundary samples should be at most this fraction of the diameter
/// apart.
pub const MAX_GAP_FRACTION: f64 = 0.01;

#[inline]
pub(crate) fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

#[inline]
pub(crate) fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

pub(crate) fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm_sqr().sqrt();
    }
    let t = (dot(p - a, ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm_sqr().sqrt()
}

/// A topological disk approximated by a closed counterclockwise polyline.
///
/// Disks built by [`JordanDisk::circle`] remember that they are round; the
/// radius statistics and containment tests then use the exact circle and the
/// polyline is only its rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanDisk {
    boundary: Vec<Complex64>,
    basepoint: Complex64,
    diameter: f64,
    bbox: [f64; 4],
    round: Option<(Complex64, f64)>,
}

impl JordanDisk {
    /// Builds a disk from a closed polyline (first point not repeated).
    /// The orientation is normalised to counterclockwise.
    pub fn from_polyline(mut boundary: Vec<Complex64>, basepoint: Complex64) -> Result<Self> {
        if boundary.len() > 1 && boundary.first() == boundary.last() {
            boundary.pop();
        }
        boundary.dedup();
        if boundary.len() < 3 {
            return Err(DynError::DegenerateDisk(format!(
                "{} boundary points",
                boundary.len()
            )));
        }
        if boundary
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(DynError::DegenerateDisk("non-finite boundary point".into()));
        }
        if signed_area(&boundary) < 0.0 {
            boundary.reverse();
        }
        let disk = Self::assemble(boundary, basepoint, None);
        if disk.diameter <= 0.0 {
            return Err(DynError::DegenerateDisk("zero diameter".into()));
        }
        let w = winding_number(&disk.boundary, basepoint);
        if w != 1 {
            return Err(DynError::DegenerateDisk(format!(
                "winding number {w} around basepoint {basepoint}"
            )));
        }
        if !disk.is_simple() {
            return Err(DynError::DegenerateDisk("self-intersecting boundary".into()));
        }
        Ok(disk)
    }

    fn assemble(boundary: Vec<Complex64>, basepoint: Complex64, round: Option<(Complex64, f64)>) -> Self {
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for z in &boundary {
            bbox[0] = bbox[0].min(z.re);
            bbox[1] = bbox[1].min(z.im);
            bbox[2] = bbox[2].max(z.re);
            bbox[3] = bbox[3].max(z.im);
        }
        let diameter = point_set_diameter(&boundary);
        Self {
            boundary,
            basepoint,
            diameter,
            bbox,
            round,
        }
    }

    /// Round disk sampled at [`BOUNDARY_RESOLUTION`] points.
    pub fn circle(center: Complex64, radius: f64) -> Result<Self> {
        Self::circle_with(center, radius, BOUNDARY_RESOLUTION)
    }

    pub fn circle_with(center: Complex64, radius: f64, m: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || m < 3 {
            return Err(DynError::DegenerateDisk(format!("circle radius {radius}")));
        }
        let boundary = (0..m)
            .map(|k| center + Complex64::from_polar(radius, TAU * k as f64 / m as f64))
            .collect();
        Ok(Self::assemble(boundary, center, Some((center, radius))))
    }

    pub fn ellipse(center: Complex64, semi_x: f64, semi_y: f64) -> Result<Self> {
        let m = BOUNDARY_RESOLUTION;
        let boundary = (0..m)
            .map(|k| {
                let t = TAU * k as f64 / m as f64;
                center + Complex64::new(semi_x * t.cos(), semi_y * t.sin())
            })
            .collect();
        Self::from_polyline(boundary, center)
    }

    /// Axis-parallel square with the given side, sampled densely on each edge.
    pub fn square(center: Complex64, side: f64) -> Result<Self> {
        let h = side / 2.0;
        let corners = [
            Complex64::new(-h, -h),
            Complex64::new(h, -h),
            Complex64::new(h, h),
            Complex64::new(-h, h),
        ];
        let per_edge = BOUNDARY_RESOLUTION / 4;
        let mut boundary = Vec::with_capacity(BOUNDARY_RESOLUTION);
        for i in 0..4 {
            let (a, b) = (corners[i], corners[(i + 1) % 4]);
            for k in 0..per_edge {
                boundary.push(center + a + (b - a) * (k as f64 / per_edge as f64));
            }
        }
        Self::from_polyline(boundary, center)
    }

    /// Convex hull of a point set, as a disk based at `basepoint`.
    pub fn convex_hull(points: &[Complex64], basepoint: Complex64) -> Result<Self> {
        let hull = convex_hull_ring(points);
        Self::from_polyline(hull, basepoint)
    }

    pub fn boundary(&self) -> &[Complex64] {
        &self.boundary
    }

    pub fn basepoint(&self) -> Complex64 {
        self.basepoint
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn round(&self) -> Option<(Complex64, f64)> {
        self.round
    }

    /// `[min_re, min_im, max_re, max_im]` of the boundary polyline.
    pub fn bounding_box(&self) -> [f64; 4] {
        self.bbox
    }

    pub fn len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn with_basepoint(&self, basepoint: Complex64) -> Result<Self> {
        if !self.contains(basepoint) {
            return Err(DynError::NotInside(basepoint));
        }
        let mut d = self.clone();
        d.basepoint = basepoint;
        Ok(d)
    }

    /// Image under `z -> scale * z + shift`, `scale > 0`.
    pub fn affine(&self, scale: f64, shift: Complex64) -> Self {
        let map = |z: Complex64| z * scale + shift;
        let boundary = self.boundary.iter().map(|&z| map(z)).collect();
        let round = self.round.map(|(c, r)| (map(c), r * scale));
        Self::assemble(boundary, map(self.basepoint), round)
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.boundary)
    }

    /// Area centroid of the polygon.
    pub fn centroid(&self) -> Complex64 {
        if let Some((c, _)) = self.round {
            return c;
        }
        let n = self.boundary.len();
        let origin = self.boundary[0];
        let mut acc = Complex64::new(0.0, 0.0);
        let mut area2 = 0.0;
        for i in 0..n {
            let a = self.boundary[i] - origin;
            let b = self.boundary[(i + 1) % n] - origin;
            let w = cross(a, b);
            area2 += w;
            acc += (a + b) * w;
        }
        if area2 == 0.0 {
            return self.basepoint;
        }
        origin + acc / (3.0 * area2)
    }

    /// Open-set membership. Points on the polyline count as outside.
    pub fn contains(&self, z: Complex64) -> bool {
        if let Some((c, r)) = self.round {
            return (z - c).norm_sqr().sqrt() < r;
        }
        if z.re < self.bbox[0] || z.re > self.bbox[2] || z.im < self.bbox[1] || z.im > self.bbox[3] {
            return false;
        }
        crossing_inside(&self.boundary, z)
    }

    /// Euclidean distance from `z` to the boundary curve.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        if let Some((c, r)) = self.round {
            return ((z - c).norm_sqr().sqrt() - r).abs();
        }
        let n = self.boundary.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            best = best.min(segment_distance(z, self.boundary[i], self.boundary[(i + 1) % n]));
        }
        best
    }

    /// Largest distance from `z` to a boundary point.
    pub fn max_boundary_distance(&self, z: Complex64) -> f64 {
        if let Some((c, r)) = self.round {
            return (z - c).norm_sqr().sqrt() + r;
        }
        self.boundary
            .iter()
            .map(|&p| (p - z).norm_sqr().sqrt())
            .fold(0.0, f64::max)
    }

    /// Distance from the closed disk to `z` (0 when `z` is inside).
    pub fn distance_to(&self, z: Complex64) -> f64 {
        if self.contains(z) {
            0.0
        } else {
            self.boundary_distance(z)
        }
    }

    /// Largest gap between consecutive boundary samples.
    pub fn max_gap(&self) -> f64 {
        let n = self.boundary.len();
        (0..n)
            .map(|i| (self.boundary[(i + 1) % n] - self.boundary[i]).norm_sqr().sqrt())
            .fold(0.0, f64::max)
    }

    /// No two non-adjacent edges intersect. Edges are hashed into a sparse
    /// grid with cells about twice the mean edge length, so the check is close
    /// to linear in the number of edges.
    pub fn is_simple(&self) -> bool {
        let pts = &self.boundary;
        let n = pts.len();
        if n < 4 {
            return true;
        }
        let perimeter: f64 = (0..n).map(|i| (pts[(i + 1) % n] - pts[i]).norm_sqr().sqrt()).sum();
        let size = (2.0 * perimeter / n as f64).max(f64::MIN_POSITIVE);
        let [x0, y0, _, _] = self.bbox;
        let cell = |v: f64, lo: f64| (((v - lo) / size) as u64).min(u32::MAX as u64);
        // key = cell x, cell y, edge index packed into one word
        let mut keys: Vec<(u64, u32)> = Vec::with_capacity(4 * n);
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            for cx in cell(a.re.min(b.re), x0)..=cell(a.re.max(b.re), x0) {
                for cy in cell(a.im.min(b.im), y0)..=cell(a.im.max(b.im), y0) {
                    keys.push((cx << 32 | cy, i as u32));
                }
            }
        }
        keys.sort_unstable_by_key(|k| k.0);
        let mut start = 0;
        while start < keys.len() {
            let mut end = start + 1;
            while end < keys.len() && keys[end].0 == keys[start].0 {
                end += 1;
            }
            for s in start..end {
                let i = keys[s].1 as usize;
                for t in s + 1..end {
                    let j = keys[t].1 as usize;
                    let adjacent = j == i + 1 || i == j + 1 || (i == 0 && j == n - 1) || (j == 0 && i == n - 1);
                    if !adjacent && segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                        return false;
                    }
                }
            }
            start = end;
        }
        true
    }

    /// Whether the closure of `inner` lies in this open disk.
    pub fn contains_disk(&self, inner: &JordanDisk) -> bool {
        match (self.round, inner.round) {
            (Some((c1, r1)), Some((c2, r2))) => (c1 - c2).norm_sqr().sqrt() + r2 < r1,
            (Some((c1, r1)), None) => inner.boundary.iter().all(|&p| (p - c1).norm_sqr().sqrt() < r1),
            (None, Some((c2, r2))) => self.contains(c2) && self.boundary_distance(c2) > r2,
            (None, None) => {
                inner.boundary.iter().all(|&p| self.contains(p))
                    && !boundaries_cross(&self.boundary, &inner.boundary)
            }
        }
    }

    /// Hausdorff distance between the two boundary polylines (vertex to curve,
    /// both directions).
    pub fn boundary_hausdorff(&self, other: &JordanDisk) -> f64 {
        let one = |a: &JordanDisk, b: &JordanDisk| {
            a.boundary
                .iter()
                .map(|&p| b.polyline_distance(p))
                .fold(0.0, f64::max)
        };
        one(self, other).max(one(other, self))
    }

    /// Distance from `z` to the boundary polyline itself, ignoring any round hint.
    pub fn polyline_distance(&self, z: Complex64) -> f64 {
        let n = self.boundary.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            best = best.min(segment_distance(z, self.boundary[i], self.boundary[(i + 1) % n]));
        }
        best
    }
}

fn signed_area(pts: &[Complex64]) -> f64 {
    let n = pts.len();
    let origin = pts[0];
    let mut s = 0.0;
    for i in 0..n {
        s += cross(pts[i] - origin, pts[(i + 1) % n] - origin);
    }
    s / 2.0
}

/// Winding number of a closed polyline around `z` by summed angle increments.
/// Signed count of upward minus downward crossings of the ray to the right
/// of `z`.
pub(crate) fn winding_number(pts: &[Complex64], z: Complex64) -> i64 {
    let n = pts.len();
    let mut wn = 0;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        if a.im <= z.im {
            if b.im > z.im && orient(a, b, z) > 0.0 {
                wn += 1;
            }
        } else if b.im <= z.im && orient(a, b, z) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn crossing_inside(pts: &[Complex64], z: Complex64) -> bool {
    let n = pts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a.im > z.im) != (b.im > z.im) {
            let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if z.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    cross(b - a, c - a)
}

pub(crate) fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Complex64, q: Complex64, r: Complex64| {
        r.re >= p.re.min(q.re) && r.re <= p.re.max(q.re) && r.im >= p.im.min(q.im) && r.im <= p.im.max(q.im)
    };
    (d1 == 0.0 && on(c, d, a))
        || (d2 == 0.0 && on(c, d, b))
        || (d3 == 0.0 && on(a, b, c))
        || (d4 == 0.0 && on(a, b, d))
}

fn boundaries_cross(p: &[Complex64], q: &[Complex64]) -> bool {
    let (n, m) = (p.len(), q.len());
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        let (lo_x, hi_x) = (a.re.min(b.re), a.re.max(b.re));
        let (lo_y, hi_y) = (a.im.min(b.im), a.im.max(b.im));
        for j in 0..m {
            let (c, d) = (q[j], q[(j + 1) % m]);
            if c.re.max(d.re) < lo_x || c.re.min(d.re) > hi_x || c.im.max(d.im) < lo_y || c.im.min(d.im) > hi_y {
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Counterclockwise hull vertices by Andrew's monotone chain; collinear
/// points are dropped.
fn convex_hull_ring(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 1] - hull[hull.len() - 2], p - hull[hull.len() - 2]) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        // the last point of each chain starts the other one
        hull.pop();
    }
    hull
}

pub(crate) fn ring_to_points(ring: &LineString<f64>) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = ring.0.iter().map(|c| Complex64::new(c.x, c.y)).collect();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    pts
}

pub(crate) fn points_to_ring(pts: &[Complex64]) -> LineString<f64> {
    let mut coords: Vec<Coord<f64>> = pts.iter().map(|z| Coord { x: z.re, y: z.im }).collect();
    coords.push(coords[0]);
    LineString::new(coords)
}

/// Maximum pairwise distance, attained between convex hull vertices and
/// found by rotating calipers.
pub(crate) fn point_set_diameter(points: &[Complex64]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    if points.len() <= 8 {
        return brute_diameter(points);
    }
    let hull = convex_hull_ring(points);
    let h = hull.len();
    if h < 4 {
        return brute_diameter(&hull);
    }
    let height = |i: usize, j: usize| cross(hull[(i + 1) % h] - hull[i], hull[j] - hull[i]).abs();
    let mut best = 0.0f64;
    let mut j = 1;
    for i in 0..h {
        let mut steps = 0;
        while steps < h && height(i, (j + 1) % h) > height(i, j) {
            j = (j + 1) % h;
            steps += 1;
        }
        best = best
            .max((hull[i] - hull[j]).norm_sqr())
            .max((hull[(i + 1) % h] - hull[j]).norm_sqr());
    }
    best.sqrt()
}

fn brute_diameter(points: &[Complex64]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.max((points[i] - points[j]).norm_sqr());
        }
    }
    best.sqrt()
}

#[derive(Serialize, Deserialize)]
struct DiskRepr {
    #[serde(with = "crate::cser::vec")]
    boundary: Vec<Complex64>,
    #[serde(with = "crate::cser::one")]
    basepoint: Complex64,
}

impl Serialize for JordanDisk {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DiskRepr {
            boundary: self.boundary.clone(),
            basepoint: self.basepoint,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JordanDisk {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = DiskRepr::deserialize(d)?;
        JordanDisk::from_polyline(r.boundary, r.basepoint).map_err(serde::de::Error::custom)
    }
}
