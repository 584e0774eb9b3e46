//! Planar primitives shared by every packer: points, unit squares with a pose,
//! convex regions and analytic grid blocks.
//!
//! Lengths are measured in unit-square sides and all arithmetic is `f64`.
//! Predicates take an explicit tolerance instead of pretending to be exact.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector at `angle` radians from the positive x-axis.
    pub fn polar(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Maps any angle onto `[-π/4, π/4)`, the canonical pose of a square.
pub fn canonical_angle(angle: f64) -> f64 {
    if (-FRAC_PI_4..FRAC_PI_4).contains(&angle) {
        return angle;
    }
    let a = (angle + FRAC_PI_4).rem_euclid(FRAC_PI_2) - FRAC_PI_4;
    if a >= FRAC_PI_4 {
        -FRAC_PI_4
    } else {
        a
    }
}

/// A unit square given by its center and rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedSquare {
    pub center: Point,
    angle: f64,
}

impl PlacedSquare {
    pub fn new(center: Point, angle: f64) -> Self {
        Self {
            center,
            angle: canonical_angle(angle),
        }
    }

    pub fn axis_aligned(center: Point) -> Self {
        Self { center, angle: 0.0 }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Edge directions of the square (both unit length).
    pub fn axes(&self) -> (Point, Point) {
        let u = Point::polar(self.angle);
        (u, Point::new(-u.y, u.x))
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point; 4] {
        self.corners_with_half(0.5)
    }

    fn corners_with_half(&self, half: f64) -> [Point; 4] {
        let (u, v) = self.axes();
        let (u, v) = (u * half, v * half);
        let c = self.center;
        [c - u - v, c + u - v, c + u + v, c - u + v]
    }

    fn projection(&self, (u, v): (Point, Point), axis: Point, half: f64) -> (f64, f64) {
        let mid = self.center.dot(axis);
        let r = half * (u.dot(axis).abs() + v.dot(axis).abs());
        (mid - r, mid + r)
    }
}

/// Signed overlap of two squares, each shrunk by `shrink` on every side.
///
/// Returns the smallest projection overlap over the four edge normals.
/// Positive means the interiors intersect (the value is the penetration
/// depth); zero or negative means a separating axis exists and `-value`
/// is the gap along it.
pub fn overlap_depth(a: &PlacedSquare, b: &PlacedSquare, shrink: f64) -> f64 {
    let half = 0.5 - shrink;
    let (au, av) = a.axes();
    let mut depth = f64::INFINITY;
    if a.angle == b.angle {
        for axis in [au, av] {
            let d = (b.center - a.center).dot(axis).abs();
            depth = depth.min(2.0 * half - d);
        }
        return depth;
    }
    let (bu, bv) = b.axes();
    for axis in [au, av, bu, bv] {
        let (alo, ahi) = a.projection((au, av), axis, half);
        let (blo, bhi) = b.projection((bu, bv), axis, half);
        depth = depth.min(ahi.min(bhi) - alo.max(blo));
    }
    depth
}

/// Separating-axis overlap test on squares shrunk by `shrink` per side.
pub fn squares_overlap(a: &PlacedSquare, b: &PlacedSquare, shrink: f64) -> bool {
    overlap_depth(a, b, shrink) > 0.0
}

/// Outward half-plane `normal · p <= offset`; `normal` has unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Point,
    pub offset: f64,
}

impl HalfPlane {
    /// Half-plane to the left of the directed line `from -> to`.
    pub fn left_of(from: Point, to: Point) -> Self {
        let d = to - from;
        let len = d.norm();
        let normal = Point::new(d.y / len, -d.x / len);
        Self {
            normal,
            offset: normal.dot(from),
        }
    }

    /// Positive when `p` is outside.
    pub fn excess(&self, p: Point) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Infinite line through `origin` along `dir`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub origin: Point,
    pub dir: Point,
}

impl Line {
    pub fn new(origin: Point, dir: Point) -> Self {
        Self { origin, dir }
    }

    pub fn through(a: Point, b: Point) -> Self {
        Self::new(a, b - a)
    }

    /// Intersection point, or `None` for (near-)parallel lines.
    pub fn intersect(&self, other: &Line) -> Option<Point> {
        let denom = self.dir.cross(other.dir);
        if denom.abs() <= 1e-300 {
            return None;
        }
        let t = (other.origin - self.origin).cross(other.dir) / denom;
        Some(self.origin + self.dir * t)
    }

    /// y-coordinate at abscissa `x`. The line must not be vertical.
    pub fn y_at(&self, x: f64) -> f64 {
        self.origin.y + (x - self.origin.x) * self.dir.y / self.dir.x
    }

    /// x-coordinate at ordinate `y`. The line must not be horizontal.
    pub fn x_at(&self, y: f64) -> f64 {
        self.origin.x + (y - self.origin.y) * self.dir.x / self.dir.y
    }
}

/// Signed shoelace area of a closed polygon (positive when counter-clockwise).
pub fn signed_area(points: &[Point]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let o = points[0];
    let mut acc = 0.0;
    for w in points[1..].windows(2) {
        acc += (w[0] - o).cross(w[1] - o);
    }
    0.5 * acc
}

/// Shoelace area of a counter-clockwise polygon. Fails on zero or negative area.
pub fn polygon_area(points: &[Point]) -> Result<f64> {
    let area = signed_area(points);
    if area > 0.0 && area.is_finite() {
        Ok(area)
    } else {
        Err(PackError::InvalidRegion(format!(
            "polygon area {area} is not positive"
        )))
    }
}

/// Strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    vertices: Vec<Point>,
}

impl Region {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(PackError::InvalidRegion(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(PackError::InvalidRegion(format!("non-finite vertex {p:?}")));
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let turn = (b - a).cross(c - b);
            if turn <= 0.0 {
                return Err(PackError::InvalidRegion(format!(
                    "vertex {} is not a strictly convex counter-clockwise turn",
                    (i + 1) % n
                )));
            }
        }
        polygon_area(&vertices)?;
        Ok(Self { vertices })
    }

    /// Like [`Region::new`] but first drops duplicate and collinear vertices,
    /// which clipping tends to produce.
    pub fn from_loose(vertices: Vec<Point>) -> Result<Self> {
        Self::new(simplify(vertices))
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Interior half-planes, one per edge. Their normals point outward.
    pub fn half_planes(&self) -> Vec<HalfPlane> {
        self.edges()
            .map(|(a, b)| HalfPlane::left_of(a, b))
            .collect()
    }

    /// (min, max) corners of the bounding box.
    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Point, slack: f64) -> bool {
        self.half_planes().iter().all(|h| h.excess(p) <= slack)
    }

    /// Keeps the part of the region inside `keep`. `None` if nothing of
    /// positive area remains.
    pub fn clip(&self, keep: &HalfPlane) -> Option<Region> {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let ea = keep.excess(a);
            let eb = keep.excess(b);
            if ea <= 0.0 {
                out.push(a);
            }
            if (ea < 0.0 && eb > 0.0) || (ea > 0.0 && eb < 0.0) {
                let t = ea / (ea - eb);
                out.push(a + (b - a) * t);
            }
        }
        Region::from_loose(out).ok()
    }

    /// Keeps the part of the region to the left of the directed line `from -> to`.
    pub fn clip_left_of(&self, from: Point, to: Point) -> Option<Region> {
        self.clip(&HalfPlane::left_of(from, to))
    }

    pub fn translated(&self, by: Point) -> Region {
        Region {
            vertices: self.vertices.iter().map(|&p| p + by).collect(),
        }
    }
}

fn simplify(mut pts: Vec<Point>) -> Vec<Point> {
    let scale = pts
        .iter()
        .fold(1.0_f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
    let eps = 1e-13 * scale;
    pts.dedup_by(|a, b| (*a - *b).norm() <= eps);
    while pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm() <= eps {
        pts.pop();
    }
    let mut changed = true;
    while changed && pts.len() >= 3 {
        changed = false;
        let n = pts.len();
        for i in 0..n {
            let a = pts[(i + n - 1) % n];
            let b = pts[i];
            let c = pts[(i + 1) % n];
            let ab = b - a;
            let bc = c - b;
            let turn = ab.cross(bc);
            if turn <= eps * (ab.norm() + bc.norm()) {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    pts
}

/// Largest amount by which any corner of `s` leaves `region`.
pub fn containment_excess(s: &PlacedSquare, region: &Region) -> f64 {
    excess_of_points(&s.corners(), &region.half_planes())
}

pub(crate) fn excess_of_points(points: &[Point], planes: &[HalfPlane]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for p in points {
        for h in planes {
            worst = worst.max(h.excess(*p));
        }
    }
    worst
}

/// True iff every corner of `s` is inside every edge half-plane of
/// `region`, allowing each corner to stick out by at most `slack`.
pub fn square_in_region(s: &PlacedSquare, region: &Region, slack: f64) -> bool {
    containment_excess(s, region) <= slack
}

/// `cols x rows` axis-aligned unit squares whose lower-left corner is `origin`.
/// The squares are counted, never materialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBlock {
    pub origin: Point,
    pub cols: u64,
    pub rows: u64,
}

impl GridBlock {
    pub fn new(origin: Point, cols: u64, rows: u64) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(PackError::InvalidRegion(format!(
                "grid block must be at least 1x1, got {cols}x{rows}"
            )));
        }
        Ok(Self { origin, cols, rows })
    }

    pub fn count(&self) -> u64 {
        self.cols * self.rows
    }

    pub fn corners(&self) -> [Point; 4] {
        let o = self.origin;
        let (w, h) = (self.cols as f64, self.rows as f64);
        [
            o,
            Point::new(o.x + w, o.y),
            Point::new(o.x + w, o.y + h),
            Point::new(o.x, o.y + h),
        ]
    }

    pub fn rect(&self) -> Region {
        Region {
            vertices: self.corners().to_vec(),
        }
    }
}

/// Signed overlap between the hulls of two grid blocks shrunk by `shrink`.
pub fn block_overlap_depth(a: &GridBlock, b: &GridBlock, shrink: f64) -> f64 {
    let [alo, _, ahi, _] = a.corners();
    let [blo, _, bhi, _] = b.corners();
    let dx = (ahi.x - shrink).min(bhi.x - shrink) - (alo.x + shrink).max(blo.x + shrink);
    let dy = (ahi.y - shrink).min(bhi.y - shrink) - (alo.y + shrink).max(blo.y + shrink);
    dx.min(dy)
}

/// Signed overlap between a square and the hull of a grid block.
pub fn square_block_depth(s: &PlacedSquare, b: &GridBlock, shrink: f64) -> f64 {
    let [lo, _, hi, _] = b.corners();
    let (lo, hi) = (
        Point::new(lo.x + shrink, lo.y + shrink),
        Point::new(hi.x - shrink, hi.y - shrink),
    );
    let half = 0.5 - shrink;
    let (u, v) = s.axes();
    let mut depth = f64::INFINITY;
    // Axes of the block.
    for (axis, blo, bhi) in [
        (Point::new(1.0, 0.0), lo.x, hi.x),
        (Point::new(0.0, 1.0), lo.y, hi.y),
    ] {
        let (slo, shi) = s.projection((u, v), axis, half);
        depth = depth.min(shi.min(bhi) - slo.max(blo));
    }
    // Axes of the square.
    let rect = [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)];
    for axis in [u, v] {
        let (slo, shi) = s.projection((u, v), axis, half);
        let (mut rlo, mut rhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in rect {
            let d = p.dot(axis);
            rlo = rlo.min(d);
            rhi = rhi.max(d);
        }
        depth = depth.min(shi.min(rhi) - slo.max(rlo));
    }
    depth
}

/// Rigid motion of the plane made of an optional mirror in the y-axis, a
/// rotation by a multiple of 90 degrees, and a translation (applied in that
/// order). These are exactly the motions that keep grid blocks axis-aligned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMotion {
    pub mirror: bool,
    pub quarter_turns: u8,
    pub shift: Point,
}

impl GridMotion {
    pub fn identity() -> Self {
        Self {
            mirror: false,
            quarter_turns: 0,
            shift: Point::default(),
        }
    }

    pub fn new(mirror: bool, quarter_turns: u8, shift: Point) -> Self {
        Self {
            mirror,
            quarter_turns: quarter_turns % 4,
            shift,
        }
    }

    /// The motion that applies `self` first and `outer` second.
    pub fn then(&self, outer: &GridMotion) -> GridMotion {
        let turns = if outer.mirror {
            outer.quarter_turns + 4 - self.quarter_turns
        } else {
            outer.quarter_turns + self.quarter_turns
        };
        GridMotion::new(self.mirror != outer.mirror, turns, outer.apply(self.shift))
    }

    pub fn apply(&self, p: Point) -> Point {
        let p = if self.mirror {
            Point::new(-p.x, p.y)
        } else {
            p
        };
        let p = match self.quarter_turns {
            0 => p,
            1 => Point::new(-p.y, p.x),
            2 => Point::new(-p.x, -p.y),
            _ => Point::new(p.y, -p.x),
        };
        p + self.shift
    }

    pub fn apply_square(&self, s: &PlacedSquare) -> PlacedSquare {
        let a = if self.mirror { -s.angle } else { s.angle };
        PlacedSquare::new(
            self.apply(s.center),
            a + f64::from(self.quarter_turns) * FRAC_PI_2,
        )
    }

    pub fn apply_block(&self, b: &GridBlock) -> GridBlock {
        let pts = b.corners().map(|p| self.apply(p));
        let lo = pts
            .iter()
            .fold(Point::new(f64::INFINITY, f64::INFINITY), |m, p| {
                Point::new(m.x.min(p.x), m.y.min(p.y))
            });
        let (cols, rows) = if self.quarter_turns % 2 == 1 {
            (b.rows, b.cols)
        } else {
            (b.cols, b.rows)
        };
        GridBlock {
            origin: lo,
            cols,
            rows,
        }
    }

    /// Maps a region, restoring counter-clockwise order after a mirror.
    pub fn apply_region(&self, r: &Region) -> Region {
        let mut v: Vec<Point> = r.vertices().iter().map(|&p| self.apply(p)).collect();
        if self.mirror {
            v.reverse();
        }
        Region { vertices: v }
    }
}
