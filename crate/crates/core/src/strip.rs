//! Tilted stacks between two parallel lines, and the greedy axis-aligned
//! filler used for every leftover piece.
//!
//! A stack is a 1 x m column of unit squares rotated by a small angle α so
//! that its extent across the strip, m·cos α + sin α, equals the span.
//! Neighbouring stacks touch along their long sides, so they repeat every
//! sec α along the strip and each one wastes tan α.

use crate::error::{PackError, Result};
use crate::geometry::{GridBlock, HalfPlane, PlacedSquare, Point, Region};
use crate::verifier::Layout;

pub const STRIP_TAG: &str = "strip";
pub const NAIVE_TAG: &str = "naive";

const FIT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripSpec {
    pub span: f64,
    pub length: f64,
    pub stack_size: u64,
}

impl StripSpec {
    pub fn new(span: f64, length: f64, stack_size: u64) -> Result<Self> {
        let slack = stack_size as f64 - span;
        if !(span >= 2.0) || !(0.0..=2.0).contains(&slack) || !(length > 0.0) {
            return Err(PackError::Infeasible(format!(
                "strip needs span >= 2, 0 <= stack - span <= 2 and positive length; got span {span}, stack {stack_size}, length {length}"
            )));
        }
        Ok(Self {
            span,
            length,
            stack_size,
        })
    }

    /// The rectangle `[0, length] x [0, span]`.
    pub fn rectangle(&self) -> Result<Region> {
        Region::rectangle(0.0, 0.0, self.length, self.span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSolution {
    pub alpha: f64,
    /// Distance between neighbouring stacks along the strip, sec α.
    pub stack_footprint_width: f64,
}

/// m·cos α + sin α − span, written to avoid cancellation near α = 0.
fn tilt_residual(m: f64, span: f64, alpha: f64) -> f64 {
    let h = (0.5 * alpha).sin();
    (m - span) - 2.0 * m * h * h + alpha.sin()
}

/// Smallest α in `[0, π/4)` with `stack_size·cos α + sin α = span`.
pub fn solve_tilt(stack_size: u64, span: f64) -> Result<TiltSolution> {
    let m = stack_size as f64;
    if !(span > 0.0) || stack_size == 0 {
        return Err(PackError::Infeasible(format!(
            "no tilt for stack {stack_size} and span {span}"
        )));
    }
    let solution = |alpha: f64| TiltSolution {
        alpha,
        stack_footprint_width: 1.0 / alpha.cos(),
    };
    if span == m {
        return Ok(solution(0.0));
    }
    let peak = (1.0 / m).atan();
    let top = std::f64::consts::FRAC_PI_4;
    // The residual rises on [0, peak] and falls on [peak, π/4].
    let (mut lo, mut hi) = if span > m {
        if tilt_residual(m, span, peak) < 0.0 {
            return Err(PackError::Infeasible(format!(
                "span {span} exceeds the widest extent of a {stack_size}-stack"
            )));
        }
        (0.0, peak)
    } else {
        if tilt_residual(m, span, top) > 0.0 {
            return Err(PackError::Infeasible(format!(
                "span {span} is too small for a {stack_size}-stack tilted below 45 degrees"
            )));
        }
        (peak, top)
    };
    let rising = span > m;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = tilt_residual(m, span, mid);
        if (f < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = if tilt_residual(m, span, lo).abs() <= tilt_residual(m, span, hi).abs() {
        lo
    } else {
        hi
    };
    Ok(solution(alpha))
}

/// Frame of a stack tilted by `alpha`: `u` runs across the stack, `v` along it.
fn stack_axes(alpha: f64) -> (Point, Point) {
    let (s, c) = alpha.sin_cos();
    (Point::new(c, s), Point::new(-s, c))
}

/// Squares of one stack whose lowest corner is `foot`.
pub fn stack_squares(
    foot: Point,
    alpha: f64,
    stack_size: u64,
) -> impl Iterator<Item = PlacedSquare> {
    let (u, v) = stack_axes(alpha);
    (0..stack_size).map(move |q| PlacedSquare::new(foot + u * 0.5 + v * (q as f64 + 0.5), alpha))
}

/// Parallelogram between `y = origin.y` and `y = origin.y + span` whose
/// slanted sides follow the stacks and which holds exactly `stacks` of them.
pub fn stack_parallelogram(origin: Point, span: f64, alpha: f64, stacks: u64) -> Result<Region> {
    let (_, v) = stack_axes(alpha);
    let along = Point::new(stacks as f64 / alpha.cos(), 0.0);
    let up = v * (span / alpha.cos());
    Region::new(vec![
        origin,
        origin + along,
        origin + along + up,
        origin + up,
    ])
}

/// Range of foot abscissae for which a stack standing on `y = base` stays in
/// `planes`. Empty ranges come back with `lo > hi`.
fn foot_range(planes: &[HalfPlane], base: f64, alpha: f64, stack_size: u64) -> (f64, f64) {
    let (u, v) = stack_axes(alpha);
    let corners = [
        Point::default(),
        u,
        u + v * stack_size as f64,
        v * stack_size as f64,
    ];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for h in planes {
        for c in corners {
            let rest = h.offset - h.normal.dot(c + Point::new(0.0, base));
            if h.normal.x > 1e-15 {
                hi = hi.min(rest / h.normal.x);
            } else if h.normal.x < -1e-15 {
                lo = lo.max(rest / h.normal.x);
            } else if rest < -FIT_EPS {
                return (1.0, 0.0);
            }
        }
    }
    (lo, hi)
}

/// Packs side-by-side tilted stacks into a region lying between two
/// horizontal lines `span` apart. Stacks start at the leftmost feasible
/// position; leftovers at either end are left empty. The squares are tagged
/// [`STRIP_TAG`], and that tag owns the parallelogram swept by the stacks.
pub fn pack_parallel_strip(spec: &StripSpec, region: &Region) -> Result<Layout> {
    let (lo, hi) = region.bbox();
    let height = hi.y - lo.y;
    if (height - spec.span).abs() > 1e-9 * spec.span.max(1.0) {
        return Err(PackError::InvalidRegion(format!(
            "region height {height} does not match span {}",
            spec.span
        )));
    }
    let tilt = solve_tilt(spec.stack_size, spec.span)?;
    let alpha = tilt.alpha;
    let pitch = tilt.stack_footprint_width;
    let mut layout = Layout::new(region.clone());
    layout.meta.insert("alpha".into(), alpha.into());

    let (t0, t1) = foot_range(&region.half_planes(), lo.y, alpha, spec.stack_size);
    if t1 < t0 - FIT_EPS {
        return Ok(layout);
    }
    let stacks = ((t1 - t0) / pitch + FIT_EPS).floor() as u64 + 1;
    for k in 0..stacks {
        let foot = Point::new(t0 + k as f64 * pitch, lo.y);
        for s in stack_squares(foot, alpha, spec.stack_size) {
            layout.push_square(s, STRIP_TAG);
        }
    }
    layout.add_tag_area(STRIP_TAG, stacks as f64 * pitch * spec.span);
    layout.meta.insert("stacks".into(), stacks.into());
    Ok(layout)
}

/// Greedy axis-aligned filling. Rows of unit height are taken downward from
/// the top of the bounding box; each row holds the longest run of squares
/// that fits, pushed to the left. Every non-empty row becomes one grid block
/// tagged `tag`.
pub fn pack_naive_into(layout: &mut Layout, region: &Region, tag: &str) {
    let planes = region.half_planes();
    let (lo, hi) = region.bbox();
    let rows = ((hi.y - lo.y) + FIT_EPS).floor().max(0.0) as u64;
    for r in 0..rows {
        let top = hi.y - r as f64;
        let bottom = top - 1.0;
        let (mut xl, mut xr) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut blocked = false;
        for h in &planes {
            for y in [bottom, top] {
                let rest = h.offset - h.normal.y * y;
                if h.normal.x > 1e-15 {
                    // Right edge of the row at x + 1.
                    xr = xr.min(rest / h.normal.x);
                } else if h.normal.x < -1e-15 {
                    xl = xl.max(rest / h.normal.x);
                } else if rest < -FIT_EPS {
                    blocked = true;
                }
            }
        }
        if blocked || !xl.is_finite() || !xr.is_finite() {
            continue;
        }
        let cols = (xr - xl + FIT_EPS).floor();
        if cols >= 1.0 {
            let block = GridBlock::new(Point::new(xl, bottom), cols as u64, 1)
                .expect("row has at least one column");
            layout.push_block(block, tag);
        }
    }
}

/// [`pack_naive_into`] on a fresh layout, tagged [`NAIVE_TAG`].
pub fn pack_naive_region(region: &Region) -> Layout {
    let mut layout = Layout::new(region.clone());
    pack_naive_into(&mut layout, region, NAIVE_TAG);
    layout.add_tag_area(NAIVE_TAG, region.area());
    layout
}
