//! Right trapezoids filled with a vertical chain of tilted quadrilaterals.
//!
//! Canonical frame: the vertical side runs from `D = (0, 0)` to
//! `A = (0, height)`, the short base `AB` lies on top and the right side
//! leans `slope` off vertical down to `C = (small_base + height·tan slope, 0)`.
//! Each quadrilateral hangs from a segment whose length is an integer plus
//! tan θ; the bottom edge of one quadrilateral fixes the tilt of the next.
//! Between two quadrilaterals the axis-aligned columns of the upper one are
//! extended downward.

use serde_json::Value;

use crate::error::{PackError, Result};
use crate::geometry::{signed_area, Line, PlacedSquare, Point, Region};
use crate::quad_primitive::{build_quad_packing_at, derive_params, ColumnFoot, QuadPacking};
use crate::strip::pack_naive_into;
use crate::verifier::{measure_waste, Layout, PackingStats, DEFAULT_SHRINK, DEFAULT_SLACK};

pub const TOP_TAG: &str = "top";
pub const BOTTOM_TAG: &str = "bottom";
pub const GAP_TAG: &str = "gap-fill";
pub const TRIM_TAG: &str = "trim";
pub const FALLBACK_TAG: &str = "fallback";

pub const FLAG_ASYMPTOTIC: &str = "asymptotic-conditions-unmet";
pub const FLAG_SCHEDULE: &str = "schedule-infeasible";
pub const FLAG_CONSTRUCTION: &str = "construction-fallback";

const FIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidSpec {
    pub height: f64,
    pub small_base: f64,
    pub slope: f64,
    /// `small_base = Θ(height^beta)`.
    pub beta: f64,
    /// `slope = Θ(height^-gamma)`.
    pub gamma: f64,
}

impl TrapezoidSpec {
    /// Exponents left as `None` are read off the actual dimensions.
    pub fn new(
        height: f64,
        small_base: f64,
        slope: f64,
        beta: Option<f64>,
        gamma: Option<f64>,
    ) -> Result<Self> {
        if !(height >= 32.0) || !height.is_finite() {
            return Err(PackError::Infeasible(format!(
                "trapezoid height {height} is below 32"
            )));
        }
        if !(small_base > 0.0) || !small_base.is_finite() {
            return Err(PackError::InvalidRegion(format!(
                "small base {small_base} must be positive"
            )));
        }
        if !(slope > 0.0 && slope < std::f64::consts::FRAC_PI_4) {
            return Err(PackError::InvalidRegion(format!(
                "slope {slope} outside (0, pi/4)"
            )));
        }
        let ln_h = height.ln();
        Ok(Self {
            height,
            small_base,
            slope,
            beta: beta.unwrap_or(small_base.ln() / ln_h),
            gamma: gamma.unwrap_or(-slope.ln() / ln_h),
        })
    }

    pub fn large_base(&self) -> f64 {
        self.small_base + self.height * self.slope.tan()
    }

    pub fn region(&self) -> Result<Region> {
        Region::new(vec![
            Point::new(0.0, 0.0),
            Point::new(self.large_base(), 0.0),
            Point::new(self.small_base, self.height),
            Point::new(0.0, self.height),
        ])
    }

    /// The slanted side, directed downward from B.
    pub fn right_side(&self) -> Line {
        Line::new(
            Point::new(self.small_base, self.height),
            Point::new(self.slope.sin(), -self.slope.cos()),
        )
    }

    fn asymptotic_conditions_hold(&self) -> bool {
        self.beta >= 1.0 - self.gamma && 1.0 - self.beta.max(self.gamma) <= self.gamma / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSchedule {
    pub l: f64,
    pub u: f64,
    pub d: f64,
    pub omega: f64,
    pub theta: Vec<f64>,
}

impl ThetaSchedule {
    /// Upper bound on tan θ_i guaranteed while `i <= tilt_horizon()`.
    pub fn tilt_bound(&self, x: f64, gamma: f64, i: usize) -> f64 {
        self.theta[0].tan() + 4.0 * self.d.powi(4) * i as f64 / self.l * x.powf(-gamma)
    }

    pub fn tilt_horizon(&self, x: f64) -> usize {
        (self.l / (4.0 * self.d.powi(3)) * x.powf(self.omega)).floor() as usize + 1
    }
}

/// Next tilt: the bottom edge of a quadrilateral with top tilt `theta`.
pub fn next_theta(theta: f64, sigma1: f64) -> f64 {
    theta + crate::quad_primitive::sigma2_of(theta, sigma1)
}

/// Tilts of successive quadrilaterals starting from `tan θ0 = d·x^-ω` with
/// `d = 0.12·l²/u`, where `l` and `u` bracket `sin σ1·x^γ` by ±10%.
pub fn select_theta_schedule(spec: &TrapezoidSpec) -> Result<ThetaSchedule> {
    let x = spec.height;
    let gamma = spec.gamma;
    let omega = gamma / 2.0;
    let scaled = spec.slope.sin() * x.powf(gamma);
    let l = 0.9 * scaled;
    let u = 1.1 * scaled;
    let d = 0.12 * l * l / u;
    let lhs = u * x.powf(-gamma) + 2.0 * d * x.powf(-omega);
    if !(lhs < 0.125) {
        return Err(PackError::Infeasible(format!(
            "height {x} too small for these exponents: u x^-g + 2d x^-w = {lhs} >= 1/8"
        )));
    }
    // Every quadrilateral is taller than one unit, so no more than
    // `height` of them can ever be used.
    let horizon = (l / (4.0 * d.powi(3)) * x.powf(omega)).ceil() + 1.0;
    let len = horizon.min(x.ceil() + 1.0) as usize;
    let mut theta = Vec::with_capacity(len + 1);
    theta.push((d * x.powf(-omega)).atan());
    for i in 1..=len {
        let t = next_theta(theta[i - 1], spec.slope);
        if !(t < 0.125) {
            return Err(PackError::Infeasible(format!(
                "theta_{i} = {t} reached 1/8"
            )));
        }
        theta.push(t);
    }
    Ok(ThetaSchedule {
        l,
        u,
        d,
        omega,
        theta,
    })
}

/// Length of the segment leaving `(left_x, y)` at angle `-theta` and ending
/// on `right`, together with its growth per unit of downward motion.
fn anchor_length(left_x: f64, right: &Line, theta: f64, y: f64) -> (f64, f64) {
    let r = Point::new(theta.cos(), -theta.sin());
    let e = Point::new(left_x, y);
    let denom = r.cross(right.dir);
    let len = (right.origin - e).cross(right.dir) / denom;
    let rate = -right.dir.x / denom;
    (len, rate)
}

/// Highest point on the vertical line `x = left_x`, at least `min_gap` below
/// `start`, from which the segment at angle `-theta` to `right` is `tan θ`
/// longer than an integer. Gives up below `floor`.
pub fn find_anchor(
    left_x: f64,
    right: &Line,
    theta: f64,
    start: Point,
    min_gap: f64,
    floor: f64,
) -> Result<Point> {
    let y0 = start.y - min_gap;
    let (len, rate) = anchor_length(left_x, right, theta, y0);
    let excess = len - theta.tan();
    let drop = if rate > 0.0 {
        (excess.ceil() - excess) / rate
    } else if rate < 0.0 {
        (excess.floor() - excess) / rate
    } else if excess == excess.round() {
        0.0
    } else {
        return Err(PackError::Exhausted);
    };
    let y = y0 - drop;
    if !(y >= floor) {
        return Err(PackError::Exhausted);
    }
    Ok(Point::new(left_x, y))
}

/// Strip between the bottom edge of one quadrilateral and the top edge of
/// the next (or any other line below), bounded by `x = left_x` and a right
/// side that leans outward going down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub top: Line,
    pub bottom: Line,
    pub left_x: f64,
    pub right: Line,
}

impl Gap {
    pub fn corners(&self) -> Option<[Point; 4]> {
        let left = Line::new(Point::new(self.left_x, 0.0), Point::new(0.0, 1.0));
        Some([
            self.top.intersect(&left)?,
            self.bottom.intersect(&left)?,
            self.bottom.intersect(&self.right)?,
            self.top.intersect(&self.right)?,
        ])
    }

    pub fn area(&self) -> f64 {
        self.corners().map_or(0.0, |c| signed_area(&c).max(0.0))
    }

    pub fn region(&self) -> Result<Region> {
        let c = self
            .corners()
            .ok_or_else(|| PackError::InvalidRegion("gap sides are parallel".into()))?;
        Region::from_loose(c.to_vec())
    }

    /// Highest y at which a column whose right edge is `x_right` still fits
    /// left of the right side.
    fn right_limit(&self, x_right: f64) -> f64 {
        let d = self.right.dir;
        if d.x.abs() < 1e-300 {
            return if x_right <= self.right.origin.x + FIT_EPS {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
        self.right.y_at(x_right)
    }
}

fn push_column(layout: &mut Layout, x: f64, top: f64, count: u64, tag: &str) {
    for k in 0..count {
        let center = Point::new(x + 0.5, top - k as f64 - 0.5);
        layout.push_square(PlacedSquare::axis_aligned(center), tag);
    }
}

/// Extends each column in `columns_above` downward through `gap`, then
/// fills the rest of the gap, up to the right side, with axis-aligned
/// columns cut short where the slanted side or the bottom edge interferes.
/// New squares are tagged [`GAP_TAG`] and the tag is charged the gap area.
pub fn fill_gap(gap: &Gap, columns_above: &[ColumnFoot], mut layout: Layout) -> Layout {
    let area = gap.area();
    if area <= 0.0 {
        return layout;
    }
    let count_between = |top: f64, x: f64| -> u64 {
        let floor = gap.bottom.y_at(x).max(gap.bottom.y_at(x + 1.0));
        ((top - floor) + FIT_EPS).floor().max(0.0) as u64
    };
    for foot in columns_above {
        let n = count_between(foot.bottom, foot.x);
        push_column(&mut layout, foot.x, foot.bottom, n, GAP_TAG);
    }
    let mut x = columns_above.last().map_or(gap.left_x, |f| f.x + 1.0);
    loop {
        let ceiling = gap.top.y_at(x).min(gap.top.y_at(x + 1.0));
        let top = ceiling.min(gap.right_limit(x + 1.0));
        let floor = gap.bottom.y_at(x).max(gap.bottom.y_at(x + 1.0));
        if !(top - floor + FIT_EPS >= 1.0) {
            // Wider columns only get shorter once the right side binds.
            if gap.right_limit(x + 1.0) < floor {
                break;
            }
            x += 1.0;
            continue;
        }
        let n = count_between(top, x);
        push_column(&mut layout, x, top, n, GAP_TAG);
        x += 1.0;
    }
    layout.add_tag_area(GAP_TAG, area);
    layout
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidOptions {
    /// `tan θ0 = theta_coefficient·height^-ω`. `None` uses the schedule's `d`.
    pub theta_coefficient: Option<f64>,
}

impl Default for TrapezoidOptions {
    fn default() -> Self {
        Self {
            theta_coefficient: Some(DEFAULT_THETA_COEFFICIENT),
        }
    }
}

pub const DEFAULT_THETA_COEFFICIENT: f64 = 0.6;

#[derive(Debug, Clone)]
pub struct TrapezoidPacking {
    pub layout: Layout,
    pub stats: PackingStats,
    pub flags: Vec<String>,
    pub quads: usize,
    pub thetas: Vec<f64>,
}

pub fn pack_right_trapezoid(spec: &TrapezoidSpec) -> Result<TrapezoidPacking> {
    pack_right_trapezoid_with(spec, &TrapezoidOptions::default())
}

pub fn pack_right_trapezoid_with(
    spec: &TrapezoidSpec,
    options: &TrapezoidOptions,
) -> Result<TrapezoidPacking> {
    let region = spec.region()?;
    if !spec.asymptotic_conditions_hold() {
        return fallback(spec, &region, FLAG_ASYMPTOTIC);
    }
    let schedule = match select_theta_schedule(spec) {
        Ok(s) => s,
        Err(_) => return fallback(spec, &region, FLAG_SCHEDULE),
    };
    let coefficient = options.theta_coefficient.unwrap_or(schedule.d);
    let theta0 = (coefficient * spec.height.powf(-schedule.omega)).atan();
    match build_chain(spec, &region, theta0) {
        Ok(Some(p)) => Ok(p),
        Ok(None)
        | Err(PackError::Exhausted | PackError::Infeasible(_) | PackError::DegenerateParams(_)) => {
            fallback(spec, &region, FLAG_CONSTRUCTION)
        }
        Err(e) => Err(e),
    }
}

fn fallback(spec: &TrapezoidSpec, region: &Region, flag: &str) -> Result<TrapezoidPacking> {
    let mut layout = Layout::new(region.clone());
    pack_naive_into(&mut layout, region, FALLBACK_TAG);
    layout.add_tag_area(FALLBACK_TAG, region.area());
    finish(spec, layout, vec![flag.to_string()], 0, Vec::new())
}

fn finish(
    spec: &TrapezoidSpec,
    mut layout: Layout,
    flags: Vec<String>,
    quads: usize,
    thetas: Vec<f64>,
) -> Result<TrapezoidPacking> {
    for (k, v) in [
        ("height", spec.height),
        ("small_base", spec.small_base),
        ("slope", spec.slope),
        ("beta", spec.beta),
        ("gamma", spec.gamma),
    ] {
        layout.meta.insert(k.into(), v.into());
    }
    layout.meta.insert("quads".into(), quads.into());
    layout.meta.insert(
        "flags".into(),
        Value::from(
            flags
                .iter()
                .map(|f| Value::from(f.as_str()))
                .collect::<Vec<_>>(),
        ),
    );
    let report = layout.verify(DEFAULT_SHRINK, DEFAULT_SLACK)?;
    if !report.is_empty() {
        return Err(PackError::ConstructionBug(report));
    }
    let stats = measure_waste(&layout)?;
    Ok(TrapezoidPacking {
        layout,
        stats,
        flags,
        quads,
        thetas,
    })
}

/// One placed quadrilateral and where its top edge meets the left side.
struct Link {
    quad: QuadPacking,
    entry: Point,
}

fn build_chain(
    spec: &TrapezoidSpec,
    region: &Region,
    theta0: f64,
) -> Result<Option<TrapezoidPacking>> {
    let right = spec.right_side();
    let sigma1 = spec.slope;
    let mut chain: Vec<Link> = Vec::new();
    let mut theta = theta0;
    let mut start = Point::new(0.0, spec.height);
    loop {
        let prev_d = chain.last().map(|l| l.quad.d);
        let e = match find_anchor(0.0, &right, theta, start, 1.0, 0.0) {
            Ok(e) => e,
            Err(PackError::Exhausted) => break,
            Err(e) => return Err(e),
        };
        let (len, rate) = anchor_length(0.0, &right, theta, e.y);
        let m = (len - theta.tan()).round();
        // Below another quadrilateral the left gap must be a whole number.
        let (entry, trim) = match prev_d {
            Some(d) => {
                let gap = d.y - e.y;
                let delta = gap.ceil() - gap;
                (Point::new(0.0, e.y - delta), delta * rate)
            }
            None => (e, 0.0),
        };
        if m < 3.0 || entry.y <= 0.0 {
            break;
        }
        let params = match derive_params(m as u64, theta, sigma1) {
            Ok(p) => p,
            Err(_) => break,
        };
        let a = entry + Point::new(theta.cos(), -theta.sin()) * trim;
        let quad = match build_quad_packing_at(&params, a) {
            Ok(q) => q,
            Err(PackError::ConstructionBug(v)) => return Err(PackError::ConstructionBug(v)),
            Err(_) => break,
        };
        if quad.c.y < 0.0 || quad.d.y < 0.0 {
            break;
        }
        theta += params.sigma2;
        start = quad.d;
        chain.push(Link { quad, entry });
    }
    if chain.is_empty() {
        return Ok(None);
    }

    let mut layout = Layout::new(region.clone());
    let top_left = Point::new(0.0, spec.height);
    let top_right = Point::new(spec.small_base, spec.height);
    let first = &chain[0];
    if let Ok(top) = Region::from_loose(vec![top_left, first.entry, first.quad.b, top_right]) {
        pack_naive_into(&mut layout, &top, TOP_TAG);
        layout.add_tag_area(TOP_TAG, top.area());
    }
    let mut thetas = Vec::with_capacity(chain.len());
    for (k, link) in chain.iter().enumerate() {
        let q = &link.quad;
        thetas.push(q.params.theta);
        let cd = Line::through(q.d, q.c);
        let cd_left = Point::new(0.0, cd.y_at(0.0));
        let trim = signed_area(&[link.entry, cd_left, q.d, q.a]);
        layout.add_tag_area(TRIM_TAG, trim.max(0.0));
        layout.absorb(q.layout.clone(), &crate::geometry::GridMotion::identity());
        match chain.get(k + 1) {
            Some(next) => {
                let nq = &next.quad;
                let gap = Gap {
                    top: cd,
                    bottom: Line::through(next.entry, nq.b),
                    left_x: 0.0,
                    right,
                };
                layout = fill_gap(&gap, &q.columns, layout);
            }
            None => {
                let bottom = Region::from_loose(vec![
                    cd_left,
                    Point::new(0.0, 0.0),
                    Point::new(spec.large_base(), 0.0),
                    q.c,
                ])?;
                pack_naive_into(&mut layout, &bottom, BOTTOM_TAG);
                layout.add_tag_area(BOTTOM_TAG, bottom.area());
            }
        }
    }
    let quads = chain.len();
    finish(spec, layout, Vec::new(), quads, thetas).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_angle_inequalities_on_a_grid() {
        let mut theta = 1e-4;
        while theta < 0.125 {
            let omc = crate::quad_primitive::one_minus_cos(theta);
            let smo = crate::quad_primitive::sec_minus_one(theta);
            let t = theta.tan();
            assert!(omc * smo < t.powi(4) / 4.0, "theta {theta}");
            assert!(omc > 0.49 * t * t, "theta {theta}");
            let sec = 1.0 / theta.cos();
            assert!(sec > 1.0 && sec < 1.01);
            theta += 1e-4;
        }
    }

    #[test]
    fn schedule_reference_values() {
        let x: f64 = 1e4;
        let spec =
            TrapezoidSpec::new(x, x.powf(0.75), x.powf(-0.5), Some(0.75), Some(0.5)).unwrap();
        let s = select_theta_schedule(&spec).unwrap();
        let sin_scaled = (0.01_f64).sin() * 100.0;
        assert!((s.l - 0.9 * sin_scaled).abs() < 1e-12);
        assert!((s.u - 1.1 * sin_scaled).abs() < 1e-12);
        assert!((s.d - 0.0883).abs() < 1e-4);
        assert!((s.theta[0] - (s.d * 0.1).atan()).abs() < 1e-15);
        for (i, th) in s.theta.iter().enumerate().take(s.tilt_horizon(x) + 1) {
            assert!(th.tan() <= s.tilt_bound(x, 0.5, i) * (1.0 + 1e-12));
            assert!(*th < 0.125);
        }
        assert!(s.theta.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn schedule_rejects_steep_sides() {
        let x: f64 = 100.0;
        let spec = TrapezoidSpec::new(x, 30.0, x.powf(-0.1), Some(0.75), Some(0.1)).unwrap();
        assert!(matches!(
            select_theta_schedule(&spec),
            Err(PackError::Infeasible(_))
        ));
    }

    #[test]
    fn one_step_of_the_recursion() {
        let (t0, s1): (f64, f64) = (0.012, 0.001);
        let t1 = next_theta(t0, s1);
        let direct = (1.0 - t0.cos()) * (1.0 / t0.cos() - 1.0) / (s1.sin() / (t0 + s1).cos());
        assert!(((t1.tan() - t0.tan()) - direct).abs() <= 1e-9 * direct);
        assert!(t1.tan() - t0.tan() < t0.tan().powi(4) / (4.0 * s1.sin()));
    }

    #[test]
    fn anchors_repeat_with_fixed_spacing() {
        let x: f64 = 1e4;
        let spec = TrapezoidSpec::new(x, 1000.0, x.powf(-0.5), None, None).unwrap();
        let right = spec.right_side();
        let top = Point::new(0.0, x);
        let e1 = find_anchor(0.0, &right, 0.012, top, 1.0, 0.0).unwrap();
        let e2 = find_anchor(0.0, &right, 0.012, e1, 1e-9, 0.0).unwrap();
        let spacing = e1.y - e2.y;
        assert!((50.0..=200.0).contains(&spacing), "{spacing}");
        let (_, rate) = anchor_length(0.0, &right, 0.012, 0.0);
        assert!((spacing - 1.0 / rate).abs() < 1e-6);
        let gap = x - e1.y;
        assert!(gap >= 1.0 && gap <= spacing + 1.0);
        let (len, _) = anchor_length(0.0, &right, 0.012, e1.y);
        let excess = len - 0.012_f64.tan();
        assert!((excess - excess.round()).abs() < 1e-9);
        assert!(matches!(
            find_anchor(0.0, &right, 0.012, Point::new(0.0, 10.0), 1.0, 0.0),
            Err(PackError::Exhausted)
        ));
    }

    fn rectangle_gap(w: f64, h: f64, slope: f64) -> Gap {
        Gap {
            top: Line::new(Point::new(0.0, h), Point::new(1.0, 0.0)),
            bottom: Line::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0)),
            left_x: 0.0,
            right: Line::new(Point::new(w, h), Point::new(slope.sin(), -slope.cos())),
        }
    }

    #[test]
    fn gap_filling() {
        let gap = rectangle_gap(7.0, 4.0, 0.0);
        let mut l = fill_gap(&gap, &[], Layout::new(gap.region().unwrap()));
        assert_eq!(l.square_count(), 28);
        assert!(l.verify(DEFAULT_SHRINK, DEFAULT_SLACK).unwrap().is_empty());
        assert_eq!(measure_waste(&l).unwrap().waste, 0.0);

        let gap = rectangle_gap(100.0, 10.0, 0.01);
        let mut l = fill_gap(&gap, &[], Layout::new(gap.region().unwrap()));
        assert!(l.verify(DEFAULT_SHRINK, DEFAULT_SLACK).unwrap().is_empty());
        assert!(measure_waste(&l).unwrap().waste <= 2.0 * (10.0 + 100.0 * 0.01 * 10.0));

        let flat = rectangle_gap(5.0, 0.0, 0.0);
        let before = Layout::new(Region::rectangle(0.0, 0.0, 1.0, 1.0).unwrap());
        assert_eq!(fill_gap(&flat, &[], before).square_count(), 0);
    }

    #[test]
    fn reference_trapezoid() {
        let x: f64 = 1000.0;
        let spec =
            TrapezoidSpec::new(x, x.powf(0.75), x.powf(-0.5), Some(0.75), Some(0.5)).unwrap();
        let p = pack_right_trapezoid(&spec).unwrap();
        assert!(p.flags.is_empty(), "{:?}", p.flags);
        assert!(p.quads >= 2);
        let sum: f64 = p.stats.per_tag_waste.values().sum();
        assert!((sum - p.stats.waste).abs() <= 1e-6 * p.stats.waste);
        assert!(p.stats.waste <= 30.0 * x.powf(0.75), "{}", p.stats.waste);
    }

    #[test]
    fn unmet_conditions_fall_back() {
        let x: f64 = 1000.0;
        let spec = TrapezoidSpec::new(x, x.powf(0.2), x.powf(-0.5), Some(0.2), Some(0.5)).unwrap();
        let p = pack_right_trapezoid(&spec).unwrap();
        assert_eq!(p.flags, vec![FLAG_ASYMPTOTIC.to_string()]);
        assert!(p.stats.verified);
    }

    #[test]
    fn nearly_rectangular_trapezoid() {
        let spec = TrapezoidSpec::new(100.0, 50.0, 1e-12, None, None).unwrap();
        let p = pack_right_trapezoid(&spec).unwrap();
        assert!(p.stats.waste <= 1.0, "{}", p.stats.waste);
    }
}
