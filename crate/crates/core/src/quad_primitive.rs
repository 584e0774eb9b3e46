//! The tightly packed quadrilateral ABCD.
//!
//! Rows of `m` squares tilted by θ hang below the top edge AB, each row
//! shifted so its top-right corner stays on the right edge, which leans
//! σ1 off vertical. Where a row would drift past an integer abscissa the
//! remaining squares of that column are replaced by an axis-aligned column
//! T. The bottom edge CD then slopes by θ + σ2.

use std::collections::BTreeMap;

use crate::error::{PackError, Result};
use crate::geometry::{polygon_area, HalfPlane, Line, PlacedSquare, Point, Region};
use crate::verifier::{measure_waste, Layout, PackingStats, DEFAULT_SHRINK, DEFAULT_SLACK};

pub const S_ROW_TAG: &str = "S-row";
pub const T_COLUMN_TAG: &str = "T-column";
pub const CORNER_TAG: &str = "corner";

/// `1 - cos θ` without cancellation.
pub fn one_minus_cos(theta: f64) -> f64 {
    let h = (0.5 * theta).sin();
    2.0 * h * h
}

/// `sec θ - 1` without cancellation.
pub fn sec_minus_one(theta: f64) -> f64 {
    one_minus_cos(theta) / theta.cos()
}

/// Rotation of the bottom edge relative to the top edge.
pub fn sigma2_of(theta: f64, sigma1: f64) -> f64 {
    let delta2 = sigma1.sin() / (theta + sigma1).cos();
    let k = one_minus_cos(theta) * sec_minus_one(theta) / delta2;
    let t = theta.tan();
    // atan(t + k) - atan(t), folded into one arctangent.
    (k / (1.0 + t * (t + k))).atan()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams {
    pub m: u64,
    pub theta: f64,
    pub sigma1: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub sigma2: f64,
    /// `i_of_j[j - 1]` is the first row whose square in column `j` starts
    /// right of `j - 1`.
    pub i_of_j: Vec<u64>,
    pub i_m: u64,
    /// `gamma_j[j - 3]` for `j = 3..=m`.
    pub gamma_j: Vec<f64>,
}

impl QuadParams {
    pub fn i_j(&self, j: u64) -> u64 {
        self.i_of_j[(j - 1) as usize]
    }
}

pub fn derive_params(m: u64, theta: f64, sigma1: f64) -> Result<QuadParams> {
    if m < 3 {
        return Err(PackError::Infeasible(format!(
            "need at least 3 columns, got {m}"
        )));
    }
    if !(theta > 0.0 && theta <= 0.3) {
        return Err(PackError::Infeasible(format!(
            "theta {theta} outside (0, 0.3]"
        )));
    }
    if !(sigma1 > 0.0 && sigma1 <= 0.1) {
        return Err(PackError::Infeasible(format!(
            "sigma1 {sigma1} outside (0, 0.1]"
        )));
    }
    let quarter = std::f64::consts::FRAC_PI_4;
    if theta + sigma1 >= quarter {
        return Err(PackError::Infeasible(
            "theta + sigma1 must stay below pi/4".into(),
        ));
    }
    if theta.cos() == 1.0 {
        return Err(PackError::DegenerateParams(format!(
            "theta {theta} is too small: rows cannot be told apart from a flat grid"
        )));
    }
    let delta1 = theta.cos();
    let sec_ts = 1.0 / (theta + sigma1).cos();
    let delta2 = sec_ts * sigma1.sin();
    let delta3 = sec_ts * sigma1.cos();
    let drift = one_minus_cos(theta) / delta2;
    let i_of_j: Vec<u64> = (1..=m)
        .map(|j| {
            if j == 1 {
                1
            } else {
                ((j - 1) as f64 * drift).ceil() as u64 + 1
            }
        })
        .collect();
    let i_m = i_of_j[(m - 1) as usize];
    if i_m < 2 {
        return Err(PackError::DegenerateParams(format!("only {i_m} row(s)")));
    }
    let sigma2 = sigma2_of(theta, sigma1);
    if !(sigma2 >= 0.0) || theta + sigma2 >= quarter {
        return Err(PackError::Infeasible(format!(
            "sigma2 {sigma2} puts the bottom edge past pi/4"
        )));
    }
    let smo = sec_minus_one(theta);
    let tan = theta.tan();
    let gamma_j = (3..=m)
        .map(|j| {
            let di = i_of_j[(j - 1) as usize] - i_of_j[(j - 2) as usize];
            di as f64 * smo + tan
        })
        .collect();
    Ok(QuadParams {
        m,
        theta,
        sigma1,
        delta1,
        delta2,
        delta3,
        sigma2,
        i_of_j,
        i_m,
        gamma_j,
    })
}

/// Bottom of one axis-aligned column: its left edge and lowest y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnFoot {
    pub x: f64,
    pub bottom: f64,
}

#[derive(Debug, Clone)]
pub struct QuadPacking {
    pub params: QuadParams,
    pub region: Region,
    pub layout: Layout,
    pub stats: PackingStats,
    pub a: Point,
    pub b: Point,
    pub c: Point,
    pub d: Point,
    /// Feet of the T columns `1..m`, left to right.
    pub columns: Vec<ColumnFoot>,
    row_start: Vec<usize>,
    row_first_col: Vec<u64>,
    column_start: Vec<usize>,
    column_top: Vec<f64>,
}

/// Frame shared by construction and accounting.
struct Frame {
    a: Point,
    r: Point,
    n: Point,
    s: Point,
    tan: f64,
}

impl Frame {
    fn new(p: &QuadParams, a: Point) -> Self {
        let (sin, cos) = p.theta.sin_cos();
        Self {
            a,
            r: Point::new(cos, -sin),
            n: Point::new(-sin, -cos),
            s: Point::new(p.delta2, -p.delta3),
            tan: p.theta.tan(),
        }
    }

    fn top_left(&self, i: u64, j: u64) -> Point {
        self.a + self.r * (self.tan + (j - 1) as f64) + self.s * (i - 1) as f64
    }

    fn s_square(&self, i: u64, j: u64, theta: f64) -> PlacedSquare {
        let c = self.top_left(i, j) + self.r * 0.5 + self.n * 0.5;
        PlacedSquare::new(c, -theta)
    }

    /// y of the bottom edge line of row `i` at abscissa `x`.
    fn row_bottom_at(&self, i: u64, x: f64) -> f64 {
        let p = self.top_left(i, 1) + self.n;
        p.y - (x - p.x) * self.tan
    }
}

/// First column still holding an S square in row `i`.
fn first_s_column(p: &QuadParams, i: u64) -> u64 {
    // Columns c < m lose row i once i_{c+1} <= i; i_j is non-decreasing.
    let lost = p.i_of_j[1..].partition_point(|&ij| ij <= i) as u64;
    (lost + 1).min(p.m)
}

pub fn build_quad_packing(params: &QuadParams) -> Result<QuadPacking> {
    build_quad_packing_at(params, Point::default())
}

/// Builds the packing with vertex A at `a`, then verifies it.
pub fn build_quad_packing_at(params: &QuadParams, a: Point) -> Result<QuadPacking> {
    let p = params;
    let f = Frame::new(p, a);
    let m = p.m;
    let i_m = p.i_m;

    let b = a + f.r * (m as f64 + f.tan);
    let column_top: Vec<f64> = (1..m)
        .map(|c| f.row_bottom_at(p.i_j(c + 1) - 1, a.x + c as f64))
        .collect();
    let t_len = |c: u64| i_m - p.i_j(c + 1) + 1;
    let d = Point::new(
        a.x,
        column_top[0] - t_len(1) as f64 - sec_minus_one(p.theta),
    );
    let phi = p.theta + p.sigma2;
    let cd = Line::new(d, Point::new(phi.cos(), -phi.sin()));
    let right = Line::new(b, Point::new(p.sigma1.sin(), -p.sigma1.cos()));
    let c = cd
        .intersect(&right)
        .ok_or_else(|| PackError::Infeasible("bottom edge parallel to right edge".into()))?;
    let region = Region::new(vec![a, d, c, b])?;

    let mut layout = Layout::new(region.clone());
    let mut row_start = Vec::with_capacity(i_m as usize);
    let mut row_first_col = Vec::with_capacity(i_m as usize);
    let mut s_count = 0u64;
    for i in 1..=i_m {
        let first = first_s_column(p, i);
        // The last row keeps only T squares.
        let last = if i == i_m { 0 } else { m };
        row_start.push(layout.squares().len());
        row_first_col.push(first);
        for j in first..=last {
            layout.push_square(f.s_square(i, j, p.theta), S_ROW_TAG);
            s_count += 1;
        }
    }
    let mut column_start = Vec::with_capacity(m as usize - 1);
    let mut columns = Vec::with_capacity(m as usize - 1);
    let mut t_count = 0u64;
    for c in 1..m {
        column_start.push(layout.squares().len());
        let top = column_top[(c - 1) as usize];
        let x = a.x + c as f64 - 1.0;
        let len = t_len(c);
        for k in 0..len {
            let center = Point::new(x + 0.5, top - k as f64 - 0.5);
            layout.push_square(PlacedSquare::axis_aligned(center), T_COLUMN_TAG);
        }
        t_count += len;
        columns.push(ColumnFoot {
            x,
            bottom: top - len as f64,
        });
    }

    let mut packing = QuadPacking {
        params: p.clone(),
        region,
        layout,
        stats: PackingStats {
            region_area: 0.0,
            square_count: 0,
            waste: 0.0,
            per_tag_waste: BTreeMap::new(),
            verified: false,
        },
        a,
        b,
        c,
        d,
        columns,
        row_start,
        row_first_col,
        column_start,
        column_top,
    };
    let groups = packing.compute_groups();
    let band = groups["W1"] + groups["W2"] + groups["W4"] - groups["virtual"];
    let slab = groups["W3"] + groups["W5"] + groups["W6"];
    packing
        .layout
        .add_tag_area(S_ROW_TAG, band + s_count as f64);
    packing
        .layout
        .add_tag_area(T_COLUMN_TAG, slab + t_count as f64);
    packing
        .layout
        .add_tag_area(CORNER_TAG, groups["W7"] + groups["virtual"]);
    for (k, v) in [
        ("m", m as f64),
        ("theta", p.theta),
        ("sigma1", p.sigma1),
        ("sigma2", p.sigma2),
        ("i_m", i_m as f64),
    ] {
        packing.layout.meta.insert(k.into(), v.into());
    }

    let report = packing.layout.verify(DEFAULT_SHRINK, DEFAULT_SLACK)?;
    if !report.is_empty() {
        return Err(PackError::ConstructionBug(report));
    }
    packing.stats = measure_waste(&packing.layout)?;
    Ok(packing)
}

impl QuadPacking {
    /// `S_{i,j}` if it is part of the packing.
    pub fn s_square(&self, i: u64, j: u64) -> Option<&PlacedSquare> {
        let row = (i - 1) as usize;
        let first = *self.row_first_col.get(row)?;
        let end = self.row_start.get(row + 1).copied().unwrap_or(
            self.column_start
                .first()
                .copied()
                .unwrap_or(self.layout.squares().len()),
        );
        let idx = self.row_start[row] + j.checked_sub(first)? as usize;
        (idx < end).then(|| &self.layout.squares()[idx])
    }

    /// `T_{i,c}` if it is part of the packing.
    pub fn t_square(&self, i: u64, c: u64) -> Option<&PlacedSquare> {
        if c == 0 || c >= self.params.m {
            return None;
        }
        let first_row = self.params.i_j(c + 1);
        if i < first_row || i > self.params.i_m {
            return None;
        }
        Some(&self.layout.squares()[self.column_start[(c - 1) as usize] + (i - first_row) as usize])
    }

    /// Vertical distance from the top of `T_{i_m, m-1}` down to CD, measured
    /// on the right side of that square.
    pub fn ef_length(&self) -> f64 {
        let foot = self.columns.last().expect("m >= 3");
        let x = foot.x + 1.0;
        let cd = Line::through(self.d, self.c);
        foot.bottom + 1.0 - cd.y_at(x)
    }

    fn compute_groups(&self) -> BTreeMap<&'static str, f64> {
        let p = &self.params;
        let f = Frame::new(p, self.a);
        let (m, i_m) = (p.m, p.i_m);
        let half_tan = 0.5 * f.tan;
        let sec = 1.0 / p.theta.cos();
        let w4_each = 0.5 * (p.theta + p.sigma1).tan();
        let cd = Line::through(self.d, self.c);

        let mut w2 = 0.0;
        let mut w2_last = 0.0;
        for i in 1..=i_m {
            let first = first_s_column(p, i);
            let left = self.a.x + (first - 1) as f64;
            let leftmost = self.a.x + (first - 1) as f64 * p.delta1 + (i - 1) as f64 * p.delta2;
            let strip = (leftmost - left) * sec;
            w2 += strip;
            if i == i_m {
                w2_last = strip;
            }
        }
        let mut w6 = 0.0;
        for (k, foot) in self.columns.iter().enumerate() {
            debug_assert_eq!(
                foot.bottom,
                self.column_top[k] - (i_m - p.i_j(k as u64 + 2) + 1) as f64
            );
            w6 += foot.bottom - cd.y_at(foot.x);
        }
        let w5 = (m - 1) as f64 * 0.5 * (cd.y_at(0.0) - cd.y_at(1.0));

        // Corner right of column m-1 and below row i_m - 1.
        let x0 = self.a.x + (m - 1) as f64;
        let keep_right = HalfPlane::left_of(Point::new(x0, 1.0), Point::new(x0, 0.0));
        let p0 = f.top_left(i_m - 1, 1) + f.n;
        let keep_below = HalfPlane::left_of(p0 + f.r, p0);
        let corner = self
            .region
            .clip(&keep_right)
            .and_then(|r| r.clip(&keep_below))
            .map_or(0.0, |r| r.area());
        let virtual_row = half_tan + w2_last + w4_each;

        let mut g = BTreeMap::new();
        g.insert("W1", i_m as f64 * half_tan);
        g.insert("W2", w2);
        g.insert("W3", (m - 1) as f64 * half_tan);
        g.insert("W4", i_m as f64 * w4_each);
        g.insert("W5", w5);
        g.insert("W6", w6);
        g.insert("W7", corner - virtual_row);
        g.insert("virtual", virtual_row);
        g
    }
}

/// Areas of the seven waste groups `W1`..`W7` of a verified packing. They
/// partition the waste exactly; the row at index `i_m`, whose only S square
/// is removed, is counted in W1, W2 and W4 like every other row.
pub fn waste_breakdown(packing: &QuadPacking) -> Result<BTreeMap<String, f64>> {
    if !packing.layout.is_verified() {
        return Err(PackError::Unverified);
    }
    let groups = packing.compute_groups();
    Ok(groups
        .into_iter()
        .filter(|(k, _)| k.starts_with('W'))
        .map(|(k, v)| (k.to_string(), v))
        .collect())
}

/// Checks that `T_{i_j, j-1}` sits `Γ_j` below `T_{i_j, j-2}` for every
/// `j` in `3..=m`, returning the largest deviation.
pub fn gamma_deviation(packing: &QuadPacking) -> f64 {
    let p = &packing.params;
    let mut worst: f64 = 0.0;
    for j in 3..=p.m {
        let i = p.i_j(j);
        let lower = packing.t_square(i, j - 1).expect("column top exists");
        let upper = packing.t_square(i, j - 2).expect("column reaches row i_j");
        let drop = upper.center.y - lower.center.y;
        worst = worst.max((drop - p.gamma_j[(j - 3) as usize]).abs());
    }
    worst
}

/// Waste via the vertex coordinates and a plain square count.
pub fn waste_by_area(packing: &QuadPacking) -> Result<f64> {
    let area = polygon_area(packing.region.vertices())?;
    Ok(area - (packing.params.m * packing.params.i_m - 1) as f64)
}
