//! Packing an `x` by `x` square.
//!
//! The square splits into an integer grid `W x W` in the top-left corner, a
//! slab of thickness `h = x - W` along the bottom and another along the
//! right side. Each slab holds a run of tilted stacks in its middle; the two
//! ends, where the stacks cannot meet the square's sides, are right
//! trapezoids of height `h` handed to the trapezoid packer.

use rayon::prelude::*;
use serde_json::Value;

use crate::error::{PackError, Result};
use crate::geometry::{GridBlock, GridMotion, Point, Region};
use crate::strip::{
    pack_naive_region, pack_parallel_strip, solve_tilt, stack_parallelogram, StripSpec,
};
use crate::trapezoid::{pack_right_trapezoid, TrapezoidSpec};
use crate::verifier::{measure_waste, Layout, PackingStats, DEFAULT_SHRINK, DEFAULT_SLACK};

pub const GRID_TAG: &str = "grid";
pub const FALLBACK_TAG: &str = "fallback";

/// Below this side length the square is packed as a plain grid.
pub const MIN_SIDE: f64 = 32.0;

/// Multiplier in the trapezoid short base `w = c·m^ν`.
pub const DEFAULT_BASE_COEFFICIENT: f64 = 0.25;

pub const DEFAULT_BETA: f64 = 0.75;
pub const DEFAULT_NU: f64 = 0.75;
/// With `ε = 0` the slabs come out too thick for the end trapezoids to pay
/// off below `x` in the tens of thousands.
pub const DEFAULT_EPSILON: f64 = 1.0;

pub fn choose_m(x: f64, beta: f64, epsilon: f64) -> u64 {
    let core = x * x.ln().powf(-epsilon);
    let m = core.powf(2.0 / (2.0 * beta + 1.0)).round();
    m.min((x / 4.0).floor()).max(8.0) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub enum PieceKind {
    Grid(GridBlock),
    /// `local` is the strip region in the slab frame; `motion` maps it into
    /// the square.
    Strip {
        spec: StripSpec,
        local: Region,
        motion: GridMotion,
    },
    /// Canonical right trapezoid mapped into the square by `motion`.
    Trapezoid {
        height: f64,
        small_base: f64,
        slope: f64,
        motion: GridMotion,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub name: String,
    /// Outline in square coordinates.
    pub region: Region,
    pub kind: PieceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquarePlan {
    pub x: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub nu: f64,
    pub m: u64,
    pub decomposition: Vec<Piece>,
}

impl SquarePlan {
    pub fn total_area(&self) -> f64 {
        self.decomposition.iter().map(|p| p.region.area()).sum()
    }
}

fn trivial_plan(x: f64, m: u64, nu: f64) -> Result<SquarePlan> {
    let k = x.floor();
    let region = Region::rectangle(0.0, 0.0, x, x)?;
    let block = GridBlock::new(Point::default(), k as u64, k as u64)?;
    Ok(SquarePlan {
        x,
        beta: f64::NAN,
        epsilon: f64::NAN,
        nu,
        m,
        decomposition: vec![Piece {
            name: GRID_TAG.into(),
            region,
            kind: PieceKind::Grid(block),
        }],
    })
}

/// Pieces of one slab `[0, length] x [0, h]`, expressed in square
/// coordinates through `slab`.
fn slab_pieces(
    name: &str,
    length: f64,
    h: f64,
    small_base: f64,
    slab: &GridMotion,
) -> Result<Vec<Piece>> {
    let stack = h.ceil() as u64;
    let alpha = solve_tilt(stack, h)?.alpha;
    let pitch = 1.0 / alpha.cos();
    let lean = h * alpha.tan();
    let room = length - 2.0 * small_base - lean;
    if room < pitch {
        return Err(PackError::Infeasible(format!(
            "slab {name} too short for one stack"
        )));
    }
    let stacks = (room / pitch).floor() as u64;
    let foot = Point::new(small_base + lean, 0.0);
    let right_base = length - foot.x - stacks as f64 * pitch;

    let local = stack_parallelogram(foot, h, alpha, stacks)?;
    let spec = StripSpec::new(h, stacks as f64 * pitch, stack)?;
    let left = GridMotion::identity();
    let right = GridMotion::new(false, 2, Point::new(length, h));
    let canonical = |w: f64| {
        Region::new(vec![
            Point::new(0.0, 0.0),
            Point::new(w + lean, 0.0),
            Point::new(w, h),
            Point::new(0.0, h),
        ])
    };
    let mut pieces = vec![Piece {
        name: format!("{name}-strip"),
        region: slab.apply_region(&local),
        kind: PieceKind::Strip {
            spec,
            local,
            motion: *slab,
        },
    }];
    for (end, w, m) in [("left", small_base, left), ("right", right_base, right)] {
        let motion = m.then(slab);
        pieces.push(Piece {
            name: format!("{name}-{end}"),
            region: motion.apply_region(&canonical(w)?),
            kind: PieceKind::Trapezoid {
                height: h,
                small_base: w,
                slope: alpha,
                motion,
            },
        });
    }
    Ok(pieces)
}

pub fn plan_decomposition(x: f64, m: u64, nu: f64) -> Result<SquarePlan> {
    plan_with_base(x, m, nu, DEFAULT_BASE_COEFFICIENT)
}

/// As [`plan_decomposition`] with an explicit multiplier for the trapezoid
/// short base.
pub fn plan_with_base(x: f64, m: u64, nu: f64, base_coefficient: f64) -> Result<SquarePlan> {
    if x == x.floor() {
        return trivial_plan(x, m, nu);
    }
    if x - (m as f64) < 8.0 {
        return Err(PackError::Infeasible(format!(
            "x - m = {} is below 8",
            x - m as f64
        )));
    }
    let side = (x - m as f64).floor();
    let h = x - side;
    let small_base = base_coefficient * (m as f64).powf(nu);

    let block = GridBlock::new(Point::new(0.0, h), side as u64, side as u64)?;
    let mut decomposition = vec![Piece {
        name: GRID_TAG.into(),
        region: block.rect(),
        kind: PieceKind::Grid(block),
    }];
    decomposition.extend(slab_pieces(
        "bottom",
        x,
        h,
        small_base,
        &GridMotion::identity(),
    )?);
    let right_slab = GridMotion::new(false, 1, Point::new(x, h));
    decomposition.extend(slab_pieces("right", side, h, small_base, &right_slab)?);
    Ok(SquarePlan {
        x,
        beta: f64::NAN,
        epsilon: f64::NAN,
        nu,
        m,
        decomposition,
    })
}

#[derive(Debug, Clone)]
pub struct SquarePacking {
    pub plan: SquarePlan,
    pub layout: Layout,
    pub stats: PackingStats,
}

fn pack_piece(piece: &Piece) -> Result<(Layout, GridMotion, Vec<Value>)> {
    match &piece.kind {
        PieceKind::Grid(block) => {
            let mut l = Layout::new(piece.region.clone());
            l.push_block(*block, GRID_TAG);
            Ok((l, GridMotion::identity(), Vec::new()))
        }
        PieceKind::Strip {
            spec,
            local,
            motion,
        } => Ok((pack_parallel_strip(spec, local)?, *motion, Vec::new())),
        PieceKind::Trapezoid {
            height,
            small_base,
            slope,
            motion,
        } => {
            let spec = TrapezoidSpec::new(*height, *small_base, *slope, None, Some(0.5))?;
            let p = pack_right_trapezoid(&spec)?;
            let flags = p.flags.iter().map(|f| Value::from(f.as_str())).collect();
            Ok((p.layout, *motion, flags))
        }
    }
}

/// Packs the square of side `x`. Every piece whose packer fails is filled
/// greedily instead and tagged [`FALLBACK_TAG`].
pub fn pack_square(x: f64, beta: f64, epsilon: f64, nu: f64) -> Result<SquarePacking> {
    pack_square_with(x, beta, epsilon, nu, DEFAULT_BASE_COEFFICIENT)
}

pub fn pack_square_with(
    x: f64,
    beta: f64,
    epsilon: f64,
    nu: f64,
    base_coefficient: f64,
) -> Result<SquarePacking> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(PackError::InvalidRegion(format!(
            "side {x} must be positive"
        )));
    }
    if !(beta > 0.5 && beta < 1.0) || !(nu > 0.0 && nu < beta + 0.5) {
        return Err(PackError::Infeasible(format!(
            "need 1/2 < beta < 1 and 0 < nu < beta + 1/2, got beta {beta}, nu {nu}"
        )));
    }
    let m = if x >= MIN_SIDE {
        choose_m(x, beta, epsilon)
    } else {
        0
    };
    let mut plan = if x < MIN_SIDE {
        trivial_plan(x, m, nu)?
    } else {
        plan_with_base(x, m, nu, base_coefficient).or_else(|_| trivial_plan(x, m, nu))?
    };
    plan.beta = beta;
    plan.epsilon = epsilon;

    let packed: Vec<_> = plan.decomposition.par_iter().map(pack_piece).collect();
    let mut layout = Layout::new(Region::rectangle(0.0, 0.0, x, x)?);
    let mut flags = serde_json::Map::new();
    for (piece, result) in plan.decomposition.iter().zip(packed) {
        match result {
            Ok((sub, motion, piece_flags)) => {
                if !piece_flags.is_empty() {
                    flags.insert(piece.name.clone(), Value::from(piece_flags));
                }
                layout.absorb_as(sub, &motion, &piece.name);
            }
            Err(PackError::ConstructionBug(v)) => return Err(PackError::ConstructionBug(v)),
            Err(_) => {
                let sub = pack_naive_region(&piece.region);
                layout.absorb_as(sub, &GridMotion::identity(), FALLBACK_TAG);
            }
        }
    }
    for (k, v) in [("x", x), ("beta", beta), ("epsilon", epsilon), ("nu", nu)] {
        layout.meta.insert(k.into(), v.into());
    }
    layout.meta.insert("m".into(), m.into());
    layout.meta.insert("flags".into(), Value::Object(flags));
    let report = layout.verify(DEFAULT_SHRINK, DEFAULT_SLACK)?;
    if !report.is_empty() {
        return Err(PackError::ConstructionBug(report));
    }
    let stats = measure_waste(&layout)?;
    Ok(SquarePacking {
        plan,
        layout,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choosing_m() {
        assert_eq!(choose_m(1e5, 0.75, 0.0), 10_000);
        let expected = (1e5_f64 / 1e5_f64.ln()).powf(0.8).round() as u64;
        assert_eq!(choose_m(1e5, 0.75, 1.0), expected);
        assert!(choose_m(40.0, 0.75, 0.0) <= 10);
        assert_eq!(choose_m(40.0, 0.75, 0.0), 10);
    }

    #[test]
    fn plan_tiles_the_square() {
        let plan = plan_decomposition(100.5, 10, 0.75).unwrap();
        assert_eq!(plan.decomposition.len(), 7);
        assert!((plan.total_area() - 100.5 * 100.5).abs() < 1e-6 * 100.5 * 100.5);
        let PieceKind::Grid(b) = plan.decomposition[0].kind else {
            panic!("first piece is the grid")
        };
        assert_eq!((b.cols, b.rows), (90, 90));
        for piece in &plan.decomposition {
            if let PieceKind::Trapezoid {
                height,
                slope,
                small_base,
                ..
            } = piece.kind
            {
                assert!((height - 10.5).abs() < 1e-12);
                let large = piece.region.area() * 2.0 / height - small_base;
                assert!(((large - small_base) - height * slope.tan()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn integer_side_is_a_grid() {
        let p = pack_square(100.0, 0.75, 0.0, 0.75).unwrap();
        assert_eq!(p.stats.waste, 0.0);
        assert_eq!(p.plan.decomposition.len(), 1);
    }

    #[test]
    fn small_square_beats_or_ties_trivial() {
        let p = pack_square(20.5, 0.75, 0.0, 0.75).unwrap();
        assert!(p.stats.verified);
        assert!(p.stats.waste <= 20.5 * 20.5 - 400.0);
    }

    #[test]
    fn medium_square_beats_trivial() {
        let x = 512.5;
        let p = pack_square(x, DEFAULT_BETA, DEFAULT_EPSILON, DEFAULT_NU).unwrap();
        assert_eq!(p.plan.m, 34);
        let sum: f64 = p.stats.per_tag_waste.values().sum();
        assert!((sum - p.stats.waste).abs() < 1e-6 * p.stats.waste);
        assert!(p.stats.waste < x * x - 512.0 * 512.0);
    }
}
