//! Layouts, their validation and wasted-area accounting.
//!
//! Pairwise overlap checks go through a uniform spatial hash with cell side 2:
//! two unit squares can only overlap when their centers are closer than √2,
//! so only squares in the same or adjacent cells are compared.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::geometry::{
    block_overlap_depth, excess_of_points, overlap_depth, square_block_depth, GridBlock,
    GridMotion, PlacedSquare, Region,
};

pub const DEFAULT_SHRINK: f64 = 1e-9;
pub const DEFAULT_SLACK: f64 = 1e-9;

const CELL: f64 = 2.0;

/// Label attributed to waste that no tagged part claims.
pub const UNATTRIBUTED: &str = "unattributed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Item {
    Square(usize),
    Block(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// `depth` is the penetration of the shrunk shapes.
    Overlap { a: Item, b: Item, depth: f64 },
    /// `excess` is how far the worst corner leaves the region beyond slack.
    Outside { item: Item, excess: f64 },
}

impl Violation {
    fn key(&self) -> (Item, Item) {
        match *self {
            Violation::Overlap { a, b, .. } => (a, b),
            Violation::Outside { item, .. } => (item, item),
        }
    }
}

/// Squares and grid blocks placed inside a convex region, each with a
/// provenance label.
#[derive(Debug, Clone)]
pub struct Layout {
    region: Region,
    squares: Vec<PlacedSquare>,
    square_tags: Vec<u16>,
    blocks: Vec<GridBlock>,
    block_tags: Vec<u16>,
    labels: Vec<String>,
    /// Area of the region apportioned to each label, used for per-label waste.
    tag_areas: BTreeMap<String, f64>,
    pub meta: BTreeMap<String, serde_json::Value>,
    verified_at: Option<(f64, f64)>,
}

impl Layout {
    pub fn new(region: Region) -> Self {
        Self {
            region,
            squares: Vec::new(),
            square_tags: Vec::new(),
            blocks: Vec::new(),
            block_tags: Vec::new(),
            labels: Vec::new(),
            tag_areas: BTreeMap::new(),
            meta: BTreeMap::new(),
            verified_at: None,
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn squares(&self) -> &[PlacedSquare] {
        &self.squares
    }

    pub fn grid_blocks(&self) -> &[GridBlock] {
        &self.blocks
    }

    pub fn tag_areas(&self) -> &BTreeMap<String, f64> {
        &self.tag_areas
    }

    pub fn square_tag(&self, i: usize) -> &str {
        &self.labels[self.square_tags[i] as usize]
    }

    pub fn block_tag(&self, i: usize) -> &str {
        &self.labels[self.block_tags[i] as usize]
    }

    /// Materialized squares plus the analytic count of every grid block.
    pub fn square_count(&self) -> u64 {
        self.squares.len() as u64 + self.blocks.iter().map(GridBlock::count).sum::<u64>()
    }

    pub fn count_with_tag(&self, label: &str) -> u64 {
        let Some(id) = self.labels.iter().position(|l| l == label) else {
            return 0;
        };
        let id = id as u16;
        let squares = self.square_tags.iter().filter(|&&t| t == id).count() as u64;
        let blocks: u64 = self
            .blocks
            .iter()
            .zip(&self.block_tags)
            .filter(|(_, &t)| t == id)
            .map(|(b, _)| b.count())
            .sum();
        squares + blocks
    }

    fn intern(&mut self, label: &str) -> u16 {
        if let Some(i) = self.labels.iter().position(|l| l == label) {
            return i as u16;
        }
        self.labels.push(label.to_string());
        (self.labels.len() - 1) as u16
    }

    pub fn push_square(&mut self, s: PlacedSquare, label: &str) {
        let t = self.intern(label);
        self.squares.push(s);
        self.square_tags.push(t);
        self.verified_at = None;
    }

    pub fn push_block(&mut self, b: GridBlock, label: &str) {
        let t = self.intern(label);
        self.blocks.push(b);
        self.block_tags.push(t);
        self.verified_at = None;
    }

    pub fn add_tag_area(&mut self, label: &str, area: f64) {
        *self.tag_areas.entry(label.to_string()).or_insert(0.0) += area;
    }

    /// Moves every square, block and tag area of `other` into `self`
    /// after applying `motion`. The region of `other` is dropped.
    pub fn absorb(&mut self, other: Layout, motion: &GridMotion) {
        let remap: Vec<u16> = other.labels.iter().map(|l| self.intern(l)).collect();
        self.squares.reserve(other.squares.len());
        for (s, t) in other.squares.iter().zip(&other.square_tags) {
            self.squares.push(motion.apply_square(s));
            self.square_tags.push(remap[*t as usize]);
        }
        for (b, t) in other.blocks.iter().zip(&other.block_tags) {
            self.blocks.push(motion.apply_block(b));
            self.block_tags.push(remap[*t as usize]);
        }
        for (label, area) in other.tag_areas {
            self.add_tag_area(&label, area);
        }
        self.verified_at = None;
    }

    /// Like [`Layout::absorb`] but every square and block of `other` is
    /// relabelled `label`, and `label` is charged the area of `other`'s region.
    pub fn absorb_as(&mut self, other: Layout, motion: &GridMotion, label: &str) {
        let t = self.intern(label);
        self.squares.reserve(other.squares.len());
        self.squares
            .extend(other.squares.iter().map(|s| motion.apply_square(s)));
        self.square_tags.resize(self.squares.len(), t);
        for b in &other.blocks {
            self.blocks.push(motion.apply_block(b));
            self.block_tags.push(t);
        }
        self.add_tag_area(label, other.region.area());
        self.verified_at = None;
    }

    /// Same layout seen through a rigid motion.
    pub fn moved(self, motion: &GridMotion) -> Layout {
        let mut out = Layout::new(motion.apply_region(&self.region));
        out.meta = self.meta.clone();
        out.absorb(self, motion);
        out
    }

    pub fn is_verified(&self) -> bool {
        self.verified_at.is_some()
    }

    /// Runs [`verify_layout`] and remembers a clean result so that waste can
    /// be measured afterwards.
    pub fn verify(&mut self, shrink: f64, slack: f64) -> Result<Vec<Violation>> {
        let report = verify_layout(self, shrink, slack)?;
        self.verified_at = report.is_empty().then_some((shrink, slack));
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingStats {
    pub region_area: f64,
    pub square_count: u64,
    pub waste: f64,
    pub per_tag_waste: BTreeMap<String, f64>,
    pub verified: bool,
}

fn check_tolerances(shrink: f64, slack: f64) -> Result<()> {
    for (name, v) in [("shrink", shrink), ("slack", slack)] {
        if !(0.0..=0.01).contains(&v) {
            return Err(PackError::Format(format!(
                "{name} must lie in [0, 0.01], got {v}"
            )));
        }
    }
    Ok(())
}

fn containment_violations(layout: &Layout, slack: f64) -> Vec<Violation> {
    let planes = layout.region.half_planes();
    let mut out: Vec<Violation> = layout
        .squares
        .par_iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let e = excess_of_points(&s.corners(), &planes);
            (e > slack).then_some(Violation::Outside {
                item: Item::Square(i),
                excess: e - slack,
            })
        })
        .collect();
    for (i, b) in layout.blocks.iter().enumerate() {
        let e = excess_of_points(&b.corners(), &planes);
        if e > slack {
            out.push(Violation::Outside {
                item: Item::Block(i),
                excess: e - slack,
            });
        }
    }
    out
}

fn block_violations(layout: &Layout, shrink: f64) -> Vec<Violation> {
    let blocks = &layout.blocks;
    let mut out = Vec::new();

    // Sweep in y so that stacked rows of blocks are not compared all-pairs.
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by(|&a, &b| {
        blocks[a]
            .origin
            .y
            .total_cmp(&blocks[b].origin.y)
            .then(a.cmp(&b))
    });
    for (k, &i) in order.iter().enumerate() {
        let top = blocks[i].origin.y + blocks[i].rows as f64;
        for &j in &order[k + 1..] {
            if blocks[j].origin.y >= top {
                break;
            }
            let d = block_overlap_depth(&blocks[i], &blocks[j], shrink);
            if d > 0.0 {
                out.push(Violation::Overlap {
                    a: Item::Block(i.min(j)),
                    b: Item::Block(i.max(j)),
                    depth: d,
                });
            }
        }
    }

    // Blocks indexed by the horizontal bands of height CELL they touch.
    let mut bands: HashMap<i64, Vec<usize>> = HashMap::new();
    for (j, b) in blocks.iter().enumerate() {
        let lo = ((b.origin.y - 1.0) / CELL).floor() as i64;
        let hi = ((b.origin.y + b.rows as f64 + 1.0) / CELL).floor() as i64;
        for band in lo..=hi {
            bands.entry(band).or_default().push(j);
        }
    }
    let per_square: Vec<Violation> = layout
        .squares
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, s)| {
            let band = (s.center.y / CELL).floor() as i64;
            let candidates = bands.get(&band).map(Vec::as_slice).unwrap_or(&[]);
            candidates.iter().filter_map(move |&j| {
                let b = &blocks[j];
                if s.center.x < b.origin.x - 1.0 || s.center.x > b.origin.x + b.cols as f64 + 1.0 {
                    return None;
                }
                let d = square_block_depth(s, b, shrink);
                (d > 0.0).then_some(Violation::Overlap {
                    a: Item::Square(i),
                    b: Item::Block(j),
                    depth: d,
                })
            })
        })
        .collect();
    out.extend(per_square);
    out
}

fn cell_of(s: &PlacedSquare) -> (i64, i64) {
    (
        (s.center.x / CELL).floor() as i64,
        (s.center.y / CELL).floor() as i64,
    )
}

/// Checks containment and pairwise non-overlap. An empty report means the
/// layout is valid at the given tolerances. Entries are sorted by index.
pub fn verify_layout(layout: &Layout, shrink: f64, slack: f64) -> Result<Vec<Violation>> {
    check_tolerances(shrink, slack)?;
    let squares = &layout.squares;

    let mut keyed: Vec<((i64, i64), u32)> = squares
        .iter()
        .enumerate()
        .map(|(i, s)| (cell_of(s), i as u32))
        .collect();
    keyed.par_sort_unstable();
    let order: Vec<u32> = keyed.iter().map(|k| k.1).collect();
    // Runs of `order` sharing a cell, as (cell, start, end).
    let mut runs: Vec<((i64, i64), usize, usize)> = Vec::new();
    for (k, &(c, _)) in keyed.iter().enumerate() {
        match runs.last_mut() {
            Some((last, _, end)) if *last == c => *end = k + 1,
            _ => runs.push((c, k, k + 1)),
        }
    }
    drop(keyed);
    let cell = |c: (i64, i64)| {
        runs.binary_search_by(|r| r.0.cmp(&c))
            .map(|k| &order[runs[k].1..runs[k].2])
            .unwrap_or(&[])
    };

    let pair_violations: Vec<Violation> = runs
        .par_iter()
        .flat_map_iter(|&((cx, cy), start, end)| {
            let mut found = Vec::new();
            let own = &order[start..end];
            for (k, &i) in own.iter().enumerate() {
                for &j in &own[k + 1..] {
                    push_if_overlap(squares, i, j, shrink, &mut found);
                }
            }
            // Half of the 8 neighbours so each unordered cell pair is seen once.
            for (dx, dy) in [(1, -1), (1, 0), (1, 1), (0, 1)] {
                let other = cell((cx + dx, cy + dy));
                for &i in own {
                    for &j in other {
                        push_if_overlap(squares, i, j, shrink, &mut found);
                    }
                }
            }
            found
        })
        .collect();

    let mut report = containment_violations(layout, slack);
    report.extend(pair_violations);
    report.extend(block_violations(layout, shrink));
    report.sort_by_key(Violation::key);
    Ok(report)
}

fn push_if_overlap(
    squares: &[PlacedSquare],
    i: u32,
    j: u32,
    shrink: f64,
    out: &mut Vec<Violation>,
) {
    let (i, j) = (i.min(j) as usize, i.max(j) as usize);
    // Farther apart than the sum of circumradii.
    let gap = squares[i].center - squares[j].center;
    if gap.dot(gap) >= 2.0 {
        return;
    }
    let d = overlap_depth(&squares[i], &squares[j], shrink);
    if d > 0.0 {
        out.push(Violation::Overlap {
            a: Item::Square(i),
            b: Item::Square(j),
            depth: d,
        });
    }
}

/// Quadratic reference check comparing every pair of squares.
pub fn verify_layout_brute_force(
    layout: &Layout,
    shrink: f64,
    slack: f64,
) -> Result<Vec<Violation>> {
    check_tolerances(shrink, slack)?;
    let squares = &layout.squares;
    let mut report = containment_violations(layout, slack);
    for i in 0..squares.len() {
        for j in i + 1..squares.len() {
            let d = overlap_depth(&squares[i], &squares[j], shrink);
            if d > 0.0 {
                report.push(Violation::Overlap {
                    a: Item::Square(i),
                    b: Item::Square(j),
                    depth: d,
                });
            }
        }
    }
    report.extend(block_violations(layout, shrink));
    report.sort_by_key(Violation::key);
    Ok(report)
}

/// Wasted area of a verified layout, split by provenance label.
///
/// A label's waste is the area apportioned to it minus the squares carrying
/// it; whatever no label claims is reported under [`UNATTRIBUTED`]. The
/// per-label values therefore always add up to the total.
pub fn measure_waste(layout: &Layout) -> Result<PackingStats> {
    if !layout.is_verified() {
        return Err(PackError::Unverified);
    }
    let region_area = layout.region.area();
    let square_count = layout.square_count();
    let waste = region_area - square_count as f64;

    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for &t in &layout.square_tags {
        *counts.entry(&layout.labels[t as usize]).or_default() += 1;
    }
    for (b, &t) in layout.blocks.iter().zip(&layout.block_tags) {
        *counts.entry(&layout.labels[t as usize]).or_default() += b.count();
    }

    let mut per_tag_waste = BTreeMap::new();
    let mut claimed_area = 0.0;
    let mut claimed_count = 0u64;
    for (label, &area) in &layout.tag_areas {
        let n = counts.get(label.as_str()).copied().unwrap_or(0);
        per_tag_waste.insert(label.clone(), area - n as f64);
        claimed_area += area;
        claimed_count += n;
    }
    let rest = (region_area - claimed_area) - (square_count - claimed_count) as f64;
    if rest.abs() > 1e-9 * region_area.max(1.0) || square_count != claimed_count {
        *per_tag_waste.entry(UNATTRIBUTED.to_string()).or_insert(0.0) += rest;
    }

    Ok(PackingStats {
        region_area,
        square_count,
        waste,
        per_tag_waste,
        verified: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn exact_fit_is_clean() {
        let mut l = Layout::new(Region::rectangle(0.0, 0.0, 1.0, 1.0).unwrap());
        l.push_square(PlacedSquare::axis_aligned(Point::new(0.5, 0.5)), "naive");
        assert!(l.verify(1e-9, 1e-9).unwrap().is_empty());
        let stats = measure_waste(&l).unwrap();
        assert_eq!(stats.waste, 0.0);
        assert_eq!(stats.square_count, 1);
    }

    #[test]
    fn coincident_squares_give_one_violation() {
        let mut l = Layout::new(Region::rectangle(0.0, 0.0, 3.0, 3.0).unwrap());
        let s = PlacedSquare::new(Point::new(1.5, 1.5), 0.1);
        l.push_square(s, "a");
        l.push_square(s, "a");
        let report = l.verify(1e-9, 1e-9).unwrap();
        assert_eq!(report.len(), 1);
        match report[0] {
            Violation::Overlap { a, b, depth } => {
                assert_eq!((a, b), (Item::Square(0), Item::Square(1)));
                assert!(depth > 0.9);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(measure_waste(&l), Err(PackError::Unverified)));
    }

    #[test]
    fn empty_layout_wastes_everything() {
        let mut l = Layout::new(Region::rectangle(0.0, 0.0, 2.0, 2.0).unwrap());
        l.verify(DEFAULT_SHRINK, DEFAULT_SLACK).unwrap();
        let stats = measure_waste(&l).unwrap();
        assert_eq!(stats.waste, 4.0);
        assert_eq!(stats.per_tag_waste[UNATTRIBUTED], 4.0);
    }

    #[test]
    fn perfect_grid_block() {
        let mut l = Layout::new(Region::rectangle(0.0, 0.0, 10.0, 10.0).unwrap());
        l.push_block(
            GridBlock::new(Point::new(0.0, 0.0), 10, 10).unwrap(),
            "grid",
        );
        l.add_tag_area("grid", 100.0);
        assert!(l.verify(1e-9, 1e-9).unwrap().is_empty());
        let stats = measure_waste(&l).unwrap();
        assert_eq!(stats.waste, 0.0);
        assert_eq!(stats.per_tag_waste.len(), 1);
    }

    #[test]
    fn blocks_collide_with_squares_and_each_other() {
        let mut l = Layout::new(Region::rectangle(0.0, 0.0, 10.0, 10.0).unwrap());
        l.push_block(GridBlock::new(Point::new(0.0, 0.0), 4, 4).unwrap(), "grid");
        l.push_block(GridBlock::new(Point::new(3.5, 3.5), 2, 2).unwrap(), "grid");
        l.push_square(PlacedSquare::new(Point::new(4.4, 1.0), 0.3), "x");
        l.push_square(PlacedSquare::axis_aligned(Point::new(4.5, 3.2)), "x");
        let report = l.verify(1e-9, 1e-9).unwrap();
        let pairs: Vec<_> = report.iter().map(Violation::key).collect();
        assert_eq!(
            pairs,
            vec![
                (Item::Square(0), Item::Block(0)),
                (Item::Square(1), Item::Block(1)),
                (Item::Block(0), Item::Block(1)),
            ]
        );
    }

    #[test]
    fn tolerances_out_of_range_are_rejected() {
        let l = Layout::new(Region::rectangle(0.0, 0.0, 1.0, 1.0).unwrap());
        assert!(verify_layout(&l, 0.5, 0.0).is_err());
        assert!(verify_layout(&l, 0.0, -1.0).is_err());
    }
}
