//! Command-line front end and the on-disk layout format.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::Value;

use crate::analysis::{fit_exponent, read_csv, sweep, write_csv, Method, SweepParams};
use crate::error::{PackError, Result};
use crate::geometry::{GridBlock, PlacedSquare, Point, Region};
use crate::quad_primitive::{build_quad_packing, derive_params};
use crate::square::{pack_square, DEFAULT_BETA, DEFAULT_EPSILON, DEFAULT_NU};
use crate::trapezoid::{pack_right_trapezoid, TrapezoidSpec};
use crate::verifier::{
    measure_waste, verify_layout, Item, Layout, Violation, DEFAULT_SHRINK, DEFAULT_SLACK,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "sqpack",
    version,
    about = "Pack unit squares into large regions with little wasted area"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a quadrilateral packing.
    PackQuad {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        sigma1: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pack a right trapezoid with horizontal bases.
    PackTrapezoid {
        #[arg(long)]
        height: f64,
        #[arg(long)]
        base: f64,
        /// Angle of the slanted side from the vertical, in radians.
        #[arg(long)]
        slope: f64,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pack the square of side x.
    PackSquare {
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_NU)]
        nu: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a layout file for overlaps and squares sticking out.
    Verify {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SHRINK)]
        shrink: f64,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
    },
    /// Print waste statistics of a layout file as JSON.
    Stats {
        #[arg(long)]
        layout: PathBuf,
    },
    /// Draw a layout file as SVG.
    Render {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        svg: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        stroke_width: f64,
    },
    /// Pack a range of sizes with one method and write a CSV.
    Sweep {
        #[arg(long)]
        method: Method,
        /// Comma separated, strictly increasing.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        xs: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_NU)]
        nu: f64,
        /// Write zero in the seconds column.
        #[arg(long)]
        no_timing: bool,
    },
    /// Fit waste ~ x^slope to a sweep CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
    },
}

impl clap::ValueEnum for Method {
    fn value_variants<'a>() -> &'a [Self] {
        &Method::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.as_str()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SquareRecord {
    cx: f64,
    cy: f64,
    angle: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockRecord {
    x0: f64,
    y0: f64,
    cols: u64,
    rows: u64,
}

/// Parsed form of a layout file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    version: u32,
    region: Vec<[f64; 2]>,
    squares: Vec<SquareRecord>,
    grid_blocks: Vec<BlockRecord>,
    /// One label per square.
    tags: Vec<String>,
    /// One label per grid block.
    block_tags: Vec<String>,
    tag_areas: BTreeMap<String, f64>,
    meta: BTreeMap<String, Value>,
}

impl LayoutFile {
    pub fn into_layout(self) -> Result<Layout> {
        if self.version != FORMAT_VERSION {
            return Err(PackError::Format(format!(
                "version: expected {FORMAT_VERSION}, found {}",
                self.version
            )));
        }
        if self.tags.len() != self.squares.len() {
            return Err(PackError::Format(format!(
                "tags: {} labels for {} squares",
                self.tags.len(),
                self.squares.len()
            )));
        }
        if self.block_tags.len() != self.grid_blocks.len() {
            return Err(PackError::Format(format!(
                "block_tags: {} labels for {} grid_blocks",
                self.block_tags.len(),
                self.grid_blocks.len()
            )));
        }
        let vertices = self.region.iter().map(|&[x, y]| Point::new(x, y)).collect();
        let region =
            Region::new(vertices).map_err(|e| PackError::Format(format!("region: {e}")))?;
        let mut layout = Layout::new(region);
        for (s, tag) in self.squares.iter().zip(&self.tags) {
            layout.push_square(PlacedSquare::new(Point::new(s.cx, s.cy), s.angle), tag);
        }
        for (b, tag) in self.grid_blocks.iter().zip(&self.block_tags) {
            let block = GridBlock::new(Point::new(b.x0, b.y0), b.cols, b.rows)
                .map_err(|e| PackError::Format(format!("grid_blocks: {e}")))?;
            layout.push_block(block, tag);
        }
        for (label, area) in self.tag_areas {
            layout.add_tag_area(&label, area);
        }
        layout.meta = self.meta;
        Ok(layout)
    }
}

pub fn parse_layout(text: &str) -> Result<Layout> {
    let file: LayoutFile =
        serde_json::from_str(text).map_err(|e| PackError::Format(format!("layout file: {e}")))?;
    file.into_layout()
}

pub fn read_layout(path: &Path) -> Result<Layout> {
    parse_layout(&fs::read_to_string(path).map_err(|e| file_error(path, e))?)
}

fn file_error(path: &Path, e: std::io::Error) -> PackError {
    PackError::Format(format!("{}: {e}", path.display()))
}

fn num(out: &mut String, v: f64) {
    if v.is_finite() {
        write!(out, "{v:.16e}").unwrap();
    } else {
        out.push_str("null");
    }
}

fn string(out: &mut String, s: &str) {
    out.push_str(&Value::from(s).to_string());
}

fn value(out: &mut String, v: &Value) {
    match v {
        Value::Number(n) if n.is_f64() => num(out, n.as_f64().unwrap()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                string(out, k);
                out.push_str(": ");
                value(out, item);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn list<T>(out: &mut String, key: &str, items: &[T], mut each: impl FnMut(&mut String, &T)) {
    write!(out, "  \"{key}\": [").unwrap();
    for (i, item) in items.iter().enumerate() {
        out.push_str(if i == 0 { "\n    " } else { ",\n    " });
        each(out, item);
    }
    out.push_str(if items.is_empty() { "],\n" } else { "\n  ],\n" });
}

/// Canonical JSON text of a layout. Floats carry 17 significant digits, so
/// reading the text back gives the same numbers.
pub fn layout_to_json(layout: &Layout) -> String {
    let mut out = String::from("{\n");
    writeln!(out, "  \"version\": {FORMAT_VERSION},").unwrap();
    list(&mut out, "region", layout.region().vertices(), |o, p| {
        o.push('[');
        num(o, p.x);
        o.push_str(", ");
        num(o, p.y);
        o.push(']');
    });
    list(&mut out, "squares", layout.squares(), |o, s| {
        o.push_str("{\"cx\": ");
        num(o, s.center.x);
        o.push_str(", \"cy\": ");
        num(o, s.center.y);
        o.push_str(", \"angle\": ");
        num(o, s.angle());
        o.push('}');
    });
    list(&mut out, "grid_blocks", layout.grid_blocks(), |o, b| {
        o.push_str("{\"x0\": ");
        num(o, b.origin.x);
        o.push_str(", \"y0\": ");
        num(o, b.origin.y);
        write!(o, ", \"cols\": {}, \"rows\": {}}}", b.cols, b.rows).unwrap();
    });
    let tags: Vec<&str> = (0..layout.squares().len())
        .map(|i| layout.square_tag(i))
        .collect();
    list(&mut out, "tags", &tags, |o, t| string(o, t));
    let block_tags: Vec<&str> = (0..layout.grid_blocks().len())
        .map(|i| layout.block_tag(i))
        .collect();
    list(&mut out, "block_tags", &block_tags, |o, t| string(o, t));
    let areas: Value = layout
        .tag_areas()
        .iter()
        .map(|(k, v)| (k.clone(), Value::from(*v)))
        .collect();
    out.push_str("  \"tag_areas\": ");
    value(&mut out, &areas);
    out.push_str(",\n  \"meta\": ");
    let meta: Value = layout.meta.clone().into_iter().collect();
    value(&mut out, &meta);
    out.push_str("\n}\n");
    out
}

pub fn write_layout(path: &Path, layout: &Layout) -> Result<()> {
    fs::write(path, layout_to_json(layout)).map_err(|e| file_error(path, e))?;
    Ok(())
}

/// SVG drawing with y pointing up: the region outline, hatched grid blocks
/// and one polygon per square, in layout order.
pub fn render_svg(layout: &Layout, stroke_width: f64) -> String {
    let (lo, hi) = layout.region().bbox();
    let pad = 1.0;
    let flip = |p: Point| Point::new(p.x - lo.x + pad, hi.y - p.y + pad);
    let points = |ps: &[Point]| {
        ps.iter()
            .map(|&p| {
                let q = flip(p);
                format!("{:.6},{:.6}", q.x, q.y)
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let scale = 800.0 / w.max(h);
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w:.6} {h:.6}\" width=\"{:.0}\" height=\"{:.0}\">",
        w * scale,
        h * scale
    )
    .unwrap();
    out.push_str(
        "<defs><pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"1\" height=\"1\" patternTransform=\"rotate(45)\">\
<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"1\" stroke=\"#4a6fa5\" stroke-width=\"0.2\"/></pattern></defs>\n",
    );
    writeln!(
        out,
        "<polygon class=\"region\" points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"{:.6}\"/>",
        points(layout.region().vertices()),
        2.0 * stroke_width
    )
    .unwrap();
    for b in layout.grid_blocks() {
        let p = flip(Point::new(b.origin.x, b.origin.y + b.rows as f64));
        writeln!(
            out,
            "<rect class=\"block\" x=\"{:.6}\" y=\"{:.6}\" width=\"{}\" height=\"{}\" fill=\"url(#hatch)\" stroke=\"#4a6fa5\" stroke-width=\"{stroke_width:.6}\"/>",
            p.x, p.y, b.cols, b.rows
        )
        .unwrap();
    }
    for s in layout.squares() {
        writeln!(
            out,
            "<polygon class=\"square\" points=\"{}\" fill=\"#f2c14e\" stroke=\"#7a5c00\" stroke-width=\"{stroke_width:.6}\"/>",
            points(&s.corners())
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn describe(item: Item) -> String {
    match item {
        Item::Square(i) => format!("square {i}"),
        Item::Block(i) => format!("block {i}"),
    }
}

pub fn describe_violation(v: &Violation) -> String {
    match *v {
        Violation::Overlap { a, b, depth } => format!(
            "overlap: {} and {} by {depth:.3e}",
            describe(a),
            describe(b)
        ),
        Violation::Outside { item, excess } => {
            format!("outside: {} by {excess:.3e}", describe(item))
        }
    }
}

fn print_stats(layout: &mut Layout) -> Result<()> {
    let report = layout.verify(DEFAULT_SHRINK, DEFAULT_SLACK)?;
    if !report.is_empty() {
        return Err(PackError::ConstructionBug(report));
    }
    let stats = measure_waste(layout)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&stats).map_err(|e| PackError::Format(e.to_string()))?
    );
    Ok(())
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::PackQuad {
            m,
            theta,
            sigma1,
            out,
        } => {
            let packing = build_quad_packing(&derive_params(m, theta, sigma1)?)?;
            write_layout(&out, &packing.layout)?;
            println!("{}", serde_json::to_string_pretty(&packing.stats).unwrap());
        }
        Command::PackTrapezoid {
            height,
            base,
            slope,
            beta,
            gamma,
            out,
        } => {
            let packing =
                pack_right_trapezoid(&TrapezoidSpec::new(height, base, slope, beta, gamma)?)?;
            write_layout(&out, &packing.layout)?;
            println!("{}", serde_json::to_string_pretty(&packing.stats).unwrap());
            for flag in &packing.flags {
                eprintln!("note: {flag}");
            }
        }
        Command::PackSquare {
            x,
            beta,
            epsilon,
            nu,
            out,
        } => {
            let packing = pack_square(x, beta, epsilon, nu)?;
            write_layout(&out, &packing.layout)?;
            println!("{}", serde_json::to_string_pretty(&packing.stats).unwrap());
        }
        Command::Verify {
            layout,
            shrink,
            slack,
        } => {
            let layout = read_layout(&layout)?;
            let report = verify_layout(&layout, shrink, slack)?;
            if report.is_empty() {
                println!(
                    "ok: {} squares in {} grid blocks and {} placed squares",
                    layout.square_count(),
                    layout.grid_blocks().len(),
                    layout.squares().len()
                );
            } else {
                println!("{} violation(s)", report.len());
                for v in &report {
                    println!("{}", describe_violation(v));
                }
                return Ok(1);
            }
        }
        Command::Stats { layout } => print_stats(&mut read_layout(&layout)?)?,
        Command::Render {
            layout,
            svg,
            stroke_width,
        } => {
            if !(stroke_width > 0.0) {
                return Err(PackError::Format(format!(
                    "stroke-width: must be positive, got {stroke_width}"
                )));
            }
            let text = render_svg(&read_layout(&layout)?, stroke_width);
            fs::write(&svg, text).map_err(|e| file_error(&svg, e))?;
        }
        Command::Sweep {
            method,
            xs,
            out,
            beta,
            gamma,
            epsilon,
            nu,
            no_timing,
        } => {
            let params = SweepParams {
                beta,
                gamma,
                epsilon,
                nu,
                timing: !no_timing,
                ..SweepParams::default()
            };
            let records = sweep(method, &xs, &params)?;
            write_csv(
                &records,
                fs::File::create(&out).map_err(|e| file_error(&out, e))?,
            )?;
            let failed = records.iter().filter(|r| !r.verified).count();
            if failed > 0 {
                eprintln!("note: {failed} of {} points failed", records.len());
            }
        }
        Command::Fit { csv } => {
            let fit = fit_exponent(&read_csv(
                fs::File::open(&csv).map_err(|e| file_error(&csv, e))?,
            )?)?;
            println!(
                "slope {:.6} intercept {:.6} r2 {:.6} n {}",
                fit.slope, fit.intercept, fit.r2, fit.n
            );
        }
    }
    Ok(0)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SQPACK_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            PackError::Format(format!(
                "SQPACK_THREADS: expected a positive integer, got {v:?}"
            ))
        })?;
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Runs one command line and returns the process exit status: 0 on
/// success, 1 when a layout fails verification, 2 on bad input.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|_| execute(cli.command)) {
        Ok(code) => code,
        Err(PackError::ConstructionBug(v)) => {
            eprintln!("error: {} violation(s)", v.len());
            for v in v.iter().take(20) {
                eprintln!("{}", describe_violation(v));
            }
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
