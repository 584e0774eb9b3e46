//! Parameter sweeps and power-law fits of the wasted area.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::geometry::{GridBlock, Point, Region};
use crate::quad_primitive::{build_quad_packing, derive_params};
use crate::square::{pack_square, DEFAULT_BETA, DEFAULT_EPSILON, DEFAULT_NU};
use crate::strip::{pack_parallel_strip, solve_tilt, stack_parallelogram, StripSpec};
use crate::trapezoid::{pack_right_trapezoid, TrapezoidSpec};
use crate::verifier::{measure_waste, Layout, PackingStats, DEFAULT_SHRINK, DEFAULT_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Trivial,
    Strip,
    Quad,
    Trapezoid,
    Square,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Trivial,
        Method::Strip,
        Method::Quad,
        Method::Trapezoid,
        Method::Square,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Trivial => "trivial",
            Method::Strip => "strip",
            Method::Quad => "quad",
            Method::Trapezoid => "trapezoid",
            Method::Square => "square",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = PackError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| PackError::Format(format!("unknown method {s:?}")))
    }
}

/// How each method turns the sweep variable `x` into an instance.
///
/// * trivial: `⌊x⌋²` grid in the `x` by `x` square.
/// * strip: `strip_stacks` stacks of `⌊x⌋ + 1` squares spanning `x`, in the
///   parallelogram they sweep.
/// * quad: `m = round(x)` columns, with `θ` and `σ1` from the fields below.
/// * trapezoid: height `x`, short base `x^β`, slope `x^{-γ}`.
/// * square: side `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub nu: f64,
    pub strip_stacks: u64,
    /// Defaults to `min(0.2, 2/√m)`.
    pub quad_theta: Option<f64>,
    /// Defaults to `min(0.1, θ²)`.
    pub quad_sigma1: Option<f64>,
    /// When false every record carries zero seconds, making output
    /// reproducible byte for byte.
    pub timing: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            gamma: 0.5,
            epsilon: DEFAULT_EPSILON,
            nu: DEFAULT_NU,
            strip_stacks: 64,
            quad_theta: None,
            quad_sigma1: None,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub x: f64,
    pub method: Method,
    pub waste: f64,
    pub squares: u64,
    pub seconds: f64,
    pub verified: bool,
}

fn checked(mut layout: Layout) -> Result<PackingStats> {
    let report = layout.verify(DEFAULT_SHRINK, DEFAULT_SLACK)?;
    if !report.is_empty() {
        return Err(PackError::ConstructionBug(report));
    }
    measure_waste(&layout)
}

pub fn run_method(method: Method, x: f64, params: &SweepParams) -> Result<PackingStats> {
    match method {
        Method::Trivial => {
            let region = Region::rectangle(0.0, 0.0, x, x)?;
            let mut layout = Layout::new(region);
            let k = x.floor() as u64;
            if k > 0 {
                layout.push_block(GridBlock::new(Point::default(), k, k)?, "grid");
            }
            checked(layout)
        }
        Method::Strip => {
            let stack = x.floor() as u64 + 1;
            let alpha = solve_tilt(stack, x)?.alpha;
            let region = stack_parallelogram(Point::default(), x, alpha, params.strip_stacks)?;
            let spec = StripSpec::new(x, params.strip_stacks as f64 / alpha.cos(), stack)?;
            checked(pack_parallel_strip(&spec, &region)?)
        }
        Method::Quad => {
            let m = x.round() as u64;
            let theta = params
                .quad_theta
                .unwrap_or_else(|| (2.0 / (m as f64).sqrt()).min(0.2));
            let sigma1 = params
                .quad_sigma1
                .unwrap_or_else(|| (theta * theta).min(0.1));
            Ok(build_quad_packing(&derive_params(m, theta, sigma1)?)?.stats)
        }
        Method::Trapezoid => {
            let spec = TrapezoidSpec::new(
                x,
                x.powf(params.beta),
                x.powf(-params.gamma),
                Some(params.beta),
                Some(params.gamma),
            )?;
            Ok(pack_right_trapezoid(&spec)?.stats)
        }
        Method::Square => Ok(pack_square(x, params.beta, params.epsilon, params.nu)?.stats),
    }
}

/// One record per `x`, in the order given. Points are packed in parallel.
pub fn sweep(method: Method, xs: &[f64], params: &SweepParams) -> Result<Vec<SweepRecord>> {
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PackError::Format(
            "sweep abscissae must be strictly increasing".into(),
        ));
    }
    Ok(xs
        .par_iter()
        .map(|&x| {
            let start = Instant::now();
            let outcome = run_method(method, x, params);
            let seconds = if params.timing {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            match outcome {
                Ok(stats) => SweepRecord {
                    x,
                    method,
                    waste: stats.waste.max(0.0),
                    squares: stats.square_count,
                    seconds,
                    verified: stats.verified,
                },
                Err(_) => SweepRecord {
                    x,
                    method,
                    waste: 0.0,
                    squares: 0,
                    seconds,
                    verified: false,
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Least squares line through `(ln x, ln y)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len();
    if n < 3 {
        return Err(PackError::InsufficientData(format!(
            "{n} usable points, need 3"
        )));
    }
    let nf = n as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(PackError::InsufficientData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(FitResult {
        slope,
        intercept: my - slope * mx,
        r2,
        n,
    })
}

/// Fits the verified records with positive waste.
pub fn fit_exponent(records: &[SweepRecord]) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.verified && r.waste > 0.0)
        .map(|r| (r.x, r.waste))
        .collect();
    fit_power_law(&points)
}

pub const CSV_HEADER: [&str; 6] = ["x", "method", "waste", "squares", "seconds", "verified"];

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| PackError::Format(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            format!("{:.16e}", r.x),
            r.method.to_string(),
            format!("{:.16e}", r.waste),
            r.squares.to_string(),
            format!("{:.16e}", r.seconds),
            r.verified.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| PackError::Format(e.to_string()))?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(PackError::Format(format!(
            "unexpected CSV header {headers:?}"
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| PackError::Format(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_waste_is_the_fractional_frame() {
        let recs = sweep(
            Method::Trivial,
            &[10.5, 20.5, 40.5],
            &SweepParams::default(),
        )
        .unwrap();
        assert_eq!(recs[0].waste, 10.25);
        for r in &recs {
            assert!(r.verified);
            assert_eq!(r.waste, r.x * r.x - r.x.floor().powi(2));
        }
        let fit = fit_exponent(&recs).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05);
    }

    #[test]
    fn exact_power_law() {
        let fit = fit_power_law(&[(100.0, 10.0), (1e3, 10f64.powf(1.5)), (1e4, 100.0)]).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.n, 3);
    }

    #[test]
    fn too_few_points() {
        let r = fit_power_law(&[(1.0, 1.0), (2.0, 2.0), (3.0, 0.0)]);
        assert!(matches!(r, Err(PackError::InsufficientData(_))));
    }

    #[test]
    fn failures_are_kept_but_unverified() {
        let recs = sweep(Method::Trapezoid, &[10.0, 500.0], &SweepParams::default()).unwrap();
        assert!(!recs[0].verified);
        assert!(recs[1].verified);
    }

    #[test]
    fn csv_round_trip_and_header() {
        let params = SweepParams {
            timing: false,
            ..SweepParams::default()
        };
        let recs = sweep(Method::Strip, &[10.5, 30.25], &params).unwrap();
        let mut bytes = Vec::new();
        write_csv(&recs, &mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("x,method,waste,squares,seconds,verified\n"));
        assert_eq!(read_csv(bytes.as_slice()).unwrap(), recs);
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn unsorted_abscissae_rejected() {
        assert!(sweep(Method::Trivial, &[3.0, 2.0], &SweepParams::default()).is_err());
    }
}
