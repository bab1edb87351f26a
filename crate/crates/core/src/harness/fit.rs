//! Log–log least-squares power-law fits over sweep output.

use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub points: Vec<(f64, f64)>,
}

pub const MIN_FIT_POINTS: usize = 4;

/// Fits `log y = intercept + slope log x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            required: MIN_FIT_POINTS,
            found: points.len(),
        });
    }
    for &(x, y) in points {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::NonPositiveValue { column: "x".into(), value: x });
        }
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::NonPositiveValue { column: "y".into(), value: y });
        }
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all x values coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        slope,
        intercept,
        stderr,
        points: points.to_vec(),
    })
}

/// Which rows enter a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Drop this many rows with the smallest `x` (takes precedence over the
    /// threshold when set).
    pub discard_smallest: Option<usize>,
    /// Keep only rows whose `A_tight` column is below this value, when the
    /// column exists. `None` keeps everything.
    pub a_tight_below: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            discard_smallest: None,
            a_tight_below: Some(0.5),
        }
    }
}

impl FitOptions {
    pub fn keep_all() -> Self {
        Self {
            discard_smallest: None,
            a_tight_below: None,
        }
    }
}

/// Reads `x_column` and `y_column` from CSV and fits a power law. Rows with
/// a non-`ok` status are skipped.
pub fn fit_scaling<R: Read>(input: R, x_column: &str, y_column: &str, options: FitOptions) -> Result<ScalingFit> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::config(name, format!("no such column (have: {})", headers.iter().collect::<Vec<_>>().join(", "))))
    };
    let xi = col(x_column)?;
    let yi = col(y_column)?;
    let status = headers.iter().position(|h| h == "status");
    let a_tight = headers.iter().position(|h| h == "A_tight");
    let parse = |rec: &csv::StringRecord, i: usize, name: &str| -> Result<f64> {
        rec[i]
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::config(name, format!("cannot parse {:?} as a number", &rec[i])))
    };
    let mut rows: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if let Some(si) = status {
            if &rec[si] != "ok" {
                continue;
            }
        }
        let a = match a_tight {
            Some(i) if !rec[i].trim().is_empty() => Some(parse(&rec, i, "A_tight")?),
            _ => None,
        };
        rows.push((parse(&rec, xi, x_column)?, parse(&rec, yi, y_column)?, a));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let kept: Vec<(f64, f64)> = match (options.discard_smallest, options.a_tight_below) {
        (Some(k), _) => rows.iter().skip(k).map(|r| (r.0, r.1)).collect(),
        (None, Some(limit)) => rows
            .iter()
            .filter(|r| r.2.is_none_or(|a| a < limit))
            .map(|r| (r.0, r.1))
            .collect(),
        (None, None) => rows.iter().map(|r| (r.0, r.1)).collect(),
    };
    fit_power_law(&kept)
}
