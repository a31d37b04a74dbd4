//! Maximum-likelihood fitting of the market walk's grid ratio and bandwidth
//! from an observed price series.
//!
//! Log-ratios measured in grid steps are modelled as i.i.d. normal with mean
//! `W(2p - 1)` and variance `2Wp(1 - p)`. For a fixed ratio the optimal
//! bandwidth has a closed form; the ratio is chosen by grid search.

use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::price_process::martingale_p;

/// Timestamped positive prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    timestamps: Vec<f64>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(timestamps: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(domain("timestamps and prices differ in length"));
        }
        if timestamps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("timestamps must be strictly increasing"));
        }
        if let Some(p) = prices.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(domain(format!("prices must be positive and finite, got {p}")));
        }
        Ok(Self { timestamps, prices })
    }

    /// Prices at consecutive integer timestamps.
    pub fn from_prices(prices: Vec<f64>) -> Result<Self> {
        Self::new((0..prices.len()).map(|t| t as f64).collect(), prices)
    }

    /// Reads CSV with a `timestamp,price` header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "price" {
            return Err(Error::Parse(format!(
                "expected header `timestamp,price`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut ts, mut ps) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse(format!("line {}: missing field", line + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", line + 2)))
            };
            ts.push(field(0)?);
            ps.push(field(1)?);
        }
        Self::new(ts, ps)
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Offset, stride and count of a subsample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    pub start: usize,
    pub stride: usize,
    pub count: usize,
}

/// Elements at zero-based indices `start + stride * j` for `j = 1..=count`.
pub fn subsample(series: &PriceSeries, spec: SubsampleSpec) -> Result<Vec<f64>> {
    if spec.stride == 0 || spec.count == 0 {
        return Err(domain("stride and count must be positive"));
    }
    let last = spec
        .stride
        .checked_mul(spec.count)
        .and_then(|x| x.checked_add(spec.start))
        .filter(|&x| x < series.len())
        .ok_or_else(|| domain(format!("subsample {spec:?} runs past a series of length {}", series.len())))?;
    debug_assert!(last < series.len());
    Ok((1..=spec.count).map(|j| series.prices[spec.start + spec.stride * j]).collect())
}

/// Consecutive log-ratios in units of `ln(omega)`, next over current.
pub fn log_ratios(prices: &[f64], omega: f64) -> Result<Vec<f64>> {
    if !(omega > 1.0 && omega.is_finite()) {
        return Err(domain(format!("grid ratio must exceed 1, got {omega}")));
    }
    if let Some(p) = prices.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(domain(format!("prices must be positive, got {p}")));
    }
    let step = omega.ln();
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln() / step).collect())
}

/// Bandwidth minimizing the negative log-likelihood for fixed `p`.
pub fn closed_form_w(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(domain("need at least one log-ratio"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("p must lie in (0, 1), got {p}")));
    }
    let n = xs.len() as f64;
    let sum_sq: f64 = xs.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return Ok(0.0);
    }
    let q = p * (1.0 - p);
    let c = 2.0 * p - 1.0;
    Ok(sum_sq / (n * (q + (q * q + sum_sq / n * c * c).sqrt())))
}

/// Negative log-likelihood of `xs` under grid ratio `omega` and bandwidth `w`.
pub fn nll(omega: f64, w: f64, xs: &[f64]) -> Result<f64> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(domain(format!("bandwidth must be positive, got {w}")));
    }
    let p = martingale_p(omega)?;
    let mu = w * (2.0 * p - 1.0);
    let var = 2.0 * w * p * (1.0 - p);
    let n = xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| (x - mu).powi(2)).sum();
    Ok(0.5 * n * (2.0 * std::f64::consts::PI * var).ln() + ss / (2.0 * var))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub omega: f64,
    pub w_star: f64,
    pub nll: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub omega_star: f64,
    pub w_star: f64,
    /// `None` when the data carry no movement and the likelihood is degenerate.
    pub nll: Option<f64>,
    pub degenerate: bool,
    pub grid: Vec<GridPoint>,
}

impl FitResult {
    /// Integer bandwidth for simulation: nearest integer, at least 1.
    pub fn rounded_bandwidth(&self) -> u32 {
        round_bandwidth(self.w_star)
    }
}

pub fn round_bandwidth(w: f64) -> u32 {
    (w.round().max(1.0)).min(f64::from(u32::MAX)) as u32
}

/// Grid search over `omega_grid` with the closed-form bandwidth at each point.
pub fn fit(series: &PriceSeries, spec: SubsampleSpec, omega_grid: &[f64]) -> Result<FitResult> {
    if omega_grid.is_empty() {
        return Err(domain("grid ratio list is empty"));
    }
    let sub = subsample(series, spec)?;
    if sub.len() < 2 {
        return Err(domain("subsample needs at least two prices"));
    }
    let grid = omega_grid
        .par_iter()
        .map(|&omega| {
            let xs = log_ratios(&sub, omega)?;
            let w_star = closed_form_w(&xs, martingale_p(omega)?)?;
            let nll = if w_star > 0.0 { Some(nll(omega, w_star, &xs)?) } else { None };
            Ok(GridPoint { omega, w_star, nll })
        })
        .collect::<Result<Vec<_>>>()?;
    let best =
        grid.iter().enumerate().filter_map(|(k, g)| g.nll.map(|v| (k, v))).fold(None::<(usize, f64)>, |acc, (k, v)| {
            match acc {
                Some((_, b)) if b <= v => acc,
                _ => Some((k, v)),
            }
        });
    Ok(match best {
        Some((k, v)) => {
            FitResult { omega_star: grid[k].omega, w_star: grid[k].w_star, nll: Some(v), degenerate: false, grid }
        }
        None => FitResult { omega_star: grid[0].omega, w_star: 0.0, nll: None, degenerate: true, grid },
    })
}
