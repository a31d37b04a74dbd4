//! Budget-constrained liquidity allocation: closed-form risk-neutral optimum
//! and projected gradient ascent on sample-average exponential utility.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amm::{unit_range_value, BucketScheme, LiquidityAllocation};
use crate::error::{domain, Result};
use crate::pnl::{check_gamma, unit_pnl_into, utility, PricePath, RiskParameter};

pub use crate::pnl::unit_pnl_coefficients as per_unit_pnl_coeffs;

/// Token-B cost of one liquidity unit in each bucket at parity.
pub fn bucket_weights(scheme: &BucketScheme) -> Vec<f64> {
    scheme.buckets().iter().map(|b| unit_range_value(b.lower, b.upper, 1.0).worth_in_b(1.0)).collect()
}

/// Per-unit PnL coefficients of every sampled path, one row per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCoefficients {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PathCoefficients {
    pub fn from_paths(paths: &[PricePath], scheme: &BucketScheme, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if paths.is_empty() {
            return Err(domain("need at least one path"));
        }
        let cols = scheme.len();
        let mut data = vec![0.0; paths.len() * cols];
        data.par_chunks_mut(cols).zip(paths.par_iter()).for_each(|(row, path)| unit_pnl_into(path, scheme, gamma, row));
        Ok(Self { rows: paths.len(), cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(domain("coefficient rows must be nonempty and equally long"));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn paths(&self) -> usize {
        self.rows
    }

    pub fn buckets(&self) -> usize {
        self.cols
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    /// Mean coefficient per bucket: the expected PnL of one unit.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.cols];
        for j in 0..self.rows {
            for (a, g) in acc.iter_mut().zip(self.row(j)) {
                *a += g;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.rows as f64);
        acc
    }

    /// PnL of `units` on every path.
    pub fn pnls(&self, units: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|j| dot(self.row(j), units)).collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub budget: f64,
    pub risk: RiskParameter,
    pub max_steps: usize,
    pub initial_step: f64,
    /// Stop once an accepted step changes the objective by less than this.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { budget: 1.0, risk: RiskParameter::NEUTRAL, max_steps: 20_000, initial_step: 1e-2, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub allocation: LiquidityAllocation,
    pub objective: f64,
    /// Standard error of the sample-average objective.
    pub objective_se: f64,
    /// Expected PnL per unit in each bucket; risk-neutral solves only.
    pub alpha: Option<Vec<f64>>,
    pub pnl_mean: f64,
    pub pnl_std: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl OptResult {
    /// Token-B cost of the allocation per bucket at parity.
    pub fn budget_shares(&self, weights: &[f64]) -> Vec<f64> {
        self.allocation.as_slice().iter().zip(weights).map(|(l, w)| l * w).collect()
    }

    /// Number of buckets holding at least `fraction` of `budget`.
    pub fn spread(&self, weights: &[f64], budget: f64, fraction: f64) -> usize {
        self.budget_shares(weights).iter().filter(|&&v| v >= fraction * budget).count()
    }
}

fn check_weights(weights: &[f64], coeffs: &PathCoefficients) -> Result<()> {
    if weights.len() != coeffs.buckets() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(domain("bucket weights must be positive and match the coefficient width"));
    }
    Ok(())
}

fn check_budget(budget: f64) -> Result<()> {
    if budget > 0.0 && budget.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("budget must be positive, got {budget}")))
    }
}

/// All budget in the bucket with the best expected PnL per unit cost.
pub fn solve_risk_neutral(coeffs: &PathCoefficients, weights: &[f64], budget: f64) -> Result<OptResult> {
    check_weights(weights, coeffs)?;
    check_budget(budget)?;
    let alpha = coeffs.mean();
    let mut best: Option<(usize, f64)> = None;
    for (i, (a, w)) in alpha.iter().zip(weights).enumerate() {
        let r = a / w;
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((i, r));
        }
    }
    let mut units = vec![0.0; weights.len()];
    let objective = match best {
        Some((i, r)) if r > 0.0 => {
            units[i] = budget / weights[i];
            budget * r
        }
        _ => 0.0,
    };
    let pnls = coeffs.pnls(&units);
    let (pnl_mean, pnl_std) = mean_std(&pnls);
    Ok(OptResult {
        allocation: LiquidityAllocation::from_units(units),
        objective,
        objective_se: pnl_std / (pnls.len() as f64).sqrt(),
        alpha: Some(alpha),
        pnl_mean,
        pnl_std,
        converged: true,
        iterations: 0,
    })
}

/// Sample average of `u_a(PnL)` at allocation `units`.
pub fn sample_average_utility(units: &[f64], coeffs: &PathCoefficients, risk: RiskParameter) -> f64 {
    let n = coeffs.paths() as f64;
    coeffs.pnls(units).iter().map(|&x| utility(x, risk)).sum::<f64>() / n
}

/// Gradient of [`sample_average_utility`] in the allocation units.
pub fn utility_gradient(units: &[f64], coeffs: &PathCoefficients, risk: RiskParameter) -> Vec<f64> {
    let a = risk.value();
    let mut grad = vec![0.0; coeffs.buckets()];
    for j in 0..coeffs.paths() {
        let row = coeffs.row(j);
        let scale = if a == 0.0 { 1.0 } else { (-a * dot(row, units)).exp() };
        for (g, c) in grad.iter_mut().zip(row) {
            *g += scale * c;
        }
    }
    let n = coeffs.paths() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    grad
}

/// Euclidean projection onto `{l >= 0, <weights, l> <= budget}`.
pub fn project_budget(units: &[f64], weights: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = units.iter().map(|&u| u.max(0.0)).collect();
    if dot(&clipped, weights) <= budget {
        return clipped;
    }
    // l_i = max(v_i - tau * w_i, 0) with the budget binding; breakpoints at v_i / w_i
    let mut order: Vec<usize> = (0..units.len()).filter(|&i| units[i] > 0.0).collect();
    order.sort_by(|&i, &j| (units[j] / weights[j]).total_cmp(&(units[i] / weights[i])));
    let (mut wv, mut ww) = (0.0, 0.0);
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        wv += weights[i] * units[i];
        ww += weights[i] * weights[i];
        tau = (wv - budget) / ww;
        let next = order.get(k + 1).map_or(f64::NEG_INFINITY, |&j| units[j] / weights[j]);
        if tau >= next {
            break;
        }
    }
    let mut out: Vec<f64> = units.iter().zip(weights).map(|(&v, &w)| (v - tau * w).max(0.0)).collect();
    // guard the last ulp of slack
    let spent = dot(&out, weights);
    if spent > budget {
        let k = budget / spent;
        out.iter_mut().for_each(|v| *v *= k);
    }
    out
}

/// Projected gradient ascent on sample-average utility.
///
/// Iterates in budget-value coordinates `x_i = l_i * w_i`, where the feasible
/// set is the capped simplex `{x >= 0, sum x <= D}`. Steps are
/// Barzilai-Borwein with halving backtracking, so accepted iterates never
/// lower the objective.
pub fn solve_risk_averse(coeffs: &PathCoefficients, weights: &[f64], config: &OptimizerConfig) -> Result<OptResult> {
    check_weights(weights, coeffs)?;
    check_budget(config.budget)?;
    if !(config.initial_step > 0.0 && config.tolerance > 0.0) {
        return Err(domain("step size and tolerance must be positive"));
    }
    let d = config.budget;
    let nb = weights.len();
    let ones = vec![1.0; nb];
    // coefficients per unit of budget value
    let scaled = PathCoefficients {
        rows: coeffs.rows,
        cols: nb,
        data: coeffs.data.chunks(nb).flat_map(|row| row.iter().zip(weights).map(|(g, w)| g / w)).collect(),
    };
    let risk = config.risk;
    let value = |x: &[f64]| sample_average_utility(x, &scaled, risk);
    let grad = |x: &[f64]| utility_gradient(x, &scaled, risk);

    let mut x = vec![d / nb as f64; nb];
    let mut f = value(&x);
    let mut g = grad(&x);
    let mut step = config.initial_step;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_steps {
        iterations += 1;
        let (y, fy) = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + step * gi).collect();
            let y = project_budget(&trial, &ones, d);
            if y == x {
                break (y, f);
            }
            let fy = value(&y);
            if fy >= f {
                break (y, fy);
            }
            step *= 0.5;
            if step < 1e-300 {
                break (x.clone(), f);
            }
        };
        if y == x {
            converged = true;
            break;
        }
        let gy = grad(&y);
        let s: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let curvature: f64 = s.iter().zip(g.iter().zip(&gy)).map(|(si, (g0, g1))| si * (g0 - g1)).sum();
        let ss = dot(&s, &s);
        step = if curvature > 0.0 { (ss / curvature).min(1e12) } else { (2.0 * step).min(1e12) };
        let moved = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = fy - f;
        x = y;
        f = fy;
        g = gy;
        if change.abs() < config.tolerance && moved < config.tolerance.sqrt() * d {
            converged = true;
            break;
        }
    }

    let units: Vec<f64> = x.iter().zip(weights).map(|(xi, w)| xi / w).collect();
    let pnls = coeffs.pnls(&units);
    let (pnl_mean, pnl_std) = mean_std(&pnls);
    let utils: Vec<f64> = pnls.iter().map(|&p| utility(p, risk)).collect();
    let (objective, u_std) = mean_std(&utils);
    Ok(OptResult {
        allocation: LiquidityAllocation::from_units(units),
        objective,
        objective_se: u_std / (utils.len() as f64).sqrt(),
        alpha: None,
        pnl_mean,
        pnl_std,
        converged,
        iterations,
    })
}

/// Mean PnL of spreading `budget` uniformly over every bucket, which is
/// full-range liquidity.
pub fn full_range_baseline(coeffs: &PathCoefficients, weights: &[f64], budget: f64) -> (f64, f64) {
    let units = vec![budget / weights.iter().sum::<f64>(); weights.len()];
    mean_std(&coeffs.pnls(&units))
}
