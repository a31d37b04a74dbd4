//! Experiment runners: bucket-spacing sweeps, OPT-GAS Pareto sweeps, risk
//! sweeps, price-process parameter sweeps and volatility regimes.
//!
//! Runs over bucket schemes share one path sample. Runs over price-process
//! parameters draw fresh paths per value from a seed derived from the
//! master seed, the parameter name and the value.

mod config;
mod pareto;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{derived_seed, ExperimentConfig};
pub use pareto::{dominates, mark_frontier};

use crate::amm::BucketScheme;
use crate::error::{domain, Result};
use crate::gas::{expected_gas, GasEstimate};
use crate::optimizer::{
    bucket_weights, full_range_baseline, mean_std, sample_average_utility, solve_risk_averse, solve_risk_neutral,
    OptResult, PathCoefficients,
};
use crate::pnl::{PricePath, RiskParameter};
use crate::price_process::sample_paths;

/// Paths for the config's own price process.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<PricePath>> {
    Ok(sample_paths(&cfg.belief()?, cfg.paths, cfg.seed))
}

/// One scheme evaluated on a fixed path sample.
pub struct SchemeEvaluation {
    pub scheme: BucketScheme,
    pub weights: Vec<f64>,
    pub coeffs: PathCoefficients,
    pub gas: GasEstimate,
}

impl SchemeEvaluation {
    pub fn new(scheme: BucketScheme, paths: &[PricePath], gamma: f64) -> Result<Self> {
        let coeffs = PathCoefficients::from_paths(paths, &scheme, gamma)?;
        let gas = expected_gas(paths, &scheme)?;
        Ok(Self { weights: bucket_weights(&scheme), scheme, coeffs, gas })
    }

    /// Optimal allocation at risk aversion `a`: closed form when neutral.
    pub fn optimize(&self, cfg: &ExperimentConfig, a: f64) -> Result<OptResult> {
        if a == 0.0 {
            solve_risk_neutral(&self.coeffs, &self.weights, cfg.budget)
        } else {
            solve_risk_averse(&self.coeffs, &self.weights, &cfg.optimizer(a)?)
        }
    }

    /// Sample-average utility of putting the budget into full-range liquidity.
    pub fn full_range_objective(&self, budget: f64, a: f64) -> Result<f64> {
        let units = vec![budget / self.weights.iter().sum::<f64>(); self.weights.len()];
        Ok(sample_average_utility(&units, &self.coeffs, RiskParameter::new(a)?))
    }
}

/// Single optimization on the config's own scheme and paths.
pub fn optimize(cfg: &ExperimentConfig) -> Result<(OptResult, GasEstimate)> {
    let paths = simulate(cfg)?;
    let eval = SchemeEvaluation::new(cfg.scheme(cfg.theta, cfg.delta)?, &paths, cfg.fee_rate)?;
    Ok((eval.optimize(cfg, cfg.risk)?, eval.gas))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub config_hash: String,
    pub a: f64,
    pub theta: f64,
    pub delta: u32,
    pub buckets: usize,
    pub opt: f64,
    pub opt_se: f64,
    pub gas: f64,
    pub gas_se: f64,
    pub v2_opt: f64,
    pub pnl_mean: f64,
    pub pnl_std: f64,
    pub converged: bool,
}

/// OPT and GAS over bucket spacings at fixed `theta`, on common paths.
pub fn run_delta_sweep(cfg: &ExperimentConfig) -> Result<Vec<DeltaRow>> {
    let paths = simulate(cfg)?;
    let hash = cfg.hash();
    let evals = cfg
        .sweep_deltas
        .par_iter()
        .map(|&d| SchemeEvaluation::new(cfg.scheme(cfg.theta, d)?, &paths, cfg.fee_rate))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(f64, usize)> = cfg.sweep_risks.iter().flat_map(|&a| (0..evals.len()).map(move |k| (a, k))).collect();
    jobs.par_iter()
        .map(|&(a, k)| {
            let e = &evals[k];
            let r = e.optimize(cfg, a)?;
            Ok(DeltaRow {
                config_hash: hash.clone(),
                a,
                theta: cfg.theta,
                delta: cfg.sweep_deltas[k],
                buckets: e.scheme.len(),
                opt: r.objective,
                opt_se: r.objective_se,
                gas: e.gas.mean_crossings,
                gas_se: e.gas.stderr,
                v2_opt: e.full_range_objective(cfg.budget, a)?,
                pnl_mean: r.pnl_mean,
                pnl_std: r.pnl_std,
                converged: r.converged,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub config_hash: String,
    pub theta: f64,
    pub delta: u32,
    pub gas: f64,
    pub opt: f64,
    pub a: f64,
    pub on_frontier: bool,
    pub fee_rate: f64,
}

/// Every `(theta, delta)` scheme at every Pareto risk level, frontier marked
/// per risk level.
pub fn run_pareto(cfg: &ExperimentConfig) -> Result<Vec<ParetoPoint>> {
    let paths = simulate(cfg)?;
    pareto_on_paths(cfg, &paths)
}

/// [`run_pareto`] on a given path sample.
pub fn pareto_on_paths(cfg: &ExperimentConfig, paths: &[PricePath]) -> Result<Vec<ParetoPoint>> {
    let hash = cfg.hash();
    let grid: Vec<(f64, u32)> = cfg.thetas.iter().flat_map(|&t| cfg.deltas.iter().map(move |&d| (t, d))).collect();
    let evals = grid
        .par_iter()
        .map(|&(t, d)| SchemeEvaluation::new(cfg.scheme(t, d)?, paths, cfg.fee_rate))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(f64, usize)> = cfg.pareto_risks.iter().flat_map(|&a| (0..grid.len()).map(move |k| (a, k))).collect();
    let mut points = jobs
        .par_iter()
        .map(|&(a, k)| {
            let r = evals[k].optimize(cfg, a)?;
            Ok(ParetoPoint {
                config_hash: hash.clone(),
                theta: grid[k].0,
                delta: grid[k].1,
                gas: evals[k].gas.mean_crossings,
                opt: r.objective,
                a,
                on_frontier: false,
                fee_rate: cfg.fee_rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for &a in &cfg.pareto_risks {
        let idx: Vec<usize> = (0..points.len()).filter(|&i| points[i].a == a).collect();
        let objectives: Vec<(f64, f64)> = idx.iter().map(|&i| (points[i].gas, points[i].opt)).collect();
        for (k, on) in mark_frontier(&objectives).into_iter().enumerate() {
            points[idx[k]].on_frontier = on;
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskPoint {
    pub config_hash: String,
    pub regime: String,
    pub a: f64,
    pub objective: f64,
    pub objective_se: f64,
    pub pnl_mean: f64,
    pub pnl_mean_se: f64,
    pub pnl_std: f64,
    pub pnl_std_se: f64,
    /// Buckets holding at least the spread threshold of the budget.
    pub spread: usize,
    pub converged: bool,
    #[serde(skip)]
    pub allocation: Vec<f64>,
    #[serde(skip)]
    pub budget_shares: Vec<f64>,
    #[serde(skip)]
    pub bucket_bounds: Vec<(f64, f64)>,
}

/// Optimal allocations across the risk grid on the config's scheme.
pub fn run_risk_sweep(cfg: &ExperimentConfig) -> Result<Vec<RiskPoint>> {
    risk_sweep_labeled(cfg, "baseline", &cfg.hash())
}

fn risk_sweep_labeled(cfg: &ExperimentConfig, regime: &str, hash: &str) -> Result<Vec<RiskPoint>> {
    let paths = simulate(cfg)?;
    let eval = SchemeEvaluation::new(cfg.scheme(cfg.theta, cfg.delta)?, &paths, cfg.fee_rate)?;
    let n = paths.len() as f64;
    let bounds: Vec<(f64, f64)> = eval.scheme.buckets().iter().map(|b| (b.lower, b.upper)).collect();
    cfg.risks
        .par_iter()
        .map(|&a| {
            let r = eval.optimize(cfg, a)?;
            Ok(RiskPoint {
                config_hash: hash.to_string(),
                regime: regime.to_string(),
                a,
                objective: r.objective,
                objective_se: r.objective_se,
                pnl_mean: r.pnl_mean,
                pnl_mean_se: r.pnl_std / n.sqrt(),
                pnl_std: r.pnl_std,
                pnl_std_se: r.pnl_std / (2.0 * n).sqrt(),
                spread: r.spread(&eval.weights, cfg.budget, cfg.spread_threshold),
                converged: r.converged,
                budget_shares: r.budget_shares(&eval.weights),
                allocation: r.allocation.into_vec(),
                bucket_bounds: bounds.clone(),
            })
        })
        .collect()
}

/// Risk sweeps under the low and high volatility regimes.
pub fn run_regimes(cfg: &ExperimentConfig) -> Result<Vec<RiskPoint>> {
    let hash = cfg.hash();
    let mut out = risk_sweep_labeled(&cfg.regime(&cfg.regime_low)?, "low", &hash)?;
    out.extend(risk_sweep_labeled(&cfg.regime(&cfg.regime_high)?, "high", &hash)?);
    Ok(out)
}

/// Price-process parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    TradesPerRound,
    TradeImpact,
    FeeRate,
    Bandwidth,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::TradesPerRound => "trades_per_round",
            SweepParam::TradeImpact => "trade_impact",
            SweepParam::FeeRate => "fee_rate",
            SweepParam::Bandwidth => "bandwidth",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "k" | "trades_per_round" => Ok(SweepParam::TradesPerRound),
            "lambda" | "trade_impact" => Ok(SweepParam::TradeImpact),
            "gamma" | "fee_rate" => Ok(SweepParam::FeeRate),
            "W" | "w" | "bandwidth" => Ok(SweepParam::Bandwidth),
            _ => Err(domain(format!("unknown sweep parameter `{s}`"))),
        }
    }

    fn grid(self, cfg: &ExperimentConfig) -> Vec<f64> {
        match self {
            SweepParam::TradesPerRound => cfg.trades_grid.iter().map(|&v| f64::from(v)).collect(),
            SweepParam::TradeImpact => cfg.impact_grid.clone(),
            SweepParam::FeeRate => cfg.fee_grid.clone(),
            SweepParam::Bandwidth => cfg.bandwidth_grid.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, v: f64) {
        match self {
            SweepParam::TradesPerRound => cfg.trades_per_round = v as u32,
            SweepParam::TradeImpact => cfg.trade_impact = v,
            SweepParam::FeeRate => cfg.fee_rate = v,
            SweepParam::Bandwidth => cfg.bandwidth = v as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRow {
    pub config_hash: String,
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub a: f64,
    pub opt: f64,
    pub opt_se: f64,
    pub gas: f64,
    pub gas_se: f64,
    pub pnl_mean: f64,
    pub pnl_std: f64,
    pub v2_pnl_mean: f64,
    pub converged: bool,
}

/// OPT and GAS per value of `param`, with fresh paths for each value.
pub fn run_param_sweep(cfg: &ExperimentConfig, param: SweepParam) -> Result<Vec<ParamRow>> {
    let hash = cfg.hash();
    param
        .grid(cfg)
        .into_iter()
        .map(|v| {
            let mut c = cfg.clone();
            param.apply(&mut c, v);
            c.seed = derived_seed(cfg.seed, param.name(), v);
            c.validate()?;
            let paths = simulate(&c)?;
            let eval = SchemeEvaluation::new(c.scheme(c.theta, c.delta)?, &paths, c.fee_rate)?;
            let r = eval.optimize(&c, c.risk)?;
            let (v2_mean, _) = full_range_baseline(&eval.coeffs, &eval.weights, c.budget);
            Ok(ParamRow {
                config_hash: hash.clone(),
                param: param.name().to_string(),
                value: v,
                seed: c.seed,
                a: c.risk,
                opt: r.objective,
                opt_se: r.objective_se,
                gas: eval.gas.mean_crossings,
                gas_se: eval.gas.stderr,
                pnl_mean: r.pnl_mean,
                pnl_std: r.pnl_std,
                v2_pnl_mean: v2_mean,
                converged: r.converged,
            })
        })
        .collect()
}

/// Mean and standard error of `xs`.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, s) = mean_std(xs);
    (m, s / (xs.len() as f64).sqrt())
}
