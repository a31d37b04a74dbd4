use std::fs::File;
use std::path::Path;

use clmm_core::calibration::{fit, PriceSeries, SubsampleSpec};
use clmm_core::experiments::{self, RiskPoint, SweepParam};
use clmm_core::optimizer::bucket_weights;
use clmm_core::replay;
use clmm_core::ExperimentConfig;
use serde::Serialize;

use crate::output::{write_csv, write_json};
use crate::CliError;

type Outputs = Result<Vec<String>, CliError>;

#[derive(Serialize)]
struct Calibration {
    config_hash: String,
    omega_star: f64,
    w_star: f64,
    bandwidth: u32,
    nll: Option<f64>,
    degenerate: bool,
}

#[derive(Serialize)]
struct GridRow {
    config_hash: String,
    omega: f64,
    w_star: f64,
    nll: Option<f64>,
}

pub fn calibrate(cfg: &ExperimentConfig, out: &Path) -> Outputs {
    if cfg.prices.is_empty() {
        return Err(CliError::Input("calibrate needs --prices <csv>".into()));
    }
    let file = File::open(&cfg.prices).map_err(|e| CliError::Input(format!("{}: {e}", cfg.prices)))?;
    let series = PriceSeries::from_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", cfg.prices)))?;
    let spec = SubsampleSpec { start: cfg.subsample_start, stride: cfg.subsample_stride, count: cfg.subsample_count };
    let r = fit(&series, spec, &cfg.omega_grid)?;
    let hash = cfg.hash();
    let grid: Vec<GridRow> = r
        .grid
        .iter()
        .map(|g| GridRow { config_hash: hash.clone(), omega: g.omega, w_star: g.w_star, nll: g.nll })
        .collect();
    let summary = Calibration {
        config_hash: hash,
        omega_star: r.omega_star,
        w_star: r.w_star,
        bandwidth: r.rounded_bandwidth(),
        nll: r.nll,
        degenerate: r.degenerate,
    };
    println!("omega* = {}  W* = {:.6}  bandwidth = {}", summary.omega_star, summary.w_star, summary.bandwidth);
    Ok(vec![write_json(out, "calibration.json", &summary)?, write_csv(out, "calibration_grid.csv", &grid)?])
}

#[derive(Serialize)]
struct PathRow<'a> {
    config_hash: &'a str,
    path: usize,
    step: usize,
    contract: f64,
    market: f64,
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Outputs {
    let paths = experiments::simulate(cfg)?;
    let hash = cfg.hash();
    let rows: Vec<PathRow> = paths
        .iter()
        .enumerate()
        .flat_map(|(j, p)| {
            let hash = hash.as_str();
            p.pairs().iter().enumerate().map(move |(t, q)| PathRow {
                config_hash: hash,
                path: j,
                step: t,
                contract: q.contract,
                market: q.market,
            })
        })
        .collect();
    println!("{} paths of {} points", paths.len(), paths.first().map_or(0, |p| p.len()));
    Ok(vec![write_csv(out, "paths.csv", &rows)?])
}

#[derive(Serialize)]
struct OptimizeSummary {
    config_hash: String,
    theta: f64,
    delta: u32,
    a: f64,
    objective: f64,
    objective_se: f64,
    pnl_mean: f64,
    pnl_std: f64,
    gas: f64,
    gas_se: f64,
    spread: usize,
    converged: bool,
    iterations: usize,
}

#[derive(Serialize)]
struct AllocationRow<'a> {
    config_hash: &'a str,
    regime: &'a str,
    a: f64,
    slot: usize,
    lower: f64,
    upper: f64,
    units: f64,
    budget_share: f64,
}

pub fn optimize(cfg: &ExperimentConfig, out: &Path) -> Outputs {
    let (r, gas) = experiments::optimize(cfg)?;
    let scheme = cfg.scheme(cfg.theta, cfg.delta)?;
    let weights = bucket_weights(&scheme);
    let hash = cfg.hash();
    let shares = r.budget_shares(&weights);
    let rows: Vec<AllocationRow> = scheme
        .buckets()
        .iter()
        .enumerate()
        .map(|(k, b)| AllocationRow {
            config_hash: &hash,
            regime: "baseline",
            a: cfg.risk,
            slot: k,
            lower: b.lower,
            upper: b.upper,
            units: r.allocation.as_slice()[k],
            budget_share: shares[k],
        })
        .collect();
    let summary = OptimizeSummary {
        config_hash: hash.clone(),
        theta: cfg.theta,
        delta: cfg.delta,
        a: cfg.risk,
        objective: r.objective,
        objective_se: r.objective_se,
        pnl_mean: r.pnl_mean,
        pnl_std: r.pnl_std,
        gas: gas.mean_crossings,
        gas_se: gas.stderr,
        spread: r.spread(&weights, cfg.budget, cfg.spread_threshold),
        converged: r.converged,
        iterations: r.iterations,
    };
    println!("OPT = {:.6e} (se {:.2e})  GAS = {:.3}", summary.objective, summary.objective_se, summary.gas);
    Ok(vec![write_json(out, "optimize.json", &summary)?, write_csv(out, "allocation.csv", &rows)?])
}

pub fn pareto(cfg: &ExperimentConfig, out: &Path) -> Outputs {
    let points = experiments::run_pareto(cfg)?;
    let on = points.iter().filter(|p| p.on_frontier).count();
    println!("{} points, {on} on the frontier", points.len());
    Ok(vec![write_csv(out, "pareto.csv", &points)?, write_json(out, "pareto.json", &points)?])
}

fn allocation_rows(points: &[RiskPoint]) -> Vec<AllocationRow<'_>> {
    points
        .iter()
        .flat_map(|p| {
            p.bucket_bounds.iter().enumerate().map(move |(k, &(lower, upper))| AllocationRow {
                config_hash: &p.config_hash,
                regime: &p.regime,
                a: p.a,
                slot: k,
                lower,
                upper,
                units: p.allocation[k],
                budget_share: p.budget_shares[k],
            })
        })
        .collect()
}

pub fn sweep(cfg: &ExperimentConfig, param: &str, out: &Path) -> Outputs {
    match param {
        "delta" => {
            let rows = experiments::run_delta_sweep(cfg)?;
            Ok(vec![write_csv(out, "sweep_delta.csv", &rows)?])
        }
        "risk" | "regime" => {
            let points =
                if param == "risk" { experiments::run_risk_sweep(cfg)? } else { experiments::run_regimes(cfg)? };
            Ok(vec![
                write_csv(out, &format!("sweep_{param}.csv"), &points)?,
                write_csv(out, &format!("sweep_{param}_allocation.csv"), &allocation_rows(&points))?,
            ])
        }
        other => {
            let p = SweepParam::parse(other)?;
            let rows = experiments::run_param_sweep(cfg, p)?;
            Ok(vec![write_csv(out, &format!("sweep_{}.csv", p.name()), &rows)?])
        }
    }
}

pub fn replay(_cfg: &ExperimentConfig, out: &Path) -> Outputs {
    let trace = replay::run()?;
    let checks = replay::compare(&trace, replay::GOLDEN, 1e-9);
    for c in &checks {
        let observed = c.observed.map_or("missing".to_string(), |o| o.to_string());
        println!(
            "{} {:<32} expected {:<12} observed {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.label,
            c.expected,
            observed
        );
    }
    let matched = checks.iter().filter(|c| c.passed).count();
    println!("matched {matched}/{}", checks.len());
    let written = write_csv(out, "replay.csv", &checks)?;
    if matched != checks.len() {
        return Err(CliError::Invariant(format!("{} replay values differ", checks.len() - matched)));
    }
    Ok(vec![written])
}
