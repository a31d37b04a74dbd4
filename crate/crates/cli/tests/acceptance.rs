//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use clmm_core::amm::{decompose_interval, v3_bundle_value, BucketScheme, LiquidityAllocation};
use clmm_core::calibration::{closed_form_w, fit, nll, PriceSeries, SubsampleSpec};
use clmm_core::experiments::{self, ExperimentConfig, SchemeEvaluation, SweepParam};
use clmm_core::optimizer::{
    sample_average_utility, solve_risk_averse, solve_risk_neutral, utility_gradient, PathCoefficients,
};
use clmm_core::pnl::{fee_tally_over_path, impermanent_loss, pnl, PricePath, RiskParameter};
use clmm_core::price_process::{martingale_p, path_rng, sample_market_series, MarketModel};
use clmm_core::replay;
use clmm_core::swap::{LpId, Pool};
use clmm_core::PricePair;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn run(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let o = f();
    let elapsed = started.elapsed();
    let in_time = elapsed <= limit;
    let passed = o.passed && in_time;
    let timing = if in_time { String::new() } else { format!(" over the {:.0}s limit", limit.as_secs_f64()) };
    println!(
        "criterion {id:>2} {name}: {} ({:.2}s{timing}) {}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        o.detail
    );
    passed
}

fn golden_replay() -> Outcome {
    // quantities as listed in the acceptance table
    let expected: &[(&str, f64)] = &[
        ("lp1.deposit.a", 45.0),
        ("lp1.deposit.b", 45.0),
        ("trade1.seg1.after.a", 5.0),
        ("trade1.seg1.after.b", 165.0),
        ("lp2.deposit.a", 0.0),
        ("lp2.deposit.b", 216.0),
        ("active.after_lp2.a", 5.0),
        ("active.after_lp2.b", 60.0),
        ("trade2.seg1.after.a", 15.0),
        ("trade2.seg1.after.b", 0.0),
        ("trade2.seg2.before.a", 0.0),
        ("trade2.seg2.before.b", 315.0),
        ("trade2.seg2.after.a", 630.0),
        ("trade2.seg2.after.b", 0.0),
        ("lp3.deposit.a", 510.0),
        ("lp3.deposit.b", 0.0),
        ("trade3.seg2.after.a", 180.0),
        ("trade3.seg2.after.b", 240.0),
        ("trade4.seg1.after.a", 450.0),
        ("trade4.seg1.after.b", 50.0),
        ("lp2.withdrawal.a", 180.0),
        ("lp2.withdrawal.b", 36.0),
        ("trade1.out", 40.0),
        ("trade2.seg1.out", 60.0),
        ("trade2.seg2.out", 315.0),
        ("trade3.seg2.out", 720.0),
        ("trade4.out", 150.0),
        ("trade3.out", 900.0),
        ("trade1.seg1.fee", 120.0),
        ("trade1.seg1.fee.LP1", 120.0),
        ("trade2.seg1.fee", 10.0),
        ("trade2.seg2.fee.LP1", 210.0),
        ("trade2.seg2.fee.LP2", 420.0),
        ("trade3.seg1.fee", 15.0),
        ("trade3.seg1.fee.LP1", 5.0),
        ("trade3.seg1.fee.LP2", 10.0),
        ("trade3.seg2.fee", 240.0),
        ("trade3.seg2.fee.LP1", 40.0),
        ("trade3.seg2.fee.LP2", 80.0),
        ("trade3.seg2.fee.LP3", 80.0),
        ("trade4.seg1.fee", 300.0),
        ("trade4.seg1.fee.LP2", 120.0),
        ("trade4.seg1.fee.LP3", 180.0),
    ];
    let trace = match replay::run() {
        Ok(t) => t,
        Err(e) => return Outcome::new(false, format!("replay failed: {e}")),
    };
    let checks = replay::compare(&trace, expected, 1e-9);
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} expected {} got {:?}", c.label, c.expected, c.observed))
        .collect();
    let matched = checks.len() - bad.len();
    Outcome::new(bad.is_empty(), format!("{matched}/{} matched {}", checks.len(), bad.join("; ")))
}

fn fee_oracle() -> Outcome {
    let mut rng = path_rng(20_220_001, 0);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..500 {
        let theta = [1.05, 1.2, 1.5, 2.0][rng.gen_range(0..4)];
        let s =
            BucketScheme::exponential(theta, rng.gen_range(1..3), rng.gen_range(1..6), rng.gen_range(1..6)).unwrap();
        let gamma = rng.gen_range(0.0005..0.05);
        let units: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.1..100.0)).collect();
        let mut pool = Pool::with_scheme(s.clone(), gamma, 1.0, 0.0).unwrap();
        for (k, (b, &u)) in s.buckets().iter().zip(&units).enumerate() {
            pool.add_liquidity(format!("b{k}"), b.lower, b.upper, u).unwrap();
        }
        let mut prices = vec![(1.0, 1.0)];
        for _ in 0..rng.gen_range(1..15) {
            let target = pool.price() * rng.gen_range(-1.5f64..1.5).exp();
            if let Some(order) = pool.quote_to_price(target).unwrap() {
                pool.execute_swap(order).unwrap();
            }
            prices.push((pool.price(), 1.0));
        }
        let path = PricePath::from_prices(&prices).unwrap();
        for k in 0..s.len() {
            let mut only = vec![0.0; s.len()];
            only[k] = units[k];
            let want = fee_tally_over_path(&LiquidityAllocation::new(only, &s).unwrap(), &s, &path, gamma).unwrap();
            let got = pool.accrued_fees(&LpId(format!("b{k}")));
            for (g, w) in [(got.a, want.fee_a), (got.b, want.fee_b)] {
                if g != w {
                    let r = (g - w).abs() / g.abs().max(w.abs());
                    worst = worst.max(r);
                    if r > 1e-9 {
                        failures += 1;
                    }
                }
            }
        }
    }
    Outcome::new(failures == 0, format!("500 scenarios, worst relative gap {worst:.2e}, {failures} over 1e-9"))
}

fn random_alloc(rng: &mut ChaCha8Rng) -> (BucketScheme, LiquidityAllocation) {
    let theta = [1.01, 1.1, 1.5, 2.0][rng.gen_range(0..4)];
    let s = BucketScheme::exponential(theta, rng.gen_range(1..4), rng.gen_range(1..8), rng.gen_range(1..8)).unwrap();
    let units = (0..s.len()).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..10.0) }).collect();
    let alloc = LiquidityAllocation::new(units, &s).unwrap();
    (s, alloc)
}

fn random_price(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-3.0f64..3.0).exp()
}

fn il_nonnegative() -> Outcome {
    let mut rng = path_rng(20_220_003, 0);
    let mut min = f64::INFINITY;
    for _ in 0..100_000 {
        let (s, alloc) = random_alloc(&mut rng);
        let start = PricePair::new(random_price(&mut rng), random_price(&mut rng)).unwrap();
        let end_price = random_price(&mut rng);
        let end = PricePair::new(end_price, end_price).unwrap();
        min = min.min(impermanent_loss(&alloc, &s, start, end).unwrap());
    }
    Outcome::new(min >= -1e-12, format!("1e5 cases, smallest loss {min:.3e}"))
}

fn linearity_and_additivity() -> Outcome {
    let mut rng = path_rng(20_220_004, 0);
    let mut worst_lin: f64 = 0.0;
    for _ in 0..10_000 {
        let (s, a1) = random_alloc(&mut rng);
        let a2: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..10.0)).collect();
        let (c1, c2) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let n = rng.gen_range(2..12);
        let prices: Vec<(f64, f64)> = (0..n).map(|_| (random_price(&mut rng), random_price(&mut rng))).collect();
        let path = PricePath::from_prices(&prices).unwrap();
        let gamma = rng.gen_range(0.0005..0.05);
        let f = |u: &[f64]| pnl(&LiquidityAllocation::new(u.to_vec(), &s).unwrap(), &s, &path, gamma).unwrap();
        // negative mixtures are fine for linearity; evaluate via the nonnegative parts
        let mix: Vec<f64> = a1.as_slice().iter().zip(&a2).map(|(x, y)| c1 * x + c2 * y).collect();
        let (pos, neg): (Vec<f64>, Vec<f64>) = mix.iter().map(|&v| (v.max(0.0), (-v).max(0.0))).unzip();
        let lhs = f(&pos) - f(&neg);
        let rhs = c1 * f(a1.as_slice()) + c2 * f(&a2);
        worst_lin = worst_lin.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    let mut worst_add: f64 = 0.0;
    for _ in 0..10_000 {
        let l = rng.gen_range(0.01..1000.0);
        let a = rng.gen_range(0.01f64..2.0);
        let c = a * rng.gen_range(1.0001f64..5.0);
        let b = if rng.gen_bool(0.1) { f64::INFINITY } else { c * rng.gen_range(1.0001f64..5.0) };
        let a = if rng.gen_bool(0.1) { 0.0 } else { a };
        let p = random_price(&mut rng);
        let whole = v3_bundle_value(l, a, b, p).unwrap();
        let (x, y) = decompose_interval(l, a, c, b, p).unwrap();
        let sum = x + y;
        for (s, w) in [(sum.a, whole.a), (sum.b, whole.b)] {
            worst_add = worst_add.max((s - w).abs() / s.abs().max(w.abs()).max(1.0));
        }
    }
    Outcome::new(
        worst_lin <= 1e-9 && worst_add <= 1e-9,
        format!("1e4 cases each, worst linearity gap {worst_lin:.2e}, worst additivity gap {worst_add:.2e}"),
    )
}

fn martingale() -> Outcome {
    let omega = 1.0005f64;
    let model = MarketModel::new(150, 150, omega, 50, 0).unwrap();
    let sampler = model.increments();
    let mut rng = path_rng(20_220_005, 0);
    let steps = 1_000_000;
    let mean = (0..steps).map(|_| omega.powi(sampler.draw(&mut rng) as i32)).sum::<f64>() / steps as f64;
    let (lo, hi) = model.price_range();
    let grid_ok = (hi - 1.0778).abs() <= 1e-4 && (lo - 0.9278).abs() <= 1e-4;
    let mean_ok = (mean - 1.0).abs() <= 5e-4;
    Outcome::new(mean_ok && grid_ok, format!("mean ratio {mean:.7}, grid [{lo:.6}, {hi:.6}]"))
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..300 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

fn mle_round_trip() -> Outcome {
    let omega = 1.0005;
    let p = martingale_p(omega).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = path_rng(20_220_006, seed);
        let n = rng.gen_range(20..2000);
        let spread = rng.gen_range(0.5..20.0);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-spread..spread)).collect();
        let w = closed_form_w(&xs, p).unwrap();
        let numeric = golden_min(|v| nll(omega, v, &xs).unwrap(), 1e-4, 1e4);
        worst = worst.max((w - numeric).abs() / w);
    }
    let mut recovered = vec![];
    for w in [3u32, 5, 7] {
        let model = MarketModel::new(1_000_000, 1_000_000, omega, w, 0).unwrap();
        let hits = (0..20)
            .filter(|&seed| {
                let prices = sample_market_series(&model, 4096, &mut path_rng(20_220_016 + u64::from(w), seed));
                let series = PriceSeries::from_prices(prices).unwrap();
                let r = fit(&series, SubsampleSpec { start: 0, stride: 1, count: 4096 }, &[omega]).unwrap();
                (r.w_star / f64::from(w) - 1.0).abs() <= 0.1
            })
            .count();
        recovered.push(hits);
    }
    Outcome::new(
        worst <= 1e-6 && recovered.iter().all(|&h| h >= 18),
        format!("worst closed-form gap {worst:.2e}, recovered W=3,5,7 in {recovered:?} of 20 seeds"),
    )
}

fn optimizer_cross_check() -> Outcome {
    let cfg = ExperimentConfig { paths: 500, ..Default::default() };
    let paths = experiments::simulate(&cfg).unwrap();
    let eval = SchemeEvaluation::new(cfg.scheme(cfg.theta, cfg.delta).unwrap(), &paths, cfg.fee_rate).unwrap();
    let exact = solve_risk_neutral(&eval.coeffs, &eval.weights, cfg.budget).unwrap();
    let pgd = solve_risk_averse(&eval.coeffs, &eval.weights, &cfg.optimizer(0.0).unwrap()).unwrap();
    let gap = (pgd.objective - exact.objective).abs() / exact.objective.abs();

    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = path_rng(20_220_007, seed);
        let nb = rng.gen_range(2..10);
        let rows: Vec<Vec<f64>> =
            (0..rng.gen_range(10..200)).map(|_| (0..nb).map(|_| rng.gen_range(-1.0..2.0)).collect()).collect();
        let c = PathCoefficients::from_rows(rows).unwrap();
        let risk = RiskParameter::new(rng.gen_range(0.0..25.0)).unwrap();
        let x: Vec<f64> = (0..nb).map(|_| rng.gen_range(0.0..0.3)).collect();
        let g = utility_gradient(&x, &c, risk);
        for i in 0..nb {
            let h = 1e-5 * x[i].max(1e-2);
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (sample_average_utility(&up, &c, risk) - sample_average_utility(&dn, &c, risk)) / (2.0 * h);
            if g[i].abs() > 1e-8 {
                worst = worst.max((fd - g[i]).abs() / g[i].abs());
            }
        }
    }
    Outcome::new(
        gap <= 1e-6 && worst < 1e-5,
        format!("risk-neutral objective gap {gap:.2e}, worst gradient error {worst:.2e}"),
    )
}

fn nested_dominance() -> Outcome {
    let cfg = ExperimentConfig::default();
    let paths = experiments::simulate(&cfg).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for base in [1u32, 2] {
        for q in [2u32, 3] {
            let coarse = cfg.scheme(cfg.theta, base * q).unwrap();
            let fine = coarse.refined(q).unwrap();
            let ec = SchemeEvaluation::new(coarse, &paths, cfg.fee_rate).unwrap();
            let ef = SchemeEvaluation::new(fine, &paths, cfg.fee_rate).unwrap();
            for a in [0.0, 20.0] {
                let oc = ec.optimize(&cfg, a).unwrap().objective;
                let of = ef.optimize(&cfg, a).unwrap().objective;
                worst = worst.max(oc - of);
            }
        }
    }
    Outcome::new(worst <= 1e-6, format!("largest coarse-minus-fine OPT {worst:.2e}"))
}

fn non_increasing(xs: &[f64], ses: &[f64], k: f64) -> bool {
    xs.windows(2).zip(ses.windows(2)).all(|(x, s)| x[1] <= x[0] + k * s[0].hypot(s[1]) + 1e-12)
}

fn non_decreasing(xs: &[f64], ses: &[f64], k: f64) -> bool {
    xs.windows(2).zip(ses.windows(2)).all(|(x, s)| x[1] >= x[0] - k * s[0].hypot(s[1]) - 1e-12)
}

fn figure_shapes() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    let mut notes = vec![];
    let mut ok = true;
    let mut check = |label: &str, pass: bool| {
        notes.push(format!("{label}={}", if pass { "ok" } else { "violated" }));
        ok &= pass;
    };

    let rows = experiments::run_delta_sweep(&cfg).unwrap();
    for &a in &cfg.sweep_risks {
        let r: Vec<_> = rows.iter().filter(|r| r.a == a).collect();
        let opt: Vec<f64> = r.iter().map(|r| r.opt).collect();
        let gas: Vec<f64> = r.iter().map(|r| r.gas).collect();
        let zeros = vec![0.0; r.len()];
        check(&format!("a{a}.opt_vs_delta"), non_increasing(&opt, &zeros, 0.0));
        check(&format!("a{a}.gas_vs_delta"), non_increasing(&gas, &zeros, 0.0));
        check(&format!("a{a}.v3_over_v2"), r.iter().all(|r| r.opt >= r.v2_opt));
    }

    let risk = experiments::run_risk_sweep(&cfg).unwrap();
    let col = |f: fn(&experiments::RiskPoint) -> f64| risk.iter().map(f).collect::<Vec<f64>>();
    check("pnl_mean_vs_a", non_increasing(&col(|p| p.pnl_mean), &col(|p| p.pnl_mean_se), 2.0));
    check("pnl_std_vs_a", non_increasing(&col(|p| p.pnl_std), &col(|p| p.pnl_std_se), 2.0));
    check("spread_vs_a", risk.windows(2).all(|w| w[1].spread >= w[0].spread));

    for param in [SweepParam::TradesPerRound, SweepParam::TradeImpact] {
        let rows = experiments::run_param_sweep(&cfg, param).unwrap();
        let opt: Vec<f64> = rows.iter().map(|r| r.opt).collect();
        let opt_se: Vec<f64> = rows.iter().map(|r| r.opt_se).collect();
        let gas: Vec<f64> = rows.iter().map(|r| r.gas).collect();
        let gas_se: Vec<f64> = rows.iter().map(|r| r.gas_se).collect();
        check(&format!("opt_vs_{}", param.name()), non_decreasing(&opt, &opt_se, 2.0));
        check(&format!("gas_vs_{}", param.name()), non_decreasing(&gas, &gas_se, 2.0));
    }

    cfg.pareto_risks = vec![0.0, 10.0, 20.0];
    let points = experiments::run_pareto(&cfg).unwrap();
    for a in [0.0, 10.0, 20.0] {
        let mut thetas: Vec<f64> = points.iter().filter(|p| p.a == a && p.on_frontier).map(|p| p.theta).collect();
        thetas.sort_by(f64::total_cmp);
        thetas.dedup();
        check(&format!("a{a}.frontier_thetas={}", thetas.len()), thetas.len() >= 2);
    }
    Outcome::new(ok, notes.join(" "))
}

fn clmm(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_clmm")).current_dir(dir).args(args).output().expect("run clmm")
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let small = [
        "--paths",
        "40",
        "--rounds",
        "20",
        "--thetas",
        "1.002,1.006",
        "--deltas",
        "1..3",
        "--sweep_deltas",
        "1..4",
        "--trades_grid",
        "2..4",
        "--risks",
        "0,10",
        "--pareto_risks",
        "0,10",
    ];
    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate", "--seed", "7", "--paths", "10"],
        vec!["calibrate", "--prices", "prices.csv", "--subsample_count", "300"],
        [&["optimize", "--risk", "10"][..], &small].concat(),
        [&["pareto"][..], &small].concat(),
        [&["sweep", "--param", "delta"][..], &small].concat(),
        [&["sweep", "--param", "risk"][..], &small].concat(),
        [&["sweep", "--param", "k"][..], &small].concat(),
        [&["sweep", "--param", "regime"][..], &small].concat(),
        vec!["replay-appendix-c"],
    ];
    let model = MarketModel::new(1000, 1000, 1.0005, 5, 0).unwrap();
    let prices = sample_market_series(&model, 400, &mut path_rng(3, 0));
    let csv: String = std::iter::once("timestamp,price".to_string())
        .chain(prices.iter().enumerate().map(|(t, p)| format!("{t},{p}")))
        .collect::<Vec<_>>()
        .join("\n");
    let mut differing = vec![];
    for args in &commands {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                std::fs::write(dir.path().join("prices.csv"), &csv).unwrap();
                let out = clmm(dir.path(), args);
                assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
                (out.stdout, dir_bytes(&dir.path().join("out")))
            })
            .collect();
        if runs[0] != runs[1] || runs[0].1.is_empty() {
            differing.push(args[0..2.min(args.len())].join(" "));
        }
    }
    Outcome::new(differing.is_empty(), format!("{} commands run twice, differing: {differing:?}", commands.len()))
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        run(1, "golden pool replay", secs(1), golden_replay),
        run(2, "fee oracle equivalence", secs(30), fee_oracle),
        run(3, "impermanent loss nonnegative", secs(30), il_nonnegative),
        run(4, "pnl linearity and interval additivity", secs(600), linearity_and_additivity),
        run(5, "martingale calibration", secs(60), martingale),
        run(6, "likelihood round trip", secs(120), mle_round_trip),
        run(7, "optimizer cross-check", secs(120), optimizer_cross_check),
        run(8, "nested-scheme dominance", secs(120), nested_dominance),
        run(9, "qualitative figure shapes", secs(1800), figure_shapes),
        run(10, "cli determinism", secs(600), determinism),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
