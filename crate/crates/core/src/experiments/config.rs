//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma separated
//! and integer lists also accept an inclusive `lo..hi` range.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::amm::BucketScheme;
use crate::error::{Error, Result};
use crate::optimizer::OptimizerConfig;
use crate::pnl::RiskParameter;
use crate::price_process::{BeliefProfile, MarketModel, TradeModel};

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("`{s}` is not finite"))
        }
    }

    fn render(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! int_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))
            }

            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

int_value!(u32, u64, usize);

impl ConfigValue for String {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        Ok(s.to_string())
    }

    fn render(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for Vec<f64> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.split(',').map(|x| f64::parse_value(x.trim())).collect()
    }

    fn render(&self) -> String {
        self.iter().map(ConfigValue::render).collect::<Vec<_>>().join(",")
    }
}

impl ConfigValue for Vec<u32> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim) {
            if let Some((lo, hi)) = part.split_once("..") {
                let (lo, hi) = (u32::parse_value(lo.trim())?, u32::parse_value(hi.trim())?);
                if lo > hi {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(lo..=hi);
            } else {
                out.push(u32::parse_value(part)?);
            }
        }
        Ok(out)
    }

    fn render(&self) -> String {
        self.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    }
}

macro_rules! experiment_config {
    ($( $(#[doc = $doc:literal])* $key:ident : $ty:ty = $default:expr ),* $(,)?) => {
        /// Every experiment parameter, with defaults for the baseline regime.
        #[derive(Debug, Clone, PartialEq)]
        pub struct ExperimentConfig {
            $( $(#[doc = $doc])* pub $key: $ty, )*
        }

        impl Default for ExperimentConfig {
            fn default() -> Self {
                Self { $( $key: $default, )* }
            }
        }

        impl ExperimentConfig {
            /// Recognized keys, in declaration order.
            pub const KEYS: &'static [&'static str] = &[$( stringify!($key), )*];

            /// Help text for each key.
            pub const DOCS: &'static [&'static str] = &[$( concat!($($doc,)* ""), )*];

            /// Sets `key` from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $( stringify!($key) => {
                        self.$key = <$ty as ConfigValue>::parse_value(value.trim())
                            .map_err(|e| Error::Parse(format!("key `{key}`: {e}")))?;
                    } )*
                    _ => return Err(Error::Parse(format!("unknown key `{key}`"))),
                }
                Ok(())
            }

            /// Text form of every key.
            pub fn to_map(&self) -> BTreeMap<String, String> {
                let mut m = BTreeMap::new();
                $( m.insert(stringify!($key).to_string(), self.$key.render()); )*
                m
            }
        }
    };
}

experiment_config! {
    /// Market grid steps below parity.
    grid_down: u32 = 150,
    /// Market grid steps above parity.
    grid_up: u32 = 150,
    /// Ratio between adjacent market grid prices.
    grid_ratio: f64 = 1.0005,
    /// Binomial bandwidth of market moves.
    bandwidth: u32 = 5,
    /// Market moves per path.
    rounds: u32 = 100,
    /// Non-arbitrage trades per round.
    trades_per_round: u32 = 10,
    /// Multiplicative price impact of one non-arbitrage trade.
    trade_impact: f64 = 0.00025,
    /// Pool fee rate.
    fee_rate: f64 = 0.01,
    /// Bucket ratio for single-scheme runs.
    theta: f64 = 1.002,
    /// Bucket spacing for single-scheme runs.
    delta: u32 = 1,
    /// Risk aversion for single-scheme runs and parameter sweeps.
    risk: f64 = 0.0,
    /// Bucket ratios of the Pareto sweep.
    thetas: Vec<f64> = vec![1.002, 1.004, 1.006, 1.008, 1.010],
    /// Bucket spacings of the Pareto sweep.
    deltas: Vec<u32> = (1..=20).collect(),
    /// Bucket spacings of the spacing sweep.
    sweep_deltas: Vec<u32> = (1..=40).collect(),
    /// Risk aversions of the spacing sweep.
    sweep_risks: Vec<f64> = vec![0.0, 20.0],
    /// Risk aversions of the risk sweep.
    risks: Vec<f64> = (0..=11).map(|i| f64::from(2 * i)).collect(),
    /// Risk aversions of the Pareto sweep.
    pareto_risks: Vec<f64> = vec![0.0, 10.0, 20.0],
    /// Values of trades_per_round swept.
    trades_grid: Vec<u32> = (1..=20).collect(),
    /// Values of trade_impact swept.
    impact_grid: Vec<f64> = (0..20).map(|i| f64::from(5 + 2 * i) / 100_000.0).collect(),
    /// Values of fee_rate swept.
    fee_grid: Vec<f64> = vec![0.0005, 0.003, 0.005, 0.01, 0.02],
    /// Values of bandwidth swept.
    bandwidth_grid: Vec<u32> = vec![3, 5, 7],
    /// Low-volatility regime: bandwidth, trades_per_round, trade_impact, fee_rate.
    regime_low: Vec<f64> = vec![3.0, 5.0, 0.0002, 0.01],
    /// High-volatility regime: bandwidth, trades_per_round, trade_impact, fee_rate.
    regime_high: Vec<f64> = vec![7.0, 15.0, 0.0003, 0.01],
    /// Sampled paths per configuration.
    paths: usize = 2000,
    /// Master seed.
    seed: u64 = 2022,
    /// LP budget in token B.
    budget: f64 = 1.0,
    /// Gradient step limit.
    max_steps: usize = 20_000,
    /// Objective change below which gradient ascent stops.
    tolerance: f64 = 1e-9,
    /// Budget fraction for a bucket to count toward the spread statistic.
    spread_threshold: f64 = 0.01,
    /// Grid ratios tried by calibration.
    omega_grid: Vec<f64> = vec![1.0001, 1.0002, 1.0005, 1.001, 1.002, 1.005, 1.01],
    /// Calibration subsample offset.
    subsample_start: usize = 0,
    /// Calibration subsample stride.
    subsample_stride: usize = 1,
    /// Calibration subsample length.
    subsample_count: usize = 256,
    /// CSV file with `timestamp,price` rows for calibration.
    prices: String = String::new(),
    /// Output directory.
    out_dir: String = "out".to_string(),
}

/// Keys that do not affect results.
const NON_SEMANTIC: &[&str] = &["out_dir"];

impl ExperimentConfig {
    /// Parses a config file; keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            cfg.set(key, value).map_err(|e| match e {
                Error::Parse(msg) => Error::Parse(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every value against the constraints of the models it feeds.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parse(msg));
        self.belief()?;
        BucketScheme::exponential(self.theta, self.delta, 1, 1)?;
        if !(self.fee_rate > 0.0 && self.fee_rate < 1.0) {
            return bad(format!("fee_rate must lie in (0, 1), got {}", self.fee_rate));
        }
        for &a in self.risks.iter().chain(&self.pareto_risks).chain(&self.sweep_risks).chain([&self.risk]) {
            RiskParameter::new(a)?;
        }
        if self.thetas.is_empty() || self.deltas.is_empty() || self.sweep_deltas.is_empty() {
            return bad("scheme grids must be nonempty".into());
        }
        if self.thetas.iter().any(|t| !(*t > 1.0)) {
            return bad("every theta must exceed 1".into());
        }
        if self.deltas.iter().chain(&self.sweep_deltas).any(|d| *d == 0) {
            return bad("bucket spacings must be at least 1".into());
        }
        if self.paths == 0 {
            return bad("paths must be at least 1".into());
        }
        if !(self.budget > 0.0) {
            return bad(format!("budget must be positive, got {}", self.budget));
        }
        if !(self.tolerance > 0.0) || self.max_steps == 0 {
            return bad("tolerance and max_steps must be positive".into());
        }
        for (name, r) in [("regime_low", &self.regime_low), ("regime_high", &self.regime_high)] {
            if r.len() != 4 {
                return bad(format!("{name} needs four values: bandwidth, trades_per_round, trade_impact, fee_rate"));
            }
            self.regime(r)?;
        }
        if self.impact_grid.iter().any(|l| !(0.0..1.0).contains(l)) {
            return bad("impact_grid values must lie in [0, 1)".into());
        }
        if self.fee_grid.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return bad("fee_grid values must lie in (0, 1)".into());
        }
        if self.bandwidth_grid.contains(&0) {
            return bad("bandwidth_grid values must be at least 1".into());
        }
        if self.omega_grid.iter().any(|w| !(*w > 1.0)) {
            return bad("omega_grid values must exceed 1".into());
        }
        Ok(())
    }

    pub fn market(&self) -> Result<MarketModel> {
        MarketModel::new(self.grid_down, self.grid_up, self.grid_ratio, self.bandwidth, self.rounds)
    }

    pub fn belief(&self) -> Result<BeliefProfile> {
        Ok(BeliefProfile {
            market: self.market()?,
            trade: TradeModel::new(self.trades_per_round, self.trade_impact, self.fee_rate)?,
        })
    }

    /// Copy with a regime's bandwidth, trades, impact and fee rate.
    pub fn regime(&self, r: &[f64]) -> Result<Self> {
        let mut c = self.clone();
        let count = |v: f64, what: &str| -> Result<u32> {
            if v >= 1.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                Ok(v as u32)
            } else {
                Err(Error::Parse(format!("regime {what} must be a positive integer, got {v}")))
            }
        };
        c.bandwidth = count(r[0], "bandwidth")?;
        c.trades_per_round = count(r[1], "trades_per_round")?;
        c.trade_impact = r[2];
        c.fee_rate = r[3];
        c.belief()?;
        Ok(c)
    }

    pub fn optimizer(&self, risk: f64) -> Result<OptimizerConfig> {
        Ok(OptimizerConfig {
            budget: self.budget,
            risk: RiskParameter::new(risk)?,
            max_steps: self.max_steps,
            initial_step: 1e-2,
            tolerance: self.tolerance,
        })
    }

    /// Contract prices the simulator can reach.
    pub fn contract_range(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.market()?.price_range();
        let k = (1.0 - self.fee_rate) * (1.0 - self.trade_impact);
        Ok((lo * k, hi / k))
    }

    /// Scheme covering the reachable contract range with a spare bucket each side.
    pub fn scheme(&self, theta: f64, delta: u32) -> Result<BucketScheme> {
        let (lo, hi) = self.contract_range()?;
        BucketScheme::covering(theta, delta, lo, hi)
    }

    /// Sorted `key = value` lines of every key that affects results.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_map() {
            if !NON_SEMANTIC.contains(&k.as_str()) {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }

    /// Short hex digest of [`ExperimentConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Seed for one value of a swept parameter.
pub fn derived_seed(master: u64, param: &str, value: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(param.as_bytes());
    h.update(value.to_bits().to_le_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}
