//! Liquidity-independent contract/market price simulation: a truncated
//! geometric binomial random walk for the market price, and rounds of
//! random non-arbitrage trades interleaved with arbitrage projections for
//! the contract price.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amm::{check_price, PricePair};
use crate::error::{domain, Result};
use crate::pnl::PricePath;

/// Success probability that makes `omega^Y` mean-one to leading order,
/// where `Y + W ~ Binom(2W, p)`.
pub fn martingale_p(omega: f64) -> Result<f64> {
    if !(omega > 1.0 && omega.is_finite()) {
        return Err(domain(format!("grid ratio must exceed 1, got {omega}")));
    }
    let m = omega.ln();
    // rationalized form of (m + 2 - sqrt(m^2 + 4)) / (2m)
    Ok(2.0 / (m + 2.0 + (m * m + 4.0).sqrt()))
}

/// Market price grid `omega^i`, `i in [-grid_down, grid_up]`, walked by
/// binomial index increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub grid_down: u32,
    pub grid_up: u32,
    pub ratio: f64,
    pub bandwidth: u32,
    pub rounds: u32,
}

impl MarketModel {
    pub fn new(grid_down: u32, grid_up: u32, ratio: f64, bandwidth: u32, rounds: u32) -> Result<Self> {
        martingale_p(ratio)?;
        if bandwidth == 0 {
            return Err(domain("bandwidth must be at least 1"));
        }
        Ok(Self { grid_down, grid_up, ratio, bandwidth, rounds })
    }

    /// Binomial success probability.
    pub fn p(&self) -> f64 {
        martingale_p(self.ratio).expect("validated ratio")
    }

    pub fn price_at(&self, index: i64) -> f64 {
        (self.ratio.ln() * index as f64).exp()
    }

    /// Lowest and highest grid prices.
    pub fn price_range(&self) -> (f64, f64) {
        (self.price_at(-i64::from(self.grid_down)), self.price_at(i64::from(self.grid_up)))
    }

    pub fn increments(&self) -> IncrementSampler {
        IncrementSampler::new(self.bandwidth, self.p())
    }
}

/// Exact inverse-CDF sampler for `Binom(2W, p) - W`.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    bandwidth: i64,
    cdf: Vec<f64>,
}

impl IncrementSampler {
    pub fn new(bandwidth: u32, p: f64) -> Self {
        let pmf = binomial_pmf(2 * bandwidth, p);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|q| {
                acc += q;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = f64::INFINITY;
        }
        Self { bandwidth: i64::from(bandwidth), cdf }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u) as i64 - self.bandwidth
    }
}

/// Probabilities of `0..=n` successes in `n` trials.
pub fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_choose = 0.0;
    for k in 0..=n {
        if k > 0 {
            log_choose += f64::from(n - k + 1).ln() - f64::from(k).ln();
        }
        out.push((log_choose + f64::from(k) * lp + f64::from(n - k) * lq).exp());
    }
    out
}

/// One market move from grid index `index`, truncated to the grid.
pub fn market_step<R: Rng + ?Sized>(index: i64, model: &MarketModel, sampler: &IncrementSampler, rng: &mut R) -> i64 {
    (index + sampler.draw(rng)).clamp(-i64::from(model.grid_down), i64::from(model.grid_up))
}

/// Non-arbitrage trade flow and fee rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeModel {
    pub trades_per_round: u32,
    pub impact: f64,
    pub fee_rate: f64,
}

impl TradeModel {
    pub fn new(trades_per_round: u32, impact: f64, fee_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&impact) {
            return Err(domain(format!("trade impact must lie in [0, 1), got {impact}")));
        }
        if !(0.0..1.0).contains(&fee_rate) {
            return Err(domain(format!("fee rate must lie in [0, 1), got {fee_rate}")));
        }
        Ok(Self { trades_per_round, impact, fee_rate })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefProfile {
    pub market: MarketModel,
    pub trade: TradeModel,
}

impl BeliefProfile {
    /// Pairs per sampled path.
    pub fn path_len(&self) -> usize {
        1 + self.market.rounds as usize * 2 * (self.trade.trades_per_round as usize + 1)
    }
}

/// Contract prices that admit no profitable arbitrage against `market`.
pub fn no_arbitrage_interval(market: f64, gamma: f64) -> Result<(f64, f64)> {
    check_price(market, "market price")?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(domain(format!("fee rate must lie in [0, 1), got {gamma}")));
    }
    Ok(((1.0 - gamma) * market, market / (1.0 - gamma)))
}

/// Closest point of the no-arbitrage interval to `contract`.
#[inline]
pub fn arbitrage_project(contract: f64, market: f64, gamma: f64) -> f64 {
    contract.clamp((1.0 - gamma) * market, market / (1.0 - gamma))
}

/// Contract price as integer powers of the market grid ratio, the fee
/// factor `1 - gamma` and the trade factor `1 - lambda`. Routes that reach
/// the same exponents produce bit-identical prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ContractState {
    pub grid: i64,
    pub fee: i64,
    pub impact: i64,
}

#[derive(Debug, Clone, Copy)]
struct LogFactors {
    grid: f64,
    fee: f64,
    impact: f64,
}

impl LogFactors {
    fn new(model: &MarketModel, trade: &TradeModel) -> Self {
        Self { grid: model.ratio.ln(), fee: (-trade.fee_rate).ln_1p(), impact: (-trade.impact).ln_1p() }
    }

    fn log_price(&self, s: ContractState) -> f64 {
        s.grid as f64 * self.grid + s.fee as f64 * self.fee + s.impact as f64 * self.impact
    }

    fn price(&self, s: ContractState) -> f64 {
        self.log_price(s).exp()
    }

    /// Arbitrage projection against the market price at grid index `market`.
    fn project(&self, s: ContractState, market: i64) -> ContractState {
        let lower = ContractState { grid: market, fee: 1, impact: 0 };
        let upper = ContractState { grid: market, fee: -1, impact: 0 };
        let x = self.log_price(s);
        if x < self.log_price(lower) {
            lower
        } else if x > self.log_price(upper) {
            upper
        } else {
            s
        }
    }
}

impl ContractState {
    pub fn price(self, model: &MarketModel, trade: &TradeModel) -> f64 {
        LogFactors::new(model, trade).price(self)
    }
}

fn round_into<R: Rng + ?Sized>(
    logs: &LogFactors,
    market_index: i64,
    trades: u32,
    prev: ContractState,
    rng: &mut R,
    out: &mut Vec<PricePair>,
) -> ContractState {
    let market = logs.price(ContractState { grid: market_index, fee: 0, impact: 0 });
    out.push(PricePair { contract: logs.price(prev), market });
    let mut c = logs.project(prev, market_index);
    out.push(PricePair { contract: logs.price(c), market });
    for _ in 0..trades {
        c.impact += if rng.gen::<bool>() { -1 } else { 1 };
        out.push(PricePair { contract: logs.price(c), market });
        c = logs.project(c, market_index);
        out.push(PricePair { contract: logs.price(c), market });
    }
    c
}

/// Appends the `2(k + 1)` pairs of one round at market grid index
/// `market_index` and returns the final contract state.
pub fn sample_round_into<R: Rng + ?Sized>(
    market_index: i64,
    model: &MarketModel,
    trade: &TradeModel,
    prev: ContractState,
    rng: &mut R,
    out: &mut Vec<PricePair>,
) -> ContractState {
    round_into(&LogFactors::new(model, trade), market_index, trade.trades_per_round, prev, rng, out)
}

pub fn sample_round<R: Rng + ?Sized>(
    market_index: i64,
    model: &MarketModel,
    trade: &TradeModel,
    prev: ContractState,
    rng: &mut R,
) -> Vec<PricePair> {
    let mut out = Vec::with_capacity(2 * (trade.trades_per_round as usize + 1));
    sample_round_into(market_index, model, trade, prev, rng, &mut out);
    out
}

/// One path of `rounds` rounds starting at parity.
pub fn sample_path<R: Rng + ?Sized>(belief: &BeliefProfile, rng: &mut R) -> PricePath {
    let sampler = belief.market.increments();
    sample_path_with(belief, &sampler, rng)
}

fn sample_path_with<R: Rng + ?Sized>(belief: &BeliefProfile, sampler: &IncrementSampler, rng: &mut R) -> PricePath {
    let logs = LogFactors::new(&belief.market, &belief.trade);
    let mut pairs = Vec::with_capacity(belief.path_len());
    pairs.push(PricePair::parity());
    let mut index = 0i64;
    let mut contract = ContractState::default();
    for _ in 0..belief.market.rounds {
        index = market_step(index, &belief.market, sampler, rng);
        contract = round_into(&logs, index, belief.trade.trades_per_round, contract, rng, &mut pairs);
    }
    PricePath::from_vec_unchecked(pairs)
}

/// Independent generator for path `index` under `master_seed`.
pub fn path_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// `count` paths, path `i` drawn from stream `i` of `master_seed`.
pub fn sample_paths(belief: &BeliefProfile, count: usize, master_seed: u64) -> Vec<PricePath> {
    let sampler = belief.market.increments();
    (0..count)
        .into_par_iter()
        .map(|i| sample_path_with(belief, &sampler, &mut path_rng(master_seed, i as u64)))
        .collect()
}

/// `steps + 1` market prices of the walk starting at index 0.
pub fn sample_market_series<R: Rng + ?Sized>(model: &MarketModel, steps: usize, rng: &mut R) -> Vec<f64> {
    let sampler = model.increments();
    let mut index = 0i64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(1.0);
    for _ in 0..steps {
        index = market_step(index, model, &sampler, rng);
        out.push(model.price_at(index));
    }
    out
}
