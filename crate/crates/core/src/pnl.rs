//! Fee accrual, impermanent loss and PnL of a bucketed allocation over a
//! sequence of contract-market price pairs.

use serde::{Deserialize, Serialize};

use crate::amm::{check_price, unit_range_value, BucketScheme, LiquidityAllocation, PricePair};
use crate::error::{domain, Error, Result};

/// A nonempty sequence of price pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath(Vec<PricePair>);

impl PricePath {
    pub fn new(pairs: Vec<PricePair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(domain("a price path needs at least one pair"));
        }
        for p in &pairs {
            check_price(p.contract, "contract price")?;
            check_price(p.market, "market price")?;
        }
        Ok(Self(pairs))
    }

    /// Builds a path from `(contract, market)` tuples.
    pub fn from_prices(prices: &[(f64, f64)]) -> Result<Self> {
        Self::new(prices.iter().map(|&(contract, market)| PricePair { contract, market }).collect())
    }

    pub(crate) fn from_vec_unchecked(pairs: Vec<PricePair>) -> Self {
        debug_assert!(!pairs.is_empty());
        Self(pairs)
    }

    pub fn pairs(&self) -> &[PricePair] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> PricePair {
        self.0[0]
    }

    pub fn last(&self) -> PricePair {
        self.0[self.0.len() - 1]
    }
}

/// Fees in each token.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeeTally {
    pub fee_a: f64,
    pub fee_b: f64,
}

impl FeeTally {
    /// Token-B worth at market price `market`.
    pub fn worth_in_b(&self, market: f64) -> f64 {
        market * self.fee_a + self.fee_b
    }
}

/// Coefficient of absolute risk aversion; zero is risk neutral.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RiskParameter(f64);

impl RiskParameter {
    pub const NEUTRAL: RiskParameter = RiskParameter(0.0);

    pub fn new(a: f64) -> Result<Self> {
        if a >= 0.0 && a.is_finite() {
            Ok(Self(a))
        } else {
            Err(domain(format!("risk parameter must be finite and nonnegative, got {a}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Exponential utility `(1 - exp(-a x)) / a`, or `x` when `a == 0`.
#[inline]
pub fn utility(x: f64, a: RiskParameter) -> f64 {
    let a = a.0;
    if a == 0.0 {
        x
    } else {
        -(-a * x).exp_m1() / a
    }
}

/// Inserts a pair at every bucket endpoint strictly between consecutive
/// contract prices, so each step stays within one bucket. Inserted pairs
/// carry the market price of the pair that follows them.
pub fn split_path(path: &PricePath, scheme: &BucketScheme) -> PricePath {
    let pairs = path.pairs();
    let mut out = Vec::with_capacity(pairs.len());
    out.push(pairs[0]);
    let ends = scheme.endpoints();
    for w in pairs.windows(2) {
        let (from, to) = (w[0].contract, w[1].contract);
        let lo = ends.partition_point(|&e| e <= from.min(to));
        let hi = ends.partition_point(|&e| e < from.max(to));
        let between = &ends[lo..hi.max(lo)];
        let market = w[1].market;
        if from < to {
            out.extend(between.iter().map(|&c| PricePair { contract: c, market }));
        } else {
            out.extend(between.iter().rev().map(|&c| PricePair { contract: c, market }));
        }
        out.push(w[1]);
    }
    PricePath(out)
}

fn single_bucket(scheme: &BucketScheme, from: f64, to: f64) -> Result<usize> {
    let k = scheme.position_of_segment(from, to);
    if from.max(to) > scheme.buckets()[k].upper {
        return Err(Error::MultiBucketMove { from, to });
    }
    Ok(k)
}

/// Fees earned by `alloc` for one contract-price move inside a single bucket:
/// token B on upward moves, token A on downward ones.
pub fn fee_for_move(
    alloc: &LiquidityAllocation,
    scheme: &BucketScheme,
    from: PricePair,
    to: PricePair,
    gamma: f64,
) -> Result<FeeTally> {
    check_gamma(gamma)?;
    check_alloc(alloc, scheme)?;
    let (p, q) = (from.contract, to.contract);
    if p == q {
        return Ok(FeeTally::default());
    }
    let k = single_bucket(scheme, p, q)?;
    let scale = alloc.as_slice()[k] * gamma / (1.0 - gamma);
    Ok(if q > p {
        FeeTally { fee_a: 0.0, fee_b: scale * (q.sqrt() - p.sqrt()) }
    } else {
        FeeTally { fee_a: scale * (1.0 / q.sqrt() - 1.0 / p.sqrt()), fee_b: 0.0 }
    })
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("fee rate must lie in (0, 1), got {gamma}")))
    }
}

fn check_alloc(alloc: &LiquidityAllocation, scheme: &BucketScheme) -> Result<()> {
    if alloc.len() == scheme.len() {
        Ok(())
    } else {
        Err(domain(format!("allocation has {} entries, scheme has {} buckets", alloc.len(), scheme.len())))
    }
}

/// Total fees in each token over the path.
pub fn fee_tally_over_path(
    alloc: &LiquidityAllocation,
    scheme: &BucketScheme,
    path: &PricePath,
    gamma: f64,
) -> Result<FeeTally> {
    let split = split_path(path, scheme);
    let mut total = FeeTally::default();
    for w in split.pairs().windows(2) {
        let f = fee_for_move(alloc, scheme, w[0], w[1], gamma)?;
        total.fee_a += f.fee_a;
        total.fee_b += f.fee_b;
    }
    Ok(total)
}

/// Fees over the path, valued in token B at the final market price.
pub fn fees_over_path(alloc: &LiquidityAllocation, scheme: &BucketScheme, path: &PricePath, gamma: f64) -> Result<f64> {
    Ok(fee_tally_over_path(alloc, scheme, path, gamma)?.worth_in_b(path.last().market))
}

/// Worth of the opening bundle minus worth of the closing bundle, both at the
/// final market price.
pub fn impermanent_loss(
    alloc: &LiquidityAllocation,
    scheme: &BucketScheme,
    start: PricePair,
    end: PricePair,
) -> Result<f64> {
    check_alloc(alloc, scheme)?;
    let pm = end.market;
    Ok(scheme
        .buckets()
        .iter()
        .zip(alloc.as_slice())
        .filter(|(_, &u)| u > 0.0)
        .map(|(b, &u)| {
            let held = unit_range_value(b.lower, b.upper, start.contract).worth_in_b(pm);
            let now = unit_range_value(b.lower, b.upper, end.contract).worth_in_b(pm);
            u * (held - now)
        })
        .sum())
}

/// Fees minus impermanent loss, in token B at the final market price.
pub fn pnl(alloc: &LiquidityAllocation, scheme: &BucketScheme, path: &PricePath, gamma: f64) -> Result<f64> {
    Ok(fees_over_path(alloc, scheme, path, gamma)? - impermanent_loss(alloc, scheme, path.first(), path.last())?)
}

/// PnL of one liquidity unit in each bucket: `pnl(l) == <coefficients, l>`.
pub fn unit_pnl_coefficients(path: &PricePath, scheme: &BucketScheme, gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let mut out = vec![0.0; scheme.len()];
    unit_pnl_into(path, scheme, gamma, &mut out);
    Ok(out)
}

/// Accumulates per-unit fees by clipping each move to the buckets it overlaps.
pub(crate) fn unit_pnl_into(path: &PricePath, scheme: &BucketScheme, gamma: f64, out: &mut [f64]) {
    let buckets = scheme.buckets();
    let n = buckets.len();
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    for w in path.pairs().windows(2) {
        let (p, q) = (w[0].contract, w[1].contract);
        if p == q {
            continue;
        }
        let (lo, hi) = (p.min(q), p.max(q));
        let mut k = scheme.position_of(lo);
        while k < n {
            let b = &buckets[k];
            if b.lower >= hi {
                break;
            }
            let s = lo.max(b.lower);
            let e = hi.min(b.upper);
            if q > p {
                up[k] += e.sqrt() - s.sqrt();
            } else {
                down[k] += 1.0 / s.sqrt() - 1.0 / e.sqrt();
            }
            k += 1;
        }
    }
    let scale = gamma / (1.0 - gamma);
    let (start, end) = (path.first(), path.last());
    let pm = end.market;
    for (k, b) in buckets.iter().enumerate() {
        let held = unit_range_value(b.lower, b.upper, start.contract).worth_in_b(pm);
        let now = unit_range_value(b.lower, b.upper, end.contract).worth_in_b(pm);
        out[k] = scale * (pm * down[k] + up[k]) - (held - now);
    }
}
