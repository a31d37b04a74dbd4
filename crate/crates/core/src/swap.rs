//! Stateful pool with range positions, fee skimming and active-interval
//! trading.
//!
//! Overlapping positions are handled by splitting the price axis at every
//! distinct position endpoint: within one such interval each covering
//! position contributes its full units, so the active liquidity of an
//! interval is the sum over the positions that span it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::amm::{check_price, unit_range_value, BucketScheme, TokenBundle};
use crate::error::{domain, Error, Result};

/// Relative slack under which an order is treated as landing exactly on an
/// interval boundary.
const BOUNDARY_SNAP: f64 = 1e-12;

/// Opaque liquidity provider identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LpId(pub String);

impl LpId {
    /// Owner of the full-range position every pool starts with.
    pub fn creator() -> Self {
        LpId("creator".into())
    }
}

impl From<&str> for LpId {
    fn from(s: &str) -> Self {
        LpId(s.to_string())
    }
}

impl From<String> for LpId {
    fn from(s: String) -> Self {
        LpId(s)
    }
}

impl fmt::Display for LpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Handle returned by [`Pool::add_liquidity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PositionId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpPosition {
    pub lp: LpId,
    pub lower: f64,
    pub upper: f64,
    pub units: f64,
}

impl LpPosition {
    fn spans(&self, lo: f64, hi: f64) -> bool {
        self.lower <= lo && self.upper >= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Trader sends token A; the contract price falls.
    SellA,
    /// Trader sends token B; the contract price rises.
    SellB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapOrder {
    pub direction: Direction,
    /// Tokens sent, before fees.
    pub amount_in: f64,
}

impl SwapOrder {
    pub fn new(direction: Direction, amount_in: f64) -> Result<Self> {
        if !(amount_in > 0.0 && amount_in.is_finite()) {
            return Err(domain(format!("swap amount must be positive, got {amount_in}")));
        }
        Ok(Self { direction, amount_in })
    }

    pub fn sell_a(amount_in: f64) -> Result<Self> {
        Self::new(Direction::SellA, amount_in)
    }

    pub fn sell_b(amount_in: f64) -> Result<Self> {
        Self::new(Direction::SellB, amount_in)
    }
}

/// Trading within a single active interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapSegment {
    pub lower: f64,
    pub upper: f64,
    pub liquidity: f64,
    /// Tokens consumed by this segment, fees included.
    pub amount_in: f64,
    pub fee: f64,
    pub out: f64,
    pub price_before: f64,
    pub price_after: f64,
    pub active_before: TokenBundle,
    pub active_after: TokenBundle,
    /// Fee share of each active LP, in the sent token.
    pub fee_shares: BTreeMap<LpId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapResult {
    pub direction: Direction,
    /// Tokens consumed, fees included.
    pub amount_in: f64,
    /// Tokens left unfilled because liquidity ran out.
    pub remainder: f64,
    pub out: f64,
    pub new_price: f64,
    /// Fees per LP from this swap.
    pub fees: BTreeMap<LpId, TokenBundle>,
    pub endpoints_crossed: usize,
    pub segments: Vec<SwapSegment>,
}

/// A single-writer liquidity pool.
#[derive(Debug, Clone)]
pub struct Pool {
    scheme: Option<BucketScheme>,
    fee_rate: f64,
    price: f64,
    positions: Vec<Option<LpPosition>>,
    accrued: BTreeMap<LpId, TokenBundle>,
}

impl Pool {
    /// A pool at `price` seeded with `full_range_units` of full-range liquidity
    /// owned by [`LpId::creator`].
    pub fn new(fee_rate: f64, price: f64, full_range_units: f64) -> Result<Self> {
        if !(fee_rate > 0.0 && fee_rate < 1.0) {
            return Err(domain(format!("fee rate must lie in (0, 1), got {fee_rate}")));
        }
        check_price(price, "contract price")?;
        if !(full_range_units >= 0.0 && full_range_units.is_finite()) {
            return Err(domain("full-range seed liquidity must be finite and nonnegative"));
        }
        let creator = LpPosition { lp: LpId::creator(), lower: 0.0, upper: f64::INFINITY, units: full_range_units };
        Ok(Self { scheme: None, fee_rate, price, positions: vec![Some(creator)], accrued: BTreeMap::new() })
    }

    /// Like [`Pool::new`], but every later position must use endpoints of `scheme`.
    pub fn with_scheme(scheme: BucketScheme, fee_rate: f64, price: f64, full_range_units: f64) -> Result<Self> {
        let mut pool = Self::new(fee_rate, price, full_range_units)?;
        pool.scheme = Some(scheme);
        Ok(pool)
    }

    pub fn fee_rate(&self) -> f64 {
        self.fee_rate
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn scheme(&self) -> Option<&BucketScheme> {
        self.scheme.as_ref()
    }

    pub fn positions(&self) -> impl Iterator<Item = (PositionId, &LpPosition)> {
        self.positions.iter().enumerate().filter_map(|(k, p)| p.as_ref().map(|p| (PositionId(k), p)))
    }

    pub fn position(&self, id: PositionId) -> Option<&LpPosition> {
        self.positions.get(id.0).and_then(Option::as_ref)
    }

    /// Fees accrued so far by `lp`.
    pub fn accrued_fees(&self, lp: &LpId) -> TokenBundle {
        self.accrued.get(lp).copied().unwrap_or_default()
    }

    pub fn all_accrued_fees(&self) -> &BTreeMap<LpId, TokenBundle> {
        &self.accrued
    }

    fn on_scheme(&self, p: f64) -> bool {
        match &self.scheme {
            None => true,
            Some(s) => p == 0.0 || p == f64::INFINITY || s.endpoints().iter().any(|e| (e - p).abs() <= 1e-12 * e),
        }
    }

    /// Deposits `units` of `[lower, upper]` liquidity and returns the bundle the LP must send.
    pub fn add_liquidity(
        &mut self,
        lp: impl Into<LpId>,
        lower: f64,
        upper: f64,
        units: f64,
    ) -> Result<(PositionId, TokenBundle)> {
        if !(lower >= 0.0 && upper > lower && !upper.is_nan()) {
            return Err(domain(format!("invalid position range [{lower}, {upper}]")));
        }
        if !(units >= 0.0 && units.is_finite()) {
            return Err(domain(format!("position units must be finite and nonnegative, got {units}")));
        }
        if !self.on_scheme(lower) || !self.on_scheme(upper) {
            return Err(domain(format!("position [{lower}, {upper}] does not use bucket endpoints")));
        }
        let required = unit_range_value(lower, upper, self.price) * units;
        self.positions.push(Some(LpPosition { lp: lp.into(), lower, upper, units }));
        Ok((PositionId(self.positions.len() - 1), required))
    }

    /// Withdraws a position and returns its bundle at the current price.
    pub fn remove_liquidity(&mut self, lp: &LpId, id: PositionId) -> Result<TokenBundle> {
        let slot = self.positions.get_mut(id.0).ok_or_else(|| Error::NotFound(format!("{id:?}")))?;
        match slot {
            Some(p) if &p.lp == lp => {
                let out = unit_range_value(p.lower, p.upper, self.price) * p.units;
                *slot = None;
                Ok(out)
            }
            _ => Err(Error::NotFound(format!("{id:?} owned by {lp}"))),
        }
    }

    /// All distinct position endpoints, ascending.
    fn endpoints(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.positions().flat_map(|(_, p)| [p.lower, p.upper]).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    /// Tightest endpoint interval around `price`. With a direction the
    /// interval is the one the price moves into; without, an endpoint
    /// belongs to the interval it starts.
    fn interval_at(&self, price: f64, toward: Option<Direction>) -> Result<(f64, f64)> {
        let e = self.endpoints();
        let k = match toward {
            Some(Direction::SellA) => e.partition_point(|&x| x < price),
            _ => e.partition_point(|&x| x <= price),
        };
        if k == 0 || k == e.len() {
            return Err(Error::Invariant(format!("price {price} is not covered by any position")));
        }
        Ok((e[k - 1], e[k]))
    }

    /// The active interval at the current price.
    pub fn active_interval(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.interval_at(self.price, None)?;
        if !self.positions().any(|(_, p)| p.spans(lo, hi)) {
            return Err(Error::Invariant(format!("price {} is not covered by any position", self.price)));
        }
        Ok((lo, hi))
    }

    fn liquidity_over(&self, lo: f64, hi: f64) -> f64 {
        self.positions().filter(|(_, p)| p.spans(lo, hi)).map(|(_, p)| p.units).sum()
    }

    /// Total active liquidity at the current price.
    pub fn active_liquidity(&self) -> Result<f64> {
        let (lo, hi) = self.active_interval()?;
        Ok(self.liquidity_over(lo, hi))
    }

    /// Bundle of the active liquidity over the active interval.
    pub fn active_bundle(&self) -> Result<TokenBundle> {
        let (lo, hi) = self.active_interval()?;
        Ok(unit_range_value(lo, hi, self.price) * self.liquidity_over(lo, hi))
    }

    /// Total token reserves backing every position, fees excluded.
    pub fn reserves(&self) -> TokenBundle {
        self.positions()
            .fold(TokenBundle::ZERO, |acc, (_, p)| acc + unit_range_value(p.lower, p.upper, self.price) * p.units)
    }

    fn liquidity_ahead(&self, from: f64, direction: Direction) -> bool {
        self.positions().any(|(_, p)| {
            p.units > 0.0
                && match direction {
                    Direction::SellB => p.upper > from,
                    Direction::SellA => p.lower < from,
                }
        })
    }

    /// Order that moves the contract price to `target`, or `None` if it is
    /// already there or the move cannot be filled.
    pub fn quote_to_price(&self, target: f64) -> Result<Option<SwapOrder>> {
        check_price(target, "target price")?;
        if target == self.price {
            return Ok(None);
        }
        let direction = if target > self.price { Direction::SellB } else { Direction::SellA };
        let mut price = self.price;
        let mut net = 0.0;
        while price != target {
            let (lo, hi) = self.interval_at(price, Some(direction))?;
            let l = self.liquidity_over(lo, hi);
            let next = match direction {
                Direction::SellB => target.min(hi),
                Direction::SellA => target.max(lo),
            };
            if l == 0.0 && !self.liquidity_ahead(price, direction) {
                return Ok(None);
            }
            net += match direction {
                Direction::SellB => l * (next.sqrt() - price.sqrt()),
                Direction::SellA => l * (1.0 / next.sqrt() - 1.0 / price.sqrt()),
            };
            price = next;
        }
        if net <= 0.0 {
            return Ok(None);
        }
        Ok(Some(SwapOrder { direction, amount_in: net / (1.0 - self.fee_rate) }))
    }

    /// Executes `order`, crediting fees to active LPs in proportion to their
    /// units and crossing into new active intervals as needed.
    pub fn execute_swap(&mut self, order: SwapOrder) -> Result<SwapResult> {
        SwapOrder::new(order.direction, order.amount_in)?;
        let dir = order.direction;
        let gamma = self.fee_rate;
        let mut rem = order.amount_in;
        let mut out_total = 0.0;
        let mut crossed = 0;
        let mut segments = Vec::new();
        let mut fees: BTreeMap<LpId, TokenBundle> = BTreeMap::new();

        while rem > 0.0 {
            let (lo, hi) = self.interval_at(self.price, Some(dir))?;
            let l = self.liquidity_over(lo, hi);
            let boundary = match dir {
                Direction::SellB => hi,
                Direction::SellA => lo,
            };
            if l == 0.0 {
                // Nothing to trade against here: skip the gap if liquidity lies beyond it.
                if boundary.is_finite() && boundary > 0.0 && self.liquidity_ahead(boundary, dir) {
                    self.price = boundary;
                    crossed += 1;
                    continue;
                }
                break;
            }
            let p = self.price;
            let net_cap = match dir {
                Direction::SellB => l * (boundary.sqrt() - p.sqrt()),
                Direction::SellA => l * (1.0 / boundary.sqrt() - 1.0 / p.sqrt()),
            };
            let gross_cap = net_cap / (1.0 - gamma);
            let reaches = rem >= gross_cap * (1.0 - BOUNDARY_SNAP);
            let used = if reaches && rem <= gross_cap * (1.0 + BOUNDARY_SNAP) {
                rem
            } else if reaches {
                gross_cap
            } else {
                rem
            };
            let new_price = if reaches {
                boundary
            } else {
                let net = used * (1.0 - gamma);
                match dir {
                    Direction::SellB => (p.sqrt() + net / l).powi(2),
                    Direction::SellA => (1.0 / (1.0 / p.sqrt() + net / l)).powi(2),
                }
            };
            let before = unit_range_value(lo, hi, p) * l;
            let after = unit_range_value(lo, hi, new_price) * l;
            let out = match dir {
                Direction::SellB => before.a - after.a,
                Direction::SellA => before.b - after.b,
            };
            let fee = gamma * used;
            let mut shares = BTreeMap::new();
            for (_, pos) in self.positions().filter(|(_, q)| q.spans(lo, hi) && q.units > 0.0) {
                *shares.entry(pos.lp.clone()).or_insert(0.0) += fee * pos.units / l;
            }
            for (lp, share) in &shares {
                let credit = match dir {
                    Direction::SellB => TokenBundle { a: 0.0, b: *share },
                    Direction::SellA => TokenBundle { a: *share, b: 0.0 },
                };
                *fees.entry(lp.clone()).or_default() += credit;
                *self.accrued.entry(lp.clone()).or_default() += credit;
            }
            segments.push(SwapSegment {
                lower: lo,
                upper: hi,
                liquidity: l,
                amount_in: used,
                fee,
                out,
                price_before: p,
                price_after: new_price,
                active_before: before,
                active_after: after,
                fee_shares: shares,
            });
            out_total += out;
            self.price = new_price;
            rem = if used == rem { 0.0 } else { rem - used };
            if rem > 0.0 {
                crossed += 1;
            }
        }

        Ok(SwapResult {
            direction: dir,
            amount_in: order.amount_in - rem,
            remainder: rem,
            out: out_total,
            new_price: self.price,
            fees,
            endpoints_crossed: crossed,
            segments,
        })
    }
}
