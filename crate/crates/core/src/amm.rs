//! Bundle values for full-range and range-bound liquidity, reserve-curve
//! coordinates, and exponential bucket schemes.
//!
//! Prices are always token B per token A. A bundle `(a, b)` holds `a` units
//! of token A and `b` units of token B.

use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Relative tolerance for reserve-curve membership checks.
pub const CURVE_TOLERANCE: f64 = 1e-9;

/// A quantity of token A and token B.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TokenBundle {
    pub a: f64,
    pub b: f64,
}

impl TokenBundle {
    pub const ZERO: TokenBundle = TokenBundle { a: 0.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(domain(format!("bundle ({a}, {b}) must be finite and nonnegative")));
        }
        Ok(Self { a, b })
    }

    /// Market worth of the bundle in token B when token A trades at `market`.
    pub fn worth_in_b(&self, market: f64) -> f64 {
        market * self.a + self.b
    }
}

impl Add for TokenBundle {
    type Output = TokenBundle;
    fn add(self, rhs: TokenBundle) -> TokenBundle {
        TokenBundle { a: self.a + rhs.a, b: self.b + rhs.b }
    }
}

impl AddAssign for TokenBundle {
    fn add_assign(&mut self, rhs: TokenBundle) {
        self.a += rhs.a;
        self.b += rhs.b;
    }
}

impl Sub for TokenBundle {
    type Output = TokenBundle;
    fn sub(self, rhs: TokenBundle) -> TokenBundle {
        TokenBundle { a: self.a - rhs.a, b: self.b - rhs.b }
    }
}

impl Mul<f64> for TokenBundle {
    type Output = TokenBundle;
    fn mul(self, k: f64) -> TokenBundle {
        TokenBundle { a: self.a * k, b: self.b * k }
    }
}

/// A (contract price, market price) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePair {
    pub contract: f64,
    pub market: f64,
}

impl PricePair {
    pub fn new(contract: f64, market: f64) -> Result<Self> {
        check_price(contract, "contract price")?;
        check_price(market, "market price")?;
        Ok(Self { contract, market })
    }

    /// Both tokens at parity.
    pub fn parity() -> Self {
        Self { contract: 1.0, market: 1.0 }
    }
}

pub(crate) fn check_price(p: f64, what: &str) -> Result<f64> {
    if p > 0.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(domain(format!("{what} must be positive and finite, got {p}")))
    }
}

fn check_units(units: f64) -> Result<f64> {
    if units >= 0.0 && units.is_finite() {
        Ok(units)
    } else {
        Err(domain(format!("liquidity must be finite and nonnegative, got {units}")))
    }
}

/// Range bounds may use `0` for an open lower end and `+inf` for an open upper end.
fn check_range(lower: f64, upper: f64) -> Result<()> {
    if lower >= 0.0 && lower.is_finite() && upper > lower && !upper.is_nan() {
        Ok(())
    } else {
        Err(domain(format!("invalid price range [{lower}, {upper}]")))
    }
}

/// Token bundle backing `units` of full-range liquidity at price `price`.
pub fn v2_bundle_value(units: f64, price: f64) -> Result<TokenBundle> {
    check_units(units)?;
    let root = check_price(price, "price")?.sqrt();
    Ok(TokenBundle { a: units / root, b: units * root })
}

/// Change in token A along the unit full-range curve when the price moves from `from` to `to`.
pub fn delta_x(from: f64, to: f64) -> Result<f64> {
    check_price(from, "price")?;
    check_price(to, "price")?;
    Ok(1.0 / to.sqrt() - 1.0 / from.sqrt())
}

/// Change in token B along the unit full-range curve when the price moves from `from` to `to`.
pub fn delta_y(from: f64, to: f64) -> Result<f64> {
    check_price(from, "price")?;
    check_price(to, "price")?;
    Ok(to.sqrt() - from.sqrt())
}

#[inline]
fn inv_sqrt(p: f64) -> f64 {
    // 1/sqrt(inf) = 0 handles open upper ends
    1.0 / p.sqrt()
}

/// Bundle value of one unit of `[lower, upper]` liquidity at `price`, without validation.
#[inline]
pub(crate) fn unit_range_value(lower: f64, upper: f64, price: f64) -> TokenBundle {
    if price < lower {
        TokenBundle { a: inv_sqrt(lower) - inv_sqrt(upper), b: 0.0 }
    } else if price > upper {
        TokenBundle { a: 0.0, b: upper.sqrt() - lower.sqrt() }
    } else {
        TokenBundle { a: inv_sqrt(price) - inv_sqrt(upper), b: price.sqrt() - lower.sqrt() }
    }
}

/// Token bundle backing `units` of `[lower, upper]` liquidity at `price`.
///
/// Below the range the position is all token A, above it all token B.
/// `lower` may be `0` and `upper` may be `f64::INFINITY`.
pub fn v3_bundle_value(units: f64, lower: f64, upper: f64, price: f64) -> Result<TokenBundle> {
    check_units(units)?;
    check_range(lower, upper)?;
    check_price(price, "price")?;
    Ok(unit_range_value(lower, upper, price) * units)
}

fn on_curve(bundle: TokenBundle, units: f64, lower: f64, upper: f64) -> Result<TokenBundle> {
    check_units(units)?;
    check_range(lower, upper)?;
    let off = || Error::OffCurve { x: bundle.a, y: bundle.b, units, lower, upper };
    if !(bundle.a >= 0.0 && bundle.b >= 0.0) || units == 0.0 {
        return Err(off());
    }
    let shifted = TokenBundle { a: bundle.a + units * inv_sqrt(upper), b: bundle.b + units * lower.sqrt() };
    let l2 = units * units;
    if (shifted.a * shifted.b - l2).abs() > CURVE_TOLERANCE * l2 {
        return Err(off());
    }
    Ok(shifted)
}

/// Maps a bundle on the range curve of `units` over `[lower, upper]` to its
/// point on the full-range curve `x * y = units^2`.
pub fn virtual_map(bundle: TokenBundle, units: f64, lower: f64, upper: f64) -> Result<TokenBundle> {
    on_curve(bundle, units, lower, upper)
}

/// Contract price implied by a bundle on the range curve of `units` over `[lower, upper]`.
pub fn contract_price_of(bundle: TokenBundle, units: f64, lower: f64, upper: f64) -> Result<f64> {
    let v = on_curve(bundle, units, lower, upper)?;
    // a zero virtual A reserve only happens at an open upper end
    if v.a == 0.0 {
        return Err(Error::OffCurve { x: bundle.a, y: bundle.b, units, lower, upper });
    }
    Ok((v.b / v.a).clamp(lower, upper))
}

/// Token-B worth of `bundle` at market price `market`.
pub fn bundle_worth_b(bundle: TokenBundle, market: f64) -> Result<f64> {
    check_price(market, "market price")?;
    Ok(bundle.worth_in_b(market))
}

/// Splits `units` of `[a, b]` liquidity at `c` into `[a, c]` and `[c, b]` pieces at `price`.
pub fn decompose_interval(units: f64, a: f64, c: f64, b: f64, price: f64) -> Result<(TokenBundle, TokenBundle)> {
    if !(a < c && c < b) {
        return Err(domain(format!("need a < c < b, got {a}, {c}, {b}")));
    }
    Ok((v3_bundle_value(units, a, c, price)?, v3_bundle_value(units, c, b, price)?))
}

/// One price bucket. The leftmost bucket has `lower == 0`, the rightmost `upper == inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub index: i32,
    pub lower: f64,
    pub upper: f64,
}

impl Bucket {
    pub fn contains(&self, price: f64) -> bool {
        price >= self.lower && price <= self.upper
    }
}

/// An ordered partition of `(0, inf)` into `m + n + 1` buckets indexed
/// `-m..=n` whose interior endpoints are `theta^(delta * i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketScheme {
    theta: f64,
    delta: u32,
    m: u32,
    n: u32,
    /// Interior endpoints `theta^(delta * i)` for `i = -m+1 ..= n`, ascending.
    endpoints: Vec<f64>,
    buckets: Vec<Bucket>,
}

impl BucketScheme {
    /// The `(theta, delta, m, n)` exponential scheme.
    pub fn exponential(theta: f64, delta: u32, m: u32, n: u32) -> Result<Self> {
        if !(theta > 1.0 && theta.is_finite()) {
            return Err(domain(format!("theta must exceed 1, got {theta}")));
        }
        if delta == 0 || m == 0 || n == 0 {
            return Err(domain(format!("delta, m and n must be at least 1, got {delta}, {m}, {n}")));
        }
        let lo = 1 - m as i64;
        let endpoints: Vec<f64> =
            (lo..=n as i64).map(|i| i32::try_from(i * i64::from(delta)).map_or(f64::NAN, |k| theta.powi(k))).collect();
        if endpoints.iter().any(|e| !(e.is_finite() && *e > 0.0)) || endpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("bucket endpoints overflow or collide"));
        }
        let mut buckets = Vec::with_capacity(endpoints.len() + 1);
        for slot in 0..=endpoints.len() {
            let lower = if slot == 0 { 0.0 } else { endpoints[slot - 1] };
            let upper = endpoints.get(slot).copied().unwrap_or(f64::INFINITY);
            buckets.push(Bucket { index: slot as i32 - m as i32, lower, upper });
        }
        Ok(Self { theta, delta, m, n, endpoints, buckets })
    }

    /// Smallest scheme whose interior buckets cover `[lo, hi]` plus one
    /// spare interior bucket on each side.
    pub fn covering(theta: f64, delta: u32, lo: f64, hi: f64) -> Result<Self> {
        check_price(lo, "lower coverage bound")?;
        check_price(hi, "upper coverage bound")?;
        if !(theta > 1.0) || delta == 0 || lo > hi {
            return Err(domain("invalid coverage request"));
        }
        let step = f64::from(delta) * theta.ln();
        let m = (2 - (lo.ln() / step).floor() as i64).max(1) as u32;
        let n = ((hi.ln() / step).ceil() as i64 + 1).max(1) as u32;
        Self::exponential(theta, delta, m, n)
    }

    /// The scheme with bucket spacing `delta / q` sharing every endpoint of
    /// `self`, including the outermost ones.
    pub fn refined(&self, q: u32) -> Result<Self> {
        if q == 0 || !self.delta.is_multiple_of(q) {
            return Err(domain(format!("cannot refine spacing {} by {q}", self.delta)));
        }
        Self::exponential(self.theta, self.delta / q, q * (self.m - 1) + 1, q * self.n)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of buckets, `m + n + 1`.
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Buckets in ascending price order; position `k` holds index `k - m`.
    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    /// Interior endpoints in ascending order. These are the left endpoints of
    /// every bucket but the leftmost.
    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn bucket(&self, index: i32) -> Option<&Bucket> {
        self.position(index).map(|k| &self.buckets[k])
    }

    /// Vector position of bucket `index`.
    pub fn position(&self, index: i32) -> Option<usize> {
        let k = index + self.m as i32;
        (k >= 0 && (k as usize) < self.buckets.len()).then_some(k as usize)
    }

    /// Vector position of the bucket holding `price`; an endpoint belongs to
    /// the bucket it is the left endpoint of.
    #[inline]
    pub fn position_of(&self, price: f64) -> usize {
        self.endpoints.partition_point(|&e| e <= price)
    }

    /// Index of the bucket holding `price`.
    pub fn bucket_of(&self, price: f64) -> i32 {
        self.position_of(price) as i32 - self.m as i32
    }

    /// Vector position of the bucket holding the open segment between two
    /// distinct prices in the same closed bucket.
    #[inline]
    pub(crate) fn position_of_segment(&self, p: f64, q: f64) -> usize {
        self.position_of(p.min(q))
    }

    /// Number of interior endpoints strictly between `p` and `q`.
    #[inline]
    pub fn endpoints_strictly_between(&self, p: f64, q: f64) -> usize {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let first_above = self.endpoints.partition_point(|&e| e <= lo);
        let first_at_or_above_hi = self.endpoints.partition_point(|&e| e < hi);
        first_at_or_above_hi.saturating_sub(first_above)
    }
}

/// Per-bucket liquidity units for one LP, indexed like the scheme's buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiquidityAllocation(Vec<f64>);

impl LiquidityAllocation {
    pub fn new(units: Vec<f64>, scheme: &BucketScheme) -> Result<Self> {
        if units.len() != scheme.len() {
            return Err(domain(format!(
                "allocation has {} entries but the scheme has {} buckets",
                units.len(),
                scheme.len()
            )));
        }
        if units.iter().any(|u| !(*u >= 0.0 && u.is_finite())) {
            return Err(domain("allocation entries must be finite and nonnegative"));
        }
        Ok(Self(units))
    }

    pub(crate) fn from_units(units: Vec<f64>) -> Self {
        debug_assert!(units.iter().all(|u| *u >= 0.0));
        Self(units)
    }

    pub fn zeros(scheme: &BucketScheme) -> Self {
        Self(vec![0.0; scheme.len()])
    }

    /// The same units in every bucket: equivalent to full-range liquidity.
    pub fn uniform(units: f64, scheme: &BucketScheme) -> Self {
        Self(vec![units; scheme.len()])
    }

    /// Units held in bucket `index`.
    pub fn units(&self, scheme: &BucketScheme, index: i32) -> f64 {
        scheme.position(index).map_or(0.0, |k| self.0[k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Token bundle needed to open the allocation at contract price `price`.
    pub fn bundle_at(&self, scheme: &BucketScheme, price: f64) -> TokenBundle {
        scheme
            .buckets()
            .iter()
            .zip(&self.0)
            .filter(|(_, &u)| u > 0.0)
            .fold(TokenBundle::ZERO, |acc, (bk, &u)| acc + unit_range_value(bk.lower, bk.upper, price) * u)
    }
}
