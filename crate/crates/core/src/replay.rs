//! Scripted three-LP scenario on a pool with fee rate 1/2, replayed through
//! the swap engine and checked against hand-computed values.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::amm::{virtual_map, TokenBundle};
use crate::error::{Error, Result};
use crate::swap::{LpId, Pool, PositionId, SwapOrder, SwapResult};

/// Every observed quantity of the scenario, keyed by a dotted label.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ReplayTrace {
    pub values: BTreeMap<String, f64>,
}

impl ReplayTrace {
    fn put(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    fn put_bundle(&mut self, key: &str, b: TokenBundle) {
        self.put(&format!("{key}.a"), b.a);
        self.put(&format!("{key}.b"), b.b);
    }

    fn put_swap(&mut self, key: &str, r: &SwapResult) {
        self.put(&format!("{key}.out"), r.out);
        self.put(&format!("{key}.price"), r.new_price);
        self.put(&format!("{key}.crossed"), r.endpoints_crossed as f64);
        for (k, seg) in r.segments.iter().enumerate() {
            let s = format!("{key}.seg{}", k + 1);
            self.put(&format!("{s}.in"), seg.amount_in);
            self.put(&format!("{s}.out"), seg.out);
            self.put(&format!("{s}.fee"), seg.fee);
            self.put_bundle(&format!("{s}.before"), seg.active_before);
            self.put_bundle(&format!("{s}.after"), seg.active_after);
            for (lp, fee) in &seg.fee_shares {
                self.put(&format!("{s}.fee.{lp}"), *fee);
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

fn lp(name: &str) -> LpId {
    LpId::from(name)
}

/// Runs the scenario and records every intermediate quantity.
pub fn run() -> Result<ReplayTrace> {
    let mut t = ReplayTrace::default();
    let mut pool = Pool::new(0.5, 1.0, 0.0)?;

    let (lp1, sent) = pool.add_liquidity("LP1", 1.0 / 16.0, 16.0, 60.0)?;
    t.put_bundle("lp1.deposit", sent);
    t.put_bundle("active.initial", pool.active_bundle()?);

    let r = pool.execute_swap(SwapOrder::sell_b(240.0)?)?;
    t.put_swap("trade1", &r);
    t.put_bundle("trade1.virtual", virtual_map(r.segments[0].active_after, 60.0, 1.0 / 16.0, 16.0)?);

    let (lp2, sent) = pool.add_liquidity("LP2", 1.0 / 25.0, 4.0, 120.0)?;
    t.put_bundle("lp2.deposit", sent);
    put_interval(&mut t, "active.after_lp2", &pool)?;
    t.put_bundle("active.after_lp2", pool.active_bundle()?);

    let r = pool.execute_swap(SwapOrder::sell_a(1280.0)?)?;
    t.put_swap("trade2", &r);
    let first = &r.segments[0];
    t.put_bundle("trade2.seg1.virtual", virtual_map(first.active_after, first.liquidity, first.lower, first.upper)?);
    let last = r.segments.last().ok_or_else(|| Error::Invariant("empty swap".into()))?;
    t.put_bundle("trade2.seg2.virtual", virtual_map(last.active_after, last.liquidity, last.lower, last.upper)?);

    let (_, sent) = pool.add_liquidity("LP3", 1.0 / 9.0, 36.0, 180.0)?;
    t.put_bundle("lp3.deposit", sent);
    put_interval(&mut t, "active.after_lp3", &pool)?;
    t.put_bundle("active.after_lp3", pool.active_bundle()?);

    let r = pool.execute_swap(SwapOrder::sell_b(510.0)?)?;
    t.put_swap("trade3", &r);
    let last = r.segments.last().ok_or_else(|| Error::Invariant("empty swap".into()))?;
    t.put_bundle("trade3.seg2.virtual", virtual_map(last.active_after, last.liquidity, last.lower, last.upper)?);

    t.put_bundle("lp1.withdrawal", pool.remove_liquidity(&lp("LP1"), lp1)?);
    t.put_bundle("active.after_lp1_exit", pool.active_bundle()?);

    let r = pool.execute_swap(SwapOrder::sell_a(600.0)?)?;
    t.put_swap("trade4", &r);
    let seg = &r.segments[0];
    t.put_bundle("trade4.virtual", virtual_map(seg.active_after, seg.liquidity, seg.lower, seg.upper)?);

    let back = pool.remove_liquidity(&lp("LP2"), lp2)?;
    t.put_bundle("lp2.withdrawal", back);
    t.put("lp2.withdrawal.worth", back.worth_in_b(pool.price()));
    put_interval(&mut t, "active.after_lp2_exit", &pool)?;
    debug_assert!(pool.position(PositionId(0)).is_some());
    Ok(t)
}

fn put_interval(t: &mut ReplayTrace, key: &str, pool: &Pool) -> Result<()> {
    let (lo, hi) = pool.active_interval()?;
    t.put(&format!("{key}.lower"), lo);
    t.put(&format!("{key}.upper"), hi);
    Ok(())
}

/// Expected values of the scenario.
///
/// The last fee split of the third trade is `L_j / L * 240` for units
/// 60, 120 and 180, so the third LP earns 120.
pub const GOLDEN: &[(&str, f64)] = &[
    ("lp1.deposit.a", 45.0),
    ("lp1.deposit.b", 45.0),
    ("active.initial.a", 45.0),
    ("active.initial.b", 45.0),
    ("trade1.out", 40.0),
    ("trade1.price", 9.0),
    ("trade1.seg1.fee.LP1", 120.0),
    ("trade1.seg1.after.a", 5.0),
    ("trade1.seg1.after.b", 165.0),
    ("trade1.virtual.a", 20.0),
    ("trade1.virtual.b", 180.0),
    ("lp2.deposit.a", 0.0),
    ("lp2.deposit.b", 216.0),
    ("active.after_lp2.lower", 4.0),
    ("active.after_lp2.upper", 16.0),
    ("active.after_lp2.a", 5.0),
    ("active.after_lp2.b", 60.0),
    ("trade2.seg1.in", 20.0),
    ("trade2.seg1.fee.LP1", 10.0),
    ("trade2.seg1.out", 60.0),
    ("trade2.seg1.after.a", 15.0),
    ("trade2.seg1.after.b", 0.0),
    ("trade2.seg1.virtual.a", 30.0),
    ("trade2.seg1.virtual.b", 120.0),
    ("trade2.seg2.in", 1260.0),
    ("trade2.seg2.before.a", 0.0),
    ("trade2.seg2.before.b", 315.0),
    ("trade2.seg2.fee.LP1", 210.0),
    ("trade2.seg2.fee.LP2", 420.0),
    ("trade2.seg2.out", 315.0),
    ("trade2.seg2.after.a", 630.0),
    ("trade2.seg2.after.b", 0.0),
    ("trade2.seg2.virtual.a", 720.0),
    ("trade2.seg2.virtual.b", 45.0),
    ("trade2.out", 375.0),
    ("trade2.price", 0.0625),
    ("trade2.crossed", 1.0),
    ("lp3.deposit.a", 510.0),
    ("lp3.deposit.b", 0.0),
    ("active.after_lp3.lower", 0.0625),
    ("active.after_lp3.upper", 1.0 / 9.0),
    ("active.after_lp3.a", 180.0),
    ("active.after_lp3.b", 0.0),
    ("trade3.seg1.in", 30.0),
    ("trade3.seg1.fee.LP1", 5.0),
    ("trade3.seg1.fee.LP2", 10.0),
    ("trade3.seg1.out", 180.0),
    ("trade3.seg1.after.a", 0.0),
    ("trade3.seg1.after.b", 15.0),
    ("trade3.seg2.in", 480.0),
    ("trade3.seg2.before.a", 900.0),
    ("trade3.seg2.before.b", 0.0),
    ("trade3.seg2.fee.LP1", 40.0),
    ("trade3.seg2.fee.LP2", 80.0),
    ("trade3.seg2.fee.LP3", 120.0),
    ("trade3.seg2.after.a", 180.0),
    ("trade3.seg2.after.b", 240.0),
    ("trade3.seg2.virtual.a", 360.0),
    ("trade3.seg2.virtual.b", 360.0),
    ("trade3.seg2.out", 720.0),
    ("trade3.out", 900.0),
    ("trade3.price", 1.0),
    ("trade3.crossed", 1.0),
    ("lp1.withdrawal.a", 45.0),
    ("lp1.withdrawal.b", 45.0),
    ("active.after_lp1_exit.a", 150.0),
    ("active.after_lp1_exit.b", 200.0),
    ("trade4.seg1.fee.LP2", 120.0),
    ("trade4.seg1.fee.LP3", 180.0),
    ("trade4.seg1.after.a", 450.0),
    ("trade4.seg1.after.b", 50.0),
    ("trade4.virtual.a", 600.0),
    ("trade4.virtual.b", 150.0),
    ("trade4.out", 150.0),
    ("trade4.price", 0.25),
    ("lp2.withdrawal.a", 180.0),
    ("lp2.withdrawal.b", 36.0),
    ("lp2.withdrawal.worth", 81.0),
    ("active.after_lp2_exit.lower", 1.0 / 9.0),
    ("active.after_lp2_exit.upper", 36.0),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub expected: f64,
    pub observed: Option<f64>,
    pub passed: bool,
}

/// Relative-or-absolute closeness used by the golden comparison.
pub fn matches(expected: f64, observed: f64, tol: f64) -> bool {
    (expected - observed).abs() <= tol * expected.abs().max(1.0)
}

/// Compares `trace` against `expected` at tolerance `tol`.
pub fn compare(trace: &ReplayTrace, expected: &[(&str, f64)], tol: f64) -> Vec<Check> {
    expected
        .iter()
        .map(|&(label, want)| {
            let observed = trace.get(label);
            Check {
                label: label.to_string(),
                expected: want,
                observed,
                passed: observed.is_some_and(|o| matches(want, o, tol)),
            }
        })
        .collect()
}
