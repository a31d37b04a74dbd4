use clmm_core::amm::{
    contract_price_of, decompose_interval, v2_bundle_value, v3_bundle_value, virtual_map, BucketScheme,
    LiquidityAllocation, TokenBundle,
};
use clmm_core::gas::crossings;
use clmm_core::optimizer::{bucket_weights, per_unit_pnl_coeffs};
use clmm_core::pnl::{
    fee_tally_over_path, fees_over_path, impermanent_loss, pnl, split_path, utility, PricePath, RiskParameter,
};
use clmm_core::swap::{Pool, SwapOrder};
use clmm_core::PricePair;
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn price() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(f64::exp)
}

fn scheme() -> impl Strategy<Value = BucketScheme> {
    (prop_oneof![Just(1.1f64), Just(1.5), Just(2.0)], 1u32..3, 1u32..5, 1u32..5)
        .prop_map(|(t, d, m, n)| BucketScheme::exponential(t, d, m, n).unwrap())
}

fn scheme_and_alloc() -> impl Strategy<Value = (BucketScheme, Vec<f64>)> {
    scheme().prop_flat_map(|s| {
        let n = s.len();
        (Just(s), prop::collection::vec(0.0f64..100.0, n))
    })
}

fn path(len: usize) -> impl Strategy<Value = PricePath> {
    prop::collection::vec((price(), price()), 2..len).prop_map(|v| PricePath::from_prices(&v).unwrap())
}

/// Contract path where the final contract price equals the final market price.
fn settled_path(len: usize) -> impl Strategy<Value = PricePath> {
    prop::collection::vec((price(), price()), 2..len).prop_map(|mut v| {
        let last = v.len() - 1;
        v[last].0 = v[last].1;
        PricePath::from_prices(&v).unwrap()
    })
}

proptest! {
    #[test]
    fn full_range_bundle_keeps_product_and_ratio(l in 0.1f64..1e4, p in price()) {
        let b = v2_bundle_value(l, p).unwrap();
        prop_assert!(close(b.a * b.b, l * l, 1e-12));
        prop_assert!(close(b.b / b.a, p, 1e-12));
        let v3 = v3_bundle_value(l, 0.0, f64::INFINITY, p).unwrap();
        prop_assert!(close(v3.a, b.a, 1e-12) && close(v3.b, b.b, 1e-12));
    }

    #[test]
    fn interval_decomposes_into_adjacent_pieces(
        l in 0.1f64..1e3, lo in 0.05f64..1.0, r1 in 1.01f64..4.0, r2 in 1.01f64..4.0, p in price()
    ) {
        let mid = lo * r1;
        let hi = mid * r2;
        let whole = v3_bundle_value(l, lo, hi, p).unwrap();
        let (left, right) = decompose_interval(l, lo, mid, hi, p).unwrap();
        let sum = left + right;
        prop_assert!((sum.a - whole.a).abs() <= 1e-9 * whole.a.max(1.0));
        prop_assert!((sum.b - whole.b).abs() <= 1e-9 * whole.b.max(1.0));
    }

    #[test]
    fn virtual_reserves_price_round_trip(l in 0.1f64..1e3, lo in 0.05f64..1.0, w in 1.1f64..30.0, t in 0.0f64..1.0) {
        let hi = lo * w;
        let p = lo * w.powf(t);
        let b = v3_bundle_value(l, lo, hi, p).unwrap();
        let v = virtual_map(b, l, lo, hi).unwrap();
        prop_assert!(close(v.a * v.b, l * l, 1e-9));
        prop_assert!(close(contract_price_of(b, l, lo, hi).unwrap(), p, 1e-9));
    }

    #[test]
    fn swaps_conserve_tokens_and_move_price((s, units) in scheme_and_alloc(), start in 0.2f64..5.0, amt in 0.01f64..50.0, sell_b in any::<bool>()) {
        let mut pool = Pool::with_scheme(s.clone(), 0.01, start, 1.0).unwrap();
        for (b, &u) in s.buckets().iter().zip(&units) {
            pool.add_liquidity("lp", b.lower, b.upper, u).unwrap();
        }
        let before = pool.reserves();
        let order = if sell_b { SwapOrder::sell_b(amt) } else { SwapOrder::sell_a(amt) }.unwrap();
        let r = pool.execute_swap(order).unwrap();
        let after = pool.reserves();
        let fee: f64 = r.segments.iter().map(|g| g.fee).sum();
        let used = r.amount_in - r.remainder;
        let (gained_in, lost_out) = if sell_b { (after.b - before.b, before.a - after.a) } else { (after.a - before.a, before.b - after.b) };
        prop_assert!((gained_in - (used - fee)).abs() <= 1e-9 * used.max(1.0));
        prop_assert!((lost_out - r.out).abs() <= 1e-9 * r.out.max(1.0));
        prop_assert!((fee - 0.01 * used).abs() <= 1e-12 * used.max(1.0));
        if sell_b { prop_assert!(r.new_price >= start) } else { prop_assert!(r.new_price <= start) }
    }

    #[test]
    fn fee_shares_follow_units(u1 in 0.1f64..100.0, u2 in 0.1f64..100.0, amt in 0.01f64..5.0) {
        let mut pool = Pool::new(0.05, 1.0, 0.0).unwrap();
        pool.add_liquidity("x", 0.25, 4.0, u1).unwrap();
        pool.add_liquidity("y", 0.25, 4.0, u2).unwrap();
        pool.add_liquidity("z", 0.0, f64::INFINITY, 1.0).unwrap();
        let r = pool.execute_swap(SwapOrder::sell_b(amt).unwrap()).unwrap();
        let seg = &r.segments[0];
        let fx = seg.fee_shares[&"x".into()];
        let fy = seg.fee_shares[&"y".into()];
        prop_assert!(close(fx / fy, u1 / u2, 1e-12));
        let total: f64 = seg.fee_shares.values().sum();
        prop_assert!(close(total, seg.fee, 1e-12));
    }

    /// The engine's crossing count agrees with the path crossing count when
    /// the path is replayed as swaps on a pool covering every bucket.
    #[test]
    fn engine_crossings_match_path_crossings((s, units) in scheme_and_alloc(), targets in prop::collection::vec(price(), 1..12)) {
        let mut pool = Pool::with_scheme(s.clone(), 0.003, 1.0, 0.0).unwrap();
        for (b, &u) in s.buckets().iter().zip(&units) {
            pool.add_liquidity("lp", b.lower, b.upper, u + 0.5).unwrap();
        }
        let mut prices = vec![(1.0, 1.0)];
        let mut engine = 0;
        for &t in &targets {
            if let Some(order) = pool.quote_to_price(t).unwrap() {
                engine += pool.execute_swap(order).unwrap().endpoints_crossed;
            }
            prices.push((pool.price(), 1.0));
        }
        let path = PricePath::from_prices(&prices).unwrap();
        prop_assert_eq!(engine, crossings(&path, &s));
    }

    #[test]
    fn impermanent_loss_is_nonnegative_when_settled((s, units) in scheme_and_alloc(), p in settled_path(6)) {
        let alloc = LiquidityAllocation::new(units, &s).unwrap();
        let il = impermanent_loss(&alloc, &s, p.first(), p.last()).unwrap();
        prop_assert!(il >= -1e-12 * (1.0 + alloc.as_slice().iter().sum::<f64>()));
    }

    #[test]
    fn pnl_is_linear_in_allocation((s, u) in scheme_and_alloc(), c1 in 0.0f64..5.0, c2 in 0.0f64..5.0, p in path(10)) {
        let gamma = 0.01;
        let v: Vec<f64> = u.iter().rev().copied().collect();
        let mixed: Vec<f64> = u.iter().zip(&v).map(|(a, b)| c1 * a + c2 * b).collect();
        let f = |x: Vec<f64>| pnl(&LiquidityAllocation::new(x, &s).unwrap(), &s, &p, gamma).unwrap();
        let lhs = f(mixed);
        let rhs = c1 * f(u.clone()) + c2 * f(v);
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale);
    }

    #[test]
    fn coefficients_reproduce_pnl((s, u) in scheme_and_alloc(), p in path(10)) {
        let gamma = 0.003;
        let c = per_unit_pnl_coeffs(&p, &s, gamma).unwrap();
        let via_coeffs: f64 = c.iter().zip(&u).map(|(a, b)| a * b).sum();
        let direct = pnl(&LiquidityAllocation::new(u, &s).unwrap(), &s, &p, gamma).unwrap();
        prop_assert!((via_coeffs - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn splitting_a_path_changes_nothing((s, u) in scheme_and_alloc(), p in path(8)) {
        let alloc = LiquidityAllocation::new(u, &s).unwrap();
        let split = split_path(&p, &s);
        let twice = split_path(&split, &s);
        prop_assert_eq!(&twice, &split);
        let a = fees_over_path(&alloc, &s, &p, 0.01).unwrap();
        let b = fees_over_path(&alloc, &s, &split, 0.01).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert_eq!(crossings(&split, &s), 0);
    }

    #[test]
    fn fees_scale_with_gamma_ratio((s, u) in scheme_and_alloc(), p in path(8)) {
        let alloc = LiquidityAllocation::new(u, &s).unwrap();
        let lo = fee_tally_over_path(&alloc, &s, &p, 0.01).unwrap();
        let hi = fee_tally_over_path(&alloc, &s, &p, 0.02).unwrap();
        let k = (0.02 / 0.98) / (0.01 / 0.99);
        prop_assert!((hi.fee_a - k * lo.fee_a).abs() <= 1e-12 * (1.0 + hi.fee_a));
        prop_assert!((hi.fee_b - k * lo.fee_b).abs() <= 1e-12 * (1.0 + hi.fee_b));
    }

    #[test]
    fn utility_is_concave_and_increasing(a in 0.0f64..30.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let r = RiskParameter::new(a).unwrap();
        let mid = utility(0.5 * (x + y), r);
        prop_assert!(mid >= 0.5 * (utility(x, r) + utility(y, r)) - 1e-12);
        if x < y { prop_assert!(utility(x, r) <= utility(y, r)) }
    }

    #[test]
    fn uniform_allocation_is_full_range(l in 0.1f64..100.0, s in scheme(), p in price()) {
        let alloc = LiquidityAllocation::uniform(l, &s);
        let got = alloc.bundle_at(&s, p);
        let want = v2_bundle_value(l, p).unwrap();
        prop_assert!(close(got.a, want.a, 1e-9) && close(got.b, want.b, 1e-9));
        let w = bucket_weights(&s);
        let cost: f64 = w.iter().sum::<f64>() * l;
        prop_assert!(close(cost, v2_bundle_value(l, 1.0).unwrap().worth_in_b(1.0), 1e-9));
    }
}

#[test]
fn zero_allocation_earns_nothing() {
    let s = BucketScheme::exponential(2.0, 1, 2, 2).unwrap();
    let p = PricePath::new(vec![PricePair::parity(), PricePair::new(3.0, 2.5).unwrap()]).unwrap();
    let alloc = LiquidityAllocation::zeros(&s);
    assert_eq!(pnl(&alloc, &s, &p, 0.01).unwrap(), 0.0);
    assert_eq!(alloc.bundle_at(&s, 1.3), TokenBundle::ZERO);
}
