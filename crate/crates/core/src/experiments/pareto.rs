/// `(gas, opt)` point `p` dominates `q` when it costs no more gas, earns no
/// less, and is strictly better in one of the two.
pub fn dominates(p: (f64, f64), q: (f64, f64)) -> bool {
    p.0 <= q.0 && p.1 >= q.1 && (p.0 < q.0 || p.1 > q.1)
}

/// Flags the points not dominated by any other point.
pub fn mark_frontier(points: &[(f64, f64)]) -> Vec<bool> {
    points.iter().map(|&q| !points.iter().any(|&p| dominates(p, q))).collect()
}
