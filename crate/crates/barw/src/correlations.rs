//! Exact counting of semi-correlations, near-semi-correlations and
//! direction-projected correlations among ordered tuples of lattice points.
//!
//! All counts are over ordered `ell`-tuples of the full `N`-point set; this is
//! the convention under which the trivial pairing count
//! `ell!/(2^(ell/2) (ell/2)!) N^(ell/2)` is exact. The fast path aggregates
//! partial sums of the two tuple halves and range-counts complementary sums;
//! the brute force path enumerates every tuple and exists as an independent
//! oracle (`--oracle` in the CLI).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::spectrum::CircleSpectrum;

/// Which coordinate a semi-correlation constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

/// Counting mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Constrain the sum of one coordinate.
    Axis(Axis),
    /// Constrain the projection of the vector sum onto a fixed direction.
    Direction((i64, i64)),
    /// Constrain the full two-dimensional vector sum to zero.
    Vector,
}

/// A correlation-counting query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationQuery {
    pub n: u64,
    pub ell: u32,
    pub mode: Mode,
    /// Threshold `K >= 0`; the constraint is `|sum| <= K`.
    pub k: f64,
    /// Exclude tuples whose sum is exactly zero (`0 < |sum| <= K`).
    pub strict_lower: bool,
}

/// A query together with its exact count.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCount {
    pub query: CorrelationQuery,
    /// Exact number of ordered tuples over the full point set.
    pub count: u128,
    /// `ell!/(2^(ell/2) (ell/2)!) N^(ell/2)` for even `ell`, zero for odd.
    pub trivial_prediction: u128,
}

/// Default elementary-step budget.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

/// `ell!/(2^(ell/2) (ell/2)!) * N^(ell/2)`; rejects odd `ell`.
pub fn trivial_prediction(ell: u32, n_points: usize) -> Result<u128> {
    if ell == 0 || !ell.is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "trivial prediction requires even ell >= 2, got {ell}"
        )));
    }
    // ell!/(2^(ell/2) (ell/2)!) = (ell - 1)!!
    let mut acc: u128 = 1;
    let mut k = ell as u128 - 1;
    while k >= 1 {
        acc *= k;
        if k < 2 {
            break;
        }
        k -= 2;
    }
    Ok(acc * (n_points as u128).pow(ell / 2))
}

fn trivial_prediction_or_zero(ell: u32, n_points: usize) -> u128 {
    if ell > 0 && ell.is_multiple_of(2) {
        trivial_prediction(ell, n_points).unwrap_or(0)
    } else {
        0
    }
}

fn validate(query: &CorrelationQuery, n_points: usize) -> Result<()> {
    if query.ell == 0 {
        return Err(Error::Validation("ell must be >= 1".into()));
    }
    if !(query.k >= 0.0) {
        return Err(Error::Validation(format!(
            "threshold K must be >= 0, got {}",
            query.k
        )));
    }
    if let Mode::Direction(v) = query.mode {
        if v == (0, 0) {
            return Err(Error::Validation("direction vector must be nonzero".into()));
        }
        if v.0.abs() > (1 << 31) || v.1.abs() > (1 << 31) {
            return Err(Error::Validation(
                "direction components must fit 32 bits".into(),
            ));
        }
    }
    if matches!(query.mode, Mode::Vector) && query.strict_lower {
        return Err(Error::Validation(
            "vector mode counts exact zero sums; strict_lower does not apply".into(),
        ));
    }
    if n_points == 0 {
        return Err(Error::Validation("empty spectrum".into()));
    }
    Ok(())
}

/// Scalar key of one point under an axis or direction mode.
fn scalar_keys(spectrum: &CircleSpectrum, mode: Mode) -> Option<Vec<i64>> {
    match mode {
        Mode::Axis(Axis::X1) => Some(spectrum.points.iter().map(|&(x, _)| x).collect()),
        Mode::Axis(Axis::X2) => Some(spectrum.points.iter().map(|&(_, y)| y).collect()),
        Mode::Direction((vx, vy)) => Some(
            spectrum
                .points
                .iter()
                .map(|&(x, y)| x * vx + y * vy)
                .collect(),
        ),
        Mode::Vector => None,
    }
}

/// Integer bound `B` such that the mode's constraint reads `|key sum| <= B`.
/// For direction mode the comparison is exact: `<sum, v>^2 <= floor(K^2 |v|^2)`.
fn integer_bound(query: &CorrelationQuery, max_abs_sum: i64) -> i64 {
    let cap = max_abs_sum.max(0);
    match query.mode {
        Mode::Axis(_) => {
            if query.k >= cap as f64 {
                cap
            } else {
                query.k.floor() as i64
            }
        }
        Mode::Direction((vx, vy)) => {
            let v2 = (vx as f64).powi(2) + (vy as f64).powi(2);
            let rhs = query.k * query.k * v2;
            let cap2 = (cap as f64) * (cap as f64);
            if rhs >= cap2 {
                cap
            } else {
                (rhs.floor()).sqrt().floor() as i64
            }
        }
        Mode::Vector => 0,
    }
}

/// Distribution of ordered-tuple key sums: `dist[s]` = number of ordered
/// `m`-tuples with key sum `s`. Computed by repeated convolution of the
/// single-point distribution, which is the aggregated partial-sum table.
fn sum_distribution(keys: &[i64], m: u32) -> Vec<(i64, u128)> {
    let mut base: HashMap<i64, u128> = HashMap::new();
    for &k in keys {
        *base.entry(k).or_insert(0) += 1;
    }
    let mut dist: HashMap<i64, u128> = HashMap::new();
    dist.insert(0, 1);
    for _ in 0..m {
        let mut next: HashMap<i64, u128> = HashMap::with_capacity(dist.len() * 2);
        for (&s, &c) in &dist {
            for (&k, &ck) in &base {
                *next.entry(s + k).or_insert(0) += c * ck;
            }
        }
        dist = next;
    }
    let mut out: Vec<(i64, u128)> = dist.into_iter().collect();
    out.sort_unstable_by_key(|&(s, _)| s);
    out
}

/// Count pairs `(a, b)` with `a` from `left`, `b` from `right`,
/// `|a + b| <= bound`, optionally excluding `a + b = 0`.
fn range_count(
    left: &[(i64, u128)],
    right: &[(i64, u128)],
    bound: i64,
    strict_lower: bool,
) -> u128 {
    let sums: Vec<i64> = right.iter().map(|&(s, _)| s).collect();
    let mut prefix: Vec<u128> = Vec::with_capacity(right.len() + 1);
    prefix.push(0);
    for &(_, c) in right {
        prefix.push(prefix.last().unwrap() + c);
    }
    let range_total = |lo: i64, hi: i64| -> u128 {
        let i = sums.partition_point(|&s| s < lo);
        let j = sums.partition_point(|&s| s <= hi);
        prefix[j] - prefix[i]
    };
    let exact = |target: i64| -> u128 {
        match sums.binary_search(&target) {
            Ok(i) => right[i].1,
            Err(_) => 0,
        }
    };
    let mut total: u128 = 0;
    for &(a, ca) in left {
        let mut c = range_total(-bound - a, bound - a);
        if strict_lower {
            c -= exact(-a);
        }
        total += ca * c;
    }
    total
}

fn budget_check(estimate: u128, budget: u128) -> Result<()> {
    if estimate > budget {
        return Err(Error::BudgetExceeded { estimate, budget });
    }
    Ok(())
}

/// Exact count via the meet-in-the-middle fast path.
pub fn count(
    spectrum: &CircleSpectrum,
    query: CorrelationQuery,
    budget: u128,
) -> Result<CorrelationCount> {
    let n_points = spectrum.len();
    validate(&query, n_points)?;
    let ell = query.ell;
    let half_up = ell.div_ceil(2);
    budget_check((n_points as u128).pow(half_up), budget)?;
    let count = match query.mode {
        Mode::Vector => {
            let l1 = half_up;
            let l2 = ell - l1;
            let left = vector_distribution(&spectrum.points, l1);
            let right = vector_distribution(&spectrum.points, l2);
            let mut total: u128 = 0;
            for (&(sx, sy), &c) in &left {
                if let Some(&cr) = right.get(&(-sx, -sy)) {
                    total += c * cr;
                }
            }
            total
        }
        _ => {
            let keys = scalar_keys(spectrum, query.mode).expect("scalar mode");
            let max_key = keys.iter().map(|k| k.abs()).max().unwrap_or(0);
            let bound = integer_bound(&query, max_key * ell as i64);
            if bound < 0 {
                0
            } else {
                let l1 = half_up;
                let l2 = ell - l1;
                let left = sum_distribution(&keys, l1);
                let right = sum_distribution(&keys, l2);
                range_count(&left, &right, bound, query.strict_lower)
            }
        }
    };
    Ok(CorrelationCount {
        query,
        count,
        trivial_prediction: trivial_prediction_or_zero(ell, n_points),
    })
}

fn vector_distribution(points: &[(i64, i64)], m: u32) -> HashMap<(i64, i64), u128> {
    let mut dist: HashMap<(i64, i64), u128> = HashMap::new();
    dist.insert((0, 0), 1);
    for _ in 0..m {
        let mut next: HashMap<(i64, i64), u128> = HashMap::with_capacity(dist.len() * 2);
        for (&(sx, sy), &c) in &dist {
            for &(x, y) in points {
                *next.entry((sx + x, sy + y)).or_insert(0) += c;
            }
        }
        dist = next;
    }
    dist
}

/// Exact count by full enumeration of all `N^ell` ordered tuples. Independent
/// oracle for the fast path.
pub fn count_brute_force(
    spectrum: &CircleSpectrum,
    query: CorrelationQuery,
    budget: u128,
) -> Result<CorrelationCount> {
    let n_points = spectrum.len();
    validate(&query, n_points)?;
    budget_check((n_points as u128).pow(query.ell), budget)?;
    let total = match query.mode {
        Mode::Vector => brute_vector(&spectrum.points, query.ell),
        _ => {
            let keys = scalar_keys(spectrum, query.mode).expect("scalar mode");
            let max_key = keys.iter().map(|k| k.abs()).max().unwrap_or(0);
            let bound = integer_bound(&query, max_key * query.ell as i64);
            if bound < 0 {
                0
            } else {
                brute_scalar(&keys, query.ell, bound, query.strict_lower)
            }
        }
    };
    Ok(CorrelationCount {
        query,
        count: total,
        trivial_prediction: trivial_prediction_or_zero(query.ell, n_points),
    })
}

/// Brute-force count over ordered tuples of *class representatives* (one
/// point per orbit). The ordered-full-set convention is the one matching the
/// trivial pairing formula; this alternative is reported alongside oracle
/// runs so both conventions are on record.
pub fn count_brute_force_representatives(
    spectrum: &CircleSpectrum,
    query: CorrelationQuery,
    budget: u128,
) -> Result<u128> {
    let reps: Vec<(i64, i64)> = spectrum.classes.iter().map(|c| c.rep).collect();
    validate(&query, reps.len())?;
    budget_check((reps.len() as u128).pow(query.ell), budget)?;
    Ok(match query.mode {
        Mode::Vector => brute_vector(&reps, query.ell),
        _ => {
            let keys: Vec<i64> = match query.mode {
                Mode::Axis(Axis::X1) => reps.iter().map(|&(x, _)| x).collect(),
                Mode::Axis(Axis::X2) => reps.iter().map(|&(_, y)| y).collect(),
                Mode::Direction((vx, vy)) => reps.iter().map(|&(x, y)| x * vx + y * vy).collect(),
                Mode::Vector => unreachable!(),
            };
            let max_key = keys.iter().map(|k| k.abs()).max().unwrap_or(0);
            let bound = integer_bound(&query, max_key * query.ell as i64);
            if bound < 0 {
                0
            } else {
                brute_scalar(&keys, query.ell, bound, query.strict_lower)
            }
        }
    })
}

fn brute_scalar(keys: &[i64], ell: u32, bound: i64, strict_lower: bool) -> u128 {
    fn rec(keys: &[i64], depth: u32, sum: i64, bound: i64, strict: bool) -> u128 {
        if depth == 0 {
            let ok = sum.abs() <= bound && !(strict && sum == 0);
            return ok as u128;
        }
        keys.iter()
            .map(|&k| rec(keys, depth - 1, sum + k, bound, strict))
            .sum()
    }
    rec(keys, ell, 0, bound, strict_lower)
}

fn brute_vector(points: &[(i64, i64)], ell: u32) -> u128 {
    fn rec(points: &[(i64, i64)], depth: u32, sx: i64, sy: i64) -> u128 {
        if depth == 0 {
            return (sx == 0 && sy == 0) as u128;
        }
        points
            .iter()
            .map(|&(x, y)| rec(points, depth - 1, sx + x, sy + y))
            .sum()
    }
    rec(points, ell, 0, 0)
}

/// `M^t(n, ell)`: ordered tuples whose `t`-coordinates sum to zero.
pub fn count_semicorrelations(
    spectrum: &CircleSpectrum,
    ell: u32,
    axis: Axis,
    budget: u128,
) -> Result<CorrelationCount> {
    if ell < 2 {
        return Err(Error::Validation(
            "semi-correlations require ell >= 2".into(),
        ));
    }
    count(
        spectrum,
        CorrelationQuery {
            n: spectrum.n,
            ell,
            mode: Mode::Axis(axis),
            k: 0.0,
            strict_lower: false,
        },
        budget,
    )
}

/// `V^t(n, ell, K)`: ordered tuples with `0 < |coordinate sum| <= K`.
pub fn count_near_semicorrelations(
    spectrum: &CircleSpectrum,
    ell: u32,
    axis: Axis,
    k: f64,
    budget: u128,
) -> Result<CorrelationCount> {
    if ell < 2 {
        return Err(Error::Validation(
            "near-semi-correlations require ell >= 2".into(),
        ));
    }
    count(
        spectrum,
        CorrelationQuery {
            n: spectrum.n,
            ell,
            mode: Mode::Axis(axis),
            k,
            strict_lower: true,
        },
        budget,
    )
}

/// Ordered tuples with `|P_v(sum of xi)| <= K`, zero included.
pub fn count_projected(
    spectrum: &CircleSpectrum,
    ell: u32,
    v: (i64, i64),
    k: f64,
    budget: u128,
) -> Result<CorrelationCount> {
    count(
        spectrum,
        CorrelationQuery {
            n: spectrum.n,
            ell,
            mode: Mode::Direction(v),
            k,
            strict_lower: false,
        },
        budget,
    )
}

/// Ordered tuples whose full vector sum vanishes.
pub fn count_vector_zero(
    spectrum: &CircleSpectrum,
    ell: u32,
    budget: u128,
) -> Result<CorrelationCount> {
    count(
        spectrum,
        CorrelationQuery {
            n: spectrum.n,
            ell,
            mode: Mode::Vector,
            k: 0.0,
            strict_lower: false,
        },
        budget,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith;

    fn spec(n: u64) -> CircleSpectrum {
        CircleSpectrum::enumerate(n).unwrap()
    }

    #[test]
    fn semicorrelation_examples() {
        let s5 = spec(5);
        assert_eq!(
            count_semicorrelations(&s5, 2, Axis::X1, DEFAULT_BUDGET)
                .unwrap()
                .count,
            16
        );
        assert_eq!(
            count_semicorrelations(&s5, 4, Axis::X1, DEFAULT_BUDGET)
                .unwrap()
                .count,
            576
        );
        let s1 = spec(1);
        assert_eq!(
            count_semicorrelations(&s1, 2, Axis::X1, DEFAULT_BUDGET)
                .unwrap()
                .count,
            6
        );
    }

    #[test]
    fn near_semicorrelation_examples() {
        let s5 = spec(5);
        assert_eq!(
            count_near_semicorrelations(&s5, 2, Axis::X1, 1.0, DEFAULT_BUDGET)
                .unwrap()
                .count,
            16
        );
        assert_eq!(
            count_near_semicorrelations(&s5, 2, Axis::X1, 0.0, DEFAULT_BUDGET)
                .unwrap()
                .count,
            0
        );
        assert_eq!(
            count_near_semicorrelations(&s5, 2, Axis::X1, 4.0, DEFAULT_BUDGET)
                .unwrap()
                .count,
            48
        );
        // K = 0 excludes everything in strict mode, any level
        let s65 = spec(65);
        assert_eq!(
            count_near_semicorrelations(&s65, 3, Axis::X2, 0.0, DEFAULT_BUDGET)
                .unwrap()
                .count,
            0
        );
    }

    #[test]
    fn projected_examples() {
        let s5 = spec(5);
        let p = count_projected(&s5, 2, (1, 0), 1.0, DEFAULT_BUDGET)
            .unwrap()
            .count;
        assert_eq!(p, 32); // M^1(5,2) + V^1(5,2,1)
        let diag = count_projected(&s5, 2, (1, 1), 0.0, DEFAULT_BUDGET).unwrap();
        let oracle = count_brute_force(&s5, diag.query, DEFAULT_BUDGET).unwrap();
        assert_eq!(diag.count, oracle.count);
        let s2 = spec(2);
        assert_eq!(
            count_projected(&s2, 2, (1, 0), 0.0, DEFAULT_BUDGET)
                .unwrap()
                .count,
            8
        );
    }

    #[test]
    fn trivial_prediction_examples() {
        assert_eq!(trivial_prediction(2, 8).unwrap(), 8);
        assert_eq!(trivial_prediction(4, 8).unwrap(), 192);
        assert_eq!(trivial_prediction(6, 4).unwrap(), 960);
        assert!(trivial_prediction(3, 8).is_err());
    }

    #[test]
    fn fast_path_matches_oracle_small_levels() {
        // a compressed version of the acceptance sweep: n <= 100
        for n in 1..=100u64 {
            if !arith::is_in_s(n) {
                continue;
            }
            let s = spec(n);
            let root = arith::isqrt(n) as f64;
            for ell in [2u32, 3, 4] {
                for k in [0.0, 1.0, root.floor()] {
                    for (mode, strict) in [
                        (Mode::Axis(Axis::X1), false),
                        (Mode::Axis(Axis::X1), true),
                        (Mode::Axis(Axis::X2), true),
                        (Mode::Direction((1, 0)), false),
                        (Mode::Direction((2, 3)), false),
                        (Mode::Vector, false),
                    ] {
                        let q = CorrelationQuery {
                            n,
                            ell,
                            mode,
                            k,
                            strict_lower: strict,
                        };
                        if matches!(mode, Mode::Vector) && k != 0.0 {
                            continue;
                        }
                        let fast = count(&s, q, DEFAULT_BUDGET).unwrap().count;
                        let brute = count_brute_force(&s, q, DEFAULT_BUDGET).unwrap().count;
                        assert_eq!(
                            fast, brute,
                            "n={n} ell={ell} k={k} mode={mode:?} strict={strict}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_in_threshold_and_swap_symmetric() {
        for n in [5u64, 25, 65, 325] {
            let s = spec(n);
            let mut prev = 0u128;
            for k in 0..=6 {
                let c = count_near_semicorrelations(&s, 4, Axis::X1, k as f64, DEFAULT_BUDGET)
                    .unwrap()
                    .count;
                assert!(c >= prev, "monotonicity at n={n}, K={k}");
                prev = c;
            }
            for ell in [2u32, 3, 4] {
                let c1 = count_semicorrelations(&s, ell.max(2), Axis::X1, DEFAULT_BUDGET)
                    .unwrap()
                    .count;
                let c2 = count_semicorrelations(&s, ell.max(2), Axis::X2, DEFAULT_BUDGET)
                    .unwrap()
                    .count;
                assert_eq!(c1, c2, "swap symmetry at n={n}, ell={ell}");
            }
        }
    }

    /// Tuples that split into (xi, -xi) pairs under some perfect matching.
    fn matching_tuple_count(points: &[(i64, i64)], ell: u32) -> u128 {
        fn is_matching(tuple: &[(i64, i64)]) -> bool {
            let mut used = vec![false; tuple.len()];
            fn rec(tuple: &[(i64, i64)], used: &mut Vec<bool>) -> bool {
                let Some(i) = used.iter().position(|&u| !u) else {
                    return true;
                };
                used[i] = true;
                for j in i + 1..tuple.len() {
                    if !used[j] && tuple[j].0 == -tuple[i].0 && tuple[j].1 == -tuple[i].1 {
                        used[j] = true;
                        if rec(tuple, used) {
                            used[i] = false;
                            used[j] = false;
                            return true;
                        }
                        used[j] = false;
                    }
                }
                used[i] = false;
                false
            }
            rec(tuple, &mut used)
        }
        let n = points.len();
        let mut idx = vec![0usize; ell as usize];
        let mut total = 0u128;
        loop {
            let tuple: Vec<(i64, i64)> = idx.iter().map(|&i| points[i]).collect();
            if is_matching(&tuple) {
                total += 1;
            }
            let mut d = ell as usize;
            loop {
                if d == 0 {
                    return total;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    #[test]
    fn vector_count_dominates_matchings_and_is_dominated_by_semicorrelations() {
        for n in [2u64, 5, 25] {
            let s = spec(n);
            for ell in [2u32, 4] {
                let vec_count = count_vector_zero(&s, ell, DEFAULT_BUDGET).unwrap().count;
                let semi = count_semicorrelations(&s, ell, Axis::X1, DEFAULT_BUDGET)
                    .unwrap()
                    .count;
                let matchings = matching_tuple_count(&s.points, ell);
                assert!(
                    vec_count >= matchings,
                    "n={n} ell={ell}: {vec_count} < {matchings}"
                );
                assert!(semi >= vec_count, "n={n} ell={ell}");
            }
        }
    }

    #[test]
    fn budget_guard_rejects_oversized_queries() {
        let s = spec(32045); // N = 64
        let err = count_semicorrelations(&s, 12, Axis::X1, 1_000_000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn validation_errors() {
        let s = spec(5);
        let q = CorrelationQuery {
            n: 5,
            ell: 2,
            mode: Mode::Direction((0, 0)),
            k: 1.0,
            strict_lower: false,
        };
        assert!(count(&s, q, DEFAULT_BUDGET).is_err());
        let q = CorrelationQuery {
            n: 5,
            ell: 2,
            mode: Mode::Axis(Axis::X1),
            k: -1.0,
            strict_lower: false,
        };
        assert!(count(&s, q, DEFAULT_BUDGET).is_err());
    }
}
