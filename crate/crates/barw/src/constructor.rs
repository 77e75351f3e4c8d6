//! Construction of energy levels with prescribed angular statistics: find
//! `n = q^m p` (both primes split) whose fourth spectral coefficient lands
//! within a tolerance of a target in `[-1, 1]`.
//!
//! For coprime parts the spectral measure convolves, so `nu_hat` multiplies;
//! for a prime power the exact value is
//!
//! ```text
//! nu_hat_{q^m}(4) = (1/(m+1)) sum_{j=0..m} T_{|2j-m|}(nu_hat_q(4))
//! ```
//!
//! with Chebyshev polynomials `T_k` (the angles of the points of `q^m` are
//! `(2j - m) arg(pi_q)` up to quarter turns). Note `nu_hat_{q^m}` is *not*
//! `(nu_hat_q)^m` for `m >= 2`; every constructed level is re-verified by
//! direct enumeration, so the value reported is always the enumerated one.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith;
use crate::error::{Error, Result};
use crate::spectrum::{self, CircleSpectrum};

/// A constructed level `n = p_split^m * p_anchor`.
#[derive(Debug, Clone)]
pub struct ConstructedLevel {
    pub target: f64,
    pub tol: f64,
    pub m: u32,
    pub p_split: u64,
    pub p_anchor: u64,
    pub n: u64,
    /// Exact achieved `nu_hat_n(4)`.
    pub achieved: BigRational,
    /// Number of lattice points on the constructed circle.
    pub n_points: usize,
    /// Whether the achieved value was re-derived by enumerating the circle.
    pub enumeration_verified: bool,
}

impl ConstructedLevel {
    pub fn achieved_f64(&self) -> f64 {
        self.achieved.to_f64().unwrap_or(f64::NAN)
    }
}

/// Chebyshev polynomial `T_k(x)` in exact rational arithmetic.
pub fn chebyshev_t(k: u32, x: &BigRational) -> BigRational {
    match k {
        0 => BigRational::one(),
        1 => x.clone(),
        _ => {
            let mut prev = BigRational::one();
            let mut cur = x.clone();
            for _ in 2..=k {
                let next = BigRational::from(BigInt::from(2)) * x * &cur - &prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Exact `nu_hat_{q^m}(4)` for a split prime `q`.
pub fn nu_hat_prime_power(q: u64, m: u32) -> Result<BigRational> {
    let base = spectrum::nu_hat_of_split_prime(q)?;
    let mut acc = BigRational::zero();
    for j in 0..=m {
        let k = (2 * j as i64 - m as i64).unsigned_abs() as u32;
        acc += chebyshev_t(k, &base);
    }
    Ok(acc / BigRational::from(BigInt::from(m as i64 + 1)))
}

fn rational_of(x: f64, what: &str) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::Validation(format!("{what} must be finite, got {x}")))
}

/// Split primes `p ≡ 1 (mod 4)` in ascending order, `p <= bound`.
fn split_primes_upto(bound: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 5u64;
    while p <= bound {
        if arith::is_prime(p) {
            out.push(p);
        }
        p += 4;
    }
    out
}

/// Least split prime with `|nu_hat_p(4) - a| <= tol`, decided in exact
/// rational arithmetic.
pub fn find_anchor_prime(a: f64, tol: f64, bound: u64) -> Result<u64> {
    if !(-1.0..=1.0).contains(&a) {
        return Err(Error::Validation(format!(
            "target must lie in [-1, 1], got {a}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let a_rat = rational_of(a, "target")?;
    let tol_rat = rational_of(tol, "tolerance")?;
    let mut p = 5u64;
    while p <= bound {
        if arith::is_prime(p) {
            let nu = spectrum::nu_hat_of_split_prime(p)?;
            if (nu - &a_rat).abs() <= tol_rat {
                return Ok(p);
            }
        }
        p += 4;
    }
    Err(Error::NotFound { bound })
}

/// Least split prime whose canonical Gaussian angle `atan(b/a)` is at most
/// `angle_tol`. The comparison `b <= a tan(angle_tol)` is made by exact
/// cross-multiplication against the (rational) f64 value of the tangent, so
/// no float tie can flip the decision.
pub fn find_split_prime_near_axis(angle_tol: f64, bound: u64) -> Result<u64> {
    if !(angle_tol > 0.0) {
        return Err(Error::Validation("angle tolerance must be positive".into()));
    }
    let tan_rat = rational_of(
        angle_tol.min(std::f64::consts::FRAC_PI_4).tan(),
        "angle tolerance",
    )?;
    let mut p = 5u64;
    while p <= bound {
        if arith::is_prime(p) {
            let z = arith::gaussian_prime_over(p)?;
            let lhs = BigRational::from(BigInt::from(z.im));
            let rhs = BigRational::from(BigInt::from(z.re)) * &tan_rat;
            if lhs <= rhs {
                return Ok(p);
            }
        }
        p += 4;
    }
    Err(Error::NotFound { bound })
}

fn checked_power_times(q: u64, m: u32, p: u64) -> Option<u64> {
    let mut acc = p;
    for _ in 0..m {
        acc = acc.checked_mul(q)?;
    }
    Some(acc)
}

/// Enumeration is cheap up to this level (isqrt-loop bounded).
const ENUMERATION_BOUND: u64 = 10_000_000_000_000;

/// Build a level `n = q^m p` with `|nu_hat_n(4) - a| <= tol`.
///
/// A small exhaustive pair search runs first and catches exact rational
/// coincidences (tight tolerances on attainable targets); otherwise an anchor
/// prime near the target is combined with a near-axis split prime, following
/// the angle-control construction.
pub fn construct(a: f64, tol: f64, m: u32, bound: u64) -> Result<ConstructedLevel> {
    if m < 1 {
        return Err(Error::Validation("power m must be >= 1".into()));
    }
    if !(-1.0..=1.0).contains(&a) {
        return Err(Error::Validation(format!(
            "target must lie in [-1, 1], got {a}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let a_rat = rational_of(a, "target")?;
    let tol_rat = rational_of(tol, "tolerance")?;

    if let Some(level) = pair_search(&a_rat, &tol_rat, m, bound)? {
        return finalize(level, a, tol, m);
    }
    let level = anchored_search(&a_rat, &tol_rat, m, bound)?;
    finalize(level, a, tol, m)
}

struct Candidate {
    q: u64,
    p: u64,
    n: u64,
    achieved: BigRational,
}

fn pair_search(
    a: &BigRational,
    tol: &BigRational,
    m: u32,
    bound: u64,
) -> Result<Option<Candidate>> {
    let pair_bound = bound.min(2000);
    let primes = split_primes_upto(pair_bound);
    let nu: Vec<BigRational> = primes
        .iter()
        .map(|&p| spectrum::nu_hat_of_split_prime(p))
        .collect::<Result<_>>()?;
    let powered: Vec<BigRational> = primes
        .iter()
        .map(|&q| nu_hat_prime_power(q, m))
        .collect::<Result<_>>()?;
    let mut best: Option<Candidate> = None;
    for (qi, &q) in primes.iter().enumerate() {
        for (pi, &p) in primes.iter().enumerate() {
            if p == q {
                continue;
            }
            let Some(n) = checked_power_times(q, m, p) else {
                continue;
            };
            if best.as_ref().is_some_and(|b| b.n <= n) {
                continue;
            }
            let achieved = &powered[qi] * &nu[pi];
            if (&achieved - a).abs() <= *tol {
                best = Some(Candidate { q, p, n, achieved });
            }
        }
    }
    Ok(best)
}

fn anchored_search(a: &BigRational, tol: &BigRational, m: u32, bound: u64) -> Result<Candidate> {
    let half_tol = tol / BigRational::from(BigInt::from(2));
    let anchor = find_anchor_prime(
        a.to_f64().unwrap_or(0.0),
        half_tol.to_f64().unwrap_or(f64::MIN_POSITIVE),
        bound,
    )?;
    let nu_p = spectrum::nu_hat_of_split_prime(anchor)?;
    let dev = (&nu_p - a).abs();
    // |nu_{q^m} nu_p - a| <= |nu_p| |nu_{q^m} - 1| + |nu_p - a|
    let slack = tol - &dev;
    let denom = nu_p
        .abs()
        .max(BigRational::new(BigInt::one(), BigInt::from(1_000_000)));
    let margin = &slack / &denom;
    let margin_f = margin.to_f64().unwrap_or(0.0).clamp(0.0, 2.0);
    // sufficient angle bound: every point angle of q^m is within m*theta of a
    // quarter turn, and cos(4 m theta) >= 1 - margin certifies the target
    let theta_max = ((1.0 - margin_f).clamp(-1.0, 1.0).acos() / (4.0 * m as f64)).max(1e-12);
    let tan_theta = theta_max.tan();
    let mut best: Option<Candidate> = None;
    let mut b = 1u64;
    loop {
        let a_min = ((b as f64 / tan_theta).ceil() as u64).max(b + 1);
        let q_floor = a_min * a_min + b * b;
        let cap = best.as_ref().map_or(bound, |c| bound.min(c.q - 1));
        if q_floor > cap {
            if b * b > cap {
                break;
            }
            b += 1;
            continue;
        }
        let mut aa = a_min;
        loop {
            let q = aa * aa + b * b;
            if q > cap {
                break;
            }
            if q != anchor && q % 4 == 1 && arith::is_prime(q) {
                let nu_qm = nu_hat_prime_power(q, m)?;
                let achieved = &nu_qm * &nu_p;
                if (&achieved - a).abs() <= *tol {
                    if let Some(n) = checked_power_times(q, m, anchor) {
                        best = Some(Candidate {
                            q,
                            p: anchor,
                            n,
                            achieved,
                        });
                        break;
                    }
                }
            }
            aa += 1;
        }
        b += 1;
    }
    best.ok_or(Error::NotFound { bound })
}

fn finalize(c: Candidate, target: f64, tol: f64, m: u32) -> Result<ConstructedLevel> {
    let (achieved, n_points, verified) = if c.n <= ENUMERATION_BOUND {
        let s = CircleSpectrum::enumerate(c.n)?;
        let enumerated = s.summary().nu_hat_4;
        if enumerated != c.achieved {
            return Err(Error::CrossCheck(format!(
                "convolution value {} disagrees with enumeration {} at n = {}",
                c.achieved, enumerated, c.n
            )));
        }
        (enumerated, s.len(), true)
    } else {
        // N = 4 (m+1) * 2 by the divisor formula for q^m p
        (c.achieved, 8 * (m as usize + 1), false)
    };
    Ok(ConstructedLevel {
        target,
        tol,
        m,
        p_split: c.q,
        p_anchor: c.p,
        n: c.n,
        achieved,
        n_points,
        enumeration_verified: verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn prime_power_nu_matches_enumeration() {
        // nu_{25} = -143/625, not (nu_5)^2 = 49/625
        let nu25 = nu_hat_prime_power(5, 2).unwrap();
        assert_eq!(nu25, rat(-143, 625));
        let direct = CircleSpectrum::enumerate(25).unwrap().summary().nu_hat_4;
        assert_eq!(nu25, direct);
        // m = 3 at q = 101, checked against enumeration of 101^3
        let nu = nu_hat_prime_power(101, 3).unwrap();
        let direct = CircleSpectrum::enumerate(101u64.pow(3))
            .unwrap()
            .summary()
            .nu_hat_4;
        assert_eq!(nu, direct);
    }

    #[test]
    fn point_count_of_cubed_split_times_anchor() {
        // N(101^3 * p) = 4 * (3+1) * (1+1) = 32 by the divisor count
        let n = 101u64.pow(3) * 13;
        let s = CircleSpectrum::enumerate(n).unwrap();
        assert_eq!(s.len(), 32);
        assert_eq!(
            s.summary().nu_hat_4,
            nu_hat_prime_power(101, 3).unwrap() * spectrum::nu_hat_of_split_prime(13).unwrap()
        );
    }

    #[test]
    fn anchor_prime_examples() {
        assert_eq!(find_anchor_prime(-0.28, 1e-9, 1000).unwrap(), 5);
        let p = find_anchor_prime(1.0, 0.05, 100_000).unwrap();
        let nu = spectrum::nu_hat_of_split_prime(p)
            .unwrap()
            .to_f64()
            .unwrap();
        assert!(nu >= 0.95, "p = {p}, nu = {nu}");
        let p = find_anchor_prime(-1.0, 0.2, 100_000).unwrap();
        let nu = spectrum::nu_hat_of_split_prime(p)
            .unwrap()
            .to_f64()
            .unwrap();
        assert!(nu <= -0.8, "p = {p}, nu = {nu}");
        assert!(find_anchor_prime(0.123456789, 1e-12, 100).is_err());
    }

    #[test]
    fn split_prime_examples() {
        assert_eq!(find_split_prime_near_axis(0.13, 1_000_000).unwrap(), 101);
        assert_eq!(
            find_split_prime_near_axis(std::f64::consts::FRAC_PI_4, 100).unwrap(),
            5
        );
        assert!(matches!(
            find_split_prime_near_axis(1e-6, 1000),
            Err(Error::NotFound { bound: 1000 })
        ));
    }

    #[test]
    fn construct_exact_rational_target() {
        // 833/4225 is hit exactly by 5 * 13
        let level = construct(833.0 / 4225.0, 1e-9, 1, 1_000_000).unwrap();
        assert_eq!(level.n, 65);
        assert_eq!(level.achieved, rat(833, 4225));
        assert!(level.enumeration_verified);
    }

    #[test]
    fn construct_narrow_tolerance_target() {
        let level = construct(-0.28, 1e-6, 1, 100_000_000).unwrap();
        assert!((level.achieved_f64() + 0.28).abs() <= 1e-6);
        assert!(
            level.enumeration_verified,
            "n = {} should be enumerable",
            level.n
        );
        assert_eq!(
            level.n % 5,
            0,
            "anchor 5 hits -0.28 exactly; n = {}",
            level.n
        );
    }

    #[test]
    fn construct_acceptance_targets() {
        for &a in &[-0.5, 0.0, 0.5] {
            for m in [1u32, 2] {
                let level = construct(a, 0.1, m, 1_000_000).unwrap();
                assert!(
                    level.enumeration_verified,
                    "a={a} m={m}: n={} not verified",
                    level.n
                );
                assert!(
                    (level.achieved_f64() - a).abs() <= 0.1,
                    "a={a} m={m}: achieved {}",
                    level.achieved_f64()
                );
                assert!(level.n_points > 1 << m, "N must exceed 2^m");
            }
        }
    }

    #[test]
    fn coprime_convolution_identity_sampled() {
        // 50 coprime split pairs <= 500: nu multiplies exactly
        let primes = split_primes_upto(500);
        let mut checked = 0;
        'outer: for (i, &p) in primes.iter().enumerate() {
            for &q in &primes[i + 1..] {
                let lhs = CircleSpectrum::enumerate(p * q).unwrap().summary().nu_hat_4;
                let rhs = spectrum::nu_hat_of_split_prime(p).unwrap()
                    * spectrum::nu_hat_of_split_prime(q).unwrap();
                assert_eq!(lhs, rhs, "p={p} q={q}");
                checked += 1;
                if checked >= 50 {
                    break 'outer;
                }
            }
        }
        assert!(checked >= 50);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(construct(1.5, 0.1, 1, 1000).is_err());
        assert!(construct(0.0, 0.0, 1, 1000).is_err());
        assert!(construct(0.0, 0.1, 0, 1000).is_err());
    }
}
