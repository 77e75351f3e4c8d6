//! Exact integer and Gaussian-integer arithmetic.
//!
//! Membership in the set `S` of sums of two squares, factorization, the fix
//! part `(Q, g)` of an energy level, Gaussian primes over split rational
//! primes, and the two empirical density checkers (Landau count of `S`,
//! Gaussian primes in sectors).

use crate::error::{Error, Result};
use crate::quad;

/// Prime factorization of a positive integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub n: u64,
    /// `(prime, exponent)` pairs with strictly increasing primes.
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Re-multiplies the factorization; equals `n` by construction.
    pub fn product(&self) -> u64 {
        self.factors
            .iter()
            .fold(1u64, |acc, &(p, e)| acc * p.pow(e))
    }
}

/// A Gaussian integer `re + im*i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GaussianInteger {
    pub re: i64,
    pub im: i64,
}

impl GaussianInteger {
    pub fn new(re: i64, im: i64) -> Self {
        GaussianInteger { re, im }
    }

    pub fn norm(&self) -> u64 {
        (self.re as i128 * self.re as i128 + self.im as i128 * self.im as i128) as u64
    }

    pub fn mul(&self, other: &GaussianInteger) -> GaussianInteger {
        GaussianInteger {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    pub fn conj(&self) -> GaussianInteger {
        GaussianInteger {
            re: self.re,
            im: -self.im,
        }
    }

    /// Angle of the canonical representative, in `[0, pi/4]` for `re >= im >= 0`.
    pub fn arg(&self) -> f64 {
        (self.im as f64).atan2(self.re as f64)
    }
}

/// The fix part of `n ∈ S`: the paper's quantity `Q = 2^a2 * prod q^b` and the
/// divisor `g = 2^floor(a2/2) * prod q^(b/2)` shared by all lattice-point
/// coordinates on the circle `|xi|^2 = n`. `Q` is kept for citation fidelity;
/// `g` is the quantity the deterministic grid and rescaling actually use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixPart {
    pub n: u64,
    pub q: u64,
    pub g: u64,
}

pub fn isqrt(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u64;
    while x.checked_mul(x).is_none_or(|s| s > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).is_some_and(|s| s <= n) {
        x += 1;
    }
    x
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for `u64` (the standard 12-witness set is
/// sufficient for all 64-bit integers).
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: u64) -> u64 {
    // n is odd, composite, with no factor below the trial-division bound
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd_u64(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

const TRIAL_BOUND: u64 = 1_000_000;

/// Factor `n >= 2` by trial division up to 10^6 followed by Pollard rho with
/// a deterministic primality certificate; desk-scale inputs stay below 10^12
/// so the rho stage only ever sees semiprime-sized survivors.
pub fn factor(n: u64) -> Result<Factorization> {
    if n < 2 {
        return Err(Error::Validation(format!(
            "factor requires n >= 2, got {n}"
        )));
    }
    let mut rest = n;
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let push = |p: u64, e: u32, factors: &mut Vec<(u64, u32)>| {
        if e > 0 {
            factors.push((p, e));
        }
    };
    let mut e = 0;
    while rest.is_multiple_of(2) {
        rest /= 2;
        e += 1;
    }
    push(2, e, &mut factors);
    let mut p = 3u64;
    while p <= TRIAL_BOUND && p * p <= rest {
        let mut e = 0;
        while rest.is_multiple_of(p) {
            rest /= p;
            e += 1;
        }
        push(p, e, &mut factors);
        p += 2;
    }
    // survivor is 1, a prime, or a product of primes > 10^6
    let mut stack = vec![rest];
    let mut big: Vec<u64> = Vec::new();
    while let Some(m) = stack.pop() {
        if m == 1 {
            continue;
        }
        if is_prime(m) {
            big.push(m);
        } else {
            let d = pollard_rho(m);
            stack.push(d);
            stack.push(m / d);
        }
    }
    big.sort_unstable();
    for m in big {
        if let Some(last) = factors.last_mut() {
            if last.0 == m {
                last.1 += 1;
                continue;
            }
        }
        factors.push((m, 1));
    }
    factors.sort_by_key(|&(p, _)| p);
    Ok(Factorization { n, factors })
}

/// Is `n` a sum of two squares? True iff every prime `q ≡ 3 (mod 4)` divides
/// `n` to an even power.
pub fn is_in_s(n: u64) -> bool {
    if n == 0 {
        return true;
    }
    if n == 1 {
        return true;
    }
    let f = factor(n).expect("n >= 2");
    f.factors.iter().all(|&(p, e)| p % 4 != 3 || e % 2 == 0)
}

/// Compute the fix part of `n ∈ S`.
pub fn fix_part(n: u64) -> Result<FixPart> {
    if n == 0 {
        return Err(Error::Validation("fix_part requires n >= 1".into()));
    }
    if n == 1 {
        return Ok(FixPart { n, q: 1, g: 1 });
    }
    let f = factor(n)?;
    let mut q = 1u64;
    let mut g = 1u64;
    for &(p, e) in &f.factors {
        if p == 2 {
            q *= 1u64 << e;
            g *= 1u64 << (e / 2);
        } else if p % 4 == 3 {
            if e % 2 != 0 {
                return Err(Error::NotInS(n));
            }
            q *= p.pow(e);
            g *= p.pow(e / 2);
        }
    }
    Ok(FixPart { n, q, g })
}

/// The canonical Gaussian prime over a split rational prime `p ≡ 1 (mod 4)`:
/// the representative `a + b i` with `a >= b >= 1` and `a^2 + b^2 = p`.
pub fn gaussian_prime_over(p: u64) -> Result<GaussianInteger> {
    if p % 4 != 1 || !is_prime(p) {
        return Err(Error::NotSplitPrime(p));
    }
    let mut b = 1u64;
    while 2 * b * b <= p {
        let rest = p - b * b;
        let a = isqrt(rest);
        if a * a == rest {
            return Ok(GaussianInteger::new(a as i64, b as i64));
        }
        b += 1;
    }
    unreachable!("every p = 1 mod 4 splits in Z[i]")
}

/// Number of lattice points on the circle `|xi|^2 = n`, by the multiplicative
/// formula: `4 * prod (a_p + 1)` over split primes `p ≡ 1 (mod 4)` when every
/// prime `q ≡ 3 (mod 4)` divides `n` evenly, and zero otherwise. Independent
/// of enumeration, so it certifies a point list as complete.
pub fn r2_count(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Validation("r2 requires n >= 1".into()));
    }
    if n == 1 {
        return Ok(4);
    }
    let mut count = 4u64;
    for &(p, e) in &factor(n)?.factors {
        if p % 4 == 1 {
            count *= e as u64 + 1;
        } else if p % 4 == 3 && e % 2 != 0 {
            return Ok(0);
        }
    }
    Ok(count)
}

/// Boolean sieve marking, for every `m <= x`, whether `m` is a sum of two squares.
pub fn sieve_s(x: u64) -> Vec<bool> {
    let xi = x as usize;
    let mut marked = vec![false; xi + 1];
    let r = isqrt(x) as usize;
    for a in 0..=r {
        let a2 = a * a;
        if a2 > xi {
            break;
        }
        let mut b = a;
        loop {
            let s = a2 + b * b;
            if s > xi {
                break;
            }
            marked[s] = true;
            b += 1;
        }
    }
    marked
}

/// Count `{1 <= m <= x : m ∈ S}` exactly and return the Landau-constant
/// estimate `count * sqrt(log x) / x`.
pub fn count_s_upto(x: u64) -> Result<(u64, f64)> {
    if x < 10 {
        return Err(Error::Validation(format!(
            "count_s_upto requires x >= 10, got {x}"
        )));
    }
    let marked = sieve_s(x);
    let count = marked[1..].iter().filter(|&&m| m).count() as u64;
    let c = count as f64 * (x as f64).ln().sqrt() / x as f64;
    Ok((count, c))
}

/// Eratosthenes sieve up to `x` inclusive.
pub fn sieve_primes(x: u64) -> Vec<bool> {
    let xi = x as usize;
    let mut isp = vec![true; xi + 1];
    isp[0] = false;
    if xi >= 1 {
        isp[1] = false;
    }
    let mut p = 2usize;
    while p * p <= xi {
        if isp[p] {
            let mut m = p * p;
            while m <= xi {
                isp[m] = false;
                m += p;
            }
        }
        p += 1;
    }
    isp
}

/// Count canonical Gaussian primes `a + b i` (`a >= b >= 1`) with norm a
/// rational prime `p ≡ 1 (mod 4)`, `p <= x`, whose angle `atan(b/a)` lies in
/// the closed sector `[theta1, theta2]`. One canonical representative per
/// split rational prime, so the sector `[0, pi/2]` counts each split prime once.
pub fn count_sector_primes(theta1: f64, theta2: f64, x: u64) -> Result<u64> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta1)
        || !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta2)
        || theta1 > theta2
    {
        return Err(Error::Validation(format!(
            "sector requires 0 <= theta1 <= theta2 <= pi/2, got [{theta1}, {theta2}]"
        )));
    }
    if x < 10 {
        return Err(Error::Validation(format!(
            "sector count requires x >= 10, got {x}"
        )));
    }
    let isp = sieve_primes(x);
    let mut count = 0u64;
    let r = isqrt(x);
    for b in 1..=r {
        for a in b..=r {
            let p = a * a + b * b;
            if p > x {
                break;
            }
            if p % 4 == 1 && isp[p as usize] {
                let angle = (b as f64).atan2(a as f64);
                if angle >= theta1 && angle <= theta2 {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

/// Logarithmic integral `Li(x) = ∫_2^x dt / log t`, by adaptive quadrature.
pub fn li(x: f64) -> f64 {
    if x <= 2.0 {
        return 0.0;
    }
    quad::adaptive_simpson(|t| 1.0 / t.ln(), 2.0, x, 1e-10, 40)
}

/// The Kubilius main term for the sector `[theta1, theta2]` at height `x`:
/// `(2/pi) (theta2 - theta1) Li(x)`, normalized over all Gaussian primes; for
/// canonical representatives (angles equidistributed in `[0, pi/4]`) the same
/// expression applies since one canonical prime stands for eight Gaussian primes.
pub fn kubilius_main_term(theta1: f64, theta2: f64, x: u64) -> f64 {
    (2.0 / std::f64::consts::PI) * (theta2 - theta1) * li(x as f64)
}
