//! Small deterministic quadrature helpers.

/// Adaptive Simpson integration with a relative tolerance. Deterministic:
/// the refinement tree depends only on the integrand values.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_depth: u32,
) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let scale = whole.abs().max(1e-300);
    recurse(&f, a, b, fa, fm, fb, whole, rel_tol * scale, max_depth)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Pairwise (cascade) summation: deterministic for a fixed slice regardless of
/// how the slice was produced, and accurate to O(log n) rounding.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let v = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12, 30);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_smooth_transcendental() {
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 40);
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn handles_kinked_integrand() {
        // |cos t| over a full period
        let v = adaptive_simpson(
            |x| x.cos().abs(),
            0.0,
            2.0 * std::f64::consts::PI,
            1e-11,
            48,
        );
        assert!((v - 4.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
