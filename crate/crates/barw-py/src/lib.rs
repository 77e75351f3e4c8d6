//! Python bindings for the boundary-adapted random wave laboratory.
//!
//! Exposes the spectrum type and the main operations: membership and
//! factorization, correlation counting, field sampling, Kac-Rice densities
//! and quadrature, marching-squares nodal length, Monte Carlo estimation and
//! the level constructor.

use num_traits::ToPrimitive;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use barw::correlations::{self, Axis, CorrelationQuery, Mode};
use barw::spectrum::CircleSpectrum;
use barw::{arith, constructor, field, kacrice, nodal, Square};

fn err(e: barw::Error) -> PyErr {
    match e {
        barw::Error::Validation(_) | barw::Error::NotInS(_) | barw::Error::NotSplitPrime(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn axis(t: u8) -> PyResult<Axis> {
    match t {
        1 => Ok(Axis::X1),
        2 => Ok(Axis::X2),
        _ => Err(PyValueError::new_err("axis t must be 1 or 2")),
    }
}

fn square(center: (f64, f64), side: f64) -> PyResult<Square> {
    Square::new(center, side).map_err(err)
}

/// Lattice points on the circle |xi|^2 = n and the spectral statistics.
#[pyclass(name = "Spectrum")]
struct PySpectrum {
    inner: CircleSpectrum,
}

#[pymethods]
impl PySpectrum {
    #[new]
    fn new(n: u64) -> PyResult<Self> {
        Ok(PySpectrum {
            inner: CircleSpectrum::enumerate(n).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> u64 {
        self.inner.n
    }

    /// Number of lattice points N.
    #[getter]
    fn n_points(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn points(&self) -> Vec<(i64, i64)> {
        self.inner.points.clone()
    }

    /// Orbit class representatives with their sizes.
    #[getter]
    fn classes(&self) -> Vec<((i64, i64), u8)> {
        self.inner.classes.iter().map(|c| (c.rep, c.size)).collect()
    }

    #[getter]
    fn squarefree(&self) -> bool {
        self.inner.squarefree
    }

    /// Grid divisor g (every coordinate of every point is divisible by g).
    #[getter]
    fn g(&self) -> u64 {
        self.inner.fix.g
    }

    /// The fix part Q.
    #[getter]
    fn q(&self) -> u64 {
        self.inner.fix.q
    }

    /// Fourth Fourier coefficient of the spectral measure, as a float.
    #[getter]
    fn nu_hat_4(&self) -> f64 {
        self.inner.summary().nu_hat_4.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact nu_hat_4 as a (numerator, denominator) pair of decimal strings.
    #[getter]
    fn nu_hat_4_fraction(&self) -> (String, String) {
        let nu = self.inner.summary().nu_hat_4;
        (nu.numer().to_string(), nu.denom().to_string())
    }

    #[getter]
    fn mu4(&self) -> f64 {
        self.inner.summary().mu4.to_f64().unwrap_or(f64::NAN)
    }

    /// Quarter-orbit monomial sum (1/4) sum xi1^p xi2^q as a float.
    fn orbit_sum(&self, p: u32, q: u32) -> f64 {
        self.inner.orbit_sum(p, q).to_f64().unwrap_or(f64::NAN)
    }

    /// (min coordinate magnitude, whether it clears n^(1/2 - eps)).
    fn min_coordinate_check(&self, eps: f64) -> PyResult<(i64, bool)> {
        self.inner.min_coordinate_check(eps).map_err(err)
    }
}

/// One Gaussian draw of the random wave.
#[pyclass(name = "FieldSample")]
struct PyFieldSample {
    inner: field::FieldSample,
}

#[pymethods]
impl PyFieldSample {
    #[new]
    fn new(n: u64, seed: u64) -> PyResult<Self> {
        let spectrum = CircleSpectrum::enumerate(n).map_err(err)?;
        Ok(PyFieldSample {
            inner: field::sample(&spectrum, seed),
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    fn evaluate(&self, x1: f64, x2: f64) -> f64 {
        self.inner.evaluate((x1, x2))
    }

    /// Evaluate on the tensor grid xs × ys; returns rows indexed by ys.
    fn evaluate_grid(&self, xs: Vec<f64>, ys: Vec<f64>) -> Vec<Vec<f64>> {
        let flat = self.inner.evaluate_grid(&xs, &ys);
        flat.chunks(xs.len()).map(|row| row.to_vec()).collect()
    }
}

#[pyfunction]
fn is_in_s(n: u64) -> bool {
    arith::is_in_s(n)
}

#[pyfunction]
fn factor(n: u64) -> PyResult<Vec<(u64, u32)>> {
    Ok(arith::factor(n).map_err(err)?.factors)
}

/// (Q, g) of the level.
#[pyfunction]
fn fix_part(n: u64) -> PyResult<(u64, u64)> {
    let fp = arith::fix_part(n).map_err(err)?;
    Ok((fp.q, fp.g))
}

/// Canonical Gaussian prime a + b i over a split rational prime.
#[pyfunction]
fn gaussian_prime_over(p: u64) -> PyResult<(i64, i64)> {
    let z = arith::gaussian_prime_over(p).map_err(err)?;
    Ok((z.re, z.im))
}

#[pyfunction]
fn count_s_upto(x: u64) -> PyResult<(u64, f64)> {
    arith::count_s_upto(x).map_err(err)
}

#[pyfunction]
fn count_sector_primes(theta1: f64, theta2: f64, x: u64) -> PyResult<u64> {
    arith::count_sector_primes(theta1, theta2, x).map_err(err)
}

#[pyfunction]
fn kubilius_main_term(theta1: f64, theta2: f64, x: u64) -> f64 {
    arith::kubilius_main_term(theta1, theta2, x)
}

const PY_BUDGET: u128 = correlations::DEFAULT_BUDGET;

/// M^t(n, ell): ordered tuples with zero coordinate sum.
#[pyfunction]
fn semicorrelations(n: u64, ell: u32, t: u8) -> PyResult<u128> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    Ok(
        correlations::count_semicorrelations(&s, ell, axis(t)?, PY_BUDGET)
            .map_err(err)?
            .count,
    )
}

/// V^t(n, ell, K): ordered tuples with 0 < |coordinate sum| <= K.
#[pyfunction]
fn near_semicorrelations(n: u64, ell: u32, t: u8, k: f64) -> PyResult<u128> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    Ok(
        correlations::count_near_semicorrelations(&s, ell, axis(t)?, k, PY_BUDGET)
            .map_err(err)?
            .count,
    )
}

/// Ordered tuples with |projection of the vector sum on v| <= K.
#[pyfunction]
fn projected_correlations(n: u64, ell: u32, vx: i64, vy: i64, k: f64) -> PyResult<u128> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    Ok(
        correlations::count_projected(&s, ell, (vx, vy), k, PY_BUDGET)
            .map_err(err)?
            .count,
    )
}

/// Ordered tuples whose full vector sum vanishes.
#[pyfunction]
fn vector_correlations(n: u64, ell: u32) -> PyResult<u128> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    Ok(correlations::count_vector_zero(&s, ell, PY_BUDGET)
        .map_err(err)?
        .count)
}

/// Brute-force oracle count for any mode ("axis1", "axis2", "vector", "direction").
#[pyfunction]
#[pyo3(signature = (n, ell, mode, k = 0.0, strict_lower = false, vx = 1, vy = 0))]
fn oracle_count(
    n: u64,
    ell: u32,
    mode: &str,
    k: f64,
    strict_lower: bool,
    vx: i64,
    vy: i64,
) -> PyResult<u128> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    let mode = match mode {
        "axis1" => Mode::Axis(Axis::X1),
        "axis2" => Mode::Axis(Axis::X2),
        "vector" => Mode::Vector,
        "direction" => Mode::Direction((vx, vy)),
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let q = CorrelationQuery {
        n,
        ell,
        mode,
        k,
        strict_lower,
    };
    Ok(correlations::count_brute_force(&s, q, PY_BUDGET)
        .map_err(err)?
        .count)
}

#[pyfunction]
fn trivial_prediction(ell: u32, n_points: usize) -> PyResult<u128> {
    correlations::trivial_prediction(ell, n_points).map_err(err)
}

/// Covariance r_n(x, y) of the ensemble.
#[pyfunction]
fn covariance(n: u64, x: (f64, f64), y: (f64, f64)) -> PyResult<f64> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    Ok(field::covariance(&s, x, y))
}

/// Pointwise second moments: dict with var_f, cross, grad.
#[pyfunction]
fn second_moments<'py>(
    py: Python<'py>,
    n: u64,
    x1: f64,
    x2: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    let m = field::second_moments(&s, (x1, x2));
    let d = pyo3::types::PyDict::new(py);
    d.set_item("var_f", m.var_f)?;
    d.set_item("cross", m.cross.to_vec())?;
    d.set_item("grad", vec![m.grad[0].to_vec(), m.grad[1].to_vec()])?;
    Ok(d)
}

/// Exact Kac-Rice zero density at a point.
#[pyfunction]
fn k1_exact(n: u64, x1: f64, x2: f64) -> PyResult<f64> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    kacrice::k1_exact(&s, (x1, x2)).map_err(err)
}

/// Leading + L_n expansion of the zero density at a point.
#[pyfunction]
fn k1_expansion(n: u64, x1: f64, x2: f64) -> PyResult<f64> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    kacrice::k1_expansion(&s, (x1, x2)).map_err(err)
}

/// Full pointwise evaluation as a dict.
#[pyfunction]
fn k1_eval<'py>(
    py: Python<'py>,
    n: u64,
    x1: f64,
    x2: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    let e = kacrice::eval(&s, (x1, x2)).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("var_f", e.var_f)?;
    d.set_item("s_n", e.s_n)?;
    d.set_item("b11", e.b11)?;
    d.set_item("b12", e.b12)?;
    d.set_item("b22", e.b22)?;
    d.set_item("d1", e.d1)?;
    d.set_item("d2", e.d2)?;
    d.set_item("gamma", vec![e.gamma[0].to_vec(), e.gamma[1].to_vec()])?;
    d.set_item("tr_gamma", e.tr_gamma)?;
    d.set_item("det_gamma", e.det_gamma)?;
    d.set_item("k1_exact", e.k1_exact)?;
    d.set_item("k1_expansion", e.k1_expansion)?;
    d.set_item("upsilon_bound", e.upsilon_bound)?;
    Ok(d)
}

/// E|Z| for a centered bivariate Gaussian with covariance eigenvalues l1, l2.
#[pyfunction]
fn expected_norm(l1: f64, l2: f64) -> f64 {
    kacrice::expected_norm(l1, l2)
}

/// Midpoint quadrature of K1 over the clipped box: (value, error_estimate).
#[pyfunction]
fn integrate_k1(n: u64, center: (f64, f64), side: f64, resolution: usize) -> PyResult<(f64, f64)> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    kacrice::integrate_k1(&s, &square(center, side)?, resolution).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, center, side, paper_constants = false))]
fn predict_one_term(n: u64, center: (f64, f64), side: f64, paper_constants: bool) -> PyResult<f64> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    Ok(kacrice::predict_one_term(
        &s,
        &square(center, side)?,
        paper_constants,
    ))
}

#[pyfunction]
#[pyo3(signature = (n, center, side, paper_constants = false))]
fn predict_two_term(n: u64, center: (f64, f64), side: f64, paper_constants: bool) -> PyResult<f64> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    Ok(kacrice::predict_two_term(
        &s,
        &square(center, side)?,
        paper_constants,
    ))
}

/// Interior marching-squares length of the zero set of a grid (rows × cols).
#[pyfunction]
fn nodal_length_marching(grid: Vec<Vec<f64>>, cell: f64) -> PyResult<f64> {
    let ny = grid.len();
    let nx = grid.first().map_or(0, |r| r.len());
    if ny < 2 || nx < 2 || grid.iter().any(|r| r.len() != nx) {
        return Err(PyValueError::new_err(
            "grid must be rectangular, at least 2x2",
        ));
    }
    let flat: Vec<f64> = grid.into_iter().flatten().collect();
    Ok(nodal::nodal_length_marching(&flat, nx, ny, cell))
}

/// Monte Carlo expected nodal length: dict with mean, stderr, trials, flagged.
#[pyfunction]
fn mc_expected_length<'py>(
    py: Python<'py>,
    n: u64,
    center: (f64, f64),
    side: f64,
    trials: u32,
    resolution: usize,
    seed: u64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    let est = nodal::mc_expected_length(&s, &square(center, side)?, trials, resolution, seed)
        .map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("mean_length", est.mean_length)?;
    d.set_item("std_error", est.std_error)?;
    d.set_item("trials", est.trials)?;
    d.set_item("flagged", est.flagged)?;
    d.set_item("resolution", est.resolution)?;
    Ok(d)
}

/// Default Monte Carlo grid resolution for a level (16 sqrt n, grid-aligned).
#[pyfunction]
fn default_mc_resolution(n: u64) -> PyResult<usize> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    Ok(nodal::default_mc_resolution(&s))
}

/// Deterministic grid of a level: (g, line positions, full-square length).
#[pyfunction]
fn deterministic_grid(n: u64) -> PyResult<(u64, Vec<f64>, f64)> {
    let s = CircleSpectrum::enumerate(n).map_err(err)?;
    let g = nodal::deterministic_grid(&s);
    let full = g.full_square_length();
    Ok((g.g, g.lines, full))
}

/// Build a level with nu_hat_4 within tol of the target: dict.
#[pyfunction]
#[pyo3(signature = (a, tol, m, bound = 100_000_000))]
fn construct<'py>(
    py: Python<'py>,
    a: f64,
    tol: f64,
    m: u32,
    bound: u64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let level = constructor::construct(a, tol, m, bound).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("n", level.n)?;
    d.set_item("p_split", level.p_split)?;
    d.set_item("p_anchor", level.p_anchor)?;
    d.set_item("m", level.m)?;
    d.set_item("achieved", level.achieved_f64())?;
    d.set_item(
        "achieved_fraction",
        (
            level.achieved.numer().to_string(),
            level.achieved.denom().to_string(),
        ),
    )?;
    d.set_item("n_points", level.n_points)?;
    d.set_item("enumeration_verified", level.enumeration_verified)?;
    Ok(d)
}

#[pyfunction]
fn find_anchor_prime(a: f64, tol: f64, bound: u64) -> PyResult<u64> {
    constructor::find_anchor_prime(a, tol, bound).map_err(err)
}

#[pyfunction]
fn find_split_prime_near_axis(angle_tol: f64, bound: u64) -> PyResult<u64> {
    constructor::find_split_prime_near_axis(angle_tol, bound).map_err(err)
}

#[pymodule]
fn barw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyFieldSample>()?;
    m.add_function(wrap_pyfunction!(is_in_s, m)?)?;
    m.add_function(wrap_pyfunction!(factor, m)?)?;
    m.add_function(wrap_pyfunction!(fix_part, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_prime_over, m)?)?;
    m.add_function(wrap_pyfunction!(count_s_upto, m)?)?;
    m.add_function(wrap_pyfunction!(count_sector_primes, m)?)?;
    m.add_function(wrap_pyfunction!(kubilius_main_term, m)?)?;
    m.add_function(wrap_pyfunction!(semicorrelations, m)?)?;
    m.add_function(wrap_pyfunction!(near_semicorrelations, m)?)?;
    m.add_function(wrap_pyfunction!(projected_correlations, m)?)?;
    m.add_function(wrap_pyfunction!(vector_correlations, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_count, m)?)?;
    m.add_function(wrap_pyfunction!(trivial_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(second_moments, m)?)?;
    m.add_function(wrap_pyfunction!(k1_exact, m)?)?;
    m.add_function(wrap_pyfunction!(k1_expansion, m)?)?;
    m.add_function(wrap_pyfunction!(k1_eval, m)?)?;
    m.add_function(wrap_pyfunction!(expected_norm, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_k1, m)?)?;
    m.add_function(wrap_pyfunction!(predict_one_term, m)?)?;
    m.add_function(wrap_pyfunction!(predict_two_term, m)?)?;
    m.add_function(wrap_pyfunction!(nodal_length_marching, m)?)?;
    m.add_function(wrap_pyfunction!(mc_expected_length, m)?)?;
    m.add_function(wrap_pyfunction!(default_mc_resolution, m)?)?;
    m.add_function(wrap_pyfunction!(deterministic_grid, m)?)?;
    m.add_function(wrap_pyfunction!(construct, m)?)?;
    m.add_function(wrap_pyfunction!(find_anchor_prime, m)?)?;
    m.add_function(wrap_pyfunction!(find_split_prime_near_axis, m)?)?;
    m.add("__version__", barw::VERSION)?;
    Ok(())
}
