//! Pointwise Kac-Rice zero density, its perturbative expansion, singular-cell
//! classification, and box quadrature producing the expected nodal length.
//!
//! At a non-degenerate point the zero density is
//!
//! ```text
//! K1(x) = E[ |grad f| | f(x) = 0 ] / sqrt(2 pi Var f(x))
//! ```
//!
//! and the conditional gradient covariance satisfies the internal identity
//! `(2 / (pi^2 n)) Cov(grad f | f = 0) = I + Gamma_n(x)` with `Gamma_n` built
//! from the verbatim `b`/`d` trigonometric sums. Direct conditioning on the
//! exactly-implemented covariance forces the leading density `pi sqrt(n) /
//! (2 sqrt 2)`; a paper-constants switch drops the `pi` for literal
//! comparison with the stated two-term formula.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, SecondMoments};
use crate::quad;
use crate::rng;
use crate::spectrum::CircleSpectrum;
use crate::{Rect, Square};

const PI: f64 = std::f64::consts::PI;

/// Variance below this is treated as a degenerate point.
const DEGENERATE_VAR: f64 = 1e-13;

/// Hard cap on `nodes x classes` work in one quadrature pass.
const INTEGRATE_BUDGET: u128 = 60_000_000_000;

/// The five verbatim trigonometric sums and the matrix they assemble into.
#[derive(Debug, Clone, Copy)]
pub struct GammaDecomposition {
    pub var_f: f64,
    /// `s_n(x) = 1 - Var f(x)`.
    pub s_n: f64,
    pub b11: f64,
    pub b12: f64,
    pub b22: f64,
    pub d1: f64,
    pub d2: f64,
    /// `Gamma_n = (8/(nN)) [b] - (128/(n N^2 Var)) [d d^T]`.
    pub gamma: [[f64; 2]; 2],
}

impl GammaDecomposition {
    pub fn tr_gamma(&self) -> f64 {
        self.gamma[0][0] + self.gamma[1][1]
    }
    pub fn det_gamma(&self) -> f64 {
        self.gamma[0][0] * self.gamma[1][1] - self.gamma[0][1] * self.gamma[1][0]
    }
    pub fn gamma_frobenius(&self) -> f64 {
        (self.gamma[0][0].powi(2) + 2.0 * self.gamma[0][1].powi(2) + self.gamma[1][1].powi(2))
            .sqrt()
    }
}

/// Everything Kac-Rice knows about one point.
#[derive(Debug, Clone, Copy)]
pub struct KacRiceEval {
    pub x: (f64, f64),
    pub var_f: f64,
    pub s_n: f64,
    pub b11: f64,
    pub b12: f64,
    pub b22: f64,
    pub d1: f64,
    pub d2: f64,
    pub gamma: [[f64; 2]; 2],
    pub tr_gamma: f64,
    pub det_gamma: f64,
    pub k1_exact: f64,
    pub k1_expansion: f64,
    /// `sqrt(n) (|s_n|^3 + |Gamma|_F^3)`, the shape of the remainder bound.
    pub upsilon_bound: f64,
}

/// The verbatim trigonometric sums at `x`: `(s_n, b11, b12, b22, d1, d2)`.
/// Always defined, even where `Var f = 0`. Quarter-orbit weights make the
/// sums exact for levels with axis classes.
pub fn variance_sums(spectrum: &CircleSpectrum, x: (f64, f64)) -> (f64, f64, f64, f64, f64, f64) {
    let n_points = spectrum.len() as f64;
    let mut s_sum = 0.0;
    let mut b11 = 0.0;
    let mut b12 = 0.0;
    let mut b22 = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for class in &spectrum.classes {
        let w = class.weight();
        let (xi1, xi2) = (class.rep.0 as f64, class.rep.1 as f64);
        let (s1, c1) = (PI * xi1 * x.0).sin_cos();
        let (s2, c2) = (PI * xi2 * x.1).sin_cos();
        // double angles: cos(2a) = 1 - 2 sin^2 a, sin(2a) = 2 sin a cos a
        let ca = 1.0 - 2.0 * s1 * s1;
        let cb = 1.0 - 2.0 * s2 * s2;
        let sa = 2.0 * s1 * c1;
        let sb = 2.0 * s2 * c2;
        s_sum += w * (ca + cb - ca * cb);
        b11 += w * xi1 * xi1 * (ca - cb - ca * cb);
        b22 += w * xi2 * xi2 * (cb - ca - ca * cb);
        b12 += w * xi1 * xi2 * sa * sb;
        d1 += w * xi1 * sa * s2 * s2;
        d2 += w * xi2 * sb * s1 * s1;
    }
    (4.0 / n_points * s_sum, b11, b12, b22, d1, d2)
}

/// Compute the `b`/`d` sums and assemble `Gamma_n` at `x`; errors at
/// degenerate points where `Var f(x) = 0`.
pub fn gamma_decomposition(spectrum: &CircleSpectrum, x: (f64, f64)) -> Result<GammaDecomposition> {
    let n_points = spectrum.len() as f64;
    let n = spectrum.n as f64;
    let (s_n, b11, b12, b22, d1, d2) = variance_sums(spectrum, x);
    let var_f = 1.0 - s_n;
    if var_f < DEGENERATE_VAR {
        return Err(Error::DegeneratePoint(x.0, x.1));
    }
    let cb = 8.0 / (n * n_points);
    let cd = 128.0 / (n * n_points * n_points * var_f);
    let gamma = [
        [cb * b11 - cd * d1 * d1, cb * b12 - cd * d1 * d2],
        [cb * b12 - cd * d1 * d2, cb * b22 - cd * d2 * d2],
    ];
    Ok(GammaDecomposition {
        var_f,
        s_n,
        b11,
        b12,
        b22,
        d1,
        d2,
        gamma,
    })
}

/// Eigenvalues of a symmetric 2x2 matrix, descending, with tiny negative
/// values clamped to zero.
pub fn symmetric_eigenvalues(m: [[f64; 2]; 2]) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let clamp = |l: f64| {
        if l < 0.0 && l > -1e-12 * tr.abs().max(1.0) {
            0.0
        } else {
            l
        }
    };
    (clamp(tr / 2.0 + disc), clamp(tr / 2.0 - disc))
}

/// `E |Z|` for a centered bivariate Gaussian with covariance eigenvalues
/// `l1 >= l2 >= 0`, by quadrature of
/// `sqrt(pi/2) (1/2pi) ∫_0^{2pi} sqrt(l1 cos^2 + l2 sin^2)`.
pub fn expected_norm(l1: f64, l2: f64) -> f64 {
    let (l1, l2) = (l1.max(0.0), l2.max(0.0));
    if l1 <= 0.0 {
        return 0.0;
    }
    // by symmetry the full circle is four copies of [0, pi/2]
    let integral = quad::adaptive_simpson(
        |t| {
            let (s, c) = t.sin_cos();
            (l1 * c * c + l2 * s * s).sqrt()
        },
        0.0,
        PI / 2.0,
        1e-11,
        36,
    );
    (PI / 2.0).sqrt() * (2.0 / PI) * integral
}

/// Kac-Rice density from pointwise second moments.
pub fn k1_from_moments(m: &SecondMoments, x: (f64, f64)) -> Result<f64> {
    if m.var_f < DEGENERATE_VAR {
        return Err(Error::DegeneratePoint(x.0, x.1));
    }
    let sigma = m.conditional_grad()?;
    let (l1, l2) = symmetric_eigenvalues(sigma);
    Ok(expected_norm(l1, l2) / (2.0 * PI * m.var_f).sqrt())
}

/// Exact pointwise zero density.
pub fn k1_exact(spectrum: &CircleSpectrum, x: (f64, f64)) -> Result<f64> {
    k1_from_moments(&field::second_moments(spectrum, x), x)
}

/// Leading density per unit area: `pi sqrt(n) / (2 sqrt 2)`, or the paper's
/// literal `sqrt(n) / (2 sqrt 2)` when `paper_constants` is set.
pub fn leading_density(n: u64, paper_constants: bool) -> f64 {
    let c = if paper_constants { 1.0 } else { PI };
    c * (n as f64).sqrt() / (2.0 * std::f64::consts::SQRT_2)
}

/// Second-order expansion `K1 ≈ leading + L_n(x)` with
/// `L_n = (pi sqrt n / 4 sqrt 2)(s + Tr/2 + 3 s^2/4 + s Tr/4 - Tr(G^2)/16 - Tr^2/32)`.
pub fn k1_expansion(spectrum: &CircleSpectrum, x: (f64, f64)) -> Result<f64> {
    let g = gamma_decomposition(spectrum, x)?;
    Ok(leading_density(spectrum.n, false) + l_n_term(spectrum.n, &g))
}

fn l_n_term(n: u64, g: &GammaDecomposition) -> f64 {
    let s = g.s_n;
    let tr = g.tr_gamma();
    let tr_sq = g.gamma[0][0] * g.gamma[0][0]
        + 2.0 * g.gamma[0][1] * g.gamma[0][1]
        + g.gamma[1][1] * g.gamma[1][1]; // Tr(Gamma^2)
    PI * (n as f64).sqrt() / (4.0 * std::f64::consts::SQRT_2)
        * (s + tr / 2.0 + 0.75 * s * s + 0.25 * s * tr - tr_sq / 16.0 - tr * tr / 32.0)
}

/// Full pointwise evaluation.
pub fn eval(spectrum: &CircleSpectrum, x: (f64, f64)) -> Result<KacRiceEval> {
    let g = gamma_decomposition(spectrum, x)?;
    let k1 = k1_exact(spectrum, x)?;
    let expansion = leading_density(spectrum.n, false) + l_n_term(spectrum.n, &g);
    Ok(KacRiceEval {
        x,
        var_f: g.var_f,
        s_n: g.s_n,
        b11: g.b11,
        b12: g.b12,
        b22: g.b22,
        d1: g.d1,
        d2: g.d2,
        gamma: g.gamma,
        tr_gamma: g.tr_gamma(),
        det_gamma: g.det_gamma(),
        k1_exact: k1,
        k1_expansion: expansion,
        upsilon_bound: (spectrum.n as f64).sqrt()
            * (g.s_n.abs().powi(3) + g.gamma_frobenius().powi(3)),
    })
}

/// Largest entrywise deviation of `(2/(pi^2 n)) Cov(grad f | f=0)` from
/// `I + Gamma_n(x)`; ties the verbatim sums to direct Gaussian conditioning.
pub fn gamma_consistency_deviation(spectrum: &CircleSpectrum, x: (f64, f64)) -> Result<f64> {
    let m = field::second_moments(spectrum, x);
    if m.var_f < DEGENERATE_VAR {
        return Err(Error::DegeneratePoint(x.0, x.1));
    }
    let sigma = m.conditional_grad()?;
    let g = gamma_decomposition(spectrum, x)?;
    let scale = 2.0 / (PI * PI * spectrum.n as f64);
    let mut dev = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let lhs = scale * sigma[i][j];
            let rhs = if i == j { 1.0 } else { 0.0 } + g.gamma[i][j];
            dev = dev.max((lhs - rhs).abs());
        }
    }
    Ok(dev)
}

// ---------------------------------------------------------------------------
// Singular-square classification

/// Planck-scale cells flagged where the perturbative expansion is unsafe.
#[derive(Debug, Clone)]
pub struct SingularPartition {
    pub delta: f64,
    pub gamma_threshold: f64,
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    pub cell_w: f64,
    pub cell_h: f64,
    /// Row-major singular flags (a probe violated a threshold).
    pub flags: Vec<bool>,
    /// Regular cells whose regularity the Lipschitz bound certifies on the
    /// whole cell, not just at the probes. Certification needs probe spacing
    /// below `gamma / (100 sqrt n)`, i.e. small `delta`.
    pub certified: Vec<bool>,
    /// Area-weighted fraction of the box covered by singular cells.
    pub singular_fraction: f64,
    /// Area-weighted fraction covered by certified-regular cells.
    pub certified_fraction: f64,
}

/// Classify cells of side `delta / sqrt(n)` over the clipped box. A cell is
/// singular when any probe of a 5x5 subgrid violates `|s_n| < gamma`,
/// `|Tr Gamma| < gamma` or `|det Gamma| < gamma` (or is degenerate). A
/// regular cell is additionally *certified* when the probe maximum of `|s_n|`
/// plus the Lipschitz slack `100 sqrt(n) * cover_radius` stays below gamma,
/// so no point of the cell can violate the variance condition.
pub fn classify_singular(
    spectrum: &CircleSpectrum,
    square: &Square,
    delta: f64,
    gamma_threshold: f64,
) -> Result<SingularPartition> {
    if !(delta > 0.0) || !(gamma_threshold > 0.0) {
        return Err(Error::Validation("delta and gamma must be positive".into()));
    }
    let rect = square.clipped();
    let n = spectrum.n as f64;
    let side = delta / n.sqrt();
    let nx = (rect.width() / side).ceil().max(1.0) as usize;
    let ny = (rect.height() / side).ceil().max(1.0) as usize;
    let lipschitz = 100.0 * n.sqrt();
    let rows: Vec<(Vec<bool>, Vec<bool>, f64, f64)> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let y0 = rect.y0 + iy as f64 * side;
            let y1 = (y0 + side).min(rect.y1);
            let mut row_flags = vec![false; nx];
            let mut row_cert = vec![false; nx];
            let mut singular_area = 0.0;
            let mut certified_area = 0.0;
            for ix in 0..nx {
                let x0 = rect.x0 + ix as f64 * side;
                let x1 = (x0 + side).min(rect.x1);
                let (w, h) = (x1 - x0, y1 - y0);
                if w <= 0.0 || h <= 0.0 {
                    continue;
                }
                // probes at the centers of a 5x5 subgrid
                let cover_radius = ((w / 10.0).powi(2) + (h / 10.0).powi(2)).sqrt();
                let mut max_s = 0.0f64;
                let mut violated = false;
                'probe: for py in 0..5 {
                    for px in 0..5 {
                        let p = (
                            x0 + (px as f64 + 0.5) * w / 5.0,
                            y0 + (py as f64 + 0.5) * h / 5.0,
                        );
                        match gamma_decomposition(spectrum, p) {
                            Err(_) => {
                                violated = true;
                                break 'probe;
                            }
                            Ok(g) => {
                                if g.s_n.abs() >= gamma_threshold
                                    || g.tr_gamma().abs() >= gamma_threshold
                                    || g.det_gamma().abs() >= gamma_threshold
                                {
                                    violated = true;
                                    break 'probe;
                                }
                                max_s = max_s.max(g.s_n.abs());
                            }
                        }
                    }
                }
                if violated {
                    row_flags[ix] = true;
                    singular_area += w * h;
                } else if max_s + lipschitz * cover_radius < gamma_threshold {
                    row_cert[ix] = true;
                    certified_area += w * h;
                }
            }
            (row_flags, row_cert, singular_area, certified_area)
        })
        .collect();
    let mut flags = Vec::with_capacity(nx * ny);
    let mut certified = Vec::with_capacity(nx * ny);
    let mut singular_area = 0.0;
    let mut certified_area = 0.0;
    for (rf, rc, sa, ca) in rows {
        flags.extend(rf);
        certified.extend(rc);
        singular_area += sa;
        certified_area += ca;
    }
    Ok(SingularPartition {
        delta,
        gamma_threshold,
        rect,
        nx,
        ny,
        cell_w: side,
        cell_h: side,
        flags,
        certified,
        singular_fraction: singular_area / rect.area(),
        certified_fraction: certified_area / rect.area(),
    })
}

// ---------------------------------------------------------------------------
// Quadrature of K1 over a box

struct TrigTables {
    /// Per class: `sin`, `cos` of `pi xi1 x` at each x node.
    sx: Vec<f64>,
    cx: Vec<f64>,
    sy: Vec<f64>,
    cy: Vec<f64>,
    nxn: usize,
    nyn: usize,
}

fn build_tables(spectrum: &CircleSpectrum, xs: &[f64], ys: &[f64]) -> TrigTables {
    let nc = spectrum.classes.len();
    let mut t = TrigTables {
        sx: vec![0.0; nc * xs.len()],
        cx: vec![0.0; nc * xs.len()],
        sy: vec![0.0; nc * ys.len()],
        cy: vec![0.0; nc * ys.len()],
        nxn: xs.len(),
        nyn: ys.len(),
    };
    for (c, class) in spectrum.classes.iter().enumerate() {
        let f1 = PI * class.rep.0 as f64;
        let f2 = PI * class.rep.1 as f64;
        for (i, &x) in xs.iter().enumerate() {
            let (s, co) = (f1 * x).sin_cos();
            t.sx[c * xs.len() + i] = s;
            t.cx[c * xs.len() + i] = co;
        }
        for (i, &y) in ys.iter().enumerate() {
            let (s, co) = (f2 * y).sin_cos();
            t.sy[c * ys.len() + i] = s;
            t.cy[c * ys.len() + i] = co;
        }
    }
    t
}

/// Second moments assembled from tabulated class trig values at one node.
fn moments_from_tables(
    spectrum: &CircleSpectrum,
    tables: &TrigTables,
    ix: usize,
    iy: usize,
) -> SecondMoments {
    let mut var = 0.0;
    let mut c1 = 0.0;
    let mut c2 = 0.0;
    let mut g11 = 0.0;
    let mut g12 = 0.0;
    let mut g22 = 0.0;
    for (c, class) in spectrum.classes.iter().enumerate() {
        if !class.contributes() {
            continue;
        }
        let (xi1, xi2) = (class.rep.0 as f64, class.rep.1 as f64);
        let s1 = tables.sx[c * tables.nxn + ix];
        let co1 = tables.cx[c * tables.nxn + ix];
        let s2 = tables.sy[c * tables.nyn + iy];
        let co2 = tables.cy[c * tables.nyn + iy];
        let s1s1 = s1 * s1;
        let s2s2 = s2 * s2;
        var += s1s1 * s2s2;
        c1 += xi1 * s1 * co1 * s2s2;
        c2 += xi2 * s2 * co2 * s1s1;
        g11 += xi1 * xi1 * co1 * co1 * s2s2;
        g12 += xi1 * xi2 * s1 * co1 * s2 * co2;
        g22 += xi2 * xi2 * s1s1 * co2 * co2;
    }
    let w = 16.0 / spectrum.len() as f64;
    SecondMoments {
        var_f: w * var,
        cross: [w * PI * c1, w * PI * c2],
        grad: [
            [w * PI * PI * g11, w * PI * PI * g12],
            [w * PI * PI * g12, w * PI * PI * g22],
        ],
    }
}

fn midpoint_nodes(a: f64, b: f64, count: usize, offset: f64) -> Vec<f64> {
    let h = (b - a) / count as f64;
    (0..count)
        .map(|i| a + (i as f64 + 0.5) * h + offset)
        .collect()
}

fn k1_pass(spectrum: &CircleSpectrum, rect: &Rect, res: usize, seed: u64) -> Result<f64> {
    let nx = (rect.width() * res as f64).ceil().max(1.0) as usize;
    let ny = (rect.height() * res as f64).ceil().max(1.0) as usize;
    let work = (nx as u128) * (ny as u128) * (spectrum.classes.len() as u128);
    if work > INTEGRATE_BUDGET {
        return Err(Error::BudgetExceeded {
            estimate: work,
            budget: INTEGRATE_BUDGET,
        });
    }
    let hx = rect.width() / nx as f64;
    let hy = rect.height() / ny as f64;
    // tiny seeded lattice offset: keeps nodes off measure-zero degeneracies
    // without disturbing the midpoint rule's O(h^2) centering
    let ux = (rng::derive(seed, 1) >> 11) as f64 / (1u64 << 53) as f64;
    let uy = (rng::derive(seed, 2) >> 11) as f64 / (1u64 << 53) as f64;
    let xs = midpoint_nodes(rect.x0, rect.x1, nx, hx * 1e-3 * (0.5 + ux));
    let ys = midpoint_nodes(rect.y0, rect.y1, ny, hy * 1e-3 * (0.5 + uy));
    let tables = build_tables(spectrum, &xs, &ys);
    let row_sums: Vec<f64> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let mut acc = 0.0;
            for ix in 0..nx {
                let m = moments_from_tables(spectrum, &tables, ix, iy);
                if m.var_f < DEGENERATE_VAR {
                    // measure-zero degeneracy not dodged by the offset: nudge
                    let x = (xs[ix] + hx * 1e-4, ys[iy] + hy * 1e-4);
                    acc += k1_exact(spectrum, x).unwrap_or(0.0);
                    continue;
                }
                let sigma = m.conditional_grad().expect("var_f checked above");
                let (l1, l2) = symmetric_eigenvalues(sigma);
                acc += expected_norm(l1, l2) / (2.0 * PI * m.var_f).sqrt();
            }
            acc
        })
        .collect();
    Ok(quad::pairwise_sum(&row_sums) * hx * hy)
}

/// Midpoint-rule integral of `K1` over the clipped box at `resolution` nodes
/// per unit length, with a Richardson error estimate from a half-resolution
/// pass. Enforces at least 16 nodes per wavelength `1/sqrt(n)`.
pub fn integrate_k1(
    spectrum: &CircleSpectrum,
    square: &Square,
    resolution: usize,
) -> Result<(f64, f64)> {
    let min_res = (16.0 * (spectrum.n as f64).sqrt()).ceil() as usize;
    if resolution < min_res {
        return Err(Error::Validation(format!(
            "resolution {resolution} below 16 nodes per wavelength (need >= {min_res})"
        )));
    }
    let rect = square.clipped();
    let fine = k1_pass(spectrum, &rect, resolution, 0xba12_57ab)?;
    let coarse = k1_pass(spectrum, &rect, resolution.div_ceil(2), 0xba12_57ac)?;
    Ok((fine, (fine - coarse).abs() / 3.0))
}

/// One-term prediction `area * leading`.
pub fn predict_one_term(spectrum: &CircleSpectrum, square: &Square, paper_constants: bool) -> f64 {
    square.area() * leading_density(spectrum.n, paper_constants)
}

/// Two-term prediction `area * leading * (1 - (1 + nu_hat_4)/(16 N))`.
pub fn predict_two_term(spectrum: &CircleSpectrum, square: &Square, paper_constants: bool) -> f64 {
    let nu = spectrum.summary().nu_hat_f64();
    predict_one_term(spectrum, square, paper_constants)
        * (1.0 - (1.0 + nu) / (16.0 * spectrum.len() as f64))
}

// ---------------------------------------------------------------------------
// Numerical-verification report

/// One measured quantity next to its predicted value.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub name: String,
    pub value: f64,
    pub paper_prediction: Option<f64>,
    pub residual: Option<f64>,
}

fn row(name: &str, value: f64, prediction: Option<f64>) -> ReportRow {
    ReportRow {
        name: name.into(),
        value,
        paper_prediction: prediction,
        residual: prediction.map(|p| value - p),
    }
}

/// Box averages of the expansion ingredients next to their predicted sizes,
/// plus the five cosine-moment sums. Report only: the predictions hold
/// asymptotically along density-one sequences, so nothing here asserts.
pub fn lemma_calculations_report(
    spectrum: &CircleSpectrum,
    square: &Square,
    resolution: usize,
) -> Result<Vec<ReportRow>> {
    let rect = square.clipped();
    let n_points = spectrum.len() as f64;
    let nx = (rect.width() * resolution as f64).ceil().max(1.0) as usize;
    let ny = (rect.height() * resolution as f64).ceil().max(1.0) as usize;
    let work = (nx as u128) * (ny as u128) * (spectrum.classes.len() as u128);
    if work > INTEGRATE_BUDGET {
        return Err(Error::BudgetExceeded {
            estimate: work,
            budget: INTEGRATE_BUDGET,
        });
    }
    let hx = rect.width() / nx as f64;
    let hy = rect.height() / ny as f64;
    let xs = midpoint_nodes(rect.x0, rect.x1, nx, hx * 5e-4);
    let ys = midpoint_nodes(rect.y0, rect.y1, ny, hy * 5e-4);
    let tables = build_tables(spectrum, &xs, &ys);

    // accumulate the eight expansion statistics in one pass
    let stats: Vec<[f64; 8]> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let mut acc = [0.0f64; 8];
            for ix in 0..nx {
                let x = (xs[ix], ys[iy]);
                let Ok(g) = gamma_decomposition_from_tables(spectrum, &tables, ix, iy, x) else {
                    continue;
                };
                let s = g.s_n;
                let tr = g.tr_gamma();
                let tr_sq = g.gamma[0][0] * g.gamma[0][0]
                    + 2.0 * g.gamma[0][1] * g.gamma[0][1]
                    + g.gamma[1][1] * g.gamma[1][1];
                acc[0] += s;
                acc[1] += tr;
                acc[2] += s * s;
                acc[3] += s * tr;
                acc[4] += tr_sq;
                acc[5] += tr * tr;
                acc[6] += s * s * s;
                acc[7] += tr * tr * tr;
            }
            acc
        })
        .collect();
    let mut avg = [0.0f64; 8];
    for k in 0..8 {
        let col: Vec<f64> = stats.iter().map(|a| a[k]).collect();
        avg[k] = quad::pairwise_sum(&col) / (nx as f64 * ny as f64);
    }

    let inv_n = 1.0 / n_points;
    let mut rows = vec![
        row("item1_avg_s", avg[0], Some(0.0)),
        row("item2_avg_tr_gamma", avg[1], Some(-6.0 * inv_n)),
        row("item2_band", 3.0 * inv_n * inv_n, None),
        row("item3_avg_s_sq", avg[2], Some(5.0 * inv_n)),
        row("item4_avg_s_tr_gamma", avg[3], Some(2.0 * inv_n)),
        row("item4_band", 3.0 * inv_n * inv_n, None),
    ];
    // items (5)-(6): the paper's sum of xi1^4 lacks a stated normalization;
    // print residuals under the three candidates instead of asserting one
    let raw = spectrum.orbit_sum(4, 0).to_f64_lossy();
    let n2 = (spectrum.n as f64) * (spectrum.n as f64);
    for (tag, xi4) in [
        ("raw", raw),
        ("per_n2", raw / n2),
        ("per_n2N", raw / (n2 * n_points)),
    ] {
        rows.push(row(
            &format!("item5_avg_tr_gamma2_{tag}"),
            avg[4],
            Some(4.0 * inv_n * (1.0 + 32.0 * xi4)),
        ));
    }
    for (tag, xi4) in [
        ("raw", raw),
        ("per_n2", raw / n2),
        ("per_n2N", raw / (n2 * n_points)),
    ] {
        rows.push(row(
            &format!("item6_avg_tr_gamma_sq_{tag}"),
            avg[5],
            Some(4.0 * inv_n * (64.0 * xi4 - 3.0)),
        ));
    }
    rows.push(row("item7_avg_s_cubed", avg[6], Some(0.0)));
    rows.push(row("item8_avg_tr_gamma_cubed", avg[7], Some(0.0)));

    // cosine-moment sums depend on x1 only; average over the x nodes
    let s_len = square.side;
    let mut cos_acc = [0.0f64; 5]; // sum_c w avg cos, cos^2, cos^3, cos^4, and (sum_c w cos)^2
    for ix in 0..nx {
        let mut u = 0.0;
        for (c, class) in spectrum.classes.iter().enumerate() {
            let w = class.weight();
            let s1 = tables.sx[c * tables.nxn + ix];
            let ca = 1.0 - 2.0 * s1 * s1;
            cos_acc[0] += w * ca;
            cos_acc[1] += w * ca * ca;
            cos_acc[2] += w * ca * ca * ca;
            cos_acc[3] += w * ca * ca * ca * ca;
            u += w * ca;
        }
        cos_acc[4] += u * u;
    }
    for v in &mut cos_acc {
        *v /= nx as f64;
    }
    let bound_single: f64 = spectrum
        .classes
        .iter()
        .filter(|c| c.rep.0 > 0)
        .map(|c| c.weight() / (c.rep.0 as f64 * s_len))
        .sum();
    rows.push(row("cos1_avg", cos_acc[0], Some(0.0)));
    rows.push(row("cos1_bound", 2.0 * bound_single, None));
    rows.push(row("cos2_avg", cos_acc[1], Some(0.5 * n_points / 4.0)));
    rows.push(row("cos3_avg", cos_acc[2], Some(0.0)));
    rows.push(row("cos4_avg", cos_acc[3], Some(0.375 * n_points / 4.0)));
    rows.push(row("cos_pair_avg", cos_acc[4], Some(0.5 * n_points / 4.0)));
    rows.push(row("cos_bound_sum", bound_single, None));
    Ok(rows)
}

fn gamma_decomposition_from_tables(
    spectrum: &CircleSpectrum,
    tables: &TrigTables,
    ix: usize,
    iy: usize,
    x: (f64, f64),
) -> Result<GammaDecomposition> {
    let n_points = spectrum.len() as f64;
    let n = spectrum.n as f64;
    let mut s_sum = 0.0;
    let mut b11 = 0.0;
    let mut b12 = 0.0;
    let mut b22 = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (c, class) in spectrum.classes.iter().enumerate() {
        let w = class.weight();
        let (xi1, xi2) = (class.rep.0 as f64, class.rep.1 as f64);
        let s1 = tables.sx[c * tables.nxn + ix];
        let c1 = tables.cx[c * tables.nxn + ix];
        let s2 = tables.sy[c * tables.nyn + iy];
        let c2 = tables.cy[c * tables.nyn + iy];
        let ca = 1.0 - 2.0 * s1 * s1;
        let cb = 1.0 - 2.0 * s2 * s2;
        let sa = 2.0 * s1 * c1;
        let sb = 2.0 * s2 * c2;
        s_sum += w * (ca + cb - ca * cb);
        b11 += w * xi1 * xi1 * (ca - cb - ca * cb);
        b22 += w * xi2 * xi2 * (cb - ca - ca * cb);
        b12 += w * xi1 * xi2 * sa * sb;
        d1 += w * xi1 * sa * s2 * s2;
        d2 += w * xi2 * sb * s1 * s1;
    }
    let s_n = 4.0 / n_points * s_sum;
    let var_f = 1.0 - s_n;
    if var_f < DEGENERATE_VAR {
        return Err(Error::DegeneratePoint(x.0, x.1));
    }
    let cb = 8.0 / (n * n_points);
    let cd = 128.0 / (n * n_points * n_points * var_f);
    Ok(GammaDecomposition {
        var_f,
        s_n,
        b11,
        b12,
        b22,
        d1,
        d2,
        gamma: [
            [cb * b11 - cd * d1 * d1, cb * b12 - cd * d1 * d2],
            [cb * b12 - cd * d1 * d2, cb * b22 - cd * d2 * d2],
        ],
    })
}

trait ToF64Lossy {
    fn to_f64_lossy(&self) -> f64;
}

impl ToF64Lossy for num_rational::BigRational {
    fn to_f64_lossy(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn spec(n: u64) -> CircleSpectrum {
        CircleSpectrum::enumerate(n).unwrap()
    }

    /// Deterministic low-discrepancy-ish points strictly inside the square.
    fn jittered_points(count: usize, seed: u64) -> Vec<(f64, f64)> {
        (0..count)
            .map(|i| {
                let a = rng::derive(seed, 2 * i as u64) >> 11;
                let b = rng::derive(seed, 2 * i as u64 + 1) >> 11;
                (
                    0.02 + 0.96 * (a as f64 / (1u64 << 53) as f64),
                    0.02 + 0.96 * (b as f64 / (1u64 << 53) as f64),
                )
            })
            .collect()
    }

    #[test]
    fn gamma_decomposition_examples() {
        let s5 = spec(5);
        let g = gamma_decomposition(&s5, (0.25, 0.25)).unwrap();
        assert_abs_diff_eq!(g.var_f, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.s_n, -1.0, epsilon = 1e-12);

        // n = 18 is degenerate on the grid line x1 = 1/3
        let s18 = spec(18);
        assert!(matches!(
            gamma_decomposition(&s18, (1.0 / 3.0, 0.21)),
            Err(Error::DegeneratePoint(_, _))
        ));

        // n = 8 (points (±2, ±2)): b12 vanishes on x2 = 1/2 because
        // sin(2 pi * 2 * 1/2) = 0; that line is also the deterministic grid
        // (g = 2), so the raw sums are checked there and the assembled Gamma
        // at the nondegenerate zero x2 = 1/4
        let s8 = spec(8);
        for x1 in [0.13, 0.37, 0.71] {
            let (_, _, b12, _, _, _) = variance_sums(&s8, (x1, 0.5));
            assert_abs_diff_eq!(b12, 0.0, epsilon = 1e-12);
            let g = gamma_decomposition(&s8, (x1, 0.25)).unwrap();
            assert_abs_diff_eq!(g.b12, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn expected_norm_closed_forms() {
        for l in [0.25, 1.0, 7.5] {
            assert_abs_diff_eq!(expected_norm(l, l), (PI * l / 2.0).sqrt(), epsilon = 1e-10);
            assert_abs_diff_eq!(
                expected_norm(l, 0.0),
                (2.0 * l / PI).sqrt(),
                epsilon = 1e-10
            );
        }
        assert_eq!(expected_norm(0.0, 0.0), 0.0);
    }

    #[test]
    fn expected_norm_vs_monte_carlo() {
        for trial in 0..5u64 {
            let mut r = crate::rng::stream(0xe11e, trial);
            // random PSD matrix A A^T
            let a: [[f64; 2]; 2] = [
                [r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0],
                [r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0],
            ];
            let cov = [
                [
                    a[0][0] * a[0][0] + a[0][1] * a[0][1],
                    a[0][0] * a[1][0] + a[0][1] * a[1][1],
                ],
                [
                    a[0][0] * a[1][0] + a[0][1] * a[1][1],
                    a[1][0] * a[1][0] + a[1][1] * a[1][1],
                ],
            ];
            let (l1, l2) = symmetric_eigenvalues(cov);
            let exact = expected_norm(l1, l2);
            let draws = 1_000_000usize;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..draws {
                let g1: f64 = r.sample(rand_distr::StandardNormal);
                let g2: f64 = r.sample(rand_distr::StandardNormal);
                let z1 = a[0][0] * g1 + a[0][1] * g2;
                let z2 = a[1][0] * g1 + a[1][1] * g2;
                let norm = (z1 * z1 + z2 * z2).sqrt();
                sum += norm;
                sumsq += norm * norm;
            }
            let mean = sum / draws as f64;
            let se = ((sumsq / draws as f64 - mean * mean) / draws as f64).sqrt();
            assert!(
                (exact - mean).abs() <= 4.0 * se,
                "trial {trial}: quadrature {exact} vs MC {mean} (se {se})"
            );
        }
    }

    #[test]
    fn stationary_sanity() {
        // Var = 1, cross = 0, grad = (k^2/2) I  =>  K1 = k / (2 sqrt 2)
        let k = PI * 5f64.sqrt();
        let m = SecondMoments {
            var_f: 1.0,
            cross: [0.0, 0.0],
            grad: [[k * k / 2.0, 0.0], [0.0, k * k / 2.0]],
        };
        let k1 = k1_from_moments(&m, (0.5, 0.5)).unwrap();
        assert_abs_diff_eq!(k1, k / (2.0 * std::f64::consts::SQRT_2), epsilon = 1e-10);
        assert_abs_diff_eq!(k1, leading_density(5, false), epsilon = 1e-10);
    }

    #[test]
    fn gamma_consistency_identity() {
        for n in [5u64, 65, 1105] {
            let s = spec(n);
            for x in jittered_points(100, n) {
                match gamma_consistency_deviation(&s, x) {
                    Ok(dev) => assert!(dev < 1e-8, "n={n} x={x:?} dev={dev}"),
                    Err(Error::DegeneratePoint(_, _)) => continue,
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn expansion_tracks_exact_at_nonsingular_points() {
        let s = spec(1105);
        let mut checked = 0;
        for x in jittered_points(400, 7) {
            let Ok(e) = eval(&s, x) else { continue };
            if e.s_n.abs() >= 0.5 || e.tr_gamma.abs() >= 0.5 || e.det_gamma.abs() >= 0.5 {
                continue;
            }
            let lhs = (e.k1_exact - e.k1_expansion).abs();
            let rhs = 3.0 * (e.upsilon_bound + (s.n as f64).sqrt() * 1e-8);
            assert!(lhs <= rhs, "x={x:?}: |exact-expansion|={lhs} bound={rhs}");
            checked += 1;
            if checked >= 100 {
                break;
            }
        }
        assert!(checked >= 100, "only {checked} nonsingular points found");
    }

    #[test]
    fn k1_nonnegative_and_swap_symmetric() {
        let s = spec(65);
        for x in jittered_points(50, 3) {
            let k = k1_exact(&s, x).unwrap();
            let kt = k1_exact(&s, (x.1, x.0)).unwrap();
            assert!(k >= 0.0);
            assert_abs_diff_eq!(k, kt, epsilon = 1e-9);
        }
    }

    #[test]
    fn classify_singular_examples() {
        let s18 = spec(18);
        let b = Square::new((0.33, 0.5), 0.1).unwrap();
        let part = classify_singular(&s18, &b, 0.1, 0.5).unwrap();
        assert!(
            part.flags.iter().any(|&f| f),
            "a box crossing x1=1/3 must contain singular cells"
        );

        let s1105 = spec(1105);
        let unit = Square::unit();
        let part = classify_singular(&s1105, &unit, 0.1, 1e9).unwrap();
        assert_eq!(
            part.flags.iter().filter(|&&f| f).count(),
            0,
            "gamma -> infinity clears all flags"
        );

        // measured 0.735 at these thresholds: N = 32 is far from the
        // asymptotic regime where the singular measure is small
        let part = classify_singular(&s1105, &unit, 0.1, 0.5).unwrap();
        assert!(part.singular_fraction > 0.0 && part.singular_fraction < 0.9);
        assert!(
            (part.singular_fraction - 0.735).abs() < 0.05,
            "fraction {}",
            part.singular_fraction
        );
    }

    #[test]
    fn certification_fires_at_small_delta() {
        // the Lipschitz certificate needs probe spacing below
        // gamma / (100 sqrt n), i.e. delta well under 0.01
        let s = spec(1105);
        let mut found = false;
        for x in jittered_points(20, 0xcafe) {
            let Ok(b) = Square::new(x, 0.01) else {
                continue;
            };
            let part = classify_singular(&s, &b, 0.003, 0.5).unwrap();
            for (c, f) in part.certified.iter().zip(&part.flags) {
                assert!(!(c & f), "certified cells are never singular");
            }
            if part.certified_fraction > 0.0 {
                found = true;
                break;
            }
        }
        assert!(found, "no cell certified in any candidate box");
    }

    #[test]
    fn integrate_converges_and_is_additive() {
        let s = spec(5);
        let unit = Square::unit();
        let (v1, _) = integrate_k1(&s, &unit, 128).unwrap();
        let (v2, _) = integrate_k1(&s, &unit, 256).unwrap();
        assert!(v2 > 0.0);
        assert!(
            (v2 - v1).abs() / v2 < 0.005,
            "doubling changed {v1} -> {v2}"
        );

        // two side-0.5 boxes tile the central band y in [0.25, 0.75]
        let left = Square::new((0.25, 0.5), 0.5).unwrap();
        let right = Square::new((0.75, 0.5), 0.5).unwrap();
        let (vl, el) = integrate_k1(&s, &left, 256).unwrap();
        let (vr, er) = integrate_k1(&s, &right, 256).unwrap();
        let band_value = {
            let r = Rect {
                x0: 0.0,
                x1: 1.0,
                y0: 0.25,
                y1: 0.75,
            };
            k1_pass(&s, &r, 256, 0xba12_57ab).unwrap()
        };
        assert!(
            (vl + vr - band_value).abs() <= 3.0 * (el + er) + 1e-3,
            "additivity: {vl} + {vr} vs {band_value}"
        );
    }

    #[test]
    fn integrate_rejects_low_resolution() {
        let s = spec(1105);
        assert!(integrate_k1(&s, &Square::unit(), 100).is_err());
    }

    #[test]
    fn predictions() {
        let s = spec(5);
        let unit = Square::unit();
        let p2 = predict_two_term(&s, &unit, false);
        let expected = PI * 5f64.sqrt() / (2.0 * std::f64::consts::SQRT_2) * (1.0 - 0.72 / 128.0);
        assert_abs_diff_eq!(p2, expected, epsilon = 1e-12);
        assert!((p2 - 2.470).abs() < 5e-4);
        // paper-constants flag drops the pi
        assert_abs_diff_eq!(
            predict_two_term(&s, &unit, true),
            expected / PI,
            epsilon = 1e-12
        );
        // prediction is exactly proportional to the clipped area
        let quarter = Square::new((0.25, 0.25), 0.5).unwrap();
        assert!((quarter.area() - 0.25).abs() < 1e-15);
        assert_abs_diff_eq!(
            predict_two_term(&s, &quarter, false),
            p2 * quarter.area(),
            epsilon = 1e-12
        );
        let one = predict_one_term(&s, &unit, false);
        assert!(p2 < one);
    }

    #[test]
    fn report_runs_and_item1_is_small() {
        let s = spec(65);
        let rows = lemma_calculations_report(&s, &Square::unit(), 200).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        for expected in [
            "item1_avg_s",
            "item2_avg_tr_gamma",
            "item3_avg_s_sq",
            "item4_avg_s_tr_gamma",
            "item5_avg_tr_gamma2_raw",
            "item5_avg_tr_gamma2_per_n2",
            "item5_avg_tr_gamma2_per_n2N",
            "item6_avg_tr_gamma_sq_raw",
            "item7_avg_s_cubed",
            "item8_avg_tr_gamma_cubed",
            "cos1_avg",
            "cos2_avg",
            "cos3_avg",
            "cos4_avg",
            "cos_pair_avg",
        ] {
            assert!(names.contains(&expected), "missing row {expected}");
        }
        let item1 = rows.iter().find(|r| r.name == "item1_avg_s").unwrap();
        assert!(item1.value.abs() < 0.05, "avg s_n = {}", item1.value);
    }
}

// temporary probe
#[test]
#[ignore]
fn probe_n65_convergence() {
    let s = CircleSpectrum::enumerate(65).unwrap();
    let unit = Square::unit();
    let rect = unit.clipped();
    for res in [129usize, 258, 516, 1032, 2064, 4128] {
        let v = k1_pass(&s, &rect, res, 0xba12_57ab).unwrap();
        let vb = k1_pass(&s, &rect, res, 0xba12_57ac).unwrap();
        println!("res={res}: seedA={v:.6} seedB={vb:.6}");
    }
}
