//! Sampling and exact second-moment evaluation of the boundary-adapted
//! Gaussian wave
//!
//! ```text
//! f_n(x) = 4/sqrt(N) sum_c a_c sin(pi xi1 x1) sin(pi xi2 x2)
//! ```
//!
//! with one i.i.d. standard normal `a_c` per orbit class whose representative
//! has both coordinates nonzero (axis classes multiply `sin(0)` and drop out).
//! The coefficients are real; this reproduces the covariance
//! `r_n(x,y) = (16/N) sum_c sin sin sin sin` exactly, which is the
//! authoritative definition of the ensemble.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::spectrum::CircleSpectrum;

/// One draw of the Gaussian coefficients for a given spectrum.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub spectrum: CircleSpectrum,
    /// One coefficient per contributing class, in class order.
    pub coefficients: Vec<f64>,
    pub seed: u64,
}

/// Pointwise second moments of the field and its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoments {
    /// `Var f(x) = r_n(x, x)`.
    pub var_f: f64,
    /// `Cov(f, d_i f)`.
    pub cross: [f64; 2],
    /// `Cov(d_i f, d_j f)` symmetric 2x2.
    pub grad: [[f64; 2]; 2],
}

/// Draw one sample. Coefficient `i` comes from the stream `(seed, i)`, so the
/// draw is independent of evaluation order and thread count.
pub fn sample(spectrum: &CircleSpectrum, seed: u64) -> FieldSample {
    let coefficients: Vec<f64> = spectrum
        .contributing_classes()
        .enumerate()
        .map(|(i, _)| rng::stream(seed, i as u64).sample(StandardNormal))
        .collect();
    FieldSample {
        spectrum: spectrum.clone(),
        coefficients,
        seed,
    }
}

impl FieldSample {
    /// Build a sample with explicit coefficients (tests, synthetic checks).
    pub fn with_coefficients(spectrum: &CircleSpectrum, coefficients: Vec<f64>) -> Result<Self> {
        let expected = spectrum.contributing_classes().count();
        if coefficients.len() != expected {
            return Err(Error::Validation(format!(
                "expected {expected} coefficients (one per contributing class), got {}",
                coefficients.len()
            )));
        }
        Ok(FieldSample {
            spectrum: spectrum.clone(),
            coefficients,
            seed: 0,
        })
    }

    /// Normalization `4 / sqrt(N)`.
    pub fn norm(&self) -> f64 {
        4.0 / (self.spectrum.len() as f64).sqrt()
    }

    /// Evaluate the field at a point of the unit square.
    pub fn evaluate(&self, x: (f64, f64)) -> f64 {
        let mut acc = 0.0;
        for (class, &a) in self.spectrum.contributing_classes().zip(&self.coefficients) {
            let (x1, x2) = class.rep;
            acc += a
                * (std::f64::consts::PI * x1 as f64 * x.0).sin()
                * (std::f64::consts::PI * x2 as f64 * x.1).sin();
        }
        self.norm() * acc
    }

    /// Evaluate on the tensor grid `xs × ys`, row-major with the row index
    /// running over `ys`. Per-class sine tables along each axis replace
    /// per-node transcendental calls.
    pub fn evaluate_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let classes: Vec<(i64, i64)> = self
            .spectrum
            .contributing_classes()
            .map(|c| c.rep)
            .collect();
        let sx = sine_table(&classes, xs, true);
        let sy = sine_table(&classes, ys, false);
        let norm = self.norm();
        let mut out = vec![0.0; xs.len() * ys.len()];
        for (iy, row) in out.chunks_mut(xs.len()).enumerate() {
            for (c, &a) in self.coefficients.iter().enumerate() {
                let ay = a * sy[c * ys.len() + iy];
                if ay == 0.0 {
                    continue;
                }
                let sx_c = &sx[c * xs.len()..(c + 1) * xs.len()];
                for (v, &s) in row.iter_mut().zip(sx_c) {
                    *v += ay * s;
                }
            }
        }
        for v in &mut out {
            *v *= norm;
        }
        out
    }
}

fn sine_table(classes: &[(i64, i64)], coords: &[f64], first: bool) -> Vec<f64> {
    let mut table = vec![0.0; classes.len() * coords.len()];
    for (c, &(x1, x2)) in classes.iter().enumerate() {
        let freq = std::f64::consts::PI * if first { x1 } else { x2 } as f64;
        for (i, &t) in coords.iter().enumerate() {
            table[c * coords.len() + i] = (freq * t).sin();
        }
    }
    table
}

/// The covariance `r_n(x, y)`, an exact finite trigonometric sum.
pub fn covariance(spectrum: &CircleSpectrum, x: (f64, f64), y: (f64, f64)) -> f64 {
    let mut acc = 0.0;
    for class in spectrum.contributing_classes() {
        let (a, b) = class.rep;
        let (fa, fb) = (
            std::f64::consts::PI * a as f64,
            std::f64::consts::PI * b as f64,
        );
        acc += (fa * x.0).sin() * (fb * x.1).sin() * (fa * y.0).sin() * (fb * y.1).sin();
    }
    16.0 / spectrum.len() as f64 * acc
}

/// Closed-form second moments at `x`: every entry is a `(16/N)`-weighted
/// trigonometric sum obtained by differentiating the covariance.
pub fn second_moments(spectrum: &CircleSpectrum, x: (f64, f64)) -> SecondMoments {
    let mut var = 0.0;
    let mut c1 = 0.0;
    let mut c2 = 0.0;
    let mut g11 = 0.0;
    let mut g12 = 0.0;
    let mut g22 = 0.0;
    let pi = std::f64::consts::PI;
    for class in spectrum.contributing_classes() {
        let (a, b) = class.rep;
        let (xi1, xi2) = (a as f64, b as f64);
        let (s1, co1) = (pi * xi1 * x.0).sin_cos();
        let (s2, co2) = (pi * xi2 * x.1).sin_cos();
        var += s1 * s1 * s2 * s2;
        c1 += xi1 * s1 * co1 * s2 * s2;
        c2 += xi2 * s2 * co2 * s1 * s1;
        g11 += xi1 * xi1 * co1 * co1 * s2 * s2;
        g12 += xi1 * xi2 * s1 * co1 * s2 * co2;
        g22 += xi2 * xi2 * s1 * s1 * co2 * co2;
    }
    let w = 16.0 / spectrum.len() as f64;
    SecondMoments {
        var_f: w * var,
        cross: [w * pi * c1, w * pi * c2],
        grad: [
            [w * pi * pi * g11, w * pi * pi * g12],
            [w * pi * pi * g12, w * pi * pi * g22],
        ],
    }
}

impl SecondMoments {
    /// Conditional gradient covariance `Cov(grad f | f = 0)`.
    pub fn conditional_grad(&self) -> Result<[[f64; 2]; 2]> {
        if self.var_f <= 0.0 {
            return Err(Error::DegeneratePoint(f64::NAN, f64::NAN));
        }
        let v = self.var_f;
        Ok([
            [
                self.grad[0][0] - self.cross[0] * self.cross[0] / v,
                self.grad[0][1] - self.cross[0] * self.cross[1] / v,
            ],
            [
                self.grad[1][0] - self.cross[0] * self.cross[1] / v,
                self.grad[1][1] - self.cross[1] * self.cross[1] / v,
            ],
        ])
    }
}
