// Numeric kernels index several parallel tables in lockstep, and the
// `!(x > 0)` comparisons intentionally reject NaN inputs.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments, clippy::type_complexity)]

//! Boundary-adapted random waves on the unit square.
//!
//! The ensemble under study is the random Dirichlet eigenfunction
//!
//! ```text
//! f_n(x) = 4/sqrt(N) * sum over classes {xi} of a_xi sin(pi xi1 x1) sin(pi xi2 x2)
//! ```
//!
//! where the `xi` run over lattice points on the circle `|xi|^2 = n` (one
//! representative per sign class), `N` is the number of lattice points and the
//! `a_xi` are i.i.d. standard Gaussians. The crate provides
//!
//! * exact integer/Gaussian-integer arithmetic and membership in the set `S`
//!   of sums of two squares ([`arith`]),
//! * lattice-point enumeration and the spectral measure's fourth Fourier
//!   coefficient in exact rational arithmetic ([`spectrum`]),
//! * exact counting of semi-correlations among lattice points ([`correlations`]),
//! * sampling and second moments of the Gaussian field ([`field`]),
//! * the pointwise Kac-Rice zero density, its perturbative expansion and box
//!   quadrature ([`kacrice`]),
//! * empirical nodal-length measurement via marching squares and Monte Carlo
//!   ([`nodal`]),
//! * construction of energy levels with prescribed angular statistics
//!   ([`constructor`]),
//! * the command-line surface ([`cli`]).

pub mod arith;
pub mod cli;
pub mod constructor;
pub mod correlations;
pub mod error;
pub mod field;
pub mod gridio;
pub mod kacrice;
pub mod nodal;
pub mod quad;
pub mod rng;
pub mod spectrum;

pub use error::{Error, Result};

/// Version string embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// An axis-aligned square `B(z, s)` centered at `z` with side `s`, together
/// with its clip against the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    pub center: (f64, f64),
    pub side: f64,
}

/// A clipped rectangle `[x0, x1] x [y0, y1]`, always inside the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

impl Square {
    pub fn new(center: (f64, f64), side: f64) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::Validation(format!(
                "box side must be positive, got {side}"
            )));
        }
        if !(0.0..=1.0).contains(&center.0) || !(0.0..=1.0).contains(&center.1) {
            return Err(Error::Validation(format!(
                "box center must lie in the unit square, got ({}, {})",
                center.0, center.1
            )));
        }
        let sq = Square { center, side };
        if sq.clipped().area() <= 0.0 {
            return Err(Error::Validation("box clips to zero area".into()));
        }
        Ok(sq)
    }

    /// The full unit square.
    pub fn unit() -> Self {
        Square {
            center: (0.5, 0.5),
            side: 1.0,
        }
    }

    /// `B(z, s) ∩ [0,1]^2`.
    pub fn clipped(&self) -> Rect {
        let h = self.side / 2.0;
        Rect {
            x0: (self.center.0 - h).max(0.0),
            x1: (self.center.0 + h).min(1.0),
            y0: (self.center.1 - h).max(0.0),
            y1: (self.center.1 + h).min(1.0),
        }
    }

    /// Area of the clipped rectangle.
    pub fn area(&self) -> f64 {
        self.clipped().area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping() {
        let b = Square::new((0.05, 0.05), 0.1).unwrap();
        let r = b.clipped();
        assert_eq!((r.x0, r.y0), (0.0, 0.0));
        assert!((r.area() - 0.01).abs() < 1e-15);
        assert!((Square::unit().area() - 1.0).abs() < 1e-15);
        // corner box sticking out gets clipped
        let c = Square::new((0.0, 0.0), 0.2).unwrap();
        assert!((c.area() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(Square::new((0.5, 0.5), 0.0).is_err());
        assert!(Square::new((1.5, 0.5), 0.1).is_err());
        assert!(Square::new((0.5, 0.5), -1.0).is_err());
    }
}
