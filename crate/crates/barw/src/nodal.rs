//! Empirical nodal-length measurement: marching-squares contour extraction,
//! the Monte Carlo estimator of the expected nodal length, and the
//! deterministic grid carried by non-squarefree levels.
//!
//! Marching squares uses linear interpolation on cell edges with the
//! center-value rule for saddle cells. Nodes with value >= 0 count as
//! positive. Segments lying entirely on the outer frame of the grid are
//! tallied separately: the frame is the deterministic boundary zero set, and
//! the interior length is the quantity compared against Kac-Rice.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, FieldSample};
use crate::rng;
use crate::spectrum::CircleSpectrum;
use crate::{Rect, Square};

/// Lengths extracted from one grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchResult {
    /// Polyline length away from the grid frame.
    pub interior: f64,
    /// Length of segments lying on the frame itself.
    pub boundary: f64,
}

/// A line segment in grid coordinates.
type Segment = ((f64, f64), (f64, f64));

/// Extract zero-set segments from a row-major grid (`values[iy * nx + ix]`),
/// in node-index coordinates.
pub fn extract_segments(values: &[f64], nx: usize, ny: usize) -> Vec<Segment> {
    assert_eq!(values.len(), nx * ny, "grid shape mismatch");
    let mut segments = Vec::new();
    if nx < 2 || ny < 2 {
        return segments;
    }
    let v = |ix: usize, iy: usize| values[iy * nx + ix];
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let v00 = v(ix, iy);
            let v10 = v(ix + 1, iy);
            let v01 = v(ix, iy + 1);
            let v11 = v(ix + 1, iy + 1);
            let mask = (v00 >= 0.0) as u8
                | ((v10 >= 0.0) as u8) << 1
                | ((v11 >= 0.0) as u8) << 2
                | ((v01 >= 0.0) as u8) << 3;
            if mask == 0 || mask == 15 {
                continue;
            }
            let x = ix as f64;
            let y = iy as f64;
            let bottom = || (x + v00 / (v00 - v10), y);
            let top = || (x + v01 / (v01 - v11), y + 1.0);
            let left = || (x, y + v00 / (v00 - v01));
            let right = || (x + 1.0, y + v10 / (v10 - v11));
            match mask {
                1 | 14 => segments.push((bottom(), left())),
                2 | 13 => segments.push((bottom(), right())),
                3 | 12 => segments.push((left(), right())),
                4 | 11 => segments.push((top(), right())),
                6 | 9 => segments.push((bottom(), top())),
                7 | 8 => segments.push((left(), top())),
                5 => {
                    // saddle: bl and tr positive; the center decides which
                    // diagonal the positive region occupies
                    let center = 0.25 * (v00 + v10 + v01 + v11);
                    if center >= 0.0 {
                        segments.push((bottom(), right()));
                        segments.push((top(), left()));
                    } else {
                        segments.push((bottom(), left()));
                        segments.push((top(), right()));
                    }
                }
                10 => {
                    let center = 0.25 * (v00 + v10 + v01 + v11);
                    if center >= 0.0 {
                        segments.push((bottom(), left()));
                        segments.push((top(), right()));
                    } else {
                        segments.push((bottom(), right()));
                        segments.push((top(), left()));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    segments
}

/// Total polyline length with anisotropic node spacing.
pub fn marching_length_scaled(
    values: &[f64],
    nx: usize,
    ny: usize,
    cell_w: f64,
    cell_h: f64,
) -> MarchResult {
    let segments = extract_segments(values, nx, ny);
    let on_frame = |p: (f64, f64)| {
        p.0 <= 0.0 || p.1 <= 0.0 || p.0 >= (nx - 1) as f64 || p.1 >= (ny - 1) as f64
    };
    let mut interior = 0.0;
    let mut boundary = 0.0;
    for (a, b) in segments {
        let len = ((b.0 - a.0) * cell_w).hypot((b.1 - a.1) * cell_h);
        if on_frame(a) && on_frame(b) {
            boundary += len;
        } else {
            interior += len;
        }
    }
    MarchResult { interior, boundary }
}

/// Interior polyline length of the extracted zero set of a square-cell grid.
pub fn nodal_length_marching(values: &[f64], nx: usize, ny: usize, cell: f64) -> f64 {
    marching_length_scaled(values, nx, ny, cell, cell).interior
}

// ---------------------------------------------------------------------------
// Monte Carlo estimator

/// One Monte Carlo trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialRecord {
    pub trial: u32,
    pub seed: u64,
    /// Interior nodal length within the box.
    pub length: f64,
    /// Length extracted on the grid frame (deterministic boundary zeros).
    pub boundary: f64,
    /// Failed the deterministic length bound; excluded from the mean.
    pub flagged: bool,
}

/// Aggregated Monte Carlo estimate of the expected nodal length.
#[derive(Debug, Clone)]
pub struct NodalEstimate {
    pub n: u64,
    pub square: Square,
    pub trials: u32,
    pub resolution: usize,
    pub master_seed: u64,
    pub mean_length: f64,
    pub std_error: f64,
    pub flagged: u32,
    pub records: Vec<TrialRecord>,
}

/// Deterministic sanity bound on one measured length:
/// `length / s <= c (s sqrt(n) + N)`.
pub fn deterministic_length_bound_check(
    length: f64,
    side: f64,
    n: u64,
    n_points: usize,
    c: f64,
) -> bool {
    length / side <= c * (side * (n as f64).sqrt() + n_points as f64)
}

/// Default grid resolution: 16 sqrt(n) nodes per unit, rounded up to a
/// multiple of the grid divisor `g` so grid nodes land exactly on the
/// deterministic lines of non-squarefree levels.
pub fn default_mc_resolution(spectrum: &CircleSpectrum) -> usize {
    let base = (16.0 * (spectrum.n as f64).sqrt()).ceil() as usize;
    let g = spectrum.fix.g as usize;
    if g > 1 {
        base.div_ceil(g) * g
    } else {
        base
    }
}

fn grid_axes(rect: &Rect, resolution: usize) -> (Vec<f64>, Vec<f64>) {
    let nx = ((rect.width() * resolution as f64).round() as usize).max(1) + 1;
    let ny = ((rect.height() * resolution as f64).round() as usize).max(1) + 1;
    let xs = (0..nx)
        .map(|i| rect.x0 + rect.width() * i as f64 / (nx - 1) as f64)
        .collect();
    let ys = (0..ny)
        .map(|i| rect.y0 + rect.height() * i as f64 / (ny - 1) as f64)
        .collect();
    (xs, ys)
}

/// Measure one sampled field on the box grid.
pub fn measure_sample(sample: &FieldSample, square: &Square, resolution: usize) -> MarchResult {
    let rect = square.clipped();
    let (xs, ys) = grid_axes(&rect, resolution);
    let values = sample.evaluate_grid(&xs, &ys);
    let hx = (xs[1] - xs[0]).abs();
    let hy = (ys[1] - ys[0]).abs();
    marching_length_scaled(&values, xs.len(), ys.len(), hx, hy)
}

/// Monte Carlo expected nodal length over independent samples; trial `i` uses
/// the seed derived from `(master_seed, i)`.
pub fn mc_expected_length(
    spectrum: &CircleSpectrum,
    square: &Square,
    trials: u32,
    resolution: usize,
    master_seed: u64,
) -> Result<NodalEstimate> {
    let seeds: Vec<u64> = (0..trials as u64)
        .map(|i| rng::derive(master_seed, i))
        .collect();
    let mut est = mc_with_seeds(spectrum, square, &seeds, resolution)?;
    est.master_seed = master_seed;
    Ok(est)
}

/// Same estimator with explicit per-trial seeds; rejects duplicates, which
/// would break trial independence.
pub fn mc_with_seeds(
    spectrum: &CircleSpectrum,
    square: &Square,
    seeds: &[u64],
    resolution: usize,
) -> Result<NodalEstimate> {
    if seeds.len() < 2 {
        return Err(Error::Validation("at least 2 trials required".into()));
    }
    {
        let mut sorted = seeds.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(
                "duplicate trial seeds violate the independence contract".into(),
            ));
        }
    }
    let min_res = (10.0 * (spectrum.n as f64).sqrt()).ceil() as usize;
    if resolution < min_res {
        return Err(Error::Validation(format!(
            "resolution {resolution} below the Nyquist guard 10 sqrt(n) = {min_res}"
        )));
    }
    if spectrum.contributing_classes().count() == 0 {
        return Err(Error::Validation(format!(
            "level {} has no contributing classes: the field vanishes identically",
            spectrum.n
        )));
    }
    let records: Vec<TrialRecord> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let sample = field::sample(spectrum, seed);
            let m = measure_sample(&sample, square, resolution);
            let flagged = !deterministic_length_bound_check(
                m.interior,
                square.side,
                spectrum.n,
                spectrum.len(),
                10.0,
            );
            TrialRecord {
                trial: i as u32,
                seed,
                length: m.interior,
                boundary: m.boundary,
                flagged,
            }
        })
        .collect();
    let kept: Vec<f64> = records
        .iter()
        .filter(|r| !r.flagged)
        .map(|r| r.length)
        .collect();
    if kept.len() < 2 {
        return Err(Error::CrossCheck(
            "fewer than 2 trials survived the length bound filter".into(),
        ));
    }
    let count = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / count;
    let var = kept.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(NodalEstimate {
        n: spectrum.n,
        square: *square,
        trials: seeds.len() as u32,
        resolution,
        master_seed: 0,
        mean_length: mean,
        std_error: (var / count).sqrt(),
        flagged: records.iter().filter(|r| r.flagged).count() as u32,
        records,
    })
}

// ---------------------------------------------------------------------------
// Deterministic grid

/// The grid `x_i = k/g` on which every realization of `f_n` vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicGrid {
    pub n: u64,
    pub g: u64,
    /// Interior line positions `k/g`, `k = 1..g-1` (same on both axes).
    pub lines: Vec<f64>,
}

/// Build the deterministic grid from the fix part of the level.
pub fn deterministic_grid(spectrum: &CircleSpectrum) -> DeterministicGrid {
    let g = spectrum.fix.g;
    DeterministicGrid {
        n: spectrum.n,
        g,
        lines: (1..g).map(|k| k as f64 / g as f64).collect(),
    }
}

impl DeterministicGrid {
    /// Total grid length inside the full unit square: `2 (g - 1)`.
    pub fn full_square_length(&self) -> f64 {
        2.0 * (self.g - 1) as f64
    }

    /// Grid length clipped to a rectangle.
    pub fn length_in(&self, rect: &Rect) -> f64 {
        let vertical: f64 = self
            .lines
            .iter()
            .filter(|&&x| x >= rect.x0 && x <= rect.x1)
            .count() as f64
            * rect.height();
        let horizontal: f64 = self
            .lines
            .iter()
            .filter(|&&y| y >= rect.y0 && y <= rect.y1)
            .count() as f64
            * rect.width();
        vertical + horizontal
    }
}
