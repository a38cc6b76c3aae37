//! Uniform 1-D lattice and second-order finite-difference matrices.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::linop::LinOp;

/// Uniform grid with `n` nodes at `x_min + k * h`, `k = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Validation(format!("grid needs n >= 3, got {n}")));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::Validation(format!(
                "grid needs x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        Ok(Self { x_min, x_max, n, h })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n - 1 {
            self.x_max
        } else {
            self.x_min + k as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Indices `margin..n-margin`.
    pub fn interior(&self, margin: usize) -> Range<usize> {
        let lo = margin.min(self.n);
        let hi = self.n.saturating_sub(margin).max(lo);
        lo..hi
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.x_min) / self.h).round();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|k| f(self.node(k))).collect()
    }
}

/// Real first- and second-derivative matrices on `g`.
///
/// Interior rows are the central stencils; the two boundary rows use
/// one-sided second-order stencils so the matrices are total. With only three
/// nodes the second difference falls back to the three-point row.
pub fn derivative_matrices(g: &Grid1D) -> (LinOp, LinOp) {
    let n = g.n();
    let h = g.h();
    let mut d1 = LinOp::zeros(*g);
    let mut d2 = LinOp::zeros(*g);

    let c1 = 1.0 / (2.0 * h);
    let c2 = 1.0 / (h * h);
    for i in 1..n - 1 {
        d1.set_re(i, i - 1, -c1);
        d1.set_re(i, i + 1, c1);
        d2.set_re(i, i - 1, c2);
        d2.set_re(i, i, -2.0 * c2);
        d2.set_re(i, i + 1, c2);
    }

    d1.set_re(0, 0, -3.0 * c1);
    d1.set_re(0, 1, 4.0 * c1);
    d1.set_re(0, 2, -c1);
    d1.set_re(n - 1, n - 1, 3.0 * c1);
    d1.set_re(n - 1, n - 2, -4.0 * c1);
    d1.set_re(n - 1, n - 3, c1);

    if n >= 4 {
        for (j, w) in [2.0, -5.0, 4.0, -1.0].into_iter().enumerate() {
            d2.set_re(0, j, w * c2);
            d2.set_re(n - 1, n - 1 - j, w * c2);
        }
    } else {
        for (j, w) in [1.0, -2.0, 1.0].into_iter().enumerate() {
            d2.set_re(0, j, w * c2);
            d2.set_re(n - 1, n - 1 - j, w * c2);
        }
    }
    (d1, d2)
}
