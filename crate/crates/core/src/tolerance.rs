//! Tolerance model shared by every operator assertion.
//!
//! Discretization checks use `c1 * scale * h^2 + c2 * eps * n`, where `scale`
//! is a bound on the derivatives that enter the leading truncation error of
//! the quantity being checked. Exact-arithmetic identities use the rounding
//! bound `rounding * eps * n * magnitude`.

/// Rows/columns excluded at each end for single-stencil operators.
pub const INTERIOR_MARGIN: usize = 2;

/// Rows excluded at each end when the operator is a product of two
/// first-derivative matrices (one-sided boundary rows spread by one stencil
/// width per factor, plus one more through the transposed boundary row).
pub const COMPOSITE_MARGIN: usize = 4;

/// Lower/upper bounds on the error ratio observed when `h` is halved for a
/// second-order scheme.
pub const ORDER2_RATIO: (f64, f64) = (3.5, 4.5);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub c1: f64,
    pub c2: f64,
    pub rounding: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            c1: 10.0,
            c2: 100.0,
            rounding: 100.0,
        }
    }
}

impl Tolerances {
    pub fn discretization(&self, h: f64, n: usize, scale: f64) -> f64 {
        self.c1 * scale * h * h + self.c2 * f64::EPSILON * n as f64
    }

    pub fn machine(&self, n: usize, magnitude: f64) -> f64 {
        self.rounding * f64::EPSILON * n as f64 * magnitude
    }
}

pub fn is_second_order(ratio: f64) -> bool {
    (ORDER2_RATIO.0..=ORDER2_RATIO.1).contains(&ratio)
}

/// Fraction of the domain width trimmed from each end for residual norms
/// that are compared across resolutions.
pub const EDGE_FRACTION: f64 = 0.02;

/// Node indices inside `[x_min + d, x_max - d]` with
/// `d = max(EDGE_FRACTION * width, COMPOSITE_MARGIN * h)`. The region is
/// fixed in physical units, so nested grids measure the same set of points.
pub fn physical_interior(g: &crate::grid::Grid1D) -> std::ops::Range<usize> {
    let width = g.x_max() - g.x_min();
    let d = (EDGE_FRACTION * width).max(COMPOSITE_MARGIN as f64 * g.h());
    let lo = ((d / g.h()) - 1e-9).ceil() as usize;
    g.interior(lo)
}
