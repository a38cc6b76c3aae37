//! Smooth test functions used to compare operators by their action.
//!
//! Two discretizations of the same continuum operator (say `D1 * D1` and
//! `D2`) differ entrywise by O(1/h^2) but agree to O(h^2) when applied to
//! smooth samples, so agreement is measured on probes.

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::grid::Grid1D;
use crate::linop::LinOp;

/// `u(x) = exp(-(x - center)^2 / 2)` with exact derivatives up to order 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianProbe {
    pub center: f64,
}

impl Default for GaussianProbe {
    fn default() -> Self {
        Self { center: 0.3 }
    }
}

impl GaussianProbe {
    /// `[u, u', u'', u''', u'''']` at `x`.
    pub fn derivatives(&self, x: f64) -> [f64; 5] {
        let y = x - self.center;
        let u = (-0.5 * y * y).exp();
        let y2 = y * y;
        [
            u,
            -y * u,
            (y2 - 1.0) * u,
            (3.0 * y - y * y2) * u,
            (y2 * y2 - 6.0 * y2 + 3.0) * u,
        ]
    }

    pub fn samples(&self, g: &Grid1D) -> Vec<C64> {
        g.nodes()
            .into_iter()
            .map(|x| C64::new(self.derivatives(x)[0], 0.0))
            .collect()
    }

    /// Max over `g.interior(margin)` of `sum_k weights[k] * |u^(k)|`,
    /// evaluated pointwise with the given per-node coefficient vectors.
    pub fn derivative_bound(&self, g: &Grid1D, margin: usize, weight: impl Fn(usize, &[f64; 5]) -> f64) -> f64 {
        g.interior(margin)
            .map(|i| weight(i, &self.derivatives(g.node(i))))
            .fold(0.0, f64::max)
    }
}

/// Max interior `|(A - B) u|` for the probe samples `u`.
pub fn action_gap(a: &LinOp, b: &LinOp, probe: &GaussianProbe, margin: usize) -> Result<f64> {
    let u = probe.samples(a.grid());
    let au = a.apply(&u)?;
    let bu = b.apply(&u)?;
    Ok(a.grid()
        .interior(margin)
        .map(|i| (au[i] - bu[i]).norm())
        .fold(0.0, f64::max))
}
