//! Dense complex square matrices bound to a grid.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::tolerance::INTERIOR_MARGIN;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Row-major `n x n` complex matrix acting on functions sampled on `grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinOp {
    grid: Grid1D,
    data: Vec<C64>,
}

impl LinOp {
    pub fn zeros(grid: Grid1D) -> Self {
        let n = grid.n();
        Self {
            grid,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(grid: Grid1D) -> Self {
        Self::diagonal_real(grid, &vec![1.0; grid.n()])
    }

    pub fn diagonal(grid: Grid1D, d: &[C64]) -> Result<Self> {
        check_len(grid.n(), d.len())?;
        let mut op = Self::zeros(grid);
        for (i, &v) in d.iter().enumerate() {
            op.set(i, i, v);
        }
        Ok(op)
    }

    /// Panics if `d.len() != grid.n()`.
    pub fn diagonal_real(grid: Grid1D, d: &[f64]) -> Self {
        assert_eq!(d.len(), grid.n());
        let mut op = Self::zeros(grid);
        for (i, &v) in d.iter().enumerate() {
            op.set_re(i, i, v);
        }
        op
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let n = self.dim();
        self.data[i * n + j] = v;
    }

    #[inline]
    pub fn set_re(&mut self, i: usize, j: usize, v: f64) {
        self.set(i, j, C64::new(v, 0.0));
    }

    pub fn row(&self, i: usize) -> &[C64] {
        let n = self.dim();
        &self.data[i * n..(i + 1) * n]
    }

    fn same_grid(&self, other: &LinOp) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scale(&self, c: impl Into<C64>) -> LinOp {
        let c = c.into();
        LinOp {
            grid: self.grid,
            data: self.data.iter().map(|&z| c * z).collect(),
        }
    }

    pub fn scale_mut(&mut self, c: impl Into<C64>) {
        let c = c.into();
        self.data.iter_mut().for_each(|z| *z *= c);
    }

    pub fn add(&self, other: &LinOp) -> Result<LinOp> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &LinOp) -> Result<LinOp> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &LinOp, op: impl Fn(C64, C64) -> C64) -> Result<LinOp> {
        self.same_grid(other)?;
        Ok(LinOp {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// Adds `d[i]` to the diagonal entries.
    pub fn add_diagonal(&mut self, d: &[f64]) -> Result<()> {
        check_len(self.dim(), d.len())?;
        for (i, &v) in d.iter().enumerate() {
            let z = self.get(i, i);
            self.set(i, i, z + v);
        }
        Ok(())
    }

    /// `diag(d) * self`.
    pub fn left_diag(&self, d: &[C64]) -> Result<LinOp> {
        check_len(self.dim(), d.len())?;
        let n = self.dim();
        let mut out = self.clone();
        for (i, row) in out.data.chunks_mut(n).enumerate() {
            row.iter_mut().for_each(|z| *z = d[i] * *z);
        }
        Ok(out)
    }

    /// `self * diag(d)`.
    pub fn right_diag(&self, d: &[C64]) -> Result<LinOp> {
        check_len(self.dim(), d.len())?;
        let n = self.dim();
        let mut out = self.clone();
        for row in out.data.chunks_mut(n) {
            row.iter_mut().zip(d).for_each(|(z, &s)| *z *= s);
        }
        Ok(out)
    }

    /// Matrix product `self * other`.
    ///
    /// Exact zeros of `self` are skipped, which makes products of the banded
    /// operators used here cost O(n^2 * bandwidth) without changing results.
    pub fn matmul(&self, other: &LinOp) -> Result<LinOp> {
        self.same_grid(other)?;
        let n = self.dim();
        let mut data = vec![ZERO; n * n];
        let row_product = |i: usize, out: &mut [C64]| {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            data.par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, out)| row_product(i, out));
        }
        #[cfg(not(feature = "parallel"))]
        for (i, out) in data.chunks_mut(n).enumerate() {
            row_product(i, out);
        }
        Ok(LinOp {
            grid: self.grid,
            data,
        })
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_len(self.dim(), v.len())?;
        Ok((0..self.dim())
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| **a != ZERO)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Panics on length mismatch.
    pub fn apply_real(&self, v: &[f64]) -> Vec<C64> {
        let v: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.apply(&v).expect("vector length must match grid")
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> LinOp {
        let n = self.dim();
        let mut out = LinOp::zeros(self.grid);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &LinOp) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest `|A_ij - B_ij|` over rows and columns `margin..n-margin`.
    pub fn max_abs_diff_block(&self, other: &LinOp, margin: usize) -> Result<f64> {
        self.same_grid(other)?;
        let r = self.grid.interior(margin);
        let mut m = 0.0f64;
        for i in r.clone() {
            for j in r.clone() {
                m = m.max((self.get(i, j) - other.get(i, j)).norm());
            }
        }
        Ok(m)
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// Principal submatrix over `range`, as a row-major vector.
    pub fn principal_block(&self, range: std::ops::Range<usize>) -> Vec<C64> {
        let m = range.len();
        let mut out = Vec::with_capacity(m * m);
        for i in range.clone() {
            out.extend_from_slice(&self.row(i)[range.clone()]);
        }
        out
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

pub fn commutator(a: &LinOp, b: &LinOp) -> Result<LinOp> {
    a.matmul(b)?.sub(&b.matmul(a)?)
}

pub fn anticommutator(a: &LinOp, b: &LinOp) -> Result<LinOp> {
    a.matmul(b)?.add(&b.matmul(a)?)
}

/// Max `|A - A^dagger|` over the interior block (rows and columns `2..n-2`).
pub fn hermiticity_defect(a: &LinOp) -> f64 {
    hermiticity_defect_block(a, INTERIOR_MARGIN)
}

pub fn hermiticity_defect_block(a: &LinOp, margin: usize) -> f64 {
    let r = a.grid().interior(margin);
    let mut m = 0.0f64;
    for i in r.clone() {
        for j in r.clone() {
            if j < i {
                continue;
            }
            m = m.max((a.get(i, j) - a.get(j, i).conj()).norm());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_op(grid: Grid1D, vals: &[(f64, f64)]) -> LinOp {
        let mut op = LinOp::zeros(grid);
        let n = grid.n();
        for i in 0..n {
            for j in 0..n {
                let (re, im) = vals[(i * n + j) % vals.len()];
                op.set(i, j, C64::new(re * (i + 1) as f64, im - j as f64));
            }
        }
        op
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = LinOp::identity(Grid1D::new(0.0, 1.0, 5).unwrap());
        let b = LinOp::identity(Grid1D::new(0.0, 2.0, 5).unwrap());
        assert!(matches!(a.add(&b), Err(Error::GridMismatch)));
        assert!(matches!(a.matmul(&b), Err(Error::GridMismatch)));
        assert!(matches!(commutator(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn self_commutator_is_exactly_zero() {
        let g = Grid1D::new(0.0, 1.0, 6).unwrap();
        let a = random_op(g, &[(0.3, -1.2), (2.0, 0.7), (-0.1, 0.0)]);
        assert_eq!(commutator(&a, &a).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn diagonal_scaling_matches_products() {
        let g = Grid1D::new(0.0, 1.0, 5).unwrap();
        let a = random_op(g, &[(1.0, 2.0), (-0.5, 0.25)]);
        let d: Vec<C64> = (0..5).map(|k| C64::new(k as f64 + 1.0, -0.5)).collect();
        let dm = LinOp::diagonal(g, &d).unwrap();
        assert!(a.left_diag(&d).unwrap().max_abs_diff(&dm.matmul(&a).unwrap()).unwrap() < 1e-12);
        assert!(a.right_diag(&d).unwrap().max_abs_diff(&a.matmul(&dm).unwrap()).unwrap() < 1e-12);
    }

    proptest! {
        #[test]
        fn adjoint_is_involution_and_reverses_products(
            vals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 7..20),
            shift in 0usize..5,
        ) {
            let g = Grid1D::new(-1.0, 1.0, 6).unwrap();
            let a = random_op(g, &vals);
            let mut rotated = vals.clone();
            rotated.rotate_left(shift % vals.len());
            let b = random_op(g, &rotated);
            prop_assert_eq!(a.adjoint().adjoint(), a.clone());
            let lhs = a.matmul(&b).unwrap().adjoint();
            let rhs = b.adjoint().matmul(&a.adjoint()).unwrap();
            let scale = a.max_abs() * b.max_abs() * 6.0;
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 100.0 * f64::EPSILON * 6.0 * scale);
        }
    }
}
