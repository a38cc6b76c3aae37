//! Eigenvalue routines.
//!
//! Tridiagonal matrices (all the Dirichlet-truncated Hamiltonians built from
//! three-point stencils) go through Sturm-sequence bisection, which also
//! handles sign-symmetric non-symmetric tridiagonals (`a_{i,i+1} a_{i+1,i} >= 0`):
//! their characteristic polynomial depends only on the diagonal and the
//! off-diagonal products. Anything else falls back to a dense Hermitian solve.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Real tridiagonal matrix with `upper[i] = A[i][i+1]`, `lower[i] = A[i+1][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl Tridiagonal {
    /// Extracts the three bands of a row-major `m x m` block; `None` if the
    /// block has imaginary parts or entries outside the band.
    pub fn from_dense(block: &[C64], m: usize) -> Option<Self> {
        debug_assert_eq!(block.len(), m * m);
        let mut t = Tridiagonal {
            diag: vec![0.0; m],
            upper: vec![0.0; m.saturating_sub(1)],
            lower: vec![0.0; m.saturating_sub(1)],
        };
        for i in 0..m {
            for j in 0..m {
                let z = block[i * m + j];
                if z.im != 0.0 {
                    return None;
                }
                match j as isize - i as isize {
                    0 => t.diag[i] = z.re,
                    1 => t.upper[i] = z.re,
                    -1 => t.lower[j] = z.re,
                    _ if z.re != 0.0 => return None,
                    _ => {}
                }
            }
        }
        Some(t)
    }

    pub fn symmetric(diag: Vec<f64>, off: Vec<f64>) -> Self {
        Self {
            diag,
            upper: off.clone(),
            lower: off,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Off-diagonal products `upper[i] * lower[i]`.
    pub fn products(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(a, b)| a * b).collect()
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let m = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let mut r = 0.0;
            if i > 0 {
                r += self.lower[i - 1].abs();
            }
            if i + 1 < m {
                r += self.upper[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn checked_products(&self) -> Result<Vec<f64>> {
        let prod = self.products();
        if prod.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::Validation(
                "tridiagonal off-diagonal products must be non-negative".into(),
            ));
        }
        Ok(prod)
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> Result<usize> {
        Ok(sturm_count(&self.diag, &self.checked_products()?, lambda))
    }

    /// The `k` smallest eigenvalues, ascending.
    pub fn lowest(&self, k: usize) -> Result<Vec<f64>> {
        let prod = self.checked_products()?;
        let k = k.min(self.len());
        let (lo, hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs() + hi.abs()) + f64::MIN_POSITIVE;
        Ok((0..k)
            .map(|j| bisect(&self.diag, &prod, j, lo - pad, hi + pad))
            .collect())
    }

    /// All eigenvalues; also returns how many real roots the Sturm count
    /// certifies inside the Gershgorin interval (equal to `len()` when the
    /// whole spectrum is real).
    pub fn all(&self) -> Result<(Vec<f64>, usize)> {
        let prod = self.checked_products()?;
        let (lo, hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs() + hi.abs()) + f64::MIN_POSITIVE;
        let certified = sturm_count(&self.diag, &prod, hi + pad) - sturm_count(&self.diag, &prod, lo - pad);
        Ok((self.lowest(self.len())?, certified))
    }
}

/// Sturm count for the tridiagonal with diagonal `diag` and off-diagonal
/// products `prod`.
pub fn sturm_count(diag: &[f64], prod: &[f64], lambda: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        let coupling = if i == 0 { 0.0 } else { prod[i - 1] / q };
        q = d - lambda - coupling;
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + lambda.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect(diag: &[f64], prod: &[f64], index: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..256 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, prod, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalues of a Hermitian row-major `m x m` block, ascending.
pub fn hermitian_eigenvalues(block: &[C64], m: usize) -> Vec<f64> {
    let mat = DMatrix::from_row_slice(m, m, block);
    let mut ev: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `k` lowest eigenvalues of a Hermitian block, using the tridiagonal path
/// when the block allows it.
pub fn lowest_hermitian(block: &[C64], m: usize, k: usize) -> Vec<f64> {
    match Tridiagonal::from_dense(block, m) {
        Some(t) if t.upper == t.lower => t.lowest(k).expect("symmetric products are squares"),
        _ => {
            let mut ev = hermitian_eigenvalues(block, m);
            ev.truncate(k);
            ev
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(m: usize) -> Tridiagonal {
        Tridiagonal::symmetric(vec![2.0; m], vec![-1.0; m - 1])
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let m = 40;
        let t = laplacian(m);
        let ev = t.lowest(m).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let theta = (k + 1) as f64 * std::f64::consts::PI / (2.0 * (m + 1) as f64);
            let exact = 4.0 * theta.sin().powi(2);
            assert!((v - exact).abs() < 1e-13, "{k}: {v} vs {exact}");
        }
    }

    #[test]
    fn agrees_with_dense_solver() {
        let m = 30;
        let diag: Vec<f64> = (0..m).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let off: Vec<f64> = (0..m - 1).map(|i| 0.4 + 0.1 * (i % 3) as f64).collect();
        let t = Tridiagonal::symmetric(diag.clone(), off.clone());
        let mut dense = vec![C64::new(0.0, 0.0); m * m];
        for i in 0..m {
            dense[i * m + i] = C64::new(diag[i], 0.0);
            if i + 1 < m {
                dense[i * m + i + 1] = C64::new(off[i], 0.0);
                dense[(i + 1) * m + i] = C64::new(off[i], 0.0);
            }
        }
        let a = t.lowest(m).unwrap();
        let b = hermitian_eigenvalues(&dense, m);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(Tridiagonal::from_dense(&dense, m).unwrap(), t);
    }

    #[test]
    fn similarity_scaling_preserves_spectrum() {
        let m = 25;
        let base = laplacian(m);
        let w: Vec<f64> = (0..m).map(|i| (0.3 * i as f64).exp()).collect();
        let scaled = Tridiagonal {
            diag: base.diag.clone(),
            upper: (0..m - 1).map(|i| w[i] * base.upper[i] / w[i + 1]).collect(),
            lower: (0..m - 1).map(|i| w[i + 1] * base.lower[i] / w[i]).collect(),
        };
        let (a, certified) = scaled.all().unwrap();
        assert_eq!(certified, m);
        let b = base.lowest(m).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-13 * y.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_negative_products() {
        let t = Tridiagonal {
            diag: vec![0.0, 0.0],
            upper: vec![1.0],
            lower: vec![-1.0],
        };
        assert!(t.lowest(2).is_err());
    }

    #[test]
    fn non_tridiagonal_blocks_fall_back_to_dense() {
        let m = 3;
        let mut dense = vec![C64::new(0.0, 0.0); 9];
        dense[0] = C64::new(1.0, 0.0);
        dense[2] = C64::new(0.0, 1.0);
        dense[6] = C64::new(0.0, -1.0);
        dense[4] = C64::new(3.0, 0.0);
        dense[8] = C64::new(1.0, 0.0);
        assert!(Tridiagonal::from_dense(&dense, m).is_none());
        let ev = lowest_hermitian(&dense, m, 3);
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2
        assert!((ev[0]).abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12 && (ev[2] - 3.0).abs() < 1e-12);
    }
}
