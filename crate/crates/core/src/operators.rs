//! Canonical operators `x`, `P = -i d/dx`, and the deformed momentum
//! `P_(f) = P + i f'`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::grid::{derivative_matrices, Grid1D};
use crate::linop::LinOp;

pub use crate::linop::{anticommutator, commutator, hermiticity_defect};

/// Largest `|f|` for which `e^{+-f}` is formed explicitly.
pub const MAX_EXPONENT: f64 = 300.0;

pub fn position_operator(g: &Grid1D) -> LinOp {
    LinOp::diagonal_real(*g, &g.nodes())
}

pub fn momentum_operator(g: &Grid1D) -> LinOp {
    let (d1, _) = derivative_matrices(g);
    d1.scale(C64::new(0.0, -1.0))
}

/// `P + i diag(f')`, with `f'` exact for polynomial `f`.
pub fn deformed_momentum(g: &Grid1D, f: &FunctionSpec) -> Result<LinOp> {
    let fp = f.derivative_values(g, 1)?;
    let mut p = momentum_operator(g);
    for (i, v) in fp.into_iter().enumerate() {
        let z = p.get(i, i);
        p.set(i, i, z + C64::new(0.0, v));
    }
    Ok(p)
}

/// `diag(e^f) P diag(e^{-f})`.
pub fn deformed_momentum_by_similarity(g: &Grid1D, f: &FunctionSpec) -> Result<LinOp> {
    let (up, down) = exp_weights(g, f)?;
    momentum_operator(g).left_diag(&up)?.right_diag(&down)
}

/// `(e^f, e^{-f})` sampled on the grid; rejects `max |f| > 300`.
pub fn exp_weights(g: &Grid1D, f: &FunctionSpec) -> Result<(Vec<C64>, Vec<C64>)> {
    let v = f.values(g)?;
    let peak = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if peak > MAX_EXPONENT || !peak.is_finite() {
        return Err(Error::Range(format!(
            "max |f| = {peak} exceeds {MAX_EXPONENT}; exp(f) would overflow"
        )));
    }
    let up = v.iter().map(|x| C64::new(x.exp(), 0.0)).collect();
    let down = v.iter().map(|x| C64::new((-x).exp(), 0.0)).collect();
    Ok((up, down))
}

pub fn adjoint(a: &LinOp) -> LinOp {
    a.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{action_gap, GaussianProbe};
    use crate::tolerance::{Tolerances, INTERIOR_MARGIN};

    const I: C64 = C64::new(0.0, 1.0);

    fn poly(c: &[f64]) -> FunctionSpec {
        FunctionSpec::polynomial(c.to_vec()).unwrap()
    }

    #[test]
    fn position_is_diagonal() {
        let g = Grid1D::new(-1.0, 1.0, 3).unwrap();
        let x = position_operator(&g);
        assert_eq!(x, LinOp::diagonal_real(g, &[-1.0, 0.0, 1.0]));
        let v = x.apply_real(&[1.0, 1.0, 1.0]);
        assert_eq!(v.iter().map(|z| z.re).collect::<Vec<_>>(), g.nodes());
        assert_eq!(hermiticity_defect(&x), 0.0);
    }

    #[test]
    fn momentum_annihilates_constants_and_is_hermitian_inside() {
        let g = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let p = momentum_operator(&g);
        let v = p.apply_real(&vec![1.0; 101]);
        assert!(v.iter().all(|z| z.norm() == 0.0));
        assert_eq!(hermiticity_defect(&p), 0.0);
    }

    #[test]
    fn plane_wave_is_an_eigenfunction() {
        let err = |n: usize| {
            let g = Grid1D::new(-3.0, 3.0, n).unwrap();
            let p = momentum_operator(&g);
            let u: Vec<C64> = g.nodes().iter().map(|&x| (I * x).exp()).collect();
            let pu = p.apply(&u).unwrap();
            g.interior(1).map(|i| (pu[i] - u[i]).norm()).fold(0.0, f64::max)
        };
        let (a, b) = (err(301), err(601));
        let h = 6.0 / 300.0;
        // sin(kh)/h - k = -k^3 h^2 / 6 + ...
        assert!(a <= h * h / 6.0 * 1.001);
        assert!((3.5..4.5).contains(&(a / b)));
    }

    #[test]
    fn zero_deformation_is_plain_momentum() {
        let g = Grid1D::new(-2.0, 2.0, 41).unwrap();
        assert_eq!(deformed_momentum(&g, &FunctionSpec::zero()).unwrap(), momentum_operator(&g));
        assert_eq!(
            deformed_momentum_by_similarity(&g, &FunctionSpec::zero()).unwrap(),
            momentum_operator(&g)
        );
    }

    #[test]
    fn linear_deformation_adds_i_identity() {
        let g = Grid1D::new(-2.0, 2.0, 41).unwrap();
        let pf = deformed_momentum(&g, &poly(&[0.0, 1.0])).unwrap();
        let expected = momentum_operator(&g).add(&LinOp::identity(g).scale(I)).unwrap();
        assert_eq!(pf, expected);
        assert_eq!(hermiticity_defect(&pf), 2.0);
        let adj = pf.adjoint();
        let minus = momentum_operator(&g).sub(&LinOp::identity(g).scale(I)).unwrap();
        assert_eq!(adj.max_abs_diff_block(&minus, INTERIOR_MARGIN).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_deformation_adds_i_position() {
        let g = Grid1D::new(-2.0, 2.0, 41).unwrap();
        let pf = deformed_momentum(&g, &poly(&[0.0, 0.0, 0.5])).unwrap();
        let diff = pf.sub(&momentum_operator(&g)).unwrap();
        assert_eq!(diff, position_operator(&g).scale(I));
    }

    #[test]
    fn similarity_adjoint_is_reversed_similarity() {
        let g = Grid1D::new(-1.0, 1.0, 21).unwrap();
        let f = poly(&[0.1, 0.4, -0.3]);
        let (up, down) = exp_weights(&g, &f).unwrap();
        let s = deformed_momentum_by_similarity(&g, &f).unwrap();
        let p = momentum_operator(&g);
        let rhs = p.adjoint().left_diag(&down).unwrap().right_diag(&up).unwrap();
        assert!(s.adjoint().max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn constructions_agree_to_second_order() {
        let probe = GaussianProbe::default();
        let gap = |n: usize| {
            let g = Grid1D::new(-5.0, 5.0, n).unwrap();
            let f = poly(&[0.0, 1.0]);
            let a = deformed_momentum(&g, &f).unwrap();
            let b = deformed_momentum_by_similarity(&g, &f).unwrap();
            (action_gap(&a, &b, &probe, INTERIOR_MARGIN).unwrap(), g.h(), g.n())
        };
        let (e1, h, n) = gap(501);
        let (e2, _, _) = gap(1001);
        // e^f P e^-f u - (P + i f') u = -i (sinh(h)/h - 1) e^... ~ h^2 (|u| + |u'| + |u''|)
        let scale = probe.derivative_bound(&Grid1D::new(-5.0, 5.0, n).unwrap(), 2, |_, d| {
            d[0].abs() + d[1].abs() + d[2].abs() + d[3].abs()
        });
        assert!(e1 <= Tolerances::default().discretization(h, n, scale));
        assert!((3.5..4.5).contains(&(e1 / e2)), "{}", e1 / e2);
    }

    #[test]
    fn similarity_momentum_annihilates_exp_f() {
        let g = Grid1D::new(-5.0, 5.0, 1001).unwrap();
        let f = poly(&[0.0, 1.0]);
        let s = deformed_momentum_by_similarity(&g, &f).unwrap();
        let ef = g.sample(f64::exp);
        let r = s.apply_real(&ef);
        // exact: diag(e^f) P applied to the constant vector
        let m = g.interior(1).map(|i| r[i].norm()).fold(0.0, f64::max);
        assert!(m < 1e-9, "{m}");
    }

    #[test]
    fn overflow_guard() {
        let g = Grid1D::new(-5.0, 5.0, 11).unwrap();
        let big = poly(&[0.0, 70.0]);
        assert!(matches!(
            deformed_momentum_by_similarity(&g, &big),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn wrong_table_length_is_rejected() {
        let g = Grid1D::new(-5.0, 5.0, 11).unwrap();
        let f = FunctionSpec::tabulated(vec![0.0; 10]);
        assert!(matches!(
            deformed_momentum(&g, &f),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
