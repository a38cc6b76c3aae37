//! The four Hamiltonians generated by the deformed momentum, each built two
//! ways: as a product of `P_(f)` matrices and from its expanded closed form.
//!
//! | label | compositional          | closed form                                    |
//! |-------|------------------------|------------------------------------------------|
//! | H1    | a^2 P_f^dag P_f        | a^2 (P^2 + f'' + f'^2)                         |
//! | H2    | a^2 P_f P_f^dag        | a^2 (P^2 - f'' + f'^2)                         |
//! | H3    | b^2 P_f^dag P_f^dag    | b^2 (P^2 - 2i f' P - f'' - f'^2)               |
//! | H4    | b^2 P_f P_f            | b^2 (P^2 + 2i f' P + f'' - f'^2)               |
//!
//! `P^2` in the closed forms is `-D2`, the three-point Laplacian.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::grid::{derivative_matrices, Grid1D};
use crate::linop::LinOp;
use crate::operators::{deformed_momentum, momentum_operator};
use crate::probe::{action_gap, GaussianProbe};
use crate::tolerance::{Tolerances, COMPOSITE_MARGIN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    H1,
    H2,
    H3,
    H4,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::H1, Label::H2, Label::H3, Label::H4];

    /// Image under `f -> -f`.
    pub fn dual(self) -> Label {
        match self {
            Label::H1 => Label::H2,
            Label::H2 => Label::H1,
            Label::H3 => Label::H4,
            Label::H4 => Label::H3,
        }
    }

    /// Signs of the `2i f' P`, `f''` and `f'^2` terms in the closed form.
    fn signs(self) -> (f64, f64, f64) {
        match self {
            Label::H1 => (0.0, 1.0, 1.0),
            Label::H2 => (0.0, -1.0, 1.0),
            Label::H3 => (-1.0, -1.0, -1.0),
            Label::H4 => (1.0, 1.0, -1.0),
        }
    }

    pub fn is_hermitian(self) -> bool {
        matches!(self, Label::H1 | Label::H2)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianPair {
    pub label: Label,
    pub coupling: f64,
    pub compositional: LinOp,
    pub closed_form: LinOp,
}

impl HamiltonianPair {
    /// Max interior gap between the two members acting on the probe.
    pub fn agreement(&self, probe: &GaussianProbe) -> Result<f64> {
        action_gap(&self.compositional, &self.closed_form, probe, COMPOSITE_MARGIN)
    }

    /// `c1 * scale * h^2 + c2 * eps * n` for [`agreement`](Self::agreement).
    pub fn agreement_tolerance(&self, f: &FunctionSpec, probe: &GaussianProbe, tol: &Tolerances) -> Result<f64> {
        let g = *self.compositional.grid();
        let scale = self.coupling * self.coupling * agreement_scale(&g, f, probe)?;
        Ok(tol.discretization(g.h(), g.n(), scale))
    }
}

/// Bound on the leading truncation error of `P_f^(dag) P_f^(dag) u` versus the
/// three-point closed form: `|u''''| + |(f' u)'''| + |f'| |u'''|`, plus the
/// `f'^2` and `f''` cross terms that enter through the diagonal products.
pub fn agreement_scale(g: &Grid1D, f: &FunctionSpec, probe: &GaussianProbe) -> Result<f64> {
    let d: Vec<Vec<f64>> = (1..=4)
        .map(|k| f.derivative_values(g, k))
        .collect::<Result<_>>()?;
    Ok(probe.derivative_bound(g, COMPOSITE_MARGIN, |i, u| {
        let (f1, f2, f3, f4) = (d[0][i], d[1][i], d[2][i], d[3][i]);
        let fu3 = f1 * u[3] + 3.0 * f2 * u[2] + 3.0 * f3 * u[1] + f4 * u[0];
        let fu2 = f1 * u[2] + 2.0 * f2 * u[1] + f3 * u[0];
        u[4].abs() + fu3.abs() + f1.abs() * (u[3].abs() + fu2.abs())
    }))
}

/// `P^2 = -D2`.
pub fn momentum_squared(g: &Grid1D) -> LinOp {
    let (_, d2) = derivative_matrices(g);
    d2.scale(-1.0)
}

/// Closed-form member only; cheaper when the product form is not needed.
pub fn closed_form(label: Label, g: &Grid1D, f: &FunctionSpec, coupling: f64) -> Result<LinOp> {
    let (s_first, s_f2, s_fp2) = label.signs();
    let f1 = f.derivative_values(g, 1)?;
    let f2 = f.derivative_values(g, 2)?;
    let mut h = momentum_squared(g);
    if s_first != 0.0 {
        let p = momentum_operator(g);
        let n = g.n();
        for (i, &d) in f1.iter().enumerate() {
            let c = C64::new(0.0, 2.0 * (s_first * d));
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                let pij = p.get(i, j);
                if pij != C64::new(0.0, 0.0) {
                    h.set(i, j, h.get(i, j) + c * pij);
                }
            }
        }
    }
    let diag: Vec<f64> = f1
        .iter()
        .zip(&f2)
        .map(|(&a, &b)| s_f2 * b + s_fp2 * (a * a))
        .collect();
    h.add_diagonal(&diag)?;
    h.scale_mut(coupling * coupling);
    Ok(h)
}

/// Compositional member from precomputed `P_f` and `P_f^dag`.
pub fn compositional(label: Label, pf: &LinOp, pf_dag: &LinOp, coupling: f64) -> Result<LinOp> {
    let mut h = match label {
        Label::H1 => pf_dag.matmul(pf)?,
        Label::H2 => pf.matmul(pf_dag)?,
        Label::H3 => pf_dag.matmul(pf_dag)?,
        Label::H4 => pf.matmul(pf)?,
    };
    h.scale_mut(coupling * coupling);
    Ok(h)
}

fn build(label: Label, g: &Grid1D, f: &FunctionSpec, coupling: f64) -> Result<HamiltonianPair> {
    let pf = deformed_momentum(g, f)?;
    let pf_dag = pf.adjoint();
    Ok(HamiltonianPair {
        label,
        coupling,
        compositional: compositional(label, &pf, &pf_dag, coupling)?,
        closed_form: closed_form(label, g, f, coupling)?,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("alpha must be positive, got {alpha}")))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("beta must be non-negative, got {beta}")))
    }
}

pub fn build_h1(g: &Grid1D, f: &FunctionSpec, alpha: f64) -> Result<HamiltonianPair> {
    check_alpha(alpha)?;
    build(Label::H1, g, f, alpha)
}

pub fn build_h2(g: &Grid1D, f: &FunctionSpec, alpha: f64) -> Result<HamiltonianPair> {
    check_alpha(alpha)?;
    build(Label::H2, g, f, alpha)
}

pub fn build_h3(g: &Grid1D, f: &FunctionSpec, beta: f64) -> Result<HamiltonianPair> {
    check_beta(beta)?;
    build(Label::H3, g, f, beta)
}

pub fn build_h4(g: &Grid1D, f: &FunctionSpec, beta: f64) -> Result<HamiltonianPair> {
    check_beta(beta)?;
    build(Label::H4, g, f, beta)
}

/// All four pairs, sharing one `P_f` / `P_f^dag` computation.
#[derive(Clone, Debug)]
pub struct HamiltonianSet {
    pub pairs: [HamiltonianPair; 4],
}

impl HamiltonianSet {
    pub fn build(g: &Grid1D, f: &FunctionSpec, alpha: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_beta(beta)?;
        let pf = deformed_momentum(g, f)?;
        let pf_dag = pf.adjoint();
        let pair = |label: Label| -> Result<HamiltonianPair> {
            let c = if label.is_hermitian() { alpha } else { beta };
            Ok(HamiltonianPair {
                label,
                coupling: c,
                compositional: compositional(label, &pf, &pf_dag, c)?,
                closed_form: closed_form(label, g, f, c)?,
            })
        };
        Ok(Self {
            pairs: [pair(Label::H1)?, pair(Label::H2)?, pair(Label::H3)?, pair(Label::H4)?],
        })
    }

    pub fn get(&self, label: Label) -> &HamiltonianPair {
        &self.pairs[label as usize]
    }
}

/// `H1`, `H2` from a superpotential `W`, with `f = int_0^x W`.
///
/// The closed forms are written directly in terms of `W' ` and `W^2`; they
/// coincide with `closed_form(H1/H2, f)` because `f' = W` and `f'' = W'`.
pub fn build_from_superpotential(
    g: &Grid1D,
    w: &FunctionSpec,
    alpha: f64,
) -> Result<(HamiltonianPair, HamiltonianPair)> {
    check_alpha(alpha)?;
    let f = w.antiderivative(g)?;
    let wv = w.values(g)?;
    let wp = w.derivative_values(g, 1)?;
    let superpotential_form = |sign: f64| -> Result<LinOp> {
        let mut h = momentum_squared(g);
        let d: Vec<f64> = wv
            .iter()
            .zip(&wp)
            .map(|(&w, &dw)| sign * dw + w * w)
            .collect();
        h.add_diagonal(&d)?;
        h.scale_mut(alpha * alpha);
        Ok(h)
    };
    let pf = deformed_momentum(g, &f)?;
    let pf_dag = pf.adjoint();
    let h1 = HamiltonianPair {
        label: Label::H1,
        coupling: alpha,
        compositional: compositional(Label::H1, &pf, &pf_dag, alpha)?,
        closed_form: superpotential_form(1.0)?,
    };
    let h2 = HamiltonianPair {
        label: Label::H2,
        coupling: alpha,
        compositional: compositional(Label::H2, &pf, &pf_dag, alpha)?,
        closed_form: superpotential_form(-1.0)?,
    };
    Ok((h1, h2))
}
