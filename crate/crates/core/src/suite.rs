//! Check suites shared by the command-line tool and the test harness.

use serde::Serialize;

use crate::block::{anticommutator, commutator, BlockOp};
use crate::error::Result;
use crate::function::FunctionSpec;
use crate::grid::Grid1D;
use crate::hamiltonians::{closed_form, HamiltonianSet, Label};
use crate::linop::{hermiticity_defect, LinOp};
use crate::operators::{deformed_momentum, position_operator};
use crate::probe::{action_gap, GaussianProbe};
use crate::report::Check;
use crate::susy::{
    compositional_members, ground_states, identify_blocks, identify_blocks_within, superhamiltonian_2x2, supercharge_2x2,
    supercharges_4x4, BlockIdentification,
};
use crate::tolerance::{is_second_order, Tolerances, COMPOSITE_MARGIN, EDGE_FRACTION, INTERIOR_MARGIN, ORDER2_RATIO};
use crate::C64;

/// Block content measured for `{Q1, Q2}`.
pub const H_CONTENT: [Label; 4] = [Label::H2, Label::H1, Label::H3, Label::H3];
/// Block content measured for `{Q3, Q4}`.
pub const H_TILDE_CONTENT: [Label; 4] = [Label::H1, Label::H2, Label::H4, Label::H4];

/// Smallest grid used for a coarse-grid convergence sub-run.
pub const MIN_CONVERGENCE_NODES: usize = 51;

/// Max interior `|([x, P_f] - i) u|` on the probe, and its tolerance.
pub fn canonical_commutator_error(g: &Grid1D, f: &FunctionSpec, probe: &GaussianProbe) -> Result<(f64, f64)> {
    let x = position_operator(g);
    let pf = deformed_momentum(g, f)?;
    let c = crate::linop::commutator(&x, &pf)?;
    let target = LinOp::identity(*g).scale(C64::new(0.0, 1.0));
    let err = action_gap(&c, &target, probe, INTERIOR_MARGIN)?;
    // ([x, P] u)_k - i u_k = i h^2 u''/2 + O(h^4)
    let scale = 0.5 * probe.derivative_bound(g, INTERIOR_MARGIN, |_, d| d[2].abs());
    Ok((err, Tolerances::default().discretization(g.h(), g.n(), scale)))
}

fn has_slope(g: &Grid1D, f: &FunctionSpec) -> Result<bool> {
    Ok(f.derivative_values(g, 1)?.iter().any(|v| *v != 0.0))
}

/// Agreement and Hermiticity checks for `H1..H4`.
pub fn hamiltonian_checks(g: &Grid1D, f: &FunctionSpec, alpha: f64, beta: f64) -> Result<Vec<Check>> {
    let tol = Tolerances::default();
    let probe = GaussianProbe::default();
    let set = HamiltonianSet::build(g, f, alpha, beta)?;
    let sloped = has_slope(g, f)?;
    let mut checks = Vec::new();
    for label in Label::ALL {
        let pair = set.get(label);
        checks.push(Check::at_most(
            format!("agreement_{label}"),
            pair.agreement(&probe)?,
            pair.agreement_tolerance(f, &probe, &tol)?,
        ));
    }
    for label in Label::ALL {
        let pair = set.get(label);
        let mag = pair.closed_form.max_abs().max(pair.compositional.max_abs()).max(1.0);
        let defect = hermiticity_defect(&pair.compositional).max(hermiticity_defect(&pair.closed_form));
        let check = if label.is_hermitian() || !sloped || pair.coupling == 0.0 {
            Check::at_most(format!("hermiticity_defect_{label}"), defect, tol.machine(g.n(), mag))
        } else {
            let floor = tol.machine(g.n(), mag);
            Check::at_least(format!("hermiticity_defect_{label}"), defect, floor)
                .with_detail(format!("non-Hermitian: defect must exceed rounding {floor:e}"))
        };
        checks.push(check);
    }
    Ok(checks)
}

fn commutator_tolerance(tol: &Tolerances, q: &BlockOp, h: &BlockOp) -> f64 {
    tol.machine(q.grid().n(), (q.max_abs() * h.max_abs()).max(1.0))
}

/// Nilpotency, block structure, conserved charges and the `beta = 0`
/// reduction. Returns the checks and the measured block contents of
/// `{Q1, Q2}` and `{Q3, Q4}`.
pub fn supersymmetry_checks(
    g: &Grid1D,
    f: &FunctionSpec,
    alpha: f64,
    beta: f64,
) -> Result<(Vec<Check>, BlockIdentification, BlockIdentification)> {
    let tol = Tolerances::default();
    let mut checks = Vec::new();

    let q = supercharge_2x2(g, f, alpha)?;
    let h = superhamiltonian_2x2(&q)?;
    checks.push(Check::flag("nilpotent_Q", q.mul(&q)?.is_structurally_zero(), "Q^2 = 0 structurally"));
    checks.push(Check::flag(
        "block_diagonal_h",
        h.is_structurally_block_diagonal(),
        "{Q, Q^dag} has no off-diagonal blocks",
    ));
    checks.push(Check::at_most("conserved_Q", commutator(&q, &h)?.max_abs(), commutator_tolerance(&tol, &q, &h)));

    let members = compositional_members(g, f, alpha, beta)?;
    let qs = supercharges_4x4(g, f, alpha, beta)?;
    let mut contents = Vec::new();
    for (name, qa, qb, expected) in [
        ("H", &qs.q1, &qs.q2, &H_CONTENT),
        ("H_tilde", &qs.q3, &qs.q4, &H_TILDE_CONTENT),
    ] {
        let big = anticommutator(qa, qb)?;
        let id = identify_blocks(&big, &members, &tol)?;
        checks.push(Check::flag(
            format!("block_diagonal_{name}"),
            big.is_structurally_block_diagonal(),
            "anticommutator has no off-diagonal blocks",
        ));
        let shown: Vec<String> = expected.iter().map(Label::to_string).collect();
        checks.push(Check::flag(
            format!("block_content_{name}"),
            id.equals(expected),
            format!("measured {id}, expected diag({})", shown.join(",")),
        ));
        for (qname, qi) in [("a", qa), ("b", qb)] {
            let which = match (name, qname) {
                ("H", "a") => "Q1",
                ("H", _) => "Q2",
                (_, "a") => "Q3",
                _ => "Q4",
            };
            checks.push(Check::flag(
                format!("nilpotent_{which}"),
                qi.mul(qi)?.is_structurally_zero(),
                format!("{which}^2 = 0 structurally"),
            ));
            checks.push(Check::at_most(
                format!("conserved_{which}_{name}"),
                commutator(qi, &big)?.max_abs(),
                commutator_tolerance(&tol, qi, &big),
            ));
        }
        contents.push(id);
    }

    let reduced = supercharges_4x4(g, f, alpha, 0.0)?;
    let top = anticommutator(&reduced.q1, &reduced.q2)?.leading(2);
    checks.push(Check::at_most("beta_zero_reduction", top.max_abs_diff(&h)?, 0.0)
        .with_detail("top 2x2 block of {Q1, Q2} at beta = 0 minus {Q, Q^dag}"));

    let tilde = contents.pop().expect("two contents");
    let plain = contents.pop().expect("two contents");
    Ok((checks, plain, tilde))
}

/// `f -> -f` exchanges `H1 <-> H2`, `H3 <-> H4` and `H <-> H~`.
pub fn duality_checks(g: &Grid1D, f: &FunctionSpec, alpha: f64, beta: f64) -> Result<Vec<Check>> {
    let tol = Tolerances::default();
    let minus = f.negated();
    let mut checks = Vec::new();
    for label in Label::ALL {
        let c = if label.is_hermitian() { alpha } else { beta };
        let a = closed_form(label, g, &minus, c)?;
        let b = closed_form(label.dual(), g, f, c)?;
        checks.push(Check::at_most(format!("duality_{label}"), a.max_abs_diff(&b)?, 0.0)
            .with_detail(format!("{label}(-f) minus {}(f)", label.dual())));
    }
    let members = compositional_members(g, f, alpha, beta)?;
    let flipped = supercharges_4x4(g, &minus, alpha, beta)?;
    // P_(-f) and P_f^dag differ in their one-sided boundary rows, so the
    // blocks are compared away from the edges
    let id = identify_blocks_within(&anticommutator(&flipped.q1, &flipped.q2)?, &members, &tol, COMPOSITE_MARGIN)?;
    checks.push(Check::flag(
        "duality_block_content",
        id.equals(&H_TILDE_CONTENT),
        format!("{{Q1, Q2}} at -f measures {id} on the interior"),
    ));
    Ok(checks)
}

/// Ground-state residuals, plus their convergence ratio against the grid
/// with half the resolution when that grid is large enough.
pub fn ground_state_checks(g: &Grid1D, f: &FunctionSpec, alpha: f64, beta: f64) -> Result<Vec<Check>> {
    let (psi, psit) = ground_states(g, f, alpha, beta)?;
    let mut checks = Vec::new();
    for s in [&psi, &psit] {
        checks.push(Check::at_most(format!("ground_state_{}", s.label), s.residual, s.tolerance));
        checks.push(Check::flag(
            format!("ground_state_{}_reference_form", s.label),
            s.matches_reference,
            format!("slots {:?}", s.slots),
        ));
    }
    if let Some(coarse) = coarser(g) {
        let (cpsi, cpsit) = ground_states(&coarse, f, alpha, beta)?;
        for (fine, rough) in [(&psi, &cpsi), (&psit, &cpsit)] {
            if let Some(check) = order_check(&format!("ground_state_{}_order", fine.label), rough.residual, fine.residual) {
                checks.push(check);
            }
        }
    }
    Ok(checks)
}

/// Same interval with `(n + 1) / 2` nodes (twice the spacing), provided
/// both grids trim the same physical edge in residual norms.
pub fn coarser(g: &Grid1D) -> Option<Grid1D> {
    let n = g.n().div_ceil(2);
    if g.n().is_multiple_of(2) || n < MIN_CONVERGENCE_NODES {
        return None;
    }
    let c = Grid1D::new(g.x_min(), g.x_max(), n).ok()?;
    let edge = EDGE_FRACTION * (g.x_max() - g.x_min());
    (COMPOSITE_MARGIN as f64 * c.h() <= edge * (1.0 + 1e-12)).then_some(c)
}

/// Ratio check tagged `O(h^2)`; skipped when the fine error is at rounding
/// level, where the ratio carries no information.
pub fn order_check(name: &str, coarse: f64, fine: f64) -> Option<Check> {
    if fine <= 1e-12 * coarse.max(1.0) || fine == 0.0 {
        return None;
    }
    let ratio = coarse / fine;
    let mut c = Check::within(name, ratio, ORDER2_RATIO.0, ORDER2_RATIO.1);
    c.pass = is_second_order(ratio);
    Some(c.with_detail("O(h^2): error ratio under h-halving"))
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraReport {
    pub checks: Vec<Check>,
    pub block_content: String,
    pub block_content_tilde: String,
}

/// Everything `verify-algebra` runs for one deformation.
pub fn verify_algebra(g: &Grid1D, f: &FunctionSpec, alpha: f64, beta: f64) -> Result<AlgebraReport> {
    let probe = GaussianProbe::default();
    let mut checks = Vec::new();
    let (err, tol) = canonical_commutator_error(g, f, &probe)?;
    checks.push(Check::at_most("canonical_commutator", err, tol));
    if let Some(coarse) = coarser(g) {
        let (c_err, _) = canonical_commutator_error(&coarse, f, &probe)?;
        checks.extend(order_check("canonical_commutator_order", c_err, err));
    }
    checks.extend(hamiltonian_checks(g, f, alpha, beta)?);
    let (susy, plain, tilde) = supersymmetry_checks(g, f, alpha, beta)?;
    checks.extend(susy);
    checks.extend(duality_checks(g, f, alpha, beta)?);
    checks.extend(ground_state_checks(g, f, alpha, beta)?);
    Ok(AlgebraReport {
        checks,
        block_content: plain.to_string(),
        block_content_tilde: tilde.to_string(),
    })
}
