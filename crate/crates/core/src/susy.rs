//! Supercharges, superhamiltonians and the spectral consequences of the
//! factorized Hamiltonians.
//!
//! The block content of each superhamiltonian is measured by comparing its
//! diagonal blocks with the compositional Hamiltonians, never assumed.
//! Multiplying out `{Q1, Q2}` gives `diag(H2, H1, H3, H3)` and `{Q3, Q4}`
//! gives `diag(H1, H2, H4, H4)`.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::block::{anticommutator, BlockOp};
use crate::eigen::{lowest_hermitian, Tridiagonal};
use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::grid::Grid1D;
use crate::hamiltonians::{compositional, momentum_squared, Label};
use crate::linop::LinOp;
use crate::operators::{deformed_momentum, exp_weights};
use crate::tolerance::{physical_interior, Tolerances};

fn check_couplings(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Validation(format!("alpha must be positive, got {alpha}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Validation(format!("beta must be non-negative, got {beta}")));
    }
    Ok(())
}

/// `Q = [[0, a P_f], [0, 0]]`.
pub fn supercharge_2x2(g: &Grid1D, f: &FunctionSpec, alpha: f64) -> Result<BlockOp> {
    check_couplings(alpha, 0.0)?;
    let pf = deformed_momentum(g, f)?;
    BlockOp::zeros(2, *g).with(0, 1, pf.scale(alpha))
}

/// `h = {Q, Q^dag}`.
pub fn superhamiltonian_2x2(q: &BlockOp) -> Result<BlockOp> {
    anticommutator(q, &q.adjoint())
}

#[derive(Clone, Debug)]
pub struct Supercharges {
    pub q1: BlockOp,
    pub q2: BlockOp,
    pub q3: BlockOp,
    pub q4: BlockOp,
}

/// The four 4x4 supercharges (zero-based block indices):
/// `Q1: (0,1)=aP_f, (2,3)=bP_f^dag`; `Q2: (1,0)=aP_f^dag, (3,2)=bP_f^dag`;
/// `Q3: (0,1)=aP_f^dag, (2,3)=bP_f`; `Q4: (1,0)=aP_f, (3,2)=bP_f`.
pub fn supercharges_4x4(g: &Grid1D, f: &FunctionSpec, alpha: f64, beta: f64) -> Result<Supercharges> {
    check_couplings(alpha, beta)?;
    let pf = deformed_momentum(g, f)?;
    let pd = pf.adjoint();
    let z = || BlockOp::zeros(4, *g);
    Ok(Supercharges {
        q1: z().with(0, 1, pf.scale(alpha))?.with(2, 3, pd.scale(beta))?,
        q2: z().with(1, 0, pd.scale(alpha))?.with(3, 2, pd.scale(beta))?,
        q3: z().with(0, 1, pd.scale(alpha))?.with(2, 3, pf.scale(beta))?,
        q4: z().with(1, 0, pf.scale(alpha))?.with(3, 2, pf.scale(beta))?,
    })
}

/// Compositional `H1..H4` (products of `P_f` matrices), indexed by `Label`.
pub fn compositional_members(g: &Grid1D, f: &FunctionSpec, alpha: f64, beta: f64) -> Result<[LinOp; 4]> {
    check_couplings(alpha, beta)?;
    let pf = deformed_momentum(g, f)?;
    let pd = pf.adjoint();
    Ok([
        compositional(Label::H1, &pf, &pd, alpha)?,
        compositional(Label::H2, &pf, &pd, alpha)?,
        compositional(Label::H3, &pf, &pd, beta)?,
        compositional(Label::H4, &pf, &pd, beta)?,
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockMatch {
    pub index: usize,
    /// Max-abs difference to each of H1..H4.
    pub residuals: [f64; 4],
    /// Labels within `tolerance`.
    pub matches: Vec<Label>,
    pub tolerance: f64,
}

impl BlockMatch {
    pub fn best(&self) -> Label {
        let mut best = 0;
        for k in 1..4 {
            if self.residuals[k] < self.residuals[best] {
                best = k;
            }
        }
        Label::ALL[best]
    }

    pub fn is_identified(&self) -> bool {
        !self.matches.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockIdentification {
    pub blocks: Vec<BlockMatch>,
}

impl BlockIdentification {
    /// Best-matching label per diagonal block, `None` where nothing matched.
    pub fn content(&self) -> Vec<Option<Label>> {
        self.blocks
            .iter()
            .map(|b| b.is_identified().then(|| b.best()))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.blocks.iter().all(BlockMatch::is_identified)
    }

    /// True when every block matches its expected label (possibly among
    /// others, as happens for `f' = 0`).
    pub fn equals(&self, expected: &[Label]) -> bool {
        self.blocks.len() == expected.len()
            && self.blocks.iter().zip(expected).all(|(b, want)| b.matches.contains(want))
    }
}

impl fmt::Display for BlockIdentification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| match b.matches.len() {
                0 => "?".to_string(),
                1 => b.matches[0].to_string(),
                _ => b.matches.iter().map(Label::to_string).collect::<Vec<_>>().join("="),
            })
            .collect();
        write!(f, "diag({})", parts.join(","))
    }
}

/// Matches each diagonal block of `h` against `members` within machine rounding.
pub fn identify_blocks(h: &BlockOp, members: &[LinOp; 4], tol: &Tolerances) -> Result<BlockIdentification> {
    identify_blocks_within(h, members, tol, 0)
}

/// As [`identify_blocks`], comparing only rows and columns `margin..n-margin`.
pub fn identify_blocks_within(
    h: &BlockOp,
    members: &[LinOp; 4],
    tol: &Tolerances,
    margin: usize,
) -> Result<BlockIdentification> {
    let n = h.grid().n();
    let mut blocks = Vec::with_capacity(h.size());
    for i in 0..h.size() {
        let zero = LinOp::zeros(*h.grid());
        let block = h.get(i, i).unwrap_or(&zero);
        let mut residuals = [0.0; 4];
        for (k, m) in members.iter().enumerate() {
            residuals[k] = if margin == 0 {
                block.max_abs_diff(m)?
            } else {
                block.max_abs_diff_block(m, margin)?
            };
        }
        let magnitude = block.max_abs().max(1.0);
        let tolerance = tol.machine(n, magnitude);
        let matches = Label::ALL
            .iter()
            .zip(residuals)
            .filter(|(_, r)| *r <= tolerance)
            .map(|(l, _)| *l)
            .collect();
        blocks.push(BlockMatch {
            index: i,
            residuals,
            matches,
            tolerance,
        });
    }
    Ok(BlockIdentification { blocks })
}

/// `{Qa, Qb}` together with the measured identity of its diagonal blocks.
pub fn superhamiltonian_4x4(
    qa: &BlockOp,
    qb: &BlockOp,
    members: &[LinOp; 4],
    tol: &Tolerances,
) -> Result<(BlockOp, BlockIdentification)> {
    let h = anticommutator(qa, qb)?;
    let id = identify_blocks(&h, members, tol)?;
    Ok((h, id))
}

/// `f -> -f`.
pub fn duality_transform(f: &FunctionSpec) -> FunctionSpec {
    f.negated()
}

/// Which exponential fills a ground-state slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Slot {
    /// `e^{f}`, annihilated by `P_f`.
    ExpPlus,
    /// `e^{-f}`, annihilated by `P_f^dag`.
    ExpMinus,
}

impl Slot {
    /// The exponential annihilated by the right-hand factor of `label`.
    pub fn for_label(label: Label) -> Slot {
        match label {
            Label::H1 | Label::H4 => Slot::ExpPlus,
            Label::H2 | Label::H3 => Slot::ExpMinus,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Slot::ExpPlus => 1.0,
            Slot::ExpMinus => -1.0,
        }
    }
}

/// Reference slot pattern `(e^-f, e^f, e^-f, e^-f)` for the ground state of `{Q1, Q2}`.
pub const REFERENCE_PSI: [Slot; 4] = [Slot::ExpMinus, Slot::ExpPlus, Slot::ExpMinus, Slot::ExpMinus];
/// Reference slot pattern `(e^f, e^-f, e^f, e^f)` for the ground state of `{Q3, Q4}`.
pub const REFERENCE_PSI_TILDE: [Slot; 4] = [Slot::ExpPlus, Slot::ExpMinus, Slot::ExpPlus, Slot::ExpPlus];

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateReport {
    pub label: String,
    pub slots: Vec<Slot>,
    /// Slot vectors concatenated; unit 2-norm.
    #[serde(skip)]
    pub state: Vec<C64>,
    /// `||H psi||_2` over the physical interior.
    pub residual: f64,
    /// `c1 * scale * h^2 + c2 * eps * n` for this residual.
    pub tolerance: f64,
    pub matches_reference: bool,
}

impl GroundStateReport {
    pub fn slot_vectors(&self) -> Vec<Vec<C64>> {
        self.state.chunks(self.state.len() / self.slots.len()).map(<[C64]>::to_vec).collect()
    }

    pub fn norm(&self) -> f64 {
        self.state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Derivative values `phi^(k)` for `phi = sign * f`, `k = 1..=4`.
fn phi_derivatives(g: &Grid1D, f: &FunctionSpec, sign: f64) -> Result<[Vec<f64>; 4]> {
    let d = |k| -> Result<Vec<f64>> {
        Ok(f.derivative_values(g, k)?.into_iter().map(|v| sign * v).collect())
    };
    Ok([d(1)?, d(2)?, d(3)?, d(4)?])
}

/// Builds the state for `slots` and evaluates it against `h`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_ground_state(
    g: &Grid1D,
    f: &FunctionSpec,
    h: &BlockOp,
    couplings: [f64; 4],
    slots: &[Slot],
    reference: &[Slot],
    label: &str,
    tol: &Tolerances,
) -> Result<GroundStateReport> {
    let (up, down) = exp_weights(g, f)?;
    let region = physical_interior(g);
    let fp = f.derivative_values(g, 1)?;
    let global = (slots.len() as f64).sqrt();

    let mut vectors = Vec::with_capacity(slots.len());
    let mut scale_sq = 0.0;
    for (slot, coupling) in slots.iter().zip(couplings) {
        let raw = match slot {
            Slot::ExpPlus => &up,
            Slot::ExpMinus => &down,
        };
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::DegenerateNormalization);
        }
        let w = 1.0 / (norm * global);
        vectors.push(raw.iter().map(|z| z * w).collect::<Vec<_>>());

        // leading error of P^(dag) P^(dag) e^{phi}: h^2/6 (g'''' + f' g''')
        let [p1, p2, p3, p4] = phi_derivatives(g, f, slot.sign())?;
        for i in region.clone() {
            let gval = raw[i].re * w;
            let g3 = p3[i] + 3.0 * p1[i] * p2[i] + p1[i].powi(3);
            let g4 = p4[i] + 4.0 * p1[i] * p3[i] + 3.0 * p2[i] * p2[i]
                + 6.0 * p1[i] * p1[i] * p2[i]
                + p1[i].powi(4);
            let b = coupling * coupling * (g4.abs() + fp[i].abs() * g3.abs()) * gval.abs();
            scale_sq += b * b;
        }
    }

    let applied = h.apply(&vectors)?;
    let residual = applied
        .iter()
        .flat_map(|v| v[region.clone()].iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();

    Ok(GroundStateReport {
        label: label.to_string(),
        slots: slots.to_vec(),
        state: vectors.concat(),
        residual,
        tolerance: tol.discretization(g.h(), g.n(), scale_sq.sqrt()),
        matches_reference: slots == reference,
    })
}

/// Ground states of `H = {Q1, Q2}` and `H~ = {Q3, Q4}`, with slots arranged
/// from the measured block content.
pub fn ground_states(
    g: &Grid1D,
    f: &FunctionSpec,
    alpha: f64,
    beta: f64,
) -> Result<(GroundStateReport, GroundStateReport)> {
    let tol = Tolerances::default();
    exp_weights(g, f)?;
    let members = compositional_members(g, f, alpha, beta)?;
    let couplings = [alpha, alpha, beta, beta];
    let run = |dual: bool| -> Result<GroundStateReport> {
        let q = supercharges_4x4(g, f, alpha, beta)?;
        let (qa, qb) = if dual { (q.q3, q.q4) } else { (q.q1, q.q2) };
        let (h, id) = superhamiltonian_4x4(&qa, &qb, &members, &tol)?;
        drop((qa, qb));
        let slots = slots_from(&id)?;
        let (label, reference) = if dual {
            ("psi_tilde", &REFERENCE_PSI_TILDE)
        } else {
            ("psi", &REFERENCE_PSI)
        };
        evaluate_ground_state(g, f, &h, couplings, &slots, reference, label, &tol)
    };
    Ok((run(false)?, run(true)?))
}

fn slots_from(id: &BlockIdentification) -> Result<Vec<Slot>> {
    id.blocks
        .iter()
        .map(|b| {
            if b.is_identified() {
                Ok(Slot::for_label(b.best()))
            } else {
                Err(Error::Validation(format!(
                    "diagonal block {} matches none of H1..H4",
                    b.index
                )))
            }
        })
        .collect()
}

/// Lowest eigenvalues of two partner Hamiltonians and how they pair.
#[derive(Clone, Debug, Serialize)]
pub struct PartnerSpectra {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
    pub unpaired_h1: Vec<f64>,
    pub unpaired_h2: Vec<f64>,
    pub zero_modes_h1: usize,
    pub zero_modes_h2: usize,
    pub zero_threshold: f64,
    pub pair_tolerance: f64,
}

impl PartnerSpectra {
    pub fn all_paired(&self) -> bool {
        self.unpaired_h1.is_empty() && self.unpaired_h2.is_empty()
    }

    pub fn unpaired_zero_modes(&self) -> usize {
        self.zero_modes_h1.abs_diff(self.zero_modes_h2)
    }
}

/// Relative zero-mode threshold: `|lambda| < ZERO_MODE_FRACTION * max lambda`.
pub const ZERO_MODE_FRACTION: f64 = 1e-6;

/// `k` lowest eigenvalues of the Dirichlet truncations (nodes `1..n-1`) of
/// two Hermitian operators, and the pairing of their nonzero eigenvalues
/// below the smaller of the two largest computed values.
pub fn partner_spectra(h1: &LinOp, h2: &LinOp, k: usize, pair_tolerance: f64) -> Result<PartnerSpectra> {
    let g = *h1.grid();
    if *h2.grid() != g {
        return Err(Error::GridMismatch);
    }
    let n = g.n();
    if k == 0 || k > n / 4 {
        return Err(Error::Validation(format!("k must be in 1..={}, got {k}", n / 4)));
    }
    let tol = Tolerances::default();
    let spectrum = |op: &LinOp| -> Result<Vec<f64>> {
        let m = n - 2;
        let block = op.principal_block(1..n - 1);
        let mut defect = 0.0f64;
        for i in 0..m {
            for j in i..m {
                defect = defect.max((block[i * m + j] - block[j * m + i].conj()).norm());
            }
        }
        let limit = tol.machine(n, op.max_abs().max(1.0));
        if defect > limit {
            return Err(Error::NotHermitian {
                defect,
                tolerance: limit,
            });
        }
        Ok(lowest_hermitian(&block, m, k))
    };
    let a = spectrum(h1)?;
    let b = spectrum(h2)?;

    let largest = a.iter().chain(&b).map(|v| v.abs()).fold(0.0, f64::max);
    let zero_threshold = ZERO_MODE_FRACTION * largest;
    let is_zero = |v: &f64| v.abs() < zero_threshold;
    let nz_a: Vec<f64> = a.iter().copied().filter(|v| !is_zero(v)).collect();
    let nz_b: Vec<f64> = b.iter().copied().filter(|v| !is_zero(v)).collect();

    let cutoff = match (nz_a.last(), nz_b.last()) {
        (Some(x), Some(y)) => x.min(*y) + pair_tolerance,
        _ => f64::NEG_INFINITY,
    };
    let (mut i, mut j) = (0, 0);
    let mut pairs = Vec::new();
    let mut unpaired_h1 = Vec::new();
    let mut unpaired_h2 = Vec::new();
    let in_range = |v: f64| v <= cutoff;
    while i < nz_a.len() && j < nz_b.len() && (in_range(nz_a[i]) || in_range(nz_b[j])) {
        let (x, y) = (nz_a[i], nz_b[j]);
        if (x - y).abs() <= pair_tolerance {
            pairs.push((x, y));
            i += 1;
            j += 1;
        } else if x < y {
            unpaired_h1.push(x);
            i += 1;
        } else {
            unpaired_h2.push(y);
            j += 1;
        }
    }
    unpaired_h1.extend(nz_a[i..].iter().copied().filter(|v| in_range(*v)));
    unpaired_h2.extend(nz_b[j..].iter().copied().filter(|v| in_range(*v)));

    Ok(PartnerSpectra {
        zero_modes_h1: a.iter().filter(|v| is_zero(v)).count(),
        zero_modes_h2: b.iter().filter(|v| is_zero(v)).count(),
        h1: a,
        h2: b,
        pairs,
        unpaired_h1,
        unpaired_h2,
        zero_threshold,
        pair_tolerance,
    })
}

/// Spectrum of a similarity-built non-Hermitian Hamiltonian versus the
/// Hermitian operator it is similar to.
#[derive(Clone, Debug, Serialize)]
pub struct SimilaritySpectrum {
    pub label: Label,
    /// Largest `|lambda_sim - lambda_ref| / max(|lambda_ref|, tiny)` over
    /// the compared eigenvalues.
    pub max_relative_gap: f64,
    /// Largest imaginary part; zero when the Sturm count certifies that
    /// every root is real.
    pub max_imag: f64,
    pub certified_real: bool,
    pub compared: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RealSpectrumReport {
    pub h4: SimilaritySpectrum,
    pub h3: SimilaritySpectrum,
    pub reference: Vec<f64>,
    pub tolerance: f64,
    pub ill_conditioned: bool,
}

impl RealSpectrumReport {
    pub fn pass(&self) -> bool {
        [&self.h4, &self.h3].iter().all(|s| {
            s.certified_real && s.max_relative_gap <= self.tolerance && s.max_imag <= self.tolerance
        })
    }
}

/// Relative spectral agreement required between similar matrices.
pub const SIMILARITY_TOLERANCE: f64 = 1e-8;
/// `max f - min f` beyond which the similarity is treated as ill-conditioned.
pub const CONDITIONING_RANGE: f64 = 30.0;
/// Tolerance multiplier applied when ill-conditioned.
pub const CONDITIONING_WIDENING: f64 = 1e3;

/// Compares the `k` lowest eigenvalues (all when `k >= n - 2`) of
/// `H4 = diag(e^f) b^2 P^2 diag(e^-f)` and `H3 = diag(e^-f) b^2 P^2 diag(e^f)`
/// with those of `b^2 P^2`, all under Dirichlet truncation.
pub fn real_spectrum_check(g: &Grid1D, f: &FunctionSpec, beta: f64, k: usize) -> Result<RealSpectrumReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Validation(format!("beta must be positive, got {beta}")));
    }
    let (up, down) = exp_weights(g, f)?;
    let values = f.values(g)?;
    let range = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().copied().fold(f64::INFINITY, f64::min);
    let ill_conditioned = range > CONDITIONING_RANGE;
    let tolerance = if ill_conditioned {
        SIMILARITY_TOLERANCE * CONDITIONING_WIDENING
    } else {
        SIMILARITY_TOLERANCE
    };

    let n = g.n();
    let m = n - 2;
    let k = k.min(m);
    let base = momentum_squared(g).scale(beta * beta);
    let tri = |op: &LinOp| -> Result<Tridiagonal> {
        Tridiagonal::from_dense(&op.principal_block(1..n - 1), m)
            .ok_or_else(|| Error::Validation("similarity-built operator is not real tridiagonal".into()))
    };
    let reference = tri(&base)?.lowest(k)?;

    let measure = |label: Label, left: &[C64], right: &[C64]| -> Result<SimilaritySpectrum> {
        let op = base.left_diag(left)?.right_diag(right)?;
        let t = tri(&op)?;
        let (all, certified) = t.all()?;
        let certified_real = certified == m;
        let max_relative_gap = all
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        Ok(SimilaritySpectrum {
            label,
            max_relative_gap,
            max_imag: if certified_real { 0.0 } else { f64::INFINITY },
            certified_real,
            compared: k,
        })
    };

    Ok(RealSpectrumReport {
        h4: measure(Label::H4, &up, &down)?,
        h3: measure(Label::H3, &down, &up)?,
        reference,
        tolerance,
        ill_conditioned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::commutator;
    use crate::hamiltonians::closed_form;

    fn poly(c: &[f64]) -> FunctionSpec {
        FunctionSpec::polynomial(c.to_vec()).unwrap()
    }

    #[test]
    fn two_by_two_algebra() {
        let g = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let f = poly(&[0.0, 0.0, 0.5]);
        let q = supercharge_2x2(&g, &f, 1.2).unwrap();
        assert!(q.mul(&q).unwrap().is_structurally_zero());
        let h = superhamiltonian_2x2(&q).unwrap();
        assert!(h.is_structurally_block_diagonal());
        let m = compositional_members(&g, &f, 1.2, 1.0).unwrap();
        let eps = Tolerances::default().machine(101, h.max_abs());
        assert!(h.get(0, 0).unwrap().max_abs_diff(&m[Label::H2 as usize]).unwrap() <= eps);
        assert!(h.get(1, 1).unwrap().max_abs_diff(&m[Label::H1 as usize]).unwrap() <= eps);
        let c = commutator(&q, &h).unwrap();
        assert!(c.max_abs() <= Tolerances::default().machine(101, h.max_abs() * q.max_abs()));
        let ac = anticommutator(&q, &h).unwrap();
        assert!(ac.max_abs() > 1.0);
    }

    #[test]
    fn free_two_by_two_is_laplacian() {
        let g = Grid1D::new(-1.0, 1.0, 41).unwrap();
        let q = supercharge_2x2(&g, &FunctionSpec::zero(), 2.0).unwrap();
        let h = superhamiltonian_2x2(&q).unwrap();
        let p = crate::operators::momentum_operator(&g);
        let pp = p.matmul(&p.adjoint()).unwrap().scale(4.0);
        assert!(h.get(0, 0).unwrap().max_abs_diff(&pp).unwrap() <= 4.0 * f64::EPSILON * pp.max_abs());
    }

    #[test]
    fn four_by_four_measured_ordering() {
        let g = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let f = poly(&[0.0, 1.0]);
        let q = supercharges_4x4(&g, &f, 1.0, 0.7).unwrap();
        let members = compositional_members(&g, &f, 1.0, 0.7).unwrap();
        let tol = Tolerances::default();
        for c in [&q.q1, &q.q2, &q.q3, &q.q4] {
            assert!(c.mul(c).unwrap().is_structurally_zero());
        }
        let (h, id) = superhamiltonian_4x4(&q.q1, &q.q2, &members, &tol).unwrap();
        assert!(h.is_structurally_block_diagonal());
        assert!(id.equals(&[Label::H2, Label::H1, Label::H3, Label::H3]), "{id}");
        let (_, idt) = superhamiltonian_4x4(&q.q3, &q.q4, &members, &tol).unwrap();
        assert!(idt.equals(&[Label::H1, Label::H2, Label::H4, Label::H4]), "{idt}");
        assert_eq!(id.to_string(), "diag(H2,H1,H3,H3)");
    }

    #[test]
    fn ground_states_follow_reference_patterns() {
        let g = Grid1D::new(-5.0, 5.0, 201).unwrap();
        let (psi, psit) = ground_states(&g, &poly(&[0.0, 1.0]), 1.0, 1.0).unwrap();
        assert!(psi.matches_reference && psit.matches_reference);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert!(psi.residual <= psi.tolerance, "{} > {}", psi.residual, psi.tolerance);
        assert!(psit.residual <= psit.tolerance);
    }

    #[test]
    fn free_ground_state_is_constant() {
        let g = Grid1D::new(-2.0, 2.0, 81).unwrap();
        let (psi, _) = ground_states(&g, &FunctionSpec::zero(), 1.0, 1.0).unwrap();
        let v = psi.slot_vectors();
        assert!(v.iter().flatten().all(|z| (z - v[0][0]).norm() < 1e-15));
        // constants are annihilated exactly by the interior stencils
        assert!(psi.residual < 1e-12);
    }

    #[test]
    fn overflow_is_rejected() {
        let g = Grid1D::new(-5.0, 5.0, 41).unwrap();
        assert!(matches!(
            ground_states(&g, &poly(&[0.0, 100.0]), 1.0, 1.0),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn box_spectrum_and_identical_partners() {
        let l = 1.0;
        let n = 401;
        let g = Grid1D::new(-l, l, n).unwrap();
        let h1 = closed_form(Label::H1, &g, &FunctionSpec::zero(), 1.0).unwrap();
        let h2 = closed_form(Label::H2, &g, &FunctionSpec::zero(), 1.0).unwrap();
        let s = partner_spectra(&h1, &h2, 4, 1e-9).unwrap();
        assert_eq!(s.h1, s.h2);
        assert!(s.all_paired() && s.pairs.len() == 4);
        for (m, v) in s.h1.iter().enumerate() {
            let exact = ((m + 1) as f64 * std::f64::consts::PI / (2.0 * l)).powi(2);
            let h = g.h();
            // three-point Laplacian underestimates by exact^2 h^2 / 12
            assert!((v - exact).abs() <= exact * exact * h * h / 12.0 * 1.01 + 1e-9);
        }
    }

    #[test]
    fn partner_spectra_rejects_non_hermitian_and_large_k() {
        let g = Grid1D::new(-1.0, 1.0, 41).unwrap();
        let f = poly(&[0.0, 1.0]);
        let h3 = closed_form(Label::H3, &g, &f, 1.0).unwrap();
        let h1 = closed_form(Label::H1, &g, &f, 1.0).unwrap();
        assert!(matches!(
            partner_spectra(&h3, &h1, 3, 1e-3),
            Err(Error::NotHermitian { .. })
        ));
        assert!(partner_spectra(&h1, &h1, 11, 1e-3).is_err());
    }

    #[test]
    fn similarity_spectrum_is_real() {
        let g = Grid1D::new(-5.0, 5.0, 201).unwrap();
        let r = real_spectrum_check(&g, &poly(&[0.0, 0.5]), 1.0, usize::MAX).unwrap();
        assert!(r.pass(), "{r:?}");
        assert!(!r.ill_conditioned);
        let wide = real_spectrum_check(&g, &poly(&[0.0, 4.0]), 1.0, 10).unwrap();
        assert!(wide.ill_conditioned);
    }

    #[test]
    fn similarity_spectrum_matches_general_eigensolver() {
        // independent route: Schur decomposition of the dense non-symmetric matrix
        let g = Grid1D::new(-5.0, 5.0, 41).unwrap();
        let f = poly(&[0.0, 0.5]);
        let (up, down) = exp_weights(&g, &f).unwrap();
        let h4 = momentum_squared(&g).left_diag(&up).unwrap().right_diag(&down).unwrap();
        let m = 39;
        let block: Vec<f64> = h4.principal_block(1..40).iter().map(|z| z.re).collect();
        let dense = nalgebra::DMatrix::from_row_slice(m, m, &block);
        let mut ev: Vec<C64> = dense.complex_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        let r = real_spectrum_check(&g, &f, 1.0, m).unwrap();
        let radius = r.reference.last().copied().unwrap();
        for (z, exact) in ev.iter().zip(&r.reference) {
            assert!(z.im.abs() <= 1e-8 * radius);
            assert!((z.re - exact).abs() <= 1e-8 * radius);
        }
    }
}
