//! Black-Scholes family of Hamiltonians in log-price `x = ln S`, their
//! identification with deformed-momentum Hamiltonians, and option pricing
//! by backward evolution `dC/dtau = -H C`.

use std::f64::consts::SQRT_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::grid::{derivative_matrices, Grid1D};
use crate::hamiltonians::{closed_form, Label};
use crate::linop::LinOp;
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct MarketParams {
    pub sigma: f64,
    pub r: f64,
    /// `V(x)` for the generalized and barrier Hamiltonians.
    pub potential: Option<FunctionSpec>,
}

impl MarketParams {
    pub fn new(sigma: f64, r: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Validation(format!("sigma must be positive, got {sigma}")));
        }
        if !r.is_finite() {
            return Err(Error::Validation(format!("rate must be finite, got {r}")));
        }
        Ok(Self {
            sigma,
            r,
            potential: None,
        })
    }

    pub fn with_potential(mut self, v: FunctionSpec) -> Self {
        self.potential = Some(v);
        self
    }

    /// `sigma^2 / 2`.
    pub fn half_variance(&self) -> f64 {
        self.sigma * self.sigma / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    EuropeanCall,
    EuropeanPut,
    DownAndOutCall,
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayoffKind::EuropeanCall => "call",
            PayoffKind::EuropeanPut => "put",
            PayoffKind::DownAndOutCall => "do-call",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptionContract {
    pub kind: PayoffKind,
    pub strike: f64,
    pub maturity: f64,
    pub barrier: Option<f64>,
}

impl OptionContract {
    fn checked(kind: PayoffKind, strike: f64, maturity: f64, barrier: Option<f64>) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(Error::Validation(format!("strike must be positive, got {strike}")));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::Validation(format!("maturity must be positive, got {maturity}")));
        }
        if let Some(b) = barrier {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Validation(format!("barrier must be positive, got {b}")));
            }
        }
        Ok(Self {
            kind,
            strike,
            maturity,
            barrier,
        })
    }

    pub fn european_call(strike: f64, maturity: f64) -> Result<Self> {
        Self::checked(PayoffKind::EuropeanCall, strike, maturity, None)
    }

    pub fn european_put(strike: f64, maturity: f64) -> Result<Self> {
        Self::checked(PayoffKind::EuropeanPut, strike, maturity, None)
    }

    pub fn down_and_out_call(strike: f64, maturity: f64, barrier: f64) -> Result<Self> {
        Self::checked(PayoffKind::DownAndOutCall, strike, maturity, Some(barrier))
    }

    /// Terminal payoff, ignoring the knockout.
    pub fn payoff(&self, s: f64) -> f64 {
        match self.kind {
            PayoffKind::EuropeanCall | PayoffKind::DownAndOutCall => (s - self.strike).max(0.0),
            PayoffKind::EuropeanPut => (self.strike - s).max(0.0),
        }
    }

    /// Asymptotic values `(C(x_min), C(x_max))` at time-to-maturity `tau`.
    pub fn boundary(&self, s_lo: f64, s_hi: f64, r: f64, tau: f64) -> (f64, f64) {
        let pv = self.strike * (-r * tau).exp();
        match self.kind {
            PayoffKind::EuropeanCall | PayoffKind::DownAndOutCall => (0.0, s_hi - pv),
            PayoffKind::EuropeanPut => (pv - s_lo, 0.0),
        }
    }
}

/// `-(s^2/2) D2 + diag(drift) D1 + diag(potential)`.
fn diffusion_operator(g: &Grid1D, half_var: f64, drift: &[f64], potential: &[f64]) -> Result<LinOp> {
    let (d1, d2) = derivative_matrices(g);
    let drift: Vec<C64> = drift.iter().map(|&d| C64::new(d, 0.0)).collect();
    let mut h = d2.scale(-half_var).add(&d1.left_diag(&drift)?)?;
    h.add_diagonal(potential)?;
    Ok(h)
}

/// `H_BS = -(s^2/2) D2 + (s^2/2 - r) D1 + r`.
pub fn bs_hamiltonian(g: &Grid1D, mp: &MarketParams) -> Result<LinOp> {
    let hv = mp.half_variance();
    diffusion_operator(g, hv, &vec![hv - mp.r; g.n()], &vec![mp.r; g.n()])
}

/// `H_BSG = -(s^2/2) D2 + diag(s^2/2 - V) D1 + diag(V)`.
pub fn bsg_hamiltonian(g: &Grid1D, mp: &MarketParams) -> Result<LinOp> {
    let v = mp
        .potential
        .as_ref()
        .ok_or_else(|| Error::Validation("generalized Hamiltonian needs a potential V".into()))?
        .values(g)?;
    let hv = mp.half_variance();
    let drift: Vec<f64> = v.iter().map(|v| hv - v).collect();
    diffusion_operator(g, hv, &drift, &v)
}

/// `H_BSB = -(s^2/2) D2 + (s^2/2 - r) D1 + diag(V)`.
pub fn bsb_hamiltonian(g: &Grid1D, mp: &MarketParams, v: &FunctionSpec) -> Result<LinOp> {
    let hv = mp.half_variance();
    diffusion_operator(g, hv, &vec![hv - mp.r; g.n()], &v.values(g)?)
}

/// `V = m` below `ln barrier`, `r` elsewhere.
pub fn soft_barrier_potential(g: &Grid1D, r: f64, barrier: f64, m: f64) -> FunctionSpec {
    let lb = barrier.ln();
    FunctionSpec::tabulated(g.sample(|x| if x < lb { m } else { r }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Which {
    #[serde(rename = "H_I")]
    HI,
    #[serde(rename = "H_II")]
    HII,
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Which::HI => "H_I",
            Which::HII => "H_II",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    BlackScholes,
    Generalized,
    Barrier,
}

#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    pub which: Which,
    pub sign: i8,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeformationMapping {
    pub target: Target,
    pub beta: f64,
    #[serde(skip)]
    pub f: FunctionSpec,
    #[serde(skip)]
    pub v2: FunctionSpec,
    pub sign: i8,
    pub which_hamiltonian: Which,
    pub residual: f64,
    pub tolerance: f64,
    /// Every candidate's residual, in search order.
    pub candidates: Vec<Candidate>,
    /// Other labels whose matrix is the matched one (within tolerance).
    pub aliases: Vec<(Which, i8)>,
    /// Number of distinct matrices among the matching candidates.
    pub distinct_matches: usize,
}

impl DeformationMapping {
    pub fn label(&self) -> String {
        format!("({}, {}f)", self.which_hamiltonian, if self.sign > 0 { "+" } else { "-" })
    }
}

/// Search order; the first match wins among candidates that share a matrix.
const PREFERENCE: [(Which, i8); 4] = [(Which::HII, 1), (Which::HII, -1), (Which::HI, 1), (Which::HI, -1)];

/// `H_I = b^2 P_f P_f + U1` or `H_II = b^2 P_f^dag P_f^dag + U2` with
/// `f -> sign * f`.
pub fn deformed_candidate(
    which: Which,
    sign: i8,
    g: &Grid1D,
    f: &FunctionSpec,
    beta: f64,
    v2: &FunctionSpec,
) -> Result<LinOp> {
    let fs = if sign > 0 { f.clone() } else { f.negated() };
    let f1 = fs.derivative_values(g, 1)?;
    let f2 = fs.derivative_values(g, 2)?;
    let v = v2.values(g)?;
    let b2 = beta * beta;
    let (label, u): (Label, Vec<f64>) = match which {
        Which::HI => (
            Label::H4,
            (0..g.n()).map(|i| -b2 * (f2[i] - f1[i] * f1[i]) + v[i]).collect(),
        ),
        Which::HII => (
            Label::H3,
            (0..g.n()).map(|i| b2 * (f2[i] + f1[i] * f1[i]) + v[i]).collect(),
        ),
    };
    let mut h = closed_form(label, g, &fs, beta)?;
    h.add_diagonal(&u)?;
    Ok(h)
}

/// Relative rounding budget for identification.
pub const IDENTIFICATION_ROUNDING: f64 = 100.0;

fn resolve(
    target: Target,
    op: &LinOp,
    g: &Grid1D,
    f: FunctionSpec,
    v2: FunctionSpec,
    beta: f64,
) -> Result<DeformationMapping> {
    let tolerance = IDENTIFICATION_ROUNDING * f64::EPSILON * op.max_abs();
    let mut built = Vec::with_capacity(4);
    let mut candidates = Vec::with_capacity(4);
    for (which, sign) in PREFERENCE {
        let h = deformed_candidate(which, sign, g, &f, beta, &v2)?;
        let residual = h.max_abs_diff(op)?;
        candidates.push(Candidate {
            which,
            sign,
            residual,
        });
        built.push(h);
    }
    let matching: Vec<usize> = (0..4).filter(|&k| candidates[k].residual <= tolerance).collect();
    let Some(&first) = matching.first() else {
        let best = candidates.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min);
        return Err(Error::NoMatch { best });
    };

    // group matching labels by the matrix they produce
    let mut representatives: Vec<usize> = Vec::new();
    for &k in &matching {
        let mut seen = false;
        for &r in &representatives {
            if built[k].max_abs_diff(&built[r])? <= tolerance {
                seen = true;
            }
        }
        if !seen {
            representatives.push(k);
        }
    }
    if representatives.len() > 1 {
        return Err(Error::Ambiguous {
            count: representatives.len(),
        });
    }

    Ok(DeformationMapping {
        target,
        beta,
        f,
        v2,
        sign: candidates[first].sign,
        which_hamiltonian: candidates[first].which,
        residual: candidates[first].residual,
        tolerance,
        aliases: matching[1..]
            .iter()
            .map(|&k| (candidates[k].which, candidates[k].sign))
            .collect(),
        distinct_matches: representatives.len(),
        candidates,
    })
}

/// `f(x) = (s^2/2 - r) x / s^2`.
pub fn constant_rate_deformation(mp: &MarketParams) -> FunctionSpec {
    FunctionSpec::Polynomial(vec![0.0, (mp.half_variance() - mp.r) / (mp.sigma * mp.sigma)])
}

/// `f(x) = int_0^x (s^2/2 - V(u)) / s^2 du`.
pub fn potential_deformation(mp: &MarketParams, v: &FunctionSpec, g: &Grid1D) -> Result<FunctionSpec> {
    let s2 = mp.sigma * mp.sigma;
    let hv = mp.half_variance();
    let integrand = match v {
        FunctionSpec::Polynomial(c) => FunctionSpec::Polynomial(
            c.iter()
                .enumerate()
                .map(|(k, &a)| if k == 0 { (hv - a) / s2 } else { -a / s2 })
                .collect(),
        ),
        FunctionSpec::Tabulated(_) => {
            FunctionSpec::tabulated(v.values(g)?.into_iter().map(|a| (hv - a) / s2).collect())
        }
    };
    integrand.antiderivative(g)
}

fn beta_for(mp: &MarketParams) -> f64 {
    mp.half_variance().sqrt()
}

/// Identifies `H_BS` (or `H_BSG` when `mp.potential` is set) among the four
/// deformed candidates.
pub fn map_to_deformed(mp: &MarketParams, g: &Grid1D) -> Result<DeformationMapping> {
    match &mp.potential {
        None => {
            let op = bs_hamiltonian(g, mp)?;
            let v2 = FunctionSpec::Polynomial(vec![mp.r]);
            resolve(Target::BlackScholes, &op, g, constant_rate_deformation(mp), v2, beta_for(mp))
        }
        Some(v) => {
            let op = bsg_hamiltonian(g, mp)?;
            let f = potential_deformation(mp, v, g)?;
            resolve(Target::Generalized, &op, g, f, v.clone(), beta_for(mp))
        }
    }
}

/// Identifies `H_BSB` with potential `v`.
pub fn map_barrier_to_deformed(mp: &MarketParams, g: &Grid1D, v: &FunctionSpec) -> Result<DeformationMapping> {
    let op = bsb_hamiltonian(g, mp, v)?;
    resolve(Target::Barrier, &op, g, constant_rate_deformation(mp), v.clone(), beta_for(mp))
}

/// Option values at `t = 0` on every grid node.
#[derive(Clone, Debug)]
pub struct PriceCurve {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
    /// `max |C(0)| / max |payoff|`.
    pub growth: f64,
}

impl PriceCurve {
    /// Cubic Lagrange interpolation through the four nodes around `x`.
    pub fn at(&self, x: f64) -> f64 {
        let g = &self.grid;
        let n = g.n();
        if n < 4 {
            return self.values[g.nearest(x)];
        }
        let k = ((x - g.x_min()) / g.h()).floor().clamp(1.0, (n - 3) as f64) as usize;
        let idx = [k - 1, k, k + 1, k + 2];
        let xs = idx.map(|i| g.node(i));
        let mut out = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - xs[b]) / (xs[a] - xs[b]);
                }
            }
            out += w * self.values[idx[a]];
        }
        out
    }

    pub fn at_spot(&self, s: f64) -> f64 {
        self.at(s.ln())
    }

    /// `x,S,C` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,S,C\n");
        for (k, c) in self.values.iter().enumerate() {
            let x = self.grid.node(k);
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", x, x.exp(), c));
        }
        out
    }
}

/// Time-stepping matrix `I + w H` with identity rows where values are fixed.
enum Implicit {
    Banded {
        lower: Vec<f64>,
        diag: Vec<f64>,
        upper: Vec<f64>,
    },
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

enum Operator {
    Banded {
        lower: Vec<f64>,
        diag: Vec<f64>,
        upper: Vec<f64>,
    },
    Dense(DMatrix<f64>),
}

impl Operator {
    fn from_linop(h: &LinOp) -> Result<Self> {
        if !h.is_real() {
            return Err(Error::Validation("pricing needs a real-valued Hamiltonian".into()));
        }
        let n = h.dim();
        let banded = (1..n - 1).all(|i| {
            h.row(i)
                .iter()
                .enumerate()
                .all(|(j, z)| j + 1 >= i && j <= i + 1 || z.re == 0.0)
        });
        if banded {
            let mut lower = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                lower[i] = h.get(i, i - 1).re;
                diag[i] = h.get(i, i).re;
                upper[i] = h.get(i, i + 1).re;
            }
            Ok(Operator::Banded { lower, diag, upper })
        } else {
            Ok(Operator::Dense(DMatrix::from_fn(n, n, |i, j| h.get(i, j).re)))
        }
    }

    /// `(I - w H) u` on free rows; fixed rows take `fixed[i]`.
    fn explicit(&self, u: &[f64], w: f64, fixed: &[Option<f64>]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = match fixed[i] {
                Some(v) => v,
                None if w == 0.0 => u[i],
                None => {
                    let hu = match self {
                        Operator::Banded { lower, diag, upper } => {
                            lower[i] * u[i - 1] + diag[i] * u[i] + upper[i] * u[i + 1]
                        }
                        Operator::Dense(m) => m.row(i).iter().zip(u).map(|(a, b)| a * b).sum(),
                    };
                    u[i] - w * hu
                }
            };
        }
        out
    }

    fn implicit(&self, w: f64, fixed: &[Option<f64>]) -> Result<Implicit> {
        let n = fixed.len();
        match self {
            Operator::Banded { lower, diag, upper } => {
                let mut l = vec![0.0; n];
                let mut d = vec![1.0; n];
                let mut u = vec![0.0; n];
                for i in 0..n {
                    if fixed[i].is_none() {
                        l[i] = w * lower[i];
                        d[i] = 1.0 + w * diag[i];
                        u[i] = w * upper[i];
                    }
                }
                Ok(Implicit::Banded {
                    lower: l,
                    diag: d,
                    upper: u,
                })
            }
            Operator::Dense(m) => {
                let mut a = m * w;
                for i in 0..n {
                    if fixed[i].is_some() {
                        a.row_mut(i).fill(0.0);
                    } else {
                        a[(i, i)] += 1.0;
                    }
                }
                for i in 0..n {
                    if fixed[i].is_some() {
                        a[(i, i)] = 1.0;
                    }
                }
                Ok(Implicit::Dense(a.lu()))
            }
        }
    }
}

impl Implicit {
    fn solve(&self, rhs: Vec<f64>) -> Result<Vec<f64>> {
        match self {
            Implicit::Banded { lower, diag, upper } => thomas(lower, diag, upper, rhs),
            Implicit::Dense(lu) => lu
                .solve(&DVector::from_vec(rhs))
                .map(|v| v.as_slice().to_vec())
                .ok_or_else(|| Error::LinearSolve("singular time-step matrix".into())),
        }
    }
}

/// Tridiagonal solve; `lower[0]` and `upper[n-1]` are ignored.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::LinearSolve("zero pivot in tridiagonal solve".into()));
    }
    c[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::LinearSolve(format!("zero pivot at row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(rhs)
}

/// Evolves `dC/dtau = -H C` from `terminal` over `tau_total` in `steps`
/// Crank-Nicolson steps, the first of which is replaced by two implicit
/// Euler half-steps. `boundary(tau)` gives the Dirichlet values at both
/// ends; nodes `0..=knockout` are held at zero.
pub fn evolve_backward(
    h: &LinOp,
    terminal: &[f64],
    tau_total: f64,
    steps: usize,
    boundary: &dyn Fn(f64) -> (f64, f64),
    knockout: Option<usize>,
) -> Result<Vec<f64>> {
    let n = h.dim();
    if terminal.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: terminal.len(),
        });
    }
    if steps == 0 {
        return Err(Error::Validation("steps must be at least 1".into()));
    }
    let op = Operator::from_linop(h)?;
    let dt = tau_total / steps as f64;
    let fixed_at = |tau: f64| -> Vec<Option<f64>> {
        let (lo, hi) = boundary(tau);
        let mut fixed = vec![None; n];
        fixed[0] = Some(lo);
        fixed[n - 1] = Some(hi);
        if let Some(kb) = knockout {
            for slot in fixed.iter_mut().take(kb.min(n - 1) + 1) {
                *slot = Some(0.0);
            }
        }
        fixed
    };
    let mut u = terminal.to_vec();
    if let Some(kb) = knockout {
        u.iter_mut().take(kb + 1).for_each(|v| *v = 0.0);
    }

    // implicit Euler over dt/2 and Crank-Nicolson over dt share I + (dt/2) H
    let lhs = op.implicit(0.5 * dt, &fixed_at(0.0))?;
    let mut tau = 0.0;
    for s in 0..steps {
        if s == 0 {
            for k in 1..=2 {
                let t = tau + 0.5 * dt * k as f64;
                u = lhs.solve(op.explicit(&u, 0.0, &fixed_at(t)))?;
            }
        } else {
            let fixed = fixed_at(tau + dt);
            u = lhs.solve(op.explicit(&u, 0.5 * dt, &fixed))?;
        }
        tau = (s + 1) as f64 * dt;
        if let Some(kb) = knockout {
            u.iter_mut().take(kb + 1).for_each(|v| *v = 0.0);
        }
    }
    Ok(u)
}

/// Relative mismatch above which a boundary is flagged as too close.
pub const BOUNDARY_WARNING: f64 = 1e-3;
/// Grid half-width around `ln K`, in units of `sigma sqrt(T)`, below which
/// a warning is issued.
pub const MIN_COVERAGE: f64 = 6.0;

/// Prices `contract` with Hamiltonian `h` on grid `g`.
pub fn price_pde(
    h: &LinOp,
    contract: &OptionContract,
    mp: &MarketParams,
    g: &Grid1D,
    steps: usize,
) -> Result<PriceCurve> {
    if *h.grid() != *g {
        return Err(Error::GridMismatch);
    }
    let (s_lo, s_hi) = (g.x_min().exp(), g.x_max().exp());
    let terminal: Vec<f64> = g.sample(|x| contract.payoff(x.exp()));
    let knockout = match contract.kind {
        PayoffKind::DownAndOutCall => {
            let b = contract
                .barrier
                .ok_or_else(|| Error::Validation("barrier contract needs a barrier level".into()))?;
            Some(g.nearest(b.ln()))
        }
        _ => None,
    };
    let r = mp.r;
    let values = evolve_backward(
        h,
        &terminal,
        contract.maturity,
        steps,
        &|tau| contract.boundary(s_lo, s_hi, r, tau),
        knockout,
    )?;

    let mut warnings = Vec::new();
    let reach = MIN_COVERAGE * mp.sigma * contract.maturity.sqrt();
    let lk = contract.strike.ln();
    if g.x_max() < lk + reach || (knockout.is_none() && g.x_min() > lk - reach) {
        warnings.push(format!(
            "grid [{:.4}, {:.4}] covers less than ln K +/- {MIN_COVERAGE} sigma sqrt(T)",
            g.x_min(),
            g.x_max()
        ));
    }
    let inset = ((g.n() - 1) / 20).max(1);
    let mut probes = vec![g.n() - 1 - inset];
    if knockout.is_none() {
        probes.push(inset);
    }
    for k in probes {
        let s = g.node(k).exp();
        let (lo, hi) = contract.boundary(s, s, r, contract.maturity);
        let asymptotic = if k < g.n() / 2 { lo } else { hi };
        let gap = (values[k] - asymptotic).abs();
        let scale = asymptotic.abs().max(contract.strike);
        if gap > BOUNDARY_WARNING * scale {
            warnings.push(format!(
                "grid too narrow: price at S = {s:.6} differs from its asymptotic form by {:.3}%",
                100.0 * gap / scale
            ));
        }
    }

    let peak = terminal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let out = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PriceCurve {
        grid: *g,
        values,
        warnings,
        growth: if peak > 0.0 { out / peak } else { 0.0 },
    })
}

/// Grid half-width around `ln K` used by default.
pub const DEFAULT_HALF_WIDTH: f64 = 5.0;
/// Default node count (and step count) for pricing.
pub const DEFAULT_NODES: usize = 2001;

/// Default pricing grid: `ln K +/- 5`, or `[ln B - 2, ln B + 8]` for
/// barrier contracts so that `ln B` is a node.
pub fn pricing_grid(contract: &OptionContract, n: usize) -> Result<Grid1D> {
    match contract.barrier {
        Some(b) if contract.kind == PayoffKind::DownAndOutCall => {
            Grid1D::new(b.ln() - 2.0, b.ln() + 8.0, n)
        }
        _ => {
            let lk = contract.strike.ln();
            Grid1D::new(lk - DEFAULT_HALF_WIDTH, lk + DEFAULT_HALF_WIDTH, n)
        }
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be positive, got {v}")))
    }
}

/// Lognormal closed form for European calls and puts.
pub fn closed_form_european(s0: f64, k: f64, r: f64, sigma: f64, t: f64, kind: PayoffKind) -> Result<f64> {
    for (name, v) in [("spot", s0), ("strike", k), ("sigma", sigma), ("maturity", t)] {
        check_positive(name, v)?;
    }
    let vol = sigma * t.sqrt();
    let d1 = ((s0 / k).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
    let d2 = d1 - vol;
    let df = (-r * t).exp();
    match kind {
        PayoffKind::EuropeanCall => Ok(s0 * norm_cdf(d1) - k * df * norm_cdf(d2)),
        PayoffKind::EuropeanPut => Ok(k * df * norm_cdf(-d2) - s0 * norm_cdf(-d1)),
        PayoffKind::DownAndOutCall => Err(Error::Validation(
            "use closed_form_down_and_out_call for barrier contracts".into(),
        )),
    }
}

/// Continuously monitored down-and-out call.
pub fn closed_form_down_and_out_call(s0: f64, k: f64, b: f64, r: f64, sigma: f64, t: f64) -> Result<f64> {
    for (name, v) in [("spot", s0), ("strike", k), ("barrier", b), ("sigma", sigma), ("maturity", t)] {
        check_positive(name, v)?;
    }
    if s0 <= b {
        return Ok(0.0);
    }
    let vol = sigma * t.sqrt();
    let lambda = (r + 0.5 * sigma * sigma) / (sigma * sigma);
    let df = (-r * t).exp();
    let ratio = b / s0;
    let reflect = |z: f64| -> f64 {
        s0 * ratio.powf(2.0 * lambda) * norm_cdf(z) - k * df * ratio.powf(2.0 * lambda - 2.0) * norm_cdf(z - vol)
    };
    if b <= k {
        let y = (b * b / (s0 * k)).ln() / vol + lambda * vol;
        let call = closed_form_european(s0, k, r, sigma, t, PayoffKind::EuropeanCall)?;
        Ok(call - reflect(y))
    } else {
        let x1 = (s0 / b).ln() / vol + lambda * vol;
        let y1 = (b / s0).ln() / vol + lambda * vol;
        Ok(s0 * norm_cdf(x1) - k * df * norm_cdf(x1 - vol) - reflect(y1))
    }
}

/// Closed-form price of any supported contract.
pub fn closed_form_price(contract: &OptionContract, mp: &MarketParams, s0: f64) -> Result<f64> {
    let (k, t) = (contract.strike, contract.maturity);
    match contract.kind {
        PayoffKind::DownAndOutCall => {
            let b = contract
                .barrier
                .ok_or_else(|| Error::Validation("barrier contract needs a barrier level".into()))?;
            closed_form_down_and_out_call(s0, k, b, mp.r, mp.sigma, t)
        }
        kind => closed_form_european(s0, k, mp.r, mp.sigma, t, kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::hermiticity_defect;

    fn mp(sigma: f64, r: f64) -> MarketParams {
        MarketParams::new(sigma, r).unwrap()
    }

    fn grid() -> Grid1D {
        Grid1D::new(100f64.ln() - 5.0, 100f64.ln() + 5.0, 201).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MarketParams::new(0.0, 0.05).is_err());
        assert!(OptionContract::european_call(-1.0, 1.0).is_err());
        assert!(OptionContract::european_put(100.0, 0.0).is_err());
        assert!(OptionContract::down_and_out_call(100.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn hamiltonian_reductions() {
        let g = grid();
        let (d1, d2) = derivative_matrices(&g);
        // sigma^2 = 2r: no first-order term
        let h = bs_hamiltonian(&g, &mp(0.2, 0.02)).unwrap();
        let mut want = d2.scale(-0.02);
        want.add_diagonal(&vec![0.02; g.n()]).unwrap();
        assert!(h.max_abs_diff(&want).unwrap() <= 4.0 * f64::EPSILON * want.max_abs());
        // r = 0, sigma = 1
        let h = bs_hamiltonian(&g, &mp(1.0, 0.0)).unwrap();
        let want = d2.scale(-0.5).add(&d1.scale(0.5)).unwrap();
        assert!(h.max_abs_diff(&want).unwrap() <= 4.0 * f64::EPSILON * want.max_abs());
        assert!(h.is_real());
        assert!(hermiticity_defect(&h) > 0.0);
        assert_eq!(hermiticity_defect(&bs_hamiltonian(&g, &mp(0.2, 0.02)).unwrap()), 0.0);
    }

    #[test]
    fn generalized_and_barrier_reduce_to_black_scholes() {
        let g = grid();
        let m = mp(0.3, 0.04);
        let bs = bs_hamiltonian(&g, &m).unwrap();
        let flat = FunctionSpec::Polynomial(vec![0.04]);
        let bsg = bsg_hamiltonian(&g, &m.clone().with_potential(flat.clone())).unwrap();
        assert_eq!(bs, bsg);
        assert_eq!(bs, bsb_hamiltonian(&g, &m, &flat).unwrap());

        let affine = m.clone().with_potential(FunctionSpec::Polynomial(vec![0.0, 1.0]));
        let h = bsg_hamiltonian(&g, &affine).unwrap();
        let h0 = bsg_hamiltonian(&g, &m.clone().with_potential(FunctionSpec::zero())).unwrap();
        // first-order coefficient tracks s^2/2 - x row by row
        for i in [3usize, 100, 190] {
            let drift = h.get(i, i + 1).re - h.get(i, i - 1).re;
            let x = g.node(i);
            assert!((drift * g.h() - (0.045 - x)).abs() < 1e-12);
        }
        assert!(h.max_abs_diff(&h0).unwrap() > 0.0);
    }

    #[test]
    fn soft_barrier_touches_only_low_diagonal() {
        let g = grid();
        let m = mp(0.2, 0.05);
        let v = soft_barrier_potential(&g, 0.05, 80.0, 50.0);
        let diff = bsb_hamiltonian(&g, &m, &v).unwrap().sub(&bs_hamiltonian(&g, &m).unwrap()).unwrap();
        let lb = 80f64.ln();
        for i in 0..g.n() {
            for j in 0..g.n() {
                let d = diff.get(i, j).re;
                if i == j && g.node(i) < lb {
                    assert!((d - 49.95).abs() < 1e-12);
                } else {
                    assert_eq!(d, 0.0);
                }
            }
        }
    }

    #[test]
    fn identification_picks_one_matrix() {
        let g = grid();
        let map = map_to_deformed(&mp(0.2, 0.05), &g).unwrap();
        assert_eq!(map.distinct_matches, 1);
        assert!(map.residual <= map.tolerance);
        assert_eq!((map.which_hamiltonian, map.sign), (Which::HII, -1));
        assert_eq!(map.aliases, vec![(Which::HI, 1)]);
        assert!((map.beta * map.beta - 0.02).abs() < 1e-16);

        let degenerate = map_to_deformed(&mp(0.2, 0.02), &g).unwrap();
        assert_eq!((degenerate.which_hamiltonian, degenerate.sign), (Which::HII, 1));
        assert_eq!(degenerate.aliases.len(), 3);
    }

    #[test]
    fn identification_of_generalized_and_barrier() {
        let g = grid();
        let m = mp(0.3, 0.05).with_potential(FunctionSpec::Polynomial(vec![0.05, 0.01]));
        let map = map_to_deformed(&m, &g).unwrap();
        assert_eq!(map.target, Target::Generalized);
        assert_eq!(map.distinct_matches, 1);
        assert_eq!(map.f, FunctionSpec::Polynomial(vec![0.0, (0.045 - 0.05) / 0.09, -0.01 / 0.09 / 2.0]));
        let v = soft_barrier_potential(&g, 0.05, 80.0, 10.0);
        let b = map_barrier_to_deformed(&mp(0.2, 0.05), &g, &v).unwrap();
        assert_eq!(b.distinct_matches, 1);
    }

    #[test]
    fn wrong_target_fails_loudly() {
        let g = grid();
        let m = mp(0.2, 0.05);
        let op = bs_hamiltonian(&g, &mp(0.25, 0.05)).unwrap();
        let r = resolve(
            Target::BlackScholes,
            &op,
            &g,
            constant_rate_deformation(&m),
            FunctionSpec::Polynomial(vec![0.05]),
            beta_for(&m),
        );
        assert!(matches!(r, Err(Error::NoMatch { .. })));
    }

    #[test]
    fn closed_form_limits() {
        let call = |s, k, r, v, t| closed_form_european(s, k, r, v, t, PayoffKind::EuropeanCall).unwrap();
        assert!((call(100.0, 1e-8, 0.05, 0.2, 1.0) - 100.0).abs() < 1e-8);
        let fwd = 100.0 - 90.0 * (-0.05f64).exp();
        assert!((call(100.0, 90.0, 0.05, 1e-12, 1.0) - fwd).abs() < 1e-10);
        assert!((call(100.0, 100.0, 0.05, 0.2, 1.0) - 10.450583572185565).abs() < 1e-9);
        let put = closed_form_european(100.0, 100.0, 0.05, 0.2, 1.0, PayoffKind::EuropeanPut).unwrap();
        assert!((call(100.0, 100.0, 0.05, 0.2, 1.0) - put - (100.0 - 100.0 * (-0.05f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn down_and_out_limits() {
        let call = closed_form_european(100.0, 100.0, 0.05, 0.2, 1.0, PayoffKind::EuropeanCall).unwrap();
        let far = closed_form_down_and_out_call(100.0, 100.0, 1.0, 0.05, 0.2, 1.0).unwrap();
        assert!((far - call).abs() < 1e-12);
        let near = closed_form_down_and_out_call(100.0, 100.0, 80.0, 0.05, 0.2, 1.0).unwrap();
        assert!(near < call && near > 0.0);
        assert_eq!(closed_form_down_and_out_call(79.0, 100.0, 80.0, 0.05, 0.2, 1.0).unwrap(), 0.0);
        // the two branches meet at B = K
        let a = closed_form_down_and_out_call(120.0, 100.0, 100.0 - 1e-9, 0.05, 0.2, 1.0).unwrap();
        let b = closed_form_down_and_out_call(120.0, 100.0, 100.0 + 1e-9, 0.05, 0.2, 1.0).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn constant_claim_is_discounted() {
        let g = grid();
        let m = mp(0.2, 0.05);
        let h = bs_hamiltonian(&g, &m).unwrap();
        let c = 3.0;
        let out = evolve_backward(&h, &vec![c; g.n()], 1.0, 1000, &|tau| {
            let v = c * (-0.05 * tau).exp();
            (v, v)
        }, None)
        .unwrap();
        let want = c * (-0.05f64).exp();
        assert!(out.iter().all(|v| ((v - want) / want).abs() < 1e-8));
    }

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, -1.0, 0.5, -0.25];
        let diag = [4.0, 3.0, 5.0, 2.0];
        let upper = [1.0, 0.5, -1.0, 0.0];
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let x = thomas(&lower, &diag, &upper, rhs.clone()).unwrap();
        for i in 0..4 {
            let mut s = diag[i] * x[i];
            if i > 0 {
                s += lower[i] * x[i - 1];
            }
            if i < 3 {
                s += upper[i] * x[i + 1];
            }
            assert!((s - rhs[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_fallback_agrees_with_banded() {
        let g = Grid1D::new(100f64.ln() - 3.0, 100f64.ln() + 3.0, 121).unwrap();
        let m = mp(0.3, 0.05);
        let h = bs_hamiltonian(&g, &m).unwrap();
        let contract = OptionContract::european_call(100.0, 0.5).unwrap();
        let banded = price_pde(&h, &contract, &m, &g, 60).unwrap();
        // a negligible far-off-band entry forces the dense path
        let mut h2 = h.clone();
        h2.set_re(60, 0, 1e-300);
        let dense = price_pde(&h2, &contract, &m, &g, 60).unwrap();
        for (a, b) in banded.values.iter().zip(&dense.values) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let curve = PriceCurve {
            grid: g,
            values: g.sample(|x| 1.0 - 2.0 * x + x * x * x),
            warnings: vec![],
            growth: 1.0,
        };
        for x in [0.03, 0.51, 0.97] {
            assert!((curve.at(x) - (1.0 - 2.0 * x + x * x * x)).abs() < 1e-14);
        }
        let csv = curve.to_csv();
        assert!(csv.starts_with("x,S,C\n0.0000000000000000e0,1.0000000000000000e0,"));
        assert_eq!(csv.lines().count(), 12);
    }

    #[test]
    fn narrow_grid_warns() {
        let m = mp(0.2, 0.05);
        let contract = OptionContract::european_call(100.0, 1.0).unwrap();
        let g = Grid1D::new(100f64.ln() - 0.3, 100f64.ln() + 0.3, 121).unwrap();
        let curve = price_pde(&bs_hamiltonian(&g, &m).unwrap(), &contract, &m, &g, 100).unwrap();
        assert!(!curve.warnings.is_empty());
        let g = pricing_grid(&contract, 401).unwrap();
        let curve = price_pde(&bs_hamiltonian(&g, &m).unwrap(), &contract, &m, &g, 400).unwrap();
        assert!(curve.warnings.is_empty(), "{:?}", curve.warnings);
    }
}
