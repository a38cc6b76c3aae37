mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use susyfin::finance::{
    bs_hamiltonian, bsb_hamiltonian, closed_form_european, closed_form_price, map_barrier_to_deformed,
    map_to_deformed, price_pde, pricing_grid, MarketParams, OptionContract, PayoffKind, DEFAULT_NODES,
};
use susyfin::hamiltonians::build_from_superpotential;
use susyfin::montecarlo::{
    barrier_estimate, discounted_value, feynman_kac_estimate, monitoring_bias_bound, pde_tolerance, GbmConfig,
    McEstimate, MONITORING_PER_YEAR,
};
use susyfin::report::Check;
use susyfin::susy::partner_spectra;
use susyfin::tolerance::COMPOSITE_MARGIN;
use susyfin::{suite, Error, FunctionSpec, Grid1D};

use report::{fmt17, RunReport};

#[derive(Parser)]
#[command(name = "susyfin", version, about = "Deformed-momentum Hamiltonians: algebra checks, partner spectra and option pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Operator, Hamiltonian and supercharge identities for one deformation f.
    VerifyAlgebra(VerifyArgs),
    /// Lowest eigenvalues of the partner Hamiltonians of a superpotential W.
    Spectrum(SpectrumArgs),
    /// Price a European or down-and-out option.
    Price(PriceArgs),
    /// Match a Black-Scholes Hamiltonian to a deformed Hamiltonian.
    Identify(IdentifyArgs),
}

#[derive(Args)]
struct Output {
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Record wall time in the report (breaks byte-reproducibility).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Deformation, `poly:c0,c1,...` or `table:<path>`.
    #[arg(long, default_value = "poly:0")]
    f: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    xmin: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    xmax: f64,
    #[arg(long, default_value_t = 501)]
    n: usize,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Superpotential W.
    #[arg(long)]
    w: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    xmin: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    xmax: f64,
    #[arg(long, default_value_t = 1001)]
    n: usize,
    /// Largest gap for two eigenvalues to count as partners.
    #[arg(long, default_value_t = 1e-3)]
    pair_tol: f64,
    /// Eigenvalue table: index, lambda_H1, lambda_H2, paired.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Payoff {
    Call,
    Put,
    DoCall,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Method {
    Pde,
    Mc,
    Closed,
    All,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long, value_enum)]
    payoff: Payoff,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    barrier: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    maturity: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, allow_hyphen_values = true)]
    rate: f64,
    #[arg(long)]
    spot: f64,
    #[arg(long, value_enum, default_value = "all")]
    method: Method,
    #[arg(long, default_value_t = 1_000_000)]
    paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Grid nodes (defaults to 2001).
    #[arg(long, default_value_t = DEFAULT_NODES)]
    n: usize,
    /// Time steps (defaults to the node count).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    xmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xmax: Option<f64>,
    /// Barrier monitoring dates per year for Monte Carlo.
    #[arg(long, default_value_t = MONITORING_PER_YEAR)]
    monitoring: f64,
    /// Price curve: x, S, C.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    /// H_BS, or H_BSG when --v is given.
    Auto,
    /// H_BSB with potential --v.
    Barrier,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rate: f64,
    /// Potential V(x) for the generalized or barrier Hamiltonian.
    #[arg(long)]
    v: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    target: TargetArg,
    #[arg(long, allow_hyphen_values = true)]
    xmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xmax: Option<f64>,
    #[arg(long, default_value_t = 501)]
    n: usize,
    #[command(flatten)]
    out: Output,
}

/// Failures that map to exit codes.
enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoMatch { .. } | Error::Ambiguous { .. } | Error::LinearSolve(_) | Error::NotHermitian { .. } => {
                Failure::Check(e.to_string())
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<RunReport, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let (outcome, out) = match &cli.command {
        Command::VerifyAlgebra(a) => (verify_algebra(a), &a.out),
        Command::Spectrum(a) => (spectrum(a), &a.out),
        Command::Price(a) => (price(a), &a.out),
        Command::Identify(a) => (identify(a), &a.out),
    };
    match outcome {
        Ok(mut report) => {
            if out.timing {
                report.wall_time = Some(start.elapsed().as_secs_f64());
            }
            if let Some(path) = &out.json {
                report.artifacts.push(path.display().to_string());
                if let Err(e) = report.write_json(path) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            report.print_checks();
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn grid_params(report: &mut RunReport, g: &Grid1D) {
    report.param("xmin", g.x_min());
    report.param("xmax", g.x_max());
    report.param("n", g.n());
}

fn verify_algebra(a: &VerifyArgs) -> Outcome {
    let f = FunctionSpec::parse(&a.f)?;
    // composite operators are compared away from COMPOSITE_MARGIN edge rows
    let min_nodes = 2 * COMPOSITE_MARGIN + 3;
    if a.n < min_nodes {
        return Err(Failure::Usage(format!("--n must be at least {min_nodes}, got {}", a.n)));
    }
    let g = Grid1D::new(a.xmin, a.xmax, a.n)?;
    let mut report = RunReport::new("verify-algebra");
    report.param("f", f.to_string());
    report.param("alpha", a.alpha);
    report.param("beta", a.beta);
    grid_params(&mut report, &g);
    let result = suite::verify_algebra(&g, &f, a.alpha, a.beta)?;
    println!("block content of {{Q1, Q2}}: {}", result.block_content);
    println!("block content of {{Q3, Q4}}: {}", result.block_content_tilde);
    report.results = json!({
        "block_content": result.block_content,
        "block_content_tilde": result.block_content_tilde,
    });
    report.checks = result.checks;
    Ok(report)
}

fn spectrum(a: &SpectrumArgs) -> Outcome {
    let w = FunctionSpec::parse(&a.w)?;
    let g = Grid1D::new(a.xmin, a.xmax, a.n)?;
    let mut report = RunReport::new("spectrum");
    report.param("w", w.to_string());
    report.param("alpha", a.alpha);
    report.param("k", a.k);
    report.param("pair_tol", a.pair_tol);
    grid_params(&mut report, &g);

    let (h1, h2) = build_from_superpotential(&g, &w, a.alpha)?;
    let s = partner_spectra(&h1.closed_form, &h2.closed_form, a.k, a.pair_tol)?;

    println!("{:>5} {:>24} {:>24}  paired", "index", "lambda_H1", "lambda_H2");
    let status = |v: f64, pairs: &[f64]| -> &'static str {
        if v.abs() < s.zero_threshold {
            "zero"
        } else if pairs.contains(&v) {
            "yes"
        } else {
            "no"
        }
    };
    let paired_h1: Vec<f64> = s.pairs.iter().map(|p| p.0).collect();
    let mut csv = String::from("index,lambda_H1,lambda_H2,paired\n");
    for i in 0..s.h1.len() {
        let mark = status(s.h1[i], &paired_h1);
        println!("{i:>5} {:>24.16e} {:>24.16e}  {mark}", s.h1[i], s.h2[i]);
        csv.push_str(&format!("{i},{},{},{mark}\n", fmt17(s.h1[i]), fmt17(s.h2[i])));
    }
    if let Some(path) = &a.csv {
        std::fs::write(path, csv)?;
        report.artifacts.push(path.display().to_string());
    }
    let unpaired_zero = s.unpaired_zero_modes();
    if unpaired_zero > 0 {
        println!("unpaired zero modes: {unpaired_zero} (H1: {}, H2: {})", s.zero_modes_h1, s.zero_modes_h2);
    }
    report.checks.push(Check::flag(
        "nonzero_eigenvalues_paired",
        s.all_paired(),
        format!("{} pairs within {:e}", s.pairs.len(), a.pair_tol),
    ));
    report.checks.push(
        Check::at_most("unpaired_zero_modes", unpaired_zero as f64, 1.0)
            .with_detail(format!("H1: {}, H2: {}", s.zero_modes_h1, s.zero_modes_h2)),
    );
    report.results = serde_json::to_value(&s).expect("serializable spectra");
    Ok(report)
}

fn contract_of(a: &PriceArgs) -> Result<OptionContract, Failure> {
    Ok(match a.payoff {
        Payoff::Call => OptionContract::european_call(a.strike, a.maturity)?,
        Payoff::Put => OptionContract::european_put(a.strike, a.maturity)?,
        Payoff::DoCall => {
            let b = a
                .barrier
                .ok_or_else(|| Failure::Usage("--payoff do-call needs --barrier".into()))?;
            OptionContract::down_and_out_call(a.strike, a.maturity, b)?
        }
    })
}

fn price(a: &PriceArgs) -> Outcome {
    let contract = contract_of(a)?;
    let mp = MarketParams::new(a.sigma, a.rate)?;
    if !(a.spot > 0.0 && a.spot.is_finite()) {
        return Err(Failure::Usage(format!("spot must be positive, got {}", a.spot)));
    }
    let mut report = RunReport::new("price");
    report.param("payoff", contract.kind.to_string());
    report.param("strike", a.strike);
    report.param("barrier", a.barrier);
    report.param("maturity", a.maturity);
    report.param("sigma", a.sigma);
    report.param("rate", a.rate);
    report.param("spot", a.spot);
    report.param("method", a.method.to_possible_value().map(|v| v.get_name().to_string()));
    let want = |m: Method| a.method == m || a.method == Method::All;
    let mut results = serde_json::Map::new();

    let closed = if want(Method::Closed) {
        let c = closed_form_price(&contract, &mp, a.spot)?;
        println!("closed form: {}", fmt17(c));
        results.insert("closed_form".into(), json!(c));
        Some(c)
    } else {
        None
    };

    let pde = if want(Method::Pde) {
        let default = pricing_grid(&contract, a.n)?;
        let g = Grid1D::new(a.xmin.unwrap_or(default.x_min()), a.xmax.unwrap_or(default.x_max()), a.n)?;
        let steps = a.steps.unwrap_or(g.n());
        grid_params(&mut report, &g);
        report.param("steps", steps);
        let h = bs_hamiltonian(&g, &mp)?;
        let curve = price_pde(&h, &contract, &mp, &g, steps)?;
        for w in &curve.warnings {
            eprintln!("warning: {w}");
        }
        let p = curve.at_spot(a.spot);
        println!("pde: {}", fmt17(p));
        if let Some(path) = &a.csv {
            std::fs::write(path, curve.to_csv())?;
            report.artifacts.push(path.display().to_string());
        }
        results.insert("pde".into(), json!(p));
        results.insert("pde_warnings".into(), json!(curve.warnings));
        Some(p)
    } else {
        None
    };

    let mut bias = 0.0;
    let mc = if want(Method::Mc) {
        report.param("paths", a.paths);
        report.param("seed", a.seed);
        let cfg = GbmConfig::new(mp.r, mp.sigma, a.spot, 0.0, contract.maturity, a.paths, a.seed)?;
        let raw = match contract.kind {
            PayoffKind::DownAndOutCall => {
                report.param("monitoring_per_year", a.monitoring);
                bias = monitoring_bias_bound(a.spot, &contract, &mp, a.monitoring)?;
                results.insert("monitoring_bias_bound".into(), json!(bias));
                barrier_estimate(&cfg, &contract, a.monitoring)?
            }
            _ => feynman_kac_estimate(&cfg, &|s| contract.payoff(s), a.spot, 0.0)?,
        };
        let est = discounted_value(&raw, mp.r, 0.0, contract.maturity);
        println!("monte carlo: {} +/- {}", fmt17(est.mean), fmt17(est.std_error));
        results.insert("mc".into(), serde_json::to_value(est).expect("serializable estimate"));
        Some(est)
    } else {
        None
    };

    if a.method == Method::All {
        let (c, p, m) = (closed.expect("closed"), pde.expect("pde"), mc.expect("mc"));
        add_comparisons(&mut report, &contract, &mp, a.spot, c, p, &m, bias)?;
    }
    report.results = serde_json::Value::Object(results);
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn add_comparisons(
    report: &mut RunReport,
    contract: &OptionContract,
    mp: &MarketParams,
    spot: f64,
    closed: f64,
    pde: f64,
    mc: &McEstimate,
    bias: f64,
) -> Result<(), Failure> {
    let pde_tol = pde_tolerance(closed);
    report.checks.push(Check::at_most("pde_vs_closed_form", (pde - closed).abs(), pde_tol));
    report.checks.push(
        Check::at_most("mc_vs_closed_form", (mc.mean - closed).abs(), 3.0 * mc.std_error + bias)
            .with_detail(if bias > 0.0 { "3 SE + monitoring bias bound" } else { "3 SE" }),
    );
    report.checks.push(
        Check::at_most(
            "pde_vs_mc",
            (pde - mc.mean).abs(),
            3.0 * mc.std_error + pde_tolerance(pde) + bias,
        )
        .with_detail(if bias > 0.0 { "3 SE + PDE tolerance + monitoring bias bound" } else { "3 SE + PDE tolerance" }),
    );
    if contract.kind == PayoffKind::DownAndOutCall {
        let vanilla = closed_form_european(spot, contract.strike, mp.r, mp.sigma, contract.maturity, PayoffKind::EuropeanCall)?;
        report.checks.push(
            Check::at_most("pde_below_vanilla", pde, vanilla).with_detail("down-and-out <= vanilla call"),
        );
        report.checks.push(
            Check::at_most("mc_below_vanilla", mc.mean, vanilla + 3.0 * mc.std_error)
                .with_detail("down-and-out <= vanilla call, within 3 SE"),
        );
    }
    Ok(())
}

fn identify(a: &IdentifyArgs) -> Outcome {
    let mut mp = MarketParams::new(a.sigma, a.rate)?;
    let centre = 100f64.ln();
    let g = Grid1D::new(a.xmin.unwrap_or(centre - 5.0), a.xmax.unwrap_or(centre + 5.0), a.n)?;
    let mut report = RunReport::new("identify");
    report.param("sigma", a.sigma);
    report.param("rate", a.rate);
    grid_params(&mut report, &g);
    let v = a.v.as_deref().map(FunctionSpec::parse).transpose()?;
    if let Some(v) = &v {
        report.param("v", v.to_string());
    }
    let map = match (a.target, v) {
        (TargetArg::Auto, None) => map_to_deformed(&mp, &g)?,
        (TargetArg::Auto, Some(v)) => {
            mp = mp.with_potential(v);
            map_to_deformed(&mp, &g)?
        }
        (TargetArg::Barrier, Some(v)) => {
            // confirm the operator is well formed before matching
            bsb_hamiltonian(&g, &mp, &v)?;
            map_barrier_to_deformed(&mp, &g, &v)?
        }
        (TargetArg::Barrier, None) => return Err(Failure::Usage("--target barrier needs --v".into())),
    };
    report.param("target", map.target);
    println!("match: {} with beta^2 = {}", map.label(), fmt17(map.beta * map.beta));
    for (which, sign) in &map.aliases {
        println!("  same matrix as ({which}, {}f)", if *sign > 0 { "+" } else { "-" });
    }
    report.checks.push(Check::at_most("identification_residual", map.residual, map.tolerance));
    report.checks.push(Check::at_most("distinct_matching_matrices", map.distinct_matches as f64, 1.0));
    report.results = json!({
        "which_hamiltonian": map.which_hamiltonian,
        "sign": map.sign,
        "beta": map.beta,
        "f": map.f.to_string(),
        "v2": map.v2.to_string(),
        "aliases": map.aliases,
        "candidates": map.candidates,
        "residual": map.residual,
    });
    Ok(report)
}
