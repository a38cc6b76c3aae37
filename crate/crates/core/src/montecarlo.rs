//! Exact geometric Brownian motion sampling and Feynman-Kac estimates.
//!
//! Path `i` draws from ChaCha8 stream `i` under the run seed, so results do
//! not depend on how paths are scheduled. Sums are pairwise trees over the
//! path-ordered values.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::finance::{
    bs_hamiltonian, closed_form_down_and_out_call, closed_form_price, price_pde, MarketParams, OptionContract,
    PayoffKind,
};
use crate::grid::Grid1D;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GbmConfig {
    pub drift: f64,
    pub sigma: f64,
    pub s0: f64,
    pub t0: f64,
    pub t: f64,
    pub paths: usize,
    pub seed: u64,
}

impl GbmConfig {
    pub fn new(drift: f64, sigma: f64, s0: f64, t0: f64, t: f64, paths: usize, seed: u64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Validation(format!("sigma must be positive, got {sigma}")));
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::Validation(format!("s0 must be positive, got {s0}")));
        }
        if !(t > t0 && drift.is_finite() && t.is_finite()) {
            return Err(Error::Validation(format!("need t0 < T, got t0 = {t0}, T = {t}")));
        }
        if paths == 0 {
            return Err(Error::Validation("paths must be at least 1".into()));
        }
        Ok(Self {
            drift,
            sigma,
            s0,
            t0,
            t,
            paths,
            seed,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.t - self.t0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
}

struct Streams {
    base: ChaCha8Rng,
    normal: Normal,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::standard(),
        }
    }

    fn path(&self, index: usize) -> PathRng<'_> {
        let mut rng = self.base.clone();
        rng.set_stream(index as u64);
        PathRng {
            rng,
            normal: &self.normal,
        }
    }
}

struct PathRng<'a> {
    rng: ChaCha8Rng,
    normal: &'a Normal,
}

impl PathRng<'_> {
    /// Uniform on the open interval (0, 1).
    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    fn standard_normal(&mut self) -> f64 {
        self.normal.inverse_cdf(self.uniform())
    }
}

/// Pairwise sum with a fixed split, independent of thread count.
pub fn tree_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if v.len() <= LEAF {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    tree_sum(&v[..mid]) + tree_sum(&v[mid..])
}

fn per_path(paths: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..paths).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..paths).map(f).collect()
    }
}

fn summarize(values: &[f64], seed: u64) -> McEstimate {
    let n = values.len();
    let mean = tree_sum(values) / n as f64;
    let std_error = if n > 1 {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        (tree_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    McEstimate {
        mean,
        std_error,
        paths: n,
        seed,
    }
}

fn terminal(cfg: &GbmConfig, z: f64) -> f64 {
    let tau = cfg.horizon();
    cfg.s0 * (cfg.sigma * tau.sqrt() * z + (cfg.drift - 0.5 * cfg.sigma * cfg.sigma) * tau).exp()
}

/// `S(T)` for every path, by exact lognormal sampling.
pub fn sample_terminal(cfg: &GbmConfig) -> Vec<f64> {
    let streams = Streams::new(cfg.seed);
    per_path(cfg.paths, |i| terminal(cfg, streams.path(i).standard_normal()))
}

/// Mean and standard error of `payoff(S(T))` with `S(t) = x`.
pub fn feynman_kac_estimate(
    cfg: &GbmConfig,
    payoff: &(dyn Fn(f64) -> f64 + Sync),
    x: f64,
    t: f64,
) -> Result<McEstimate> {
    let local = GbmConfig::new(cfg.drift, cfg.sigma, x, t, cfg.t, cfg.paths, cfg.seed)?;
    let streams = Streams::new(local.seed);
    let values = per_path(local.paths, |i| payoff(terminal(&local, streams.path(i).standard_normal())));
    Ok(summarize(&values, local.seed))
}

/// Scales an estimate by `exp(-r (T - t))`.
pub fn discounted_value(est: &McEstimate, r: f64, t: f64, maturity: f64) -> McEstimate {
    let df = (-r * (maturity - t)).exp();
    McEstimate {
        mean: est.mean * df,
        std_error: est.std_error * df,
        ..*est
    }
}

/// Default barrier monitoring frequency (dates per year).
pub const MONITORING_PER_YEAR: f64 = 250.0;

/// Undiscounted down-and-out call payoff, knocked out when `S <= B` on any
/// of the monitoring dates.
pub fn barrier_estimate(cfg: &GbmConfig, contract: &OptionContract, per_year: f64) -> Result<McEstimate> {
    let b = contract
        .barrier
        .ok_or_else(|| Error::Validation("barrier contract needs a barrier level".into()))?;
    if per_year.is_nan() || per_year <= 0.0 {
        return Err(Error::Validation("monitoring frequency must be positive".into()));
    }
    let steps = (per_year * cfg.horizon()).ceil().max(1.0) as usize;
    let dt = cfg.horizon() / steps as f64;
    let drift = (cfg.drift - 0.5 * cfg.sigma * cfg.sigma) * dt;
    let vol = cfg.sigma * dt.sqrt();
    let lb = b.ln();
    let streams = Streams::new(cfg.seed);
    let values = per_path(cfg.paths, |i| {
        let mut x = cfg.s0.ln();
        if x <= lb {
            return 0.0;
        }
        let mut rng = streams.path(i);
        for _ in 0..steps {
            x += drift + vol * rng.standard_normal();
            if x <= lb {
                return 0.0;
            }
        }
        contract.payoff(x.exp())
    });
    Ok(summarize(&values, cfg.seed))
}

/// `beta_1 = -zeta(1/2) / sqrt(2 pi)`, the continuity-correction constant
/// for discretely monitored barriers.
pub const BARRIER_SHIFT: f64 = 0.5826;

/// Twice the gap between the continuous down-and-out price at `B` and at
/// the shifted barrier `B exp(-0.5826 sigma sqrt(dt))`, which approximates
/// the discretely monitored price. Used as a bound, not as a correction.
pub fn monitoring_bias_bound(s0: f64, contract: &OptionContract, mp: &MarketParams, per_year: f64) -> Result<f64> {
    let b = contract
        .barrier
        .ok_or_else(|| Error::Validation("barrier contract needs a barrier level".into()))?;
    let t = contract.maturity;
    let dt = t / (per_year * t).ceil().max(1.0);
    let shifted = b * (-BARRIER_SHIFT * mp.sigma * dt.sqrt()).exp();
    let cont = closed_form_down_and_out_call(s0, contract.strike, b, mp.r, mp.sigma, t)?;
    let disc = closed_form_down_and_out_call(s0, contract.strike, shifted, mp.r, mp.sigma, t)?;
    Ok(2.0 * (disc - cont).abs())
}

/// Absolute floor of the PDE tolerance (currency).
pub const PDE_ABS_TOLERANCE: f64 = 1e-2;
/// Relative part of the PDE tolerance.
pub const PDE_REL_TOLERANCE: f64 = 2e-3;

pub fn pde_tolerance(price: f64) -> f64 {
    PDE_ABS_TOLERANCE.max(PDE_REL_TOLERANCE * price.abs())
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossRow {
    pub spot: f64,
    pub pde: f64,
    pub mc: McEstimate,
    pub closed_form: f64,
    pub difference: f64,
    /// `3 SE + PDE tolerance (+ monitoring bias bound)`.
    pub allowed: f64,
    pub bias_bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub rows: Vec<CrossRow>,
    pub warnings: Vec<String>,
}

impl CrossCheck {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Spot multipliers used by [`fk_pde_crosscheck`].
pub const CROSSCHECK_SPOTS: [f64; 5] = [0.8, 0.9, 1.0, 1.1, 1.2];

/// Prices `contract` on `g` with `H_BS` and compares the curve with
/// discounted Monte Carlo estimates at `cfg.s0` times each multiplier.
pub fn fk_pde_crosscheck(
    mp: &MarketParams,
    contract: &OptionContract,
    g: &Grid1D,
    cfg: &GbmConfig,
    multipliers: &[f64],
) -> Result<CrossCheck> {
    let h = bs_hamiltonian(g, mp)?;
    let curve = price_pde(&h, contract, mp, g, g.n())?;
    let run = GbmConfig::new(mp.r, mp.sigma, cfg.s0, 0.0, contract.maturity, cfg.paths, cfg.seed)?;
    let mut rows = Vec::with_capacity(multipliers.len());
    for &m in multipliers {
        let spot = cfg.s0 * m;
        let at = GbmConfig { s0: spot, ..run };
        let (raw, bias_bound) = match contract.kind {
            PayoffKind::DownAndOutCall => (
                barrier_estimate(&at, contract, MONITORING_PER_YEAR)?,
                monitoring_bias_bound(spot, contract, mp, MONITORING_PER_YEAR)?,
            ),
            _ => (feynman_kac_estimate(&at, &|s| contract.payoff(s), spot, 0.0)?, 0.0),
        };
        let mc = discounted_value(&raw, mp.r, 0.0, contract.maturity);
        let pde = curve.at_spot(spot);
        let difference = (pde - mc.mean).abs();
        let allowed = 3.0 * mc.std_error + pde_tolerance(pde) + bias_bound;
        rows.push(CrossRow {
            spot,
            pde,
            mc,
            closed_form: closed_form_price(contract, mp, spot)?,
            difference,
            allowed,
            bias_bound,
            pass: difference <= allowed,
        });
    }
    Ok(CrossCheck {
        rows,
        warnings: curve.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(paths: usize, seed: u64) -> GbmConfig {
        GbmConfig::new(0.05, 0.2, 100.0, 0.0, 1.0, paths, seed).unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(GbmConfig::new(0.05, 0.0, 100.0, 0.0, 1.0, 10, 1).is_err());
        assert!(GbmConfig::new(0.05, 0.2, 100.0, 1.0, 1.0, 10, 1).is_err());
        assert!(GbmConfig::new(0.05, 0.2, 100.0, 0.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn deterministic_limit() {
        let c = GbmConfig::new(0.05, 1e-12, 100.0, 0.0, 2.0, 1000, 3).unwrap();
        let want = 100.0 * (0.1f64).exp();
        assert!(sample_terminal(&c).iter().all(|s| ((s - want) / want).abs() < 1e-9));
    }

    #[test]
    fn reproducible_per_path_streams() {
        let a = sample_terminal(&cfg(1000, 42));
        let b = sample_terminal(&cfg(1000, 42));
        assert_eq!(a, b);
        // path i does not depend on how many paths run
        assert_eq!(&sample_terminal(&cfg(10, 42))[..], &a[..10]);
        assert_ne!(sample_terminal(&cfg(10, 43)), a[..10].to_vec());
    }

    #[test]
    fn constant_claim_has_no_error() {
        let e = feynman_kac_estimate(&cfg(100, 1), &|_| 1.0, 100.0, 0.0).unwrap();
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
        let single = feynman_kac_estimate(&cfg(1, 1), &|s| s, 100.0, 0.0).unwrap();
        assert_eq!(single.std_error, 0.0);
    }

    #[test]
    fn discounting() {
        let e = McEstimate {
            mean: 1.0,
            std_error: 0.1,
            paths: 10,
            seed: 0,
        };
        assert_eq!(discounted_value(&e, 0.0, 0.0, 1.0), e);
        assert_eq!(discounted_value(&e, 0.05, 1.0, 1.0), e);
        assert!((discounted_value(&e, 0.05, 0.0, 1.0).mean - 0.951229).abs() < 1e-6);
    }

    #[test]
    fn tree_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(tree_sum(&v), 500500.0);
        assert_eq!(tree_sum(&[]), 0.0);
    }

    #[test]
    fn uniforms_stay_inside_the_open_interval() {
        let s = Streams::new(9);
        let mut p = s.path(0);
        for _ in 0..10_000 {
            let u = p.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn barrier_below_everything_matches_vanilla_paths() {
        let c = cfg(2000, 5);
        let contract = OptionContract::down_and_out_call(100.0, 1.0, 1e-6).unwrap();
        let b = barrier_estimate(&c, &contract, 50.0).unwrap();
        assert!(b.mean > 0.0 && b.std_error > 0.0);
        let dead = GbmConfig { s0: 50.0, ..c };
        let contract = OptionContract::down_and_out_call(100.0, 1.0, 60.0).unwrap();
        assert_eq!(barrier_estimate(&dead, &contract, 50.0).unwrap().mean, 0.0);
    }
}
