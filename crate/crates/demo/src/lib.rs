//! WebAssembly bindings for the browser page in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the
//! actual work so they can be tested natively.

use serde::Serialize;
use susyfin::finance::{
    bs_hamiltonian, closed_form_price, price_pde, pricing_grid, MarketParams, OptionContract,
};
use susyfin::hamiltonians::build_from_superpotential;
use susyfin::susy::{ground_states, partner_spectra};
use susyfin::{FunctionSpec, Grid1D};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request; keeps the dense eigensolve interactive.
pub const MAX_NODES: usize = 1201;

fn grid(xmin: f64, xmax: f64, n: usize) -> Result<Grid1D, String> {
    if n > MAX_NODES {
        return Err(format!("at most {MAX_NODES} nodes"));
    }
    Grid1D::new(xmin, xmax, n).map_err(|e| e.to_string())
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Spectrum {
    h1: Vec<f64>,
    h2: Vec<f64>,
    pairs: usize,
    zero_modes_h1: usize,
    zero_modes_h2: usize,
    all_paired: bool,
}

pub fn partner_spectrum_json(
    w: &str,
    xmin: f64,
    xmax: f64,
    n: usize,
    k: usize,
    pair_tol: f64,
) -> Result<String, String> {
    let g = grid(xmin, xmax, n)?;
    let w = FunctionSpec::parse(w).map_err(|e| e.to_string())?;
    let (h1, h2) = build_from_superpotential(&g, &w, 1.0).map_err(|e| e.to_string())?;
    let s = partner_spectra(&h1.closed_form, &h2.closed_form, k, pair_tol).map_err(|e| e.to_string())?;
    to_json(&Spectrum {
        all_paired: s.all_paired(),
        pairs: s.pairs.len(),
        zero_modes_h1: s.zero_modes_h1,
        zero_modes_h2: s.zero_modes_h2,
        h1: s.h1,
        h2: s.h2,
    })
}

#[derive(Serialize)]
struct Curve {
    spot: Vec<f64>,
    pde: Vec<f64>,
    closed_form: Vec<f64>,
    payoff: Vec<f64>,
    warnings: Vec<String>,
}

/// PDE price curve with the closed form alongside, restricted to spots in
/// `[strike / 3, 3 * strike]`. A non-positive `barrier` means none.
pub fn price_curve_json(
    payoff: &str,
    strike: f64,
    barrier: f64,
    sigma: f64,
    rate: f64,
    maturity: f64,
    n: usize,
) -> Result<String, String> {
    let contract = match payoff {
        "call" => OptionContract::european_call(strike, maturity),
        "put" => OptionContract::european_put(strike, maturity),
        "do-call" if barrier > 0.0 => OptionContract::down_and_out_call(strike, maturity, barrier),
        "do-call" => return Err("do-call needs a positive barrier".into()),
        other => return Err(format!("unknown payoff {other}")),
    }
    .map_err(|e| e.to_string())?;
    let mp = MarketParams::new(sigma, rate).map_err(|e| e.to_string())?;
    if n > MAX_NODES {
        return Err(format!("at most {MAX_NODES} nodes"));
    }
    let g = pricing_grid(&contract, n).map_err(|e| e.to_string())?;
    let h = bs_hamiltonian(&g, &mp).map_err(|e| e.to_string())?;
    let curve = price_pde(&h, &contract, &mp, &g, g.n()).map_err(|e| e.to_string())?;

    let mut out = Curve {
        spot: Vec::new(),
        pde: Vec::new(),
        closed_form: Vec::new(),
        payoff: Vec::new(),
        warnings: curve.warnings.clone(),
    };
    for (i, x) in g.nodes().into_iter().enumerate() {
        let s = x.exp();
        if s < strike / 3.0 || s > 3.0 * strike {
            continue;
        }
        out.spot.push(s);
        out.pde.push(curve.values[i]);
        out.closed_form.push(closed_form_price(&contract, &mp, s).map_err(|e| e.to_string())?);
        out.payoff.push(contract.payoff(s));
    }
    to_json(&out)
}

#[derive(Serialize)]
struct GroundState {
    x: Vec<f64>,
    /// One curve per slot of psi, real parts.
    slots: Vec<Vec<f64>>,
    labels: Vec<String>,
    residual: f64,
    tolerance: f64,
}

pub fn ground_state_json(f: &str, xmin: f64, xmax: f64, n: usize) -> Result<String, String> {
    let g = grid(xmin, xmax, n)?;
    let f = FunctionSpec::parse(f).map_err(|e| e.to_string())?;
    let (psi, _) = ground_states(&g, &f, 1.0, 1.0).map_err(|e| e.to_string())?;
    to_json(&GroundState {
        x: g.nodes(),
        slots: psi
            .slot_vectors()
            .iter()
            .map(|v| v.iter().map(|z| z.re).collect())
            .collect(),
        labels: psi.slots.iter().map(|s| format!("{s:?}")).collect(),
        residual: psi.residual,
        tolerance: psi.tolerance,
    })
}

#[wasm_bindgen]
pub fn partner_spectrum(
    w: &str,
    xmin: f64,
    xmax: f64,
    n: usize,
    k: usize,
    pair_tol: f64,
) -> Result<String, JsValue> {
    partner_spectrum_json(w, xmin, xmax, n, k, pair_tol).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn price_curve(
    payoff: &str,
    strike: f64,
    barrier: f64,
    sigma: f64,
    rate: f64,
    maturity: f64,
    n: usize,
) -> Result<String, JsValue> {
    price_curve_json(payoff, strike, barrier, sigma, rate, maturity, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn ground_state(f: &str, xmin: f64, xmax: f64, n: usize) -> Result<String, JsValue> {
    ground_state_json(f, xmin, xmax, n).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn harmonic_spectrum() {
        let v: Value = serde_json::from_str(&partner_spectrum_json("poly:0,1", -6.0, 6.0, 1201, 4, 1e-2).unwrap()).unwrap();
        assert_eq!(v["all_paired"], true);
        assert_eq!(v["zero_modes_h2"], 1);
        let h1 = v["h1"][0].as_f64().unwrap();
        assert!((h1 - 2.0).abs() < 1e-2);
    }

    #[test]
    fn call_curve_tracks_closed_form() {
        let v: Value =
            serde_json::from_str(&price_curve_json("call", 100.0, 0.0, 0.2, 0.05, 1.0, 801).unwrap()).unwrap();
        let pde = v["pde"].as_array().unwrap();
        let exact = v["closed_form"].as_array().unwrap();
        assert!(!pde.is_empty());
        for (a, b) in pde.iter().zip(exact) {
            assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 0.05);
        }
    }

    #[test]
    fn barrier_needs_level() {
        assert!(price_curve_json("do-call", 100.0, 0.0, 0.2, 0.05, 1.0, 401).is_err());
        assert!(price_curve_json("do-call", 100.0, 80.0, 0.2, 0.05, 1.0, 401).is_ok());
    }

    #[test]
    fn ground_state_small_residual() {
        let v: Value = serde_json::from_str(&ground_state_json("poly:0,0,0.5", -5.0, 5.0, 401).unwrap()).unwrap();
        assert_eq!(v["slots"].as_array().unwrap().len(), 4);
        assert!(v["residual"].as_f64().unwrap() <= v["tolerance"].as_f64().unwrap());
    }

    #[test]
    fn rejects_oversized_grid() {
        assert!(partner_spectrum_json("poly:0,1", -8.0, 8.0, MAX_NODES + 2, 4, 1e-2).is_err());
    }
}
