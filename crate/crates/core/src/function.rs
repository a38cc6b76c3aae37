//! Declarative scalar functions: the deformation `f`, superpotential `W`,
//! and financial potential `V`.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{derivative_matrices, Grid1D};

/// A real function on the grid, either an exact polynomial or sampled values.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionSpec {
    /// Coefficients in ascending degree.
    Polynomial(Vec<f64>),
    /// One value per grid node.
    Tabulated(Vec<f64>),
}

impl FunctionSpec {
    pub fn zero() -> Self {
        FunctionSpec::Polynomial(vec![0.0])
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Validation("polynomial needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("polynomial coefficients must be finite".into()));
        }
        Ok(FunctionSpec::Polynomial(coeffs))
    }

    pub fn tabulated(values: Vec<f64>) -> Self {
        FunctionSpec::Tabulated(values)
    }

    /// Parses `poly:c0,c1,...` or `table:<path>` (one value per line, no header).
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(rest) = text.strip_prefix("poly:") {
            let coeffs = rest
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse(text.to_string()))?;
            Self::polynomial(coeffs)
        } else if let Some(path) = text.strip_prefix("table:") {
            Self::read_table(Path::new(path))
        } else {
            Err(Error::Parse(text.to_string()))
        }
    }

    pub fn read_table(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let values = raw
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| l.parse::<f64>().map_err(|_| Error::Parse(l.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(FunctionSpec::Tabulated(values))
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, FunctionSpec::Polynomial(_))
    }

    /// `f -> -f`.
    pub fn negated(&self) -> Self {
        match self {
            FunctionSpec::Polynomial(c) => FunctionSpec::Polynomial(c.iter().map(|v| -v).collect()),
            FunctionSpec::Tabulated(v) => FunctionSpec::Tabulated(v.iter().map(|v| -v).collect()),
        }
    }

    pub fn values(&self, g: &Grid1D) -> Result<Vec<f64>> {
        match self {
            FunctionSpec::Polynomial(c) => Ok(g.sample(|x| horner(c, x))),
            FunctionSpec::Tabulated(v) => {
                if v.len() != g.n() {
                    return Err(Error::LengthMismatch {
                        expected: g.n(),
                        got: v.len(),
                    });
                }
                Ok(v.clone())
            }
        }
    }

    /// Values of the `order`-th derivative on the grid: exact for
    /// polynomials, repeated `D1` for tabulated data.
    pub fn derivative_values(&self, g: &Grid1D, order: usize) -> Result<Vec<f64>> {
        match self {
            FunctionSpec::Polynomial(c) => {
                let mut c = c.clone();
                for _ in 0..order {
                    c = differentiate(&c);
                }
                Ok(g.sample(|x| horner(&c, x)))
            }
            FunctionSpec::Tabulated(_) => {
                let mut v = self.values(g)?;
                if order > 0 {
                    let (d1, _) = derivative_matrices(g);
                    for _ in 0..order {
                        v = d1.apply_real(&v).into_iter().map(|z| z.re).collect();
                    }
                }
                Ok(v)
            }
        }
    }

    /// `F(x) = int_0^x f(u) du`. Exact for polynomials; trapezoid rule for
    /// tabulated values, anchored to zero at the node nearest `x = 0`.
    pub fn antiderivative(&self, g: &Grid1D) -> Result<FunctionSpec> {
        match self {
            FunctionSpec::Polynomial(c) => {
                let mut out = Vec::with_capacity(c.len() + 1);
                out.push(0.0);
                out.extend(c.iter().enumerate().map(|(k, v)| v / (k + 1) as f64));
                Ok(FunctionSpec::Polynomial(out))
            }
            FunctionSpec::Tabulated(_) => {
                let v = self.values(g)?;
                let h = g.h();
                let mut cum = vec![0.0; v.len()];
                for k in 1..v.len() {
                    cum[k] = cum[k - 1] + 0.5 * h * (v[k - 1] + v[k]);
                }
                let anchor = cum[g.nearest(0.0)];
                Ok(FunctionSpec::Tabulated(cum.into_iter().map(|c| c - anchor).collect()))
            }
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| format!("{v}")).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            FunctionSpec::Tabulated(v) => write!(f, "table:<{} values>", v.len()),
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn differentiate(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, v)| v * k as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_polynomials() {
        let f = FunctionSpec::parse("poly:0,0,0.5").unwrap();
        assert_eq!(f, FunctionSpec::Polynomial(vec![0.0, 0.0, 0.5]));
        assert_eq!(f.to_string(), "poly:0,0,0.5");
        assert!(FunctionSpec::parse("poly:").is_err());
        assert!(FunctionSpec::parse("poly:1,x").is_err());
        assert!(FunctionSpec::parse("cos").is_err());
    }

    #[test]
    fn parses_tables_and_checks_length() {
        let dir = std::env::temp_dir().join(format!("susyfin-table-{}", std::process::id()));
        std::fs::write(&dir, "1.0\n2.5\n\n-3\n").unwrap();
        let f = FunctionSpec::parse(&format!("table:{}", dir.display())).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(f, FunctionSpec::Tabulated(vec![1.0, 2.5, -3.0]));
        let g3 = Grid1D::new(0.0, 1.0, 3).unwrap();
        let g4 = Grid1D::new(0.0, 1.0, 4).unwrap();
        assert!(f.values(&g3).is_ok());
        assert!(matches!(
            f.values(&g4),
            Err(Error::LengthMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        let g = Grid1D::new(-2.0, 2.0, 9).unwrap();
        let f = FunctionSpec::polynomial(vec![1.0, 0.0, 0.0, 1.0 / 6.0]).unwrap();
        let d1 = f.derivative_values(&g, 1).unwrap();
        let d2 = f.derivative_values(&g, 2).unwrap();
        let d4 = f.derivative_values(&g, 4).unwrap();
        for (k, x) in g.nodes().into_iter().enumerate() {
            assert_eq!(d1[k], x * x / 2.0);
            assert_eq!(d2[k], x);
            assert_eq!(d4[k], 0.0);
        }
    }

    #[test]
    fn antiderivative_starts_at_zero() {
        let g = Grid1D::new(-1.0, 1.0, 201).unwrap();
        let w = FunctionSpec::polynomial(vec![0.0, 1.0]).unwrap();
        assert_eq!(
            w.antiderivative(&g).unwrap(),
            FunctionSpec::Polynomial(vec![0.0, 0.0, 0.5])
        );
        let table = FunctionSpec::tabulated(g.nodes());
        let f = table.antiderivative(&g).unwrap().values(&g).unwrap();
        assert_eq!(f[100], 0.0);
        for (k, x) in g.nodes().into_iter().enumerate() {
            // trapezoid is exact on linear integrands
            assert!((f[k] - x * x / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negation_is_an_involution() {
        let f = FunctionSpec::polynomial(vec![0.5, -1.0, 2.0]).unwrap();
        assert_eq!(f.negated().negated(), f);
        assert_eq!(FunctionSpec::zero().negated(), FunctionSpec::Polynomial(vec![-0.0]));
    }
}
