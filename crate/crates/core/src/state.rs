//! Two-type configurations over a finite site window and the complex
//! duality pairing between a forward state and a finite-support dual state.
//!
//! Sites are dense array indices `0..n`. A [`Config`] may carry the
//! E-constraint flag, in which case every site holds at most one type with
//! positive mass (the other coordinate is exactly `0.0`, never merely small).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Value of the duality function and of the pairing.
pub type Complex = Complex64;

/// Index of a colony in the simulation window.
pub type Site = usize;

/// Masses of type 1 and type 2 at one site.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TypePair {
    pub x1: f64,
    pub x2: f64,
}

impl TypePair {
    pub const ZERO: TypePair = TypePair { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        TypePair { x1, x2 }
    }

    /// Mass of type `i` (1 or 2).
    pub fn get(&self, i: u8) -> f64 {
        match i {
            1 => self.x1,
            2 => self.x2,
            _ => panic!("type index must be 1 or 2, got {i}"),
        }
    }

    pub fn set(&mut self, i: u8, value: f64) {
        match i {
            1 => self.x1 = value,
            2 => self.x2 = value,
            _ => panic!("type index must be 1 or 2, got {i}"),
        }
    }

    /// Exact membership in E = [0,inf)^2 minus (0,inf)^2.
    pub fn in_e(&self) -> bool {
        self.x1 >= 0.0 && self.x2 >= 0.0 && self.x1 * self.x2 == 0.0
    }

    pub fn swapped(&self) -> TypePair {
        TypePair::new(self.x2, self.x1)
    }

    pub fn is_zero(&self) -> bool {
        self.x1 == 0.0 && self.x2 == 0.0
    }

    fn is_finite_nonneg(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x1 >= 0.0 && self.x2 >= 0.0
    }
}

impl From<(f64, f64)> for TypePair {
    fn from((x1, x2): (f64, f64)) -> Self {
        TypePair::new(x1, x2)
    }
}

impl From<[f64; 2]> for TypePair {
    fn from([x1, x2]: [f64; 2]) -> Self {
        TypePair::new(x1, x2)
    }
}

/// `a ⋄ b = -(a1+a2)(b1+b2) + i (a1-a2)(b1-b2)`.
pub fn lozenge(a: TypePair, b: TypePair) -> Complex {
    Complex::new(-(a.x1 + a.x2) * (b.x1 + b.x2), (a.x1 - a.x2) * (b.x1 - b.x2))
}

/// A two-type state on the window.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    sites: Vec<TypePair>,
    e_constrained: bool,
}

impl Config {
    /// Unconstrained nonnegative state (finite-rate model).
    pub fn new(sites: Vec<TypePair>) -> Result<Self> {
        if let Some(k) = sites.iter().position(|p| !p.is_finite_nonneg()) {
            return domain(format!(
                "site {k} has a negative or non-finite mass ({}, {})",
                sites[k].x1, sites[k].x2
            ));
        }
        Ok(Config {
            sites,
            e_constrained: false,
        })
    }

    /// E-valued state; rejects any site where both masses are positive.
    pub fn new_e(sites: Vec<TypePair>) -> Result<Self> {
        let mut cfg = Config::new(sites)?;
        if let Some(k) = cfg.sites.iter().position(|p| !p.in_e()) {
            return domain(format!("site {k} is not E-valued: {:?}", cfg.sites[k]));
        }
        cfg.e_constrained = true;
        Ok(cfg)
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Config::new(pairs.iter().copied().map(TypePair::from).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Config {
            sites: vec![TypePair::ZERO; n],
            e_constrained: false,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn e_constrained(&self) -> bool {
        self.e_constrained
    }

    pub fn sites(&self) -> &[TypePair] {
        &self.sites
    }

    pub fn site(&self, k: Site) -> TypePair {
        self.sites[k]
    }

    /// Mass vector of type `i` across the window.
    pub fn component(&self, i: u8) -> Vec<f64> {
        self.sites.iter().map(|p| p.get(i)).collect()
    }

    /// Drops the E flag, keeping the values.
    pub fn relaxed(mut self) -> Self {
        self.e_constrained = false;
        self
    }

    pub(crate) fn from_raw(sites: Vec<TypePair>, e_constrained: bool) -> Self {
        Config { sites, e_constrained }
    }

    /// `site,x1,x2` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("site,x1,x2\n");
        for (k, p) in self.sites.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{}", p.x1, p.x2);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, TypePair)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("site")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let k: usize = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            rows.push((k, TypePair::new(parse(fields[1])?, parse(fields[2])?)));
        }
        let n = rows.iter().map(|(k, _)| k + 1).max().unwrap_or(0);
        let mut sites = vec![TypePair::ZERO; n];
        for (k, p) in rows {
            sites[k] = p;
        }
        Config::new(sites)
    }

    /// `{"sites":[[x1,x2],...]}`.
    pub fn to_json(&self) -> String {
        let doc = ConfigDoc {
            sites: self.sites.iter().map(|p| [p.x1, p.x2]).collect(),
        };
        serde_json::to_string(&doc).expect("finite floats always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ConfigDoc = serde_json::from_str(text)?;
        Config::new(doc.sites.into_iter().map(TypePair::from).collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    sites: Vec<[f64; 2]>,
}

/// True iff `x1(k) * x2(k) == 0` exactly at every site.
pub fn validate_e(x: &Config) -> bool {
    x.sites.iter().all(TypePair::in_e)
}

/// Finite-support E-valued dual state. Sites absent from the map carry (0,0).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualConfig {
    values: BTreeMap<Site, TypePair>,
}

impl DualConfig {
    pub fn new(entries: impl IntoIterator<Item = (Site, TypePair)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, p) in entries {
            if !p.is_finite_nonneg() || !p.in_e() {
                return domain(format!("dual value at site {k} is not in E: {p:?}"));
            }
            if !p.is_zero() {
                values.insert(k, p);
            }
        }
        Ok(DualConfig { values })
    }

    pub fn empty() -> Self {
        DualConfig::default()
    }

    /// Dense slice to sparse support (zero entries dropped).
    pub fn from_dense(sites: &[TypePair]) -> Result<Self> {
        DualConfig::new(sites.iter().copied().enumerate())
    }

    pub fn support(&self) -> impl Iterator<Item = (Site, TypePair)> + '_ {
        self.values.iter().map(|(&k, &p)| (k, p))
    }

    pub fn get(&self, k: Site) -> TypePair {
        self.values.get(&k).copied().unwrap_or(TypePair::ZERO)
    }

    pub fn max_site(&self) -> Option<Site> {
        self.values.keys().next_back().copied()
    }

    /// Dense E-valued configuration over a window of `n` sites.
    pub fn to_config(&self, n: usize) -> Result<Config> {
        if let Some(k) = self.max_site().filter(|&k| k >= n) {
            return domain(format!("dual support site {k} lies outside window of {n}"));
        }
        let mut sites = vec![TypePair::ZERO; n];
        for (k, p) in self.support() {
            sites[k] = p;
        }
        Config::new_e(sites)
    }
}

/// `<<x, y>> = sum_k x(k) ⋄ y(k)` over the support of `y`.
pub fn pairing(x: &Config, y: &DualConfig) -> Result<Complex> {
    let mut acc = Complex::new(0.0, 0.0);
    for (k, yk) in y.support() {
        if k >= x.len() {
            return domain(format!("dual support site {k} lies outside window of {}", x.len()));
        }
        acc += lozenge(x.sites[k], yk);
    }
    Ok(acc)
}

/// `H(x, y) = exp(<<x, y>>)`.
pub fn duality_h(x: &Config, y: &DualConfig) -> Result<Complex> {
    pairing(x, y).map(Complex::exp)
}

/// Symmetric pairing of two dense configurations of equal length.
pub fn pairing_dense(x: &Config, y: &Config) -> Complex {
    assert_eq!(x.len(), y.len(), "window mismatch");
    x.sites.iter().zip(&y.sites).map(|(&a, &b)| lozenge(a, b)).sum()
}

pub fn duality_h_dense(x: &Config, y: &Config) -> Complex {
    pairing_dense(x, y).exp()
}

/// `||u||_beta = sum_k |u(k)| beta(k)`.
pub fn beta_norm(u: &[f64], beta: &[f64]) -> f64 {
    assert!(beta.len() >= u.len(), "beta must cover the window");
    u.iter().zip(beta).map(|(a, b)| a.abs() * b).sum()
}
