//! Hamiltonian families: the annealing interpolation, the two-qubit
//! entangling model, the nearest-neighbour Ising chain and the local-field
//! control term used as a comparison arm.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    materialize_with, uniform_field, MaterializeOptions, OperatorMatrix, OperatorSum, PauliLabel,
};

/// A family `H(λ) = base + λ·slope`, so `∂_λH = slope` for every λ.
///
/// Both model families in this crate are affine in λ, which lets the
/// propagators evaluate `H(λ(t))` as a two-term linear combination.
#[derive(Debug, Clone)]
pub struct HamiltonianFamily {
    base: OperatorMatrix,
    slope: OperatorMatrix,
}

impl HamiltonianFamily {
    pub fn new(base: OperatorMatrix, slope: OperatorMatrix) -> Result<Self> {
        if base.dim() != slope.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: slope.dim(),
            });
        }
        Ok(Self { base, slope })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `H(λ)`, without a domain check.
    pub fn at(&self, lambda: f64) -> OperatorMatrix {
        let mut h = self.base.clone();
        h.add_scaled(lambda, &self.slope);
        h
    }

    /// `∂_λH`, independent of λ.
    pub fn derivative(&self) -> &OperatorMatrix {
        &self.slope
    }

    /// `H(0)`.
    pub fn base(&self) -> &OperatorMatrix {
        &self.base
    }
}

/// Standard annealing interpolation `(1-λ)·H_m + λ·H_p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealSpec {
    pub mixer: OperatorSum,
    pub problem: OperatorSum,
}

impl AnnealSpec {
    pub fn new(mixer: OperatorSum, problem: OperatorSum) -> Result<Self> {
        if mixer.sites() != problem.sites() {
            return Err(Error::DimensionMismatch {
                expected: mixer.sites(),
                found: problem.sites(),
            });
        }
        Ok(Self { mixer, problem })
    }

    pub fn sites(&self) -> usize {
        self.mixer.sites()
    }

    pub fn family(&self, opts: MaterializeOptions) -> Result<HamiltonianFamily> {
        let hm = materialize_with(&self.mixer, opts)?;
        let hp = materialize_with(&self.problem, opts)?;
        let slope = &hp - &hm;
        HamiltonianFamily::new(hm, slope)
    }
}

/// `(1-λ)·H_m + λ·H_p` for λ in `[0, 1]`.
pub fn hamiltonian_at(spec: &AnnealSpec, lambda: f64) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    let mut h = materialize_with(&spec.mixer, MaterializeOptions::default())?.scale(1.0 - lambda);
    h.add_scaled(
        lambda,
        &materialize_with(&spec.problem, MaterializeOptions::default())?,
    );
    Ok(h)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfDomain {
            name: "lambda",
            value: lambda,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoQubitParams {
    /// Coupling `J` (energy unit).
    pub j: f64,
    /// Longitudinal field `h_z`.
    #[serde(default = "default_hz")]
    pub h_z: f64,
}

fn default_hz() -> f64 {
    5.0
}

impl Default for TwoQubitParams {
    fn default() -> Self {
        Self { j: 1.0, h_z: 5.0 }
    }
}

impl TwoQubitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.j > 0.0 && self.j.is_finite()) {
            return Err(Error::Config(format!("J must be positive, got {}", self.j)));
        }
        if !self.h_z.is_finite() {
            return Err(Error::Config("h_z must be finite".into()));
        }
        Ok(())
    }
}

/// `-J(X₁X₂ + Z₁Z₂) + h_z(λ-1)(Z₁+Z₂)` as an affine family.
pub fn two_qubit_model(p: &TwoQubitParams) -> Result<HamiltonianFamily> {
    p.validate()?;
    use PauliLabel::*;
    let mut coupling = OperatorSum::new(2);
    coupling.add(-p.j, &[(0, X), (1, X)])?;
    coupling.add(-p.j, &[(0, Z), (1, Z)])?;
    let field = uniform_field(2, 1.0, Z)?;
    let opts = MaterializeOptions::default();
    let zsum = materialize_with(&field, opts)?;
    let mut base = materialize_with(&coupling, opts)?;
    base.add_scaled(-p.h_z, &zsum);
    HamiltonianFamily::new(base, zsum.scale(p.h_z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingParams {
    pub sites: usize,
    /// `J_{i,i+1}`; length `N-1` (open) or `N` (periodic, last entry closes the ring).
    pub couplings: Vec<f64>,
    /// `h_i`; length `N`.
    pub fields: Vec<f64>,
    #[serde(default)]
    pub boundary: Boundary,
    /// Transverse strengths `g_i` of the mixer; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transverse: Option<Vec<f64>>,
}

impl IsingParams {
    /// Uniform couplings `J`, zero fields, open chain.
    pub fn uniform(sites: usize, j: f64) -> Self {
        Self {
            sites,
            couplings: vec![j; sites.saturating_sub(1)],
            fields: vec![0.0; sites],
            boundary: Boundary::Open,
            transverse: None,
        }
    }

    pub fn with_transverse(mut self, g: Vec<f64>) -> Self {
        self.transverse = Some(g);
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        if boundary == Boundary::Periodic && self.couplings.len() + 1 == self.sites {
            let j = self.couplings.last().copied().unwrap_or(1.0);
            self.couplings.push(j);
        }
        self.boundary = boundary;
        self
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.sites;
        let mut b: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self.boundary == Boundary::Periodic && n > 2 {
            b.push((n - 1, 0));
        }
        b
    }
}

/// `H_m = -Σ g_i X_i` (g_i = 1 by default), `H_p = -Σ J_{i,i+1} Z_i Z_{i+1} + Σ h_i Z_i`.
pub fn ising_model(p: &IsingParams) -> Result<AnnealSpec> {
    use PauliLabel::*;
    let n = p.sites;
    if n < 2 {
        return Err(Error::Config("Ising chain needs at least two sites".into()));
    }
    let bonds = p.bonds();
    if p.couplings.len() != bonds.len() {
        return Err(Error::Config(format!(
            "expected {} couplings for a {:?} chain of {} sites, got {}",
            bonds.len(),
            p.boundary,
            n,
            p.couplings.len()
        )));
    }
    if p.fields.len() != n {
        return Err(Error::Config(format!(
            "expected {} fields, got {}",
            n,
            p.fields.len()
        )));
    }
    let mixer = match &p.transverse {
        None => uniform_field(n, -1.0, X)?,
        Some(g) => {
            if g.len() != n {
                return Err(Error::Config(format!(
                    "expected {} transverse strengths, got {}",
                    n,
                    g.len()
                )));
            }
            let mut m = OperatorSum::new(n);
            for (i, &gi) in g.iter().enumerate() {
                m.add(-gi, &[(i, X)])?;
            }
            m
        }
    };
    let mut problem = OperatorSum::new(n);
    for (&(a, b), &j) in bonds.iter().zip(&p.couplings) {
        problem.add(-j, &[(a, Z), (b, Z)])?;
    }
    for (i, &h) in p.fields.iter().enumerate() {
        if h != 0.0 {
            problem.add(h, &[(i, Z)])?;
        }
    }
    AnnealSpec::new(mixer, problem)
}

/// `H_c(t) = Σ_k γ_k ω₀ sin(2πkt/τ) Σ_i Z_i`, with γ in units of ω₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTermSpec {
    pub gammas: Vec<f64>,
    pub tau: f64,
    pub omega0: f64,
}

impl ControlTermSpec {
    /// Scalar envelope multiplying `Σ Z_i`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.gammas
            .iter()
            .enumerate()
            .map(|(k, g)| g * (2.0 * PI * (k as f64 + 1.0) * t / self.tau).sin())
            .sum::<f64>()
            * self.omega0
    }
}

/// `Σ Z_i` on `sites` sites.
pub fn control_operator(sites: usize) -> Result<OperatorMatrix> {
    materialize_with(
        &uniform_field(sites, 1.0, PauliLabel::Z)?,
        MaterializeOptions { max_sites: sites },
    )
}

pub fn control_term_at(spec: &ControlTermSpec, sites: usize, t: f64) -> Result<OperatorMatrix> {
    if !(0.0..=spec.tau).contains(&t) {
        return Err(Error::OutOfDomain {
            name: "t",
            value: t,
            lo: 0.0,
            hi: spec.tau,
        });
    }
    Ok(control_operator(sites)?.scale(spec.envelope(t)))
}

/// Model selection used by experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    TwoQubit(TwoQubitParams),
    Ising(IsingParams),
}

impl ModelSpec {
    pub fn sites(&self) -> usize {
        match self {
            ModelSpec::TwoQubit(_) => 2,
            ModelSpec::Ising(p) => p.sites,
        }
    }

    pub fn family(&self, opts: MaterializeOptions) -> Result<HamiltonianFamily> {
        match self {
            ModelSpec::TwoQubit(p) => two_qubit_model(p),
            ModelSpec::Ising(p) => ising_model(p)?.family(opts),
        }
    }

    pub fn two_qubit(&self) -> Option<&TwoQubitParams> {
        match self {
            ModelSpec::TwoQubit(p) => Some(p),
            _ => None,
        }
    }
}
