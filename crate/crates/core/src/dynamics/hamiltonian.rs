//! Time-dependent Hamiltonians for the bare, counterdiabatic, control-augmented
//! and Floquet-engineered protocols.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::agp::{exact_agp, two_qubit_agp_operator, two_qubit_agp_prefactor, AnalyticalBeta};
use crate::error::{Error, Result};
use crate::models::{control_operator, ControlTermSpec, HamiltonianFamily, TwoQubitParams};
use crate::operators::{OperatorMatrix, C64, HERMITIAN_TOL, ZERO};
use crate::schedules::{PiecewiseBeta, Schedule};

/// Maximum number of fixed operators in a [`LinearDrive`].
pub const MAX_TERMS: usize = 4;

/// Default lower bound on `ωτ/2π`, the number of drive periods per protocol.
pub const DEFAULT_MIN_OSCILLATIONS: f64 = 100.0;

/// A Hermitian `H(t)` that can act on state vectors.
pub trait TimeDependentHamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    /// `out = H(t) psi`.
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()>;

    /// Dense `H(t)`.
    fn matrix(&self, t: f64) -> Result<OperatorMatrix>;

    /// Period of the fastest oscillation, if any; integrators resolve it.
    fn oscillation_period(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone)]
struct SparseOperator(CsrMatrix<C64>);

impl SparseOperator {
    fn from_dense(m: &OperatorMatrix) -> Self {
        SparseOperator(CsrMatrix::from(&CooMatrix::from(&**m)))
    }

    /// `out += c · M psi`.
    #[inline]
    fn accumulate(&self, c: f64, psi: &[C64], out: &mut [C64]) {
        for (r, row) in self.0.row_iter().enumerate() {
            let mut s = ZERO;
            for (&col, v) in row.col_indices().iter().zip(row.values()) {
                s += v * psi[col];
            }
            out[r] += s * c;
        }
    }
}

type CoefficientFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// `H(t) = Σ_i c_i(t) O_i` with fixed Hermitian `O_i` and real `c_i(t)`.
#[derive(Clone)]
pub struct LinearDrive {
    dense: Vec<OperatorMatrix>,
    sparse: Vec<SparseOperator>,
    coefficients: Arc<CoefficientFn>,
    period: Option<f64>,
}

impl std::fmt::Debug for LinearDrive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearDrive")
            .field("terms", &self.dense.len())
            .field("dim", &self.dim())
            .field("period", &self.period)
            .finish()
    }
}

impl LinearDrive {
    pub fn new<F>(
        operators: Vec<OperatorMatrix>,
        coefficients: F,
        period: Option<f64>,
    ) -> Result<Self>
    where
        F: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        if operators.is_empty() || operators.len() > MAX_TERMS {
            return Err(Error::InvalidOperator(format!(
                "a linear drive takes 1..={MAX_TERMS} operators, got {}",
                operators.len()
            )));
        }
        let dim = operators[0].dim();
        for op in &operators {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: op.dim(),
                });
            }
            if !op.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::NotHermitian {
                    deviation: op.hermiticity_defect(),
                });
            }
        }
        let sparse = operators.iter().map(SparseOperator::from_dense).collect();
        Ok(Self {
            dense: operators,
            sparse,
            coefficients: Arc::new(coefficients),
            period,
        })
    }

    pub fn coefficients_at(&self, t: f64) -> Vec<f64> {
        let mut c = vec![0.0; self.dense.len()];
        (self.coefficients)(t, &mut c);
        c
    }

    pub fn operators(&self) -> &[OperatorMatrix] {
        &self.dense
    }
}

impl TimeDependentHamiltonian for LinearDrive {
    fn dim(&self) -> usize {
        self.dense[0].dim()
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        let mut c = [0.0; MAX_TERMS];
        let n = self.dense.len();
        (self.coefficients)(t, &mut c[..n]);
        out.fill(ZERO);
        for (op, &ci) in self.sparse.iter().zip(&c[..n]) {
            if ci != 0.0 {
                op.accumulate(ci, psi, out);
            }
        }
        Ok(())
    }

    fn matrix(&self, t: f64) -> Result<OperatorMatrix> {
        let c = self.coefficients_at(t);
        let mut m = OperatorMatrix::zeros(self.dim());
        for (op, &ci) in self.dense.iter().zip(&c) {
            m.add_scaled(ci, op);
        }
        Ok(m)
    }

    fn oscillation_period(&self) -> Option<f64> {
        self.period
    }
}

/// `H(λ(t)) + λ̇(t) A_{λ(t)}` with the spectral gauge potential recomputed at
/// every evaluation.
#[derive(Debug, Clone)]
pub struct SpectralCdDrive {
    family: HamiltonianFamily,
    schedule: Schedule,
}

impl SpectralCdDrive {
    pub fn new(family: HamiltonianFamily, schedule: Schedule) -> Self {
        Self { family, schedule }
    }
}

impl TimeDependentHamiltonian for SpectralCdDrive {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        let m = self.matrix(t)?;
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..psi.len()).map(|c| m[(r, c)] * psi[c]).sum();
        }
        Ok(())
    }

    fn matrix(&self, t: f64) -> Result<OperatorMatrix> {
        let lambda = self.schedule.lambda(t);
        let h = self.family.at(lambda);
        let ld = self.schedule.lambda_dot(t);
        if ld == 0.0 {
            return Ok(h);
        }
        let a = exact_agp(&h, self.family.derivative())?;
        let mut m = h;
        m.add_scaled(ld, &a.matrix);
        Ok(m)
    }
}

/// Bare anneal `H(λ(t))`.
pub fn bare_drive(family: &HamiltonianFamily, schedule: &Schedule) -> Result<LinearDrive> {
    let s = *schedule;
    LinearDrive::new(
        vec![family.base().clone(), family.derivative().clone()],
        move |t, c| {
            c[0] = 1.0;
            c[1] = s.lambda(t);
        },
        None,
    )
}

/// Closed-form counterdiabatic drive of the two-qubit model.
pub fn two_qubit_cd_drive(
    p: &TwoQubitParams,
    family: &HamiltonianFamily,
    schedule: &Schedule,
) -> Result<LinearDrive> {
    let (s, p) = (*schedule, *p);
    LinearDrive::new(
        vec![
            family.base().clone(),
            family.derivative().clone(),
            two_qubit_agp_operator()?,
        ],
        move |t, c| {
            let l = s.lambda(t);
            c[0] = 1.0;
            c[1] = l;
            c[2] = s.lambda_dot(t) * two_qubit_agp_prefactor(&p, l);
        },
        None,
    )
}

fn check_time(schedule: &Schedule, t: f64) -> Result<()> {
    if !(0.0..=schedule.tau).contains(&t) {
        return Err(Error::OutOfDomain {
            name: "t",
            value: t,
            lo: 0.0,
            hi: schedule.tau,
        });
    }
    Ok(())
}

/// `H(λ(t)) + λ̇(t)·A_{λ(t)}` with the spectral gauge potential.
pub fn assemble_cd_hamiltonian(
    family: &HamiltonianFamily,
    schedule: &Schedule,
    t: f64,
) -> Result<OperatorMatrix> {
    check_time(schedule, t)?;
    SpectralCdDrive::new(family.clone(), *schedule).matrix(t)
}

/// `H(λ(t)) + H_c(t)`.
pub fn controlled_drive(
    family: &HamiltonianFamily,
    schedule: &Schedule,
    ctrl: &ControlTermSpec,
) -> Result<LinearDrive> {
    let sites = family.dim().trailing_zeros() as usize;
    let (s, ctrl) = (*schedule, ctrl.clone());
    LinearDrive::new(
        vec![
            family.base().clone(),
            family.derivative().clone(),
            control_operator(sites)?,
        ],
        move |t, c| {
            c[0] = 1.0;
            c[1] = s.lambda(t);
            c[2] = ctrl.envelope(t);
        },
        None,
    )
}

pub fn assemble_controlled_hamiltonian(
    family: &HamiltonianFamily,
    schedule: &Schedule,
    ctrl: &ControlTermSpec,
    t: f64,
) -> Result<OperatorMatrix> {
    check_time(schedule, t)?;
    controlled_drive(family, schedule, ctrl)?.matrix(t)
}

/// Where the drive coefficients `β_k(t)` come from, in units of ω₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum BetaSource {
    /// Piecewise-constant table, one value per harmonic and segment.
    Table { table: PiecewiseBeta },
    /// Closed-form `β₁(λ(t))` of the two-qubit model, evaluated continuously.
    TwoQubitAnalytical {
        params: TwoQubitParams,
        #[serde(default)]
        form: AnalyticalBeta,
    },
}

/// `H_FE = (1 + (ω/ω₀)cos ωt) H(λ) + λ̇ (Σ_k β_k ω₀ sin((2k-1)ωt)) ∂_λH`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetDriveSpec {
    pub omega: f64,
    pub omega0: f64,
    pub beta: BetaSource,
}

impl FloquetDriveSpec {
    /// Checks `ω, ω₀ > 0` and `ωτ/2π ≥ min_oscillations`.
    pub fn new(
        omega: f64,
        omega0: f64,
        beta: BetaSource,
        tau: f64,
        min_oscillations: f64,
    ) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) || !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::Config(format!(
                "drive frequencies must be positive (omega = {omega}, omega0 = {omega0})"
            )));
        }
        let periods = omega * tau / (2.0 * PI);
        if periods < min_oscillations * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "omega*tau/2pi = {periods:.1} is below the required {min_oscillations}"
            )));
        }
        if let BetaSource::Table { table } = &beta {
            if (table.tau() - tau).abs() > 1e-12 * tau {
                return Err(Error::Config(format!(
                    "beta table spans tau = {}, protocol has tau = {tau}",
                    table.tau()
                )));
            }
        }
        Ok(Self {
            omega,
            omega0,
            beta,
        })
    }

    /// `ω₀ = 2π/τ`, `ω = multiple·ω₀`.
    pub fn with_multiple(multiple: f64, tau: f64, beta: BetaSource) -> Result<Self> {
        let omega0 = 2.0 * PI / tau;
        Self::new(
            multiple * omega0,
            omega0,
            beta,
            tau,
            DEFAULT_MIN_OSCILLATIONS,
        )
    }

    pub fn harmonics(&self) -> usize {
        match &self.beta {
            BetaSource::Table { table } => table.harmonics(),
            BetaSource::TwoQubitAnalytical { .. } => 1,
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// `Σ_k β_k(t) ω₀ sin((2k-1)ωt)`.
    #[inline]
    pub fn amplitude(&self, t: f64, lambda: f64) -> f64 {
        match &self.beta {
            BetaSource::Table { table } => {
                let j = table.segment_of(t) - 1;
                table
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(k0, row)| row[j] * ((2 * k0 + 1) as f64 * self.omega * t).sin())
                    .sum::<f64>()
                    * self.omega0
            }
            BetaSource::TwoQubitAnalytical { params, form } => {
                form.beta1(params, lambda, self.omega0) * self.omega0 * (self.omega * t).sin()
            }
        }
    }

    /// `1 + (ω/ω₀) cos ωt`.
    #[inline]
    pub fn modulation(&self, t: f64) -> f64 {
        1.0 + self.omega / self.omega0 * (self.omega * t).cos()
    }
}

/// Floquet-engineered drive; uses only the operators of `H` and `∂_λH`.
pub fn floquet_drive(
    family: &HamiltonianFamily,
    schedule: &Schedule,
    spec: &FloquetDriveSpec,
) -> Result<LinearDrive> {
    let (s, spec) = (*schedule, spec.clone());
    let period = spec.period();
    LinearDrive::new(
        vec![family.base().clone(), family.derivative().clone()],
        move |t, c| {
            let l = s.lambda(t);
            let f = spec.modulation(t);
            c[0] = f;
            c[1] = f * l + s.lambda_dot(t) * spec.amplitude(t, l);
        },
        Some(period),
    )
}

pub fn assemble_floquet_hamiltonian(
    family: &HamiltonianFamily,
    schedule: &Schedule,
    spec: &FloquetDriveSpec,
    t: f64,
) -> Result<OperatorMatrix> {
    check_time(schedule, t)?;
    floquet_drive(family, schedule, spec)?.matrix(t)
}
