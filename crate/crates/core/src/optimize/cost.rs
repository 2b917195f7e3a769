//! Cost functions over drive parameters.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::dynamics::{propagate, PropagatorConfig, TimeDependentHamiltonian};
use crate::error::{Error, Result};
use crate::operators::{OperatorMatrix, QuantumState};

/// What a parameter vector is scored by after propagation.
#[derive(Debug, Clone)]
pub enum CostSpec {
    /// `1 - |<ψ_T|ψ(t_f)>|²`.
    Infidelity { target: QuantumState },
    /// `<ψ(τ)|H_p|ψ(τ)>`.
    FinalEnergy { problem: OperatorMatrix },
    /// `<ψ(t_f)|H(λ(t_f))|ψ(t_f)>` at the end of one segment.
    SegmentEnergy { hamiltonian: OperatorMatrix },
}

/// Maps a parameter vector to the drive it defines.
pub type DriveBuilder = dyn Fn(&[f64]) -> Result<Box<dyn TimeDependentHamiltonian>> + Send + Sync;

/// Everything needed to turn parameters into a final state.
pub struct CostContext {
    pub build: Box<DriveBuilder>,
    pub psi0: QuantumState,
    pub span: (f64, f64),
    pub propagator: PropagatorConfig,
}

pub struct Cost {
    spec: CostSpec,
    ctx: CostContext,
    failures: AtomicUsize,
}

pub fn make_cost(spec: CostSpec, ctx: CostContext) -> Result<Cost> {
    let dim = ctx.psi0.dim();
    let found = match &spec {
        CostSpec::Infidelity { target } => target.dim(),
        CostSpec::FinalEnergy { problem } => problem.dim(),
        CostSpec::SegmentEnergy { hamiltonian } => hamiltonian.dim(),
    };
    if found != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found,
        });
    }
    ctx.propagator.validate()?;
    Ok(Cost {
        spec,
        ctx,
        failures: AtomicUsize::new(0),
    })
}

impl Cost {
    pub fn final_state(&self, params: &[f64]) -> Result<QuantumState> {
        let drive = (self.ctx.build)(params)?;
        Ok(propagate(
            drive.as_ref(),
            &self.ctx.psi0,
            self.ctx.span,
            &self.ctx.propagator,
        )?
        .state)
    }

    pub fn score(&self, psi: &QuantumState) -> f64 {
        let n2 = psi.norm().powi(2);
        match &self.spec {
            CostSpec::Infidelity { target } => (1.0 - target.fidelity(psi) / n2).clamp(0.0, 1.0),
            CostSpec::FinalEnergy { problem } => problem.expectation(psi).re / n2,
            CostSpec::SegmentEnergy { hamiltonian } => hamiltonian.expectation(psi).re / n2,
        }
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<f64> {
        Ok(self.score(&self.final_state(params)?))
    }

    /// Optimizer-safe form: failed propagations score `+∞` and are counted.
    pub fn call(&self, params: &[f64]) -> f64 {
        match self.evaluate(params) {
            Ok(v) if v.is_finite() => v,
            _ => {
                self.failures.fetch_add(1, Ordering::Relaxed);
                f64::INFINITY
            }
        }
    }

    pub fn failures(&self) -> usize {
        self.failures.load(Ordering::Relaxed)
    }

    pub fn spec(&self) -> &CostSpec {
        &self.spec
    }
}
