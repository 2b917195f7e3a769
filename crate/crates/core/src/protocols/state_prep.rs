//! Two-qubit style state preparation: every arm drives the ground state of
//! `H(0)` towards the ground state of `H(1)` and is scored by infidelity.

use std::sync::atomic::AtomicBool;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, Arm, ExperimentConfig, LandscapeKind, REPORT_SCHEMA_VERSION};
use super::ground_state;
use crate::dynamics::{
    bare_drive, controlled_drive, floquet_drive, instantaneous_fidelity_series, propagate_sampled,
    sample_grid, trajectory_rows, BetaSource, FloquetDriveSpec, PropagationStats, PropagatorConfig,
    SpectralCdDrive, TimeDependentHamiltonian, TrajectoryRow,
};
use crate::error::{Error, Result};
use crate::models::{ControlTermSpec, HamiltonianFamily};
use crate::operators::{MaterializeOptions, QuantumState, HARD_MAX_SITES};
use crate::optimize::{
    dual_anneal_with_abort, landscape_scan, linspace, make_cost, Bounds, Cost, CostContext,
    CostSpec, DriveBuilder, Landscape, OptimizationResult,
};
use crate::schedules::{PiecewiseBeta, Schedule};

/// Model, schedule and the two endpoint states of a state-preparation run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub family: HamiltonianFamily,
    pub schedule: Schedule,
    pub psi0: QuantumState,
    pub target: QuantumState,
    pub initial_energy: f64,
    pub target_energy: f64,
}

impl Problem {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let family = cfg.model.family(MaterializeOptions {
            max_sites: HARD_MAX_SITES,
        })?;
        let (psi0, initial_energy) = ground_state(&family.at(0.0))?;
        let (target, target_energy) = ground_state(&family.at(1.0))?;
        Ok(Self {
            family,
            schedule: cfg.schedule,
            psi0,
            target,
            initial_energy,
            target_energy,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Arm,
    /// `1 - |<ψ_T|ψ(τ)>|²`, scored with the final-number propagator.
    pub infidelity: f64,
    /// Optimized γ (optimized anneal) or flattened β table (CAFFEINE).
    pub parameters: Vec<f64>,
    pub beta_table: Option<PiecewiseBeta>,
    pub optimization: Option<OptimizationResult>,
    /// Cost evaluations whose propagation failed.
    pub cost_failures: usize,
    pub propagation: PropagationStats,
    pub min_instantaneous_fidelity: f64,
    pub tracking_ambiguous: bool,
    pub trajectory: Vec<TrajectoryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePrepReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub initial_energy: f64,
    pub target_energy: f64,
    pub arms: Vec<ArmReport>,
}

/// Floquet drive with the β table `params` (flattened harmonic-major).
pub fn caffeine_drive(
    cfg: &ExperimentConfig,
    family: &HamiltonianFamily,
    params: &[f64],
) -> Result<Box<dyn TimeDependentHamiltonian>> {
    let tau = cfg.schedule.tau;
    let table = PiecewiseBeta::from_flat(params, cfg.drive.harmonics, tau, None)?;
    table_drive(cfg, family, table)
}

pub(crate) fn table_drive(
    cfg: &ExperimentConfig,
    family: &HamiltonianFamily,
    table: PiecewiseBeta,
) -> Result<Box<dyn TimeDependentHamiltonian>> {
    let tau = cfg.schedule.tau;
    let spec = FloquetDriveSpec::new(
        cfg.drive.omega(tau),
        cfg.drive.omega0(tau),
        BetaSource::Table { table },
        tau,
        cfg.drive.min_oscillations,
    )?;
    Ok(Box::new(floquet_drive(family, &cfg.schedule, &spec)?))
}

/// Bare anneal plus the control term with coefficients `gammas`.
pub fn optimized_anneal_drive(
    cfg: &ExperimentConfig,
    family: &HamiltonianFamily,
    gammas: &[f64],
) -> Result<Box<dyn TimeDependentHamiltonian>> {
    let tau = cfg.schedule.tau;
    let ctrl = ControlTermSpec {
        gammas: gammas.to_vec(),
        tau,
        omega0: cfg.drive.omega0(tau),
    };
    Ok(Box::new(controlled_drive(family, &cfg.schedule, &ctrl)?))
}

/// Drive of a parameter-free arm.
pub fn fixed_drive(
    cfg: &ExperimentConfig,
    family: &HamiltonianFamily,
    arm: Arm,
) -> Result<Box<dyn TimeDependentHamiltonian>> {
    let tau = cfg.schedule.tau;
    match arm {
        Arm::Unassisted => Ok(Box::new(bare_drive(family, &cfg.schedule)?)),
        Arm::ExactCd => Ok(Box::new(SpectralCdDrive::new(family.clone(), cfg.schedule))),
        Arm::AnalyticalFloquet => {
            let params = *cfg.model.two_qubit().ok_or_else(|| {
                Error::Config("the analytical Floquet arm needs the two-qubit model".into())
            })?;
            let spec = FloquetDriveSpec::new(
                cfg.drive.omega(tau),
                cfg.drive.omega0(tau),
                BetaSource::TwoQubitAnalytical {
                    params,
                    form: cfg.drive.analytical_form,
                },
                tau,
                cfg.drive.min_oscillations,
            )?;
            Ok(Box::new(floquet_drive(family, &cfg.schedule, &spec)?))
        }
        Arm::OptimizedAnneal | Arm::Caffeine => {
            Err(Error::Config(format!("arm '{arm}' is parameterized")))
        }
    }
}

/// Parameter count and box of an optimized arm.
pub fn arm_bounds(cfg: &ExperimentConfig, arm: Arm) -> Result<Bounds> {
    match arm {
        Arm::OptimizedAnneal => {
            let (lo, hi) = cfg.control.gamma_bounds;
            Bounds::uniform(cfg.control.harmonics, lo, hi)
        }
        Arm::Caffeine => {
            let (lo, hi) = cfg.drive.beta_bounds;
            Bounds::uniform(cfg.drive.harmonics * cfg.drive.segments, lo, hi)
        }
        _ => Err(Error::Config(format!("arm '{arm}' has no parameters"))),
    }
}

/// Infidelity cost of an optimized arm, propagated with `propagator`.
pub fn arm_cost(
    cfg: &ExperimentConfig,
    problem: &Problem,
    arm: Arm,
    propagator: &PropagatorConfig,
) -> Result<Cost> {
    let family = problem.family.clone();
    let c = cfg.clone();
    let build: Box<DriveBuilder> = match arm {
        Arm::OptimizedAnneal => Box::new(move |p| optimized_anneal_drive(&c, &family, p)),
        Arm::Caffeine => Box::new(move |p| caffeine_drive(&c, &family, p)),
        _ => return Err(Error::Config(format!("arm '{arm}' has no parameters"))),
    };
    make_cost(
        CostSpec::Infidelity {
            target: problem.target.clone(),
        },
        CostContext {
            build,
            psi0: problem.psi0.clone(),
            span: (0.0, cfg.schedule.tau),
            propagator: propagator.clone(),
        },
    )
}

/// Propagates `drive` over the protocol with trajectory samples and scores
/// the final state.
fn score_drive(
    cfg: &ExperimentConfig,
    problem: &Problem,
    arm: Arm,
    drive: &dyn TimeDependentHamiltonian,
) -> Result<ArmReport> {
    let tau = cfg.schedule.tau;
    let samples = sample_grid(0.0, tau, cfg.output.trajectory_samples);
    let (prop, record) =
        propagate_sampled(drive, &problem.psi0, (0.0, tau), &cfg.propagator, &samples)?;
    let n2 = prop.state.norm().powi(2);
    let infidelity = (1.0 - problem.target.fidelity(&prop.state) / n2).clamp(0.0, 1.0);
    let series = instantaneous_fidelity_series(&record, &problem.family, &problem.schedule, 0)?;
    let trajectory = trajectory_rows(&record, &problem.family, &problem.schedule, &problem.target)?;
    Ok(ArmReport {
        arm,
        infidelity,
        parameters: Vec::new(),
        beta_table: None,
        optimization: None,
        cost_failures: 0,
        propagation: prop.stats,
        min_instantaneous_fidelity: series.min_fidelity(),
        tracking_ambiguous: series.any_ambiguous(),
        trajectory,
    })
}

/// Runs one arm. Optimized arms use the optimizer seed derived from the
/// master seed and the arm.
pub fn run_arm(
    cfg: &ExperimentConfig,
    problem: &Problem,
    arm: Arm,
    abort: Option<&AtomicBool>,
) -> Result<ArmReport> {
    if arm.needs_two_qubit() && cfg.model.two_qubit().is_none() {
        return Err(Error::Config(format!(
            "arm '{arm}' needs the two-qubit model"
        )));
    }
    match arm {
        Arm::Unassisted | Arm::ExactCd | Arm::AnalyticalFloquet => {
            let drive = fixed_drive(cfg, &problem.family, arm)?;
            score_drive(cfg, problem, arm, drive.as_ref())
        }
        Arm::OptimizedAnneal | Arm::Caffeine => {
            let bounds = arm_bounds(cfg, arm)?;
            let cost = arm_cost(cfg, problem, arm, cfg.search_propagator())?;
            let mut opt_cfg = cfg.optimizer.clone();
            opt_cfg.rng_seed = derive_seed(cfg.seed, arm as u64);
            let result =
                dual_anneal_with_abort(&|x: &[f64]| cost.call(x), &bounds, &opt_cfg, abort)?;
            let params = result.best_params.clone();
            let drive = match arm {
                Arm::OptimizedAnneal => optimized_anneal_drive(cfg, &problem.family, &params)?,
                _ => caffeine_drive(cfg, &problem.family, &params)?,
            };
            let mut report = score_drive(cfg, problem, arm, drive.as_ref())?;
            if arm == Arm::Caffeine {
                report.beta_table = Some(PiecewiseBeta::from_flat(
                    &params,
                    cfg.drive.harmonics,
                    cfg.schedule.tau,
                    Some(cfg.drive.beta_bounds),
                )?);
            }
            report.parameters = params;
            report.cost_failures = cost.failures();
            report.optimization = Some(result);
            Ok(report)
        }
    }
}

/// Runs every configured arm; arms are independent and run in parallel.
pub fn run_state_prep(
    cfg: &ExperimentConfig,
    abort: Option<&AtomicBool>,
) -> Result<StatePrepReport> {
    let problem = Problem::new(cfg)?;
    let mut arms = cfg.arms.clone();
    arms.sort();
    arms.dedup();
    let reports = arms
        .par_iter()
        .map(|&arm| run_arm(cfg, &problem, arm, abort))
        .collect::<Result<Vec<_>>>()?;
    Ok(StatePrepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        initial_energy: problem.initial_energy,
        target_energy: problem.target_energy,
        arms: reports,
    })
}

/// Gold-standard run under the exact counterdiabatic Hamiltonian.
pub fn reference_exact_cd(cfg: &ExperimentConfig) -> Result<ArmReport> {
    let problem = Problem::new(cfg)?;
    run_arm(cfg, &problem, Arm::ExactCd, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub kind: LandscapeKind,
    /// Scanned parameter index per axis; other parameters are zero.
    pub indices: Vec<usize>,
    pub landscape: Landscape,
}

/// Infidelity on a grid over γ (optimized anneal) or β (CAFFEINE).
pub fn run_landscape(cfg: &ExperimentConfig) -> Result<LandscapeReport> {
    let problem = Problem::new(cfg)?;
    let lc = &cfg.landscape;
    let arm = match lc.kind {
        LandscapeKind::Gamma => Arm::OptimizedAnneal,
        LandscapeKind::Beta => Arm::Caffeine,
    };
    let dim = arm_bounds(cfg, arm)?.dim();
    if lc.axes.is_empty() {
        return Err(Error::Config("landscape needs at least one axis".into()));
    }
    let mut indices: Vec<usize> = lc.axes.iter().map(|a| a.index).collect();
    if let Some(&i) = indices.iter().find(|&&i| i >= dim) {
        return Err(Error::IndexOutOfRange {
            what: "landscape axis",
            index: i,
            len: dim,
        });
    }
    indices.sort_unstable();
    if indices.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config(
            "landscape axes must scan distinct parameters".into(),
        ));
    }
    let indices: Vec<usize> = lc.axes.iter().map(|a| a.index).collect();
    let grid: Vec<Vec<f64>> = lc
        .axes
        .iter()
        .map(|a| linspace(a.lo, a.hi, a.points))
        .collect();
    let cost = arm_cost(cfg, &problem, arm, &cfg.propagator)?;
    let landscape = landscape_scan(
        |point: &[f64]| {
            let mut params = vec![0.0; dim];
            for (&i, &v) in indices.iter().zip(point) {
                params[i] = v;
            }
            cost.evaluate(&params)
        },
        &grid,
        lc.max_points,
    )?;
    Ok(LandscapeReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        kind: lc.kind,
        indices,
        landscape,
    })
}
