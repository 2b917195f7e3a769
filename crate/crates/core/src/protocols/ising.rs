//! Ising annealing: final-energy gaps of the bare anneal and of CAFFEINE
//! drives over a grid of chain lengths, harmonics and segments.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, Arm, ExperimentConfig, REPORT_SCHEMA_VERSION};
use super::state_prep::{caffeine_drive, fixed_drive};
use super::{ground_energy, ground_state};
use crate::dynamics::propagate;
use crate::error::Result;
use crate::models::{HamiltonianFamily, ModelSpec};
use crate::operators::{MaterializeOptions, OperatorMatrix, QuantumState, HARD_MAX_SITES};
use crate::optimize::{
    dual_anneal_with_abort, make_cost, Bounds, CostContext, CostSpec, TerminationReason,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingRow {
    pub sites: usize,
    pub arm: Arm,
    /// `N_k`, CAFFEINE rows only.
    pub harmonics: Option<usize>,
    /// `N_τ`, CAFFEINE rows only.
    pub segments: Option<usize>,
    pub final_energy: f64,
    /// Lowest eigenvalue of `H_p`.
    pub ground_energy: f64,
    /// `E_final - E_T`.
    pub energy_gap: f64,
    pub evaluations: usize,
    pub termination: Option<TerminationReason>,
    pub seed: Option<u64>,
    pub parameters: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<IsingRow>,
    /// False when the run was interrupted before every cell finished.
    pub complete: bool,
}

/// `(N_k, N_τ)` cells of the grid in the order they are run.
pub fn ising_cells(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = cfg
        .anneal
        .harmonics
        .iter()
        .flat_map(|&k| cfg.anneal.segments.iter().map(move |&s| (k, s)))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Expected number of rows: one baseline per `N` plus the CAFFEINE cells.
pub fn ising_row_count(cfg: &ExperimentConfig) -> usize {
    let arms = |a: Arm| cfg.arms.contains(&a) as usize;
    cfg.anneal.sites.len() * (arms(Arm::Unassisted) + arms(Arm::Caffeine) * ising_cells(cfg).len())
}

struct Chain {
    cfg: ExperimentConfig,
    family: HamiltonianFamily,
    psi0: QuantumState,
    problem: OperatorMatrix,
    ground: f64,
}

impl Chain {
    fn new(cfg: &ExperimentConfig, sites: usize) -> Result<Self> {
        let mut cfg = cfg.clone();
        cfg.model = ModelSpec::Ising(cfg.ising_for(sites)?);
        let family = cfg.model.family(MaterializeOptions {
            max_sites: HARD_MAX_SITES,
        })?;
        let (psi0, _) = ground_state(&family.at(0.0))?;
        let problem = family.at(1.0);
        let ground = ground_energy(&problem)?;
        Ok(Self {
            cfg,
            family,
            psi0,
            problem,
            ground,
        })
    }

    fn energy(&self, psi: &QuantumState) -> f64 {
        self.problem.expectation(psi).re / psi.norm().powi(2)
    }

    fn row(&self, arm: Arm, final_energy: f64) -> IsingRow {
        IsingRow {
            sites: self.family.dim().trailing_zeros() as usize,
            arm,
            harmonics: None,
            segments: None,
            final_energy,
            ground_energy: self.ground,
            energy_gap: final_energy - self.ground,
            evaluations: 1,
            termination: None,
            seed: None,
            parameters: Vec::new(),
        }
    }

    fn unassisted(&self) -> Result<IsingRow> {
        let drive = fixed_drive(&self.cfg, &self.family, Arm::Unassisted)?;
        let tau = self.cfg.schedule.tau;
        let out = propagate(drive.as_ref(), &self.psi0, (0.0, tau), &self.cfg.propagator)?;
        Ok(self.row(Arm::Unassisted, self.energy(&out.state)))
    }

    /// One CAFFEINE cell; `None` when interrupted.
    fn caffeine(
        &self,
        harmonics: usize,
        segments: usize,
        start: Option<Vec<f64>>,
        abort: Option<&AtomicBool>,
    ) -> Result<Option<IsingRow>> {
        let mut cfg = self.cfg.clone();
        cfg.drive.harmonics = harmonics;
        cfg.drive.segments = segments;
        let sites = self.family.dim().trailing_zeros() as usize;
        let (lo, hi) = cfg.drive.beta_bounds;
        let bounds = Bounds::uniform(harmonics * segments, lo, hi)?;
        let family = self.family.clone();
        let build_cfg = cfg.clone();
        let cost = make_cost(
            CostSpec::FinalEnergy {
                problem: self.problem.clone(),
            },
            CostContext {
                build: Box::new(move |p| caffeine_drive(&build_cfg, &family, p)),
                psi0: self.psi0.clone(),
                span: (0.0, cfg.schedule.tau),
                propagator: cfg.search_propagator().clone(),
            },
        )?;
        let mut opt = cfg.optimizer.clone();
        opt.rng_seed = derive_seed(
            cfg.seed,
            ((sites as u64) << 32) | ((harmonics as u64) << 16) | segments as u64,
        );
        if let Some(x0) = start {
            opt.x0 = Some(x0.iter().map(|v| v.clamp(lo, hi)).collect());
        }
        let result = dual_anneal_with_abort(&|x: &[f64]| cost.call(x), &bounds, &opt, abort)?;
        if result.termination_reason == TerminationReason::UserAbort {
            return Ok(None);
        }
        let drive = caffeine_drive(&cfg, &self.family, &result.best_params)?;
        let out = propagate(
            drive.as_ref(),
            &self.psi0,
            (0.0, cfg.schedule.tau),
            &cfg.propagator,
        )?;
        let mut row = self.row(Arm::Caffeine, self.energy(&out.state));
        row.harmonics = Some(harmonics);
        row.segments = Some(segments);
        row.evaluations = result.evaluation_count;
        row.termination = Some(result.termination_reason);
        row.seed = Some(result.seed);
        row.parameters = result.best_params;
        Ok(Some(row))
    }
}

/// Re-expresses a `(k0, s0)` table on `(k, s)` when `k0 ≤ k` and `s0 | s`:
/// extra harmonics start at zero and each old segment is repeated.
fn embed_table(flat: &[f64], k0: usize, s0: usize, k: usize, s: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * s];
    for h in 0..k0 {
        for j in 0..s {
            out[h * s + j] = flat[h * s0 + j * s0 / s];
        }
    }
    out
}

/// Runs the grid. Chains of different length run in parallel; cells of one
/// chain run in order so coarser tables can seed finer ones. `on_row` sees
/// every finished row as soon as it exists.
pub fn run_ising_anneal(
    cfg: &ExperimentConfig,
    abort: Option<&AtomicBool>,
    on_row: &(dyn Fn(&IsingRow) + Sync),
) -> Result<IsingReport> {
    cfg.validate()?;
    let cells = ising_cells(cfg);
    let stopped = || abort.is_some_and(|a| a.load(Ordering::Relaxed));
    let groups = cfg
        .anneal
        .sites
        .par_iter()
        .map(|&n| -> Result<(Vec<IsingRow>, bool)> {
            let chain = Chain::new(cfg, n)?;
            let mut rows = Vec::new();
            if cfg.arms.contains(&Arm::Unassisted) {
                if stopped() {
                    return Ok((rows, false));
                }
                let row = chain.unassisted()?;
                on_row(&row);
                rows.push(row);
            }
            if !cfg.arms.contains(&Arm::Caffeine) {
                return Ok((rows, true));
            }
            let mut done: Vec<(usize, usize, f64, Vec<f64>)> = Vec::new();
            for &(k, s) in &cells {
                if stopped() {
                    return Ok((rows, false));
                }
                let start = if cfg.anneal.warm_start {
                    done.iter()
                        .filter(|(k0, s0, _, _)| *k0 <= k && s % s0 == 0)
                        .min_by(|a, b| a.2.total_cmp(&b.2))
                        .map(|(k0, s0, _, p)| embed_table(p, *k0, *s0, k, s))
                } else {
                    None
                };
                match chain.caffeine(k, s, start, abort)? {
                    Some(row) => {
                        on_row(&row);
                        done.push((k, s, row.final_energy, row.parameters.clone()));
                        rows.push(row);
                    }
                    None => return Ok((rows, false)),
                }
            }
            Ok((rows, true))
        })
        .collect::<Result<Vec<_>>>()?;
    let complete = groups.iter().all(|(_, c)| *c);
    Ok(IsingReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        rows: groups.into_iter().flat_map(|(r, _)| r).collect(),
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_repeats_segments_and_pads_harmonics() {
        let e = embed_table(&[1.0, 2.0], 1, 2, 2, 4);
        assert_eq!(e, vec![1.0, 1.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
