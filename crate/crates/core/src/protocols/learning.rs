//! Segment-by-segment learning of the drive coefficients: each segment's β
//! minimizes the energy `<ψ|H(λ)|ψ>` at its end, starting from the previous
//! segment's final state.

use std::sync::atomic::AtomicBool;

use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ExperimentConfig, REPORT_SCHEMA_VERSION};
use super::ground_state;
use super::state_prep::table_drive;
use crate::agp::AnalyticalBeta;
use crate::dynamics::{propagate, propagate_sampled};
use crate::error::{Error, Result};
use crate::models::TwoQubitParams;
use crate::operators::{MaterializeOptions, QuantumState, HARD_MAX_SITES};
use crate::optimize::{
    dual_anneal_with_abort, make_cost, Bounds, CostContext, CostSpec, OptimizationResult,
    TerminationReason,
};
use crate::schedules::{PiecewiseBeta, Schedule, ScheduleKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResult {
    /// 1-based segment index `j`.
    pub index: usize,
    /// `β_k^(j)` for `k = 1..N_k`, in units of ω₀.
    pub betas: Vec<f64>,
    /// `E_j = <ψ(t_j)|H(λ(t_j))|ψ(t_j)>`.
    pub energy: f64,
    pub start_time: f64,
    pub end_time: f64,
    /// State at `t_j`; the next segment starts from it.
    pub state: QuantumState,
    pub optimization: OptimizationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub segment: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub learned_beta1: f64,
    /// λ-weighted average of the closed-form β₁ over the segment (two-qubit
    /// model only).
    pub analytical_beta1: Option<f64>,
    /// Closed-form β₁ at the segment midpoint in time.
    pub analytical_beta1_midpoint: Option<f64>,
    /// Smooth schedule, segment ends after `tail_start · τ`: λ̇ → 0 leaves β
    /// without influence on the dynamics.
    pub tail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub segments: Vec<SegmentResult>,
    pub comparison: Vec<ComparisonRow>,
    /// RMS of learned minus averaged closed-form β₁ over non-tail segments.
    pub rms_deviation: Option<f64>,
    pub scored_segments: usize,
    /// `1 - |<ψ_T|ψ(τ)>|²` of the chain's final state, when complete.
    pub final_infidelity: Option<f64>,
    pub complete: bool,
    /// Why the chain stopped early.
    pub error: Option<String>,
}

impl LearningReport {
    /// Learned table so far; unfinished segments are zero.
    pub fn table(&self) -> Result<PiecewiseBeta> {
        let cfg = &self.config;
        let mut t =
            PiecewiseBeta::zeros(cfg.drive.harmonics, cfg.drive.segments, cfg.schedule.tau)?;
        for seg in &self.segments {
            for (k0, &b) in seg.betas.iter().enumerate() {
                t.set(k0 + 1, seg.index, b)?;
            }
        }
        Ok(t)
    }
}

/// `(1/Δλ)∫ β₁(λ) dλ` over `[l0, l1]` (Gauss–Legendre, 8 nodes on 8
/// panels); the midpoint value when `Δλ` vanishes.
pub fn segment_average_beta1(
    p: &TwoQubitParams,
    form: AnalyticalBeta,
    omega0: f64,
    l0: f64,
    l1: f64,
) -> f64 {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let f = |l: f64| form.beta1(p, l, omega0);
    let width = l1 - l0;
    if width.abs() < 1e-12 {
        return f(0.5 * (l0 + l1));
    }
    let panels = 8;
    let hw = width / panels as f64;
    let mut sum = 0.0;
    for i in 0..panels {
        let mid = l0 + (i as f64 + 0.5) * hw;
        for (x, w) in X.iter().zip(W) {
            sum += w * (f(mid - 0.5 * hw * x) + f(mid + 0.5 * hw * x));
        }
    }
    sum * 0.5 * hw / width
}

fn comparison(
    cfg: &ExperimentConfig,
    segments: &[SegmentResult],
) -> (Vec<ComparisonRow>, Option<f64>, usize) {
    let s: Schedule = cfg.schedule;
    let omega0 = cfg.drive.omega0(s.tau);
    let two_qubit = cfg.model.two_qubit();
    let form = cfg.drive.analytical_form;
    let mut rows = Vec::new();
    let mut sq = 0.0;
    let mut n = 0;
    for seg in segments {
        let (l0, l1) = (s.lambda(seg.start_time), s.lambda(seg.end_time));
        let tail = s.kind == ScheduleKind::Smooth
            && seg.end_time > cfg.learning.tail_start * s.tau * (1.0 + 1e-12);
        let avg = two_qubit.map(|p| segment_average_beta1(p, form, omega0, l0, l1));
        let mid = two_qubit
            .map(|p| form.beta1(p, s.lambda(0.5 * (seg.start_time + seg.end_time)), omega0));
        let learned = seg.betas[0];
        if let (Some(a), false) = (avg, tail) {
            sq += (learned - a).powi(2);
            n += 1;
        }
        rows.push(ComparisonRow {
            segment: seg.index,
            t_start: seg.start_time,
            t_end: seg.end_time,
            lambda_start: l0,
            lambda_end: l1,
            learned_beta1: learned,
            analytical_beta1: avg,
            analytical_beta1_midpoint: mid,
            tail,
        });
    }
    let rms = (two_qubit.is_some() && n > 0).then(|| (sq / n as f64).sqrt());
    (rows, rms, n)
}

/// Learns the table one segment at a time. A failing segment stops the
/// chain; the report then holds the segments finished so far and the error.
pub fn run_agp_learning(
    cfg: &ExperimentConfig,
    abort: Option<&AtomicBool>,
) -> Result<LearningReport> {
    cfg.validate()?;
    let family = cfg.model.family(MaterializeOptions {
        max_sites: HARD_MAX_SITES,
    })?;
    let s = cfg.schedule;
    let (nk, nt) = (cfg.drive.harmonics, cfg.drive.segments);
    let (lo, hi) = cfg.learning.bounds;
    let bounds = Bounds::uniform(nk, lo, hi)?;
    let (mut psi, _) = ground_state(&family.at(0.0))?;
    let mut table = PiecewiseBeta::zeros(nk, nt, s.tau)?;
    let mut segments: Vec<SegmentResult> = Vec::new();
    let mut error = None;

    for j in 1..=nt {
        let (t0, t1) = table.segment_window(j);
        let step = || -> Result<Option<SegmentResult>> {
            let h_end = family.at(s.lambda(t1));
            let (fam, c, base) = (family.clone(), cfg.clone(), table.clone());
            let cost = make_cost(
                CostSpec::SegmentEnergy {
                    hamiltonian: h_end.clone(),
                },
                CostContext {
                    build: Box::new(move |p| {
                        let mut t = base.clone();
                        for (k0, &b) in p.iter().enumerate() {
                            t.set(k0 + 1, j, b)?;
                        }
                        table_drive(&c, &fam, t)
                    }),
                    psi0: psi.clone(),
                    span: (t0, t1),
                    propagator: cfg.search_propagator().clone(),
                },
            )?;
            let mut opt = cfg.optimizer.clone();
            opt.rng_seed = derive_seed(cfg.seed, j as u64);
            let result = dual_anneal_with_abort(&|x: &[f64]| cost.call(x), &bounds, &opt, abort)?;
            if result.termination_reason == TerminationReason::UserAbort {
                return Ok(None);
            }
            let mut t = table.clone();
            for (k0, &b) in result.best_params.iter().enumerate() {
                t.set(k0 + 1, j, b)?;
            }
            let drive = table_drive(cfg, &family, t)?;
            let out = propagate(drive.as_ref(), &psi, (t0, t1), &cfg.propagator)?;
            let n2 = out.state.norm().powi(2);
            Ok(Some(SegmentResult {
                index: j,
                betas: result.best_params.clone(),
                energy: h_end.expectation(&out.state).re / n2,
                start_time: t0,
                end_time: t1,
                state: out.state,
                optimization: result,
            }))
        };
        match step() {
            Ok(Some(seg)) => {
                for (k0, &b) in seg.betas.iter().enumerate() {
                    table.set(k0 + 1, j, b)?;
                }
                psi = seg.state.clone();
                segments.push(seg);
            }
            Ok(None) => {
                error = Some(format!("interrupted before segment {j} finished"));
                break;
            }
            Err(e) => {
                error = Some(
                    Error::Segment {
                        segment: j,
                        source: Box::new(e),
                    }
                    .to_string(),
                );
                break;
            }
        }
    }

    let complete = segments.len() == nt;
    // undefined when the final ground state is degenerate, e.g. h = 0 Ising
    let final_infidelity = if complete {
        ground_state(&family.at(1.0))
            .ok()
            .map(|(target, _)| (1.0 - target.fidelity(&psi) / psi.norm().powi(2)).clamp(0.0, 1.0))
    } else {
        None
    };
    let (comparison, rms_deviation, scored_segments) = comparison(cfg, &segments);
    Ok(LearningReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        segments,
        comparison,
        rms_deviation,
        scored_segments,
        final_infidelity,
        complete,
        error,
    })
}

/// Fidelity between the chain's final state and a single propagation over
/// the whole protocol with the learned table.
pub fn chain_consistency(report: &LearningReport) -> Result<f64> {
    let cfg = &report.config;
    let last = report
        .segments
        .last()
        .ok_or_else(|| Error::Config("no learned segments".into()))?;
    let family = cfg.model.family(MaterializeOptions {
        max_sites: HARD_MAX_SITES,
    })?;
    let (psi0, _) = ground_state(&family.at(0.0))?;
    let table = report.table()?;
    let boundaries: Vec<f64> = report.segments.iter().map(|s| s.end_time).collect();
    let drive = table_drive(cfg, &family, table)?;
    let (out, _) = propagate_sampled(
        drive.as_ref(),
        &psi0,
        (0.0, last.end_time),
        &cfg.propagator,
        &boundaries,
    )?;
    Ok(out.state.fidelity(&last.state) / (out.state.norm() * last.state.norm()).powi(2))
}
