//! Dual annealing: generalized simulated annealing with a distorted
//! Cauchy–Lorentz visiting distribution, a temperature-dependent acceptance
//! rule, and local refinement of improving points.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use libm::lgamma as ln_gamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::local::{nelder_mead, NelderMeadConfig};
use crate::error::{Error, Result};

/// Seed used when none is configured.
pub const DEFAULT_SEED: u64 = 20_240_917;

const TAIL_LIMIT: f64 = 1e8;
const MIN_VISIT_BOUND: f64 = 1e-10;
const MAX_REINIT: usize = 1000;

/// Per-parameter search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Config(
                "bounds must cover at least one parameter".into(),
            ));
        }
        for (i, &(lo, hi)) in pairs.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "bound {i} must satisfy lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(Self {
            lower: pairs.iter().map(|p| p.0).collect(),
            upper: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// The same interval for every one of `n` parameters.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(&vec![(lo, hi); n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualAnnealingConfig {
    pub max_function_evals: usize,
    pub max_global_iterations: usize,
    pub initial_temperature: f64,
    pub restart_temperature_ratio: f64,
    pub visiting_distribution_shape: f64,
    pub acceptance_shape: f64,
    pub local_search_enabled: bool,
    pub rng_seed: u64,
    /// Stop early once the best cost reaches this value.
    pub target_cost: Option<f64>,
    /// Starting point; uniform random inside the box when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for DualAnnealingConfig {
    fn default() -> Self {
        Self {
            max_function_evals: 100_000,
            max_global_iterations: 1000,
            initial_temperature: 5230.0,
            restart_temperature_ratio: 2e-5,
            visiting_distribution_shape: 2.62,
            acceptance_shape: -5.0,
            local_search_enabled: true,
            rng_seed: DEFAULT_SEED,
            target_cost: None,
            x0: None,
        }
    }
}

impl DualAnnealingConfig {
    pub fn validate(&self, bounds: &Bounds) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.max_function_evals == 0 || self.max_global_iterations == 0 {
            return bad("optimizer budgets must be positive".into());
        }
        let qv = self.visiting_distribution_shape;
        if !(qv > 1.0 && qv <= 3.0) {
            return bad(format!("visiting shape must lie in (1, 3], got {qv}"));
        }
        let qa = self.acceptance_shape;
        if !(qa > -1e4 && qa <= -5.0) {
            return bad(format!("acceptance shape must lie in (-1e4, -5], got {qa}"));
        }
        let t0 = self.initial_temperature;
        if !(t0 > 0.01 && t0 <= 5e4) {
            return bad(format!(
                "initial temperature must lie in (0.01, 5e4], got {t0}"
            ));
        }
        let r = self.restart_temperature_ratio;
        if !(r > 0.0 && r < 1.0) {
            return bad(format!(
                "restart temperature ratio must lie in (0, 1), got {r}"
            ));
        }
        if let Some(x0) = &self.x0 {
            if !bounds.contains(x0) {
                return bad("x0 lies outside the bounds".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// The evaluation or global-iteration budget ran out.
    BudgetExhausted,
    /// The configured target cost was reached.
    Converged,
    UserAbort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    pub evaluation_count: usize,
    pub iterations: usize,
    /// Every evaluated cost, in evaluation order; non-finite values as +∞.
    pub cost_trace: Vec<f64>,
    pub termination_reason: TerminationReason,
    pub message: String,
    pub seed: u64,
    pub nonfinite_evaluations: usize,
}

/// Counts evaluations, enforces the budget and sanitizes non-finite costs.
struct Evaluator<'a, F> {
    f: &'a F,
    nfev: usize,
    maxfun: usize,
    trace: Vec<f64>,
    nonfinite: usize,
    abort: Option<&'a AtomicBool>,
    aborted: bool,
}

impl<F: Fn(&[f64]) -> f64> Evaluator<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.nfev >= self.maxfun {
            return None;
        }
        if self.abort.is_some_and(|a| a.load(Ordering::Relaxed)) {
            self.aborted = true;
            return None;
        }
        self.nfev += 1;
        let mut v = (self.f)(x);
        if !v.is_finite() {
            self.nonfinite += 1;
            v = f64::INFINITY;
        }
        self.trace.push(v);
        Some(v)
    }

    fn exhausted(&self) -> bool {
        self.nfev >= self.maxfun || self.aborted
    }
}

struct Visiting {
    qv: f64,
    factor4_p: f64,
    factor6: f64,
    lower: Vec<f64>,
    range: Vec<f64>,
}

impl Visiting {
    fn new(qv: f64, bounds: &Bounds) -> Self {
        let factor2 = ((4.0 - qv) * (qv - 1.0).ln()).exp();
        let factor3 = ((2.0 - qv) * 2f64.ln() / (qv - 1.0)).exp();
        let factor4_p = PI.sqrt() * factor2 / (factor3 * (3.0 - qv));
        let factor5 = 1.0 / (qv - 1.0) - 0.5;
        let d1 = 2.0 - factor5;
        let factor6 = PI * (1.0 - factor5) / (PI * (1.0 - factor5)).sin() / ln_gamma(d1).exp();
        Self {
            qv,
            factor4_p,
            factor6,
            lower: bounds.lower.clone(),
            range: bounds
                .upper
                .iter()
                .zip(&bounds.lower)
                .map(|(u, l)| u - l)
                .collect(),
        }
    }

    /// One draw of the distorted Cauchy–Lorentz visiting step.
    fn visit_fn<R: Rng>(&self, temperature: f64, rng: &mut R) -> f64 {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let qv = self.qv;
        let factor1 = (temperature.ln() / (qv - 1.0)).exp();
        let factor4 = self.factor4_p * factor1;
        let x = x * (-(qv - 1.0) * (self.factor6 / factor4).ln() / (3.0 - qv)).exp();
        let den = ((qv - 1.0) * y.abs().ln() / (3.0 - qv)).exp();
        x / den
    }

    fn wrap(&self, i: usize, v: f64) -> f64 {
        let a = v - self.lower[i];
        let b = a % self.range[i] + self.range[i];
        let mut w = b % self.range[i] + self.lower[i];
        if (w - self.lower[i]).abs() < MIN_VISIT_BOUND {
            w += MIN_VISIT_BOUND;
        }
        w
    }

    /// Moves all coordinates for `step < dim`, otherwise only coordinate
    /// `step - dim`.
    fn visiting<R: Rng>(&self, x: &[f64], step: usize, temperature: f64, rng: &mut R) -> Vec<f64> {
        let dim = x.len();
        if step < dim {
            let mut visits: Vec<f64> = (0..dim).map(|_| self.visit_fn(temperature, rng)).collect();
            let upper: f64 = rng.random();
            let lower: f64 = rng.random();
            for v in visits.iter_mut() {
                if *v > TAIL_LIMIT {
                    *v = TAIL_LIMIT * upper;
                } else if *v < -TAIL_LIMIT {
                    *v = -TAIL_LIMIT * lower;
                }
            }
            (0..dim).map(|i| self.wrap(i, visits[i] + x[i])).collect()
        } else {
            let mut out = x.to_vec();
            let mut visit = self.visit_fn(temperature, rng);
            if visit > TAIL_LIMIT {
                visit = TAIL_LIMIT * rng.random::<f64>();
            } else if visit < -TAIL_LIMIT {
                visit = -TAIL_LIMIT * rng.random::<f64>();
            }
            let i = step - dim;
            out[i] = self.wrap(i, visit + x[i]);
            out
        }
    }
}

struct EnergyState {
    current: Vec<f64>,
    current_energy: f64,
    best: Vec<f64>,
    best_energy: f64,
}

fn uniform_point<R: Rng>(bounds: &Bounds, rng: &mut R) -> Vec<f64> {
    bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(l, u)| l + (u - l) * rng.random::<f64>())
        .collect()
}

impl EnergyState {
    /// Fresh (re)start; retries random points while the cost is non-finite.
    fn reset<F: Fn(&[f64]) -> f64, R: Rng>(
        prev: Option<&EnergyState>,
        ev: &mut Evaluator<'_, F>,
        bounds: &Bounds,
        rng: &mut R,
        x0: Option<&[f64]>,
    ) -> Result<Option<Self>> {
        let mut x = match x0 {
            Some(x0) => x0.to_vec(),
            None => uniform_point(bounds, rng),
        };
        let mut attempts = 0;
        loop {
            let Some(e) = ev.eval(&x) else {
                return Ok(None);
            };
            if e.is_finite() {
                let (best, best_energy) = match prev {
                    Some(p) => (p.best.clone(), p.best_energy),
                    None => (x.clone(), e),
                };
                return Ok(Some(Self {
                    current: x,
                    current_energy: e,
                    best,
                    best_energy,
                }));
            }
            attempts += 1;
            if attempts >= MAX_REINIT {
                return Err(Error::Optimization(
                    "cost is non-finite at every sampled starting point".into(),
                ));
            }
            x = uniform_point(bounds, rng);
        }
    }
}

struct Chain {
    qa: f64,
    emin: f64,
    xmin: Vec<f64>,
    not_improved: usize,
    not_improved_max: usize,
    temperature_step: f64,
    k: f64,
    improved: bool,
}

enum Stop {
    Budget(&'static str),
    Target,
    Abort,
}

/// Minimizes `cost` over `bounds`.
pub fn dual_anneal<F>(
    cost: &F,
    bounds: &Bounds,
    cfg: &DualAnnealingConfig,
) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> f64,
{
    dual_anneal_with_abort(cost, bounds, cfg, None)
}

/// As [`dual_anneal`]; setting `abort` ends the run with the best point so far.
pub fn dual_anneal_with_abort<F>(
    cost: &F,
    bounds: &Bounds,
    cfg: &DualAnnealingConfig,
    abort: Option<&AtomicBool>,
) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> f64,
{
    cfg.validate(bounds)?;
    let dim = bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut ev = Evaluator {
        f: cost,
        nfev: 0,
        maxfun: cfg.max_function_evals,
        trace: Vec::new(),
        nonfinite: 0,
        abort,
        aborted: false,
    };
    let visiting = Visiting::new(cfg.visiting_distribution_shape, bounds);
    let ls_cfg = NelderMeadConfig::for_dimension(dim);

    let Some(mut state) = EnergyState::reset(None, &mut ev, bounds, &mut rng, cfg.x0.as_deref())?
    else {
        return Err(Error::Optimization(
            "evaluation budget too small to start".into(),
        ));
    };
    let mut chain = Chain {
        qa: cfg.acceptance_shape,
        emin: state.current_energy,
        xmin: state.current.clone(),
        not_improved: 0,
        not_improved_max: 1000,
        temperature_step: 0.0,
        k: 100.0 * dim as f64,
        improved: false,
    };

    let qv = cfg.visiting_distribution_shape;
    let t1 = ((qv - 1.0) * 2f64.ln()).exp() - 1.0;
    let restart_temperature = cfg.initial_temperature * cfg.restart_temperature_ratio;
    let mut iteration = 0usize;

    let reached = |s: &EnergyState| cfg.target_cost.is_some_and(|t| s.best_energy <= t);
    let stop: Stop = 'outer: loop {
        for i in 0..cfg.max_global_iterations {
            let s = i as f64 + 2.0;
            let t2 = ((qv - 1.0) * s.ln()).exp() - 1.0;
            let temperature = cfg.initial_temperature * t1 / t2;
            if iteration >= cfg.max_global_iterations {
                break 'outer Stop::Budget("maximum number of global iterations reached");
            }
            if temperature < restart_temperature {
                match EnergyState::reset(Some(&state), &mut ev, bounds, &mut rng, None)? {
                    Some(s) => state = s,
                    None => break 'outer budget_or_abort(&ev),
                }
                break;
            }

            // Markov chain at this temperature.
            chain.temperature_step = temperature / (i as f64 + 1.0);
            chain.not_improved += 1;
            for j in 0..2 * dim {
                if j == 0 {
                    chain.improved = i == 0;
                }
                let x = visiting.visiting(&state.current, j, temperature, &mut rng);
                let Some(e) = ev.eval(&x) else {
                    break 'outer budget_or_abort(&ev);
                };
                if e < state.current_energy {
                    state.current_energy = e;
                    state.current = x.clone();
                    if e < state.best_energy {
                        state.best_energy = e;
                        state.best = x;
                        chain.improved = true;
                        chain.not_improved = 0;
                    }
                } else {
                    let r: f64 = rng.random();
                    let pqv_temp = 1.0
                        - (1.0 - chain.qa) * (e - state.current_energy) / chain.temperature_step;
                    let pqv = if pqv_temp <= 0.0 {
                        0.0
                    } else {
                        (pqv_temp.ln() / (1.0 - chain.qa)).exp()
                    };
                    if r <= pqv {
                        state.current_energy = e;
                        state.current = x;
                        chain.xmin = state.current.clone();
                    }
                    if chain.not_improved >= chain.not_improved_max
                        && (j == 0 || state.current_energy < chain.emin)
                    {
                        chain.emin = state.current_energy;
                        chain.xmin = state.current.clone();
                    }
                }
                if ev.exhausted() {
                    break 'outer budget_or_abort(&ev);
                }
            }
            if reached(&state) {
                break 'outer Stop::Target;
            }

            if cfg.local_search_enabled {
                if chain.improved {
                    let (e, x) =
                        local_search(&mut ev, &state.best, state.best_energy, bounds, &ls_cfg);
                    if e < state.best_energy {
                        chain.not_improved = 0;
                        state.best_energy = e;
                        state.best = x.clone();
                        state.current_energy = e;
                        state.current = x;
                    }
                    if ev.exhausted() {
                        break 'outer budget_or_abort(&ev);
                    }
                }
                let mut do_ls = false;
                if chain.k < 90.0 * dim as f64 {
                    let pls = (chain.k * (state.best_energy - state.current_energy)
                        / chain.temperature_step)
                        .exp();
                    if pls >= rng.random::<f64>() {
                        do_ls = true;
                    }
                }
                if chain.not_improved >= chain.not_improved_max {
                    do_ls = true;
                }
                if do_ls {
                    let (e, x) = local_search(&mut ev, &chain.xmin, chain.emin, bounds, &ls_cfg);
                    chain.xmin = x.clone();
                    chain.emin = e;
                    chain.not_improved = 0;
                    chain.not_improved_max = dim;
                    if e < state.best_energy {
                        state.best_energy = e;
                        state.best = x.clone();
                        state.current_energy = e;
                        state.current = x;
                    }
                    if ev.exhausted() {
                        break 'outer budget_or_abort(&ev);
                    }
                }
                if reached(&state) {
                    break 'outer Stop::Target;
                }
            }
            iteration += 1;
        }
    };

    let (termination_reason, message) = match stop {
        Stop::Budget(m) => (TerminationReason::BudgetExhausted, m.to_string()),
        Stop::Target => (
            TerminationReason::Converged,
            "target cost reached".to_string(),
        ),
        Stop::Abort => (TerminationReason::UserAbort, "aborted".to_string()),
    };
    if !state.best_energy.is_finite() {
        return Err(Error::Optimization("no finite cost was found".into()));
    }
    Ok(OptimizationResult {
        best_params: state.best,
        best_cost: state.best_energy,
        evaluation_count: ev.nfev,
        iterations: iteration,
        cost_trace: ev.trace,
        termination_reason,
        message,
        seed: cfg.rng_seed,
        nonfinite_evaluations: ev.nonfinite,
    })
}

fn budget_or_abort<F>(ev: &Evaluator<'_, F>) -> Stop {
    if ev.aborted {
        Stop::Abort
    } else {
        Stop::Budget("maximum number of function evaluations reached")
    }
}

fn local_search<F: Fn(&[f64]) -> f64>(
    ev: &mut Evaluator<'_, F>,
    x: &[f64],
    e: f64,
    bounds: &Bounds,
    cfg: &NelderMeadConfig,
) -> (f64, Vec<f64>) {
    let r = nelder_mead(|p| ev.eval(p), x, e, &bounds.lower, &bounds.upper, cfg);
    if r.f.is_finite() && r.f < e && bounds.contains(&r.x) {
        (r.f, r.x)
    } else {
        (e, x.to_vec())
    }
}
