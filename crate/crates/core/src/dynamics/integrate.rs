//! Propagators for `i ∂_t ψ = H(t) ψ`: adaptive Dormand–Prince 5(4) and a
//! fixed-step fourth-order commutator-free Magnus scheme.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::hamiltonian::TimeDependentHamiltonian;
use crate::error::{Error, Result};
use crate::operators::{unitary_step, QuantumState, C64, I, ZERO};

/// Norm drift that aborts a propagation.
pub const NORM_ABORT: f64 = 1e-6;
/// Norm drift an accepted trajectory is expected to stay within.
pub const NORM_TARGET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    AdaptiveRk45,
    FixedStepMagnus4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step is one oscillation period over this number.
    pub min_steps_per_oscillation: usize,
    pub max_steps: usize,
    /// Fixed-step method: steps per oscillation period of the drive.
    pub fixed_steps_per_oscillation: usize,
    /// Fixed-step method: total steps when the drive does not oscillate.
    pub fixed_steps: usize,
    /// Repeat with halved tolerances (doubled steps) and report the change.
    pub self_check: bool,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveRk45,
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            min_steps_per_oscillation: 20,
            max_steps: 50_000_000,
            fixed_steps_per_oscillation: 40,
            fixed_steps: 4000,
            self_check: false,
        }
    }
}

impl PropagatorConfig {
    pub fn magnus() -> Self {
        Self {
            method: Method::FixedStepMagnus4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Config(
                "propagator tolerances must be positive".into(),
            ));
        }
        if self.min_steps_per_oscillation < 20 {
            return Err(Error::Config(format!(
                "min_steps_per_oscillation must be at least 20, got {}",
                self.min_steps_per_oscillation
            )));
        }
        if self.max_steps == 0 || self.fixed_steps == 0 || self.fixed_steps_per_oscillation == 0 {
            return Err(Error::Config("step counts must be positive".into()));
        }
        Ok(())
    }

    fn refined(&self) -> Self {
        Self {
            rel_tol: self.rel_tol / 2.0,
            abs_tol: self.abs_tol / 2.0,
            fixed_steps_per_oscillation: self.fixed_steps_per_oscillation * 2,
            fixed_steps: self.fixed_steps * 2,
            self_check: false,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub hamiltonian_evaluations: usize,
    pub max_norm_drift: f64,
    /// `1 - |<ψ|ψ'>|²` against a rerun with halved tolerances.
    pub self_check_infidelity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: QuantumState,
    pub stats: PropagationStats,
}

/// Snapshots of a propagation at requested times.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub norm_drift: Vec<f64>,
}

/// Propagates `psi0` from `span.0` to `span.1`.
pub fn propagate(
    h: &dyn TimeDependentHamiltonian,
    psi0: &QuantumState,
    span: (f64, f64),
    cfg: &PropagatorConfig,
) -> Result<Propagation> {
    propagate_sampled(h, psi0, span, cfg, &[]).map(|(p, _)| p)
}

/// As [`propagate`], additionally recording the state at each time in
/// `samples` (sorted, inside the span).
pub fn propagate_sampled(
    h: &dyn TimeDependentHamiltonian,
    psi0: &QuantumState,
    span: (f64, f64),
    cfg: &PropagatorConfig,
    samples: &[f64],
) -> Result<(Propagation, TrajectoryRecord)> {
    cfg.validate()?;
    let (ts, tf) = span;
    if !(tf > ts) || !ts.is_finite() || !tf.is_finite() {
        return Err(Error::Config(format!("invalid time span ({ts}, {tf})")));
    }
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi0.dim(),
        });
    }
    if (psi0.norm() - 1.0).abs() > NORM_TARGET {
        return Err(Error::Config(format!(
            "initial state is not normalized (norm {})",
            psi0.norm()
        )));
    }
    let slack = 1e-12 * (tf - ts).abs().max(tf.abs());
    if samples.windows(2).any(|w| w[1] < w[0])
        || samples.iter().any(|&s| s < ts - slack || s > tf + slack)
    {
        return Err(Error::Config(
            "sample times must be sorted and inside the span".into(),
        ));
    }
    let samples: Vec<f64> = samples.iter().map(|s| s.clamp(ts, tf)).collect();

    let (mut prop, record) = match cfg.method {
        Method::AdaptiveRk45 => dormand_prince(h, psi0, ts, tf, cfg, &samples)?,
        Method::FixedStepMagnus4 => magnus4(h, psi0, ts, tf, cfg, &samples)?,
    };
    if cfg.self_check {
        let again = propagate(h, psi0, span, &cfg.refined())?;
        let ov = prop.state.overlap(&again.state).norm_sqr()
            / (prop.state.norm().powi(2) * again.state.norm().powi(2));
        prop.stats.self_check_infidelity = Some((1.0 - ov).max(0.0));
    }
    Ok((prop, record))
}

fn max_step(h: &dyn TimeDependentHamiltonian, cfg: &PropagatorConfig, len: f64) -> f64 {
    match h.oscillation_period() {
        Some(p) => (p / cfg.min_steps_per_oscillation as f64).min(len),
        None => len,
    }
}

struct Recorder<'a> {
    samples: &'a [f64],
    next: usize,
    record: TrajectoryRecord,
}

impl Recorder<'_> {
    fn target(&self, tf: f64) -> f64 {
        self.samples.get(self.next).copied().unwrap_or(tf)
    }

    /// Records every pending sample at time `t`.
    fn take(&mut self, t: f64, psi: &[C64], drift: f64) {
        while self.next < self.samples.len() && self.samples[self.next] <= t {
            self.record.times.push(self.samples[self.next]);
            self.record.states.push(QuantumState::from_vector_unchecked(
                DVector::from_column_slice(psi),
            ));
            self.record.norm_drift.push(drift);
            self.next += 1;
        }
    }
}

fn check_norm(psi: &[C64], t: f64, steps: usize, stats: &mut PropagationStats) -> Result<f64> {
    let drift = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs();
    if !drift.is_finite() || drift > NORM_ABORT {
        return Err(Error::NormDrift { drift, t, steps });
    }
    stats.max_norm_drift = stats.max_norm_drift.max(drift);
    Ok(drift)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// `k = -i H(t) psi`.
fn rhs(
    h: &dyn TimeDependentHamiltonian,
    t: f64,
    psi: &[C64],
    k: &mut [C64],
    stats: &mut PropagationStats,
) -> Result<()> {
    h.apply(t, psi, k)?;
    stats.hamiltonian_evaluations += 1;
    for z in k.iter_mut() {
        *z *= -I;
    }
    Ok(())
}

fn error_norm(err: &[C64], y0: &[C64], y1: &[C64], cfg: &PropagatorConfig) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = cfg.abs_tol + cfg.rel_tol * a.norm_sqr().max(b.norm_sqr()).sqrt();
            e.norm_sqr() / (sc * sc)
        })
        .sum();
    (s / n).sqrt()
}

fn dormand_prince(
    h: &dyn TimeDependentHamiltonian,
    psi0: &QuantumState,
    ts: f64,
    tf: f64,
    cfg: &PropagatorConfig,
    samples: &[f64],
) -> Result<(Propagation, TrajectoryRecord)> {
    let dim = psi0.dim();
    let hmax = max_step(h, cfg, tf - ts);
    let mut stats = PropagationStats::default();
    let mut rec = Recorder {
        samples,
        next: 0,
        record: TrajectoryRecord::default(),
    };

    let mut y = psi0.as_slice().to_vec();
    let mut k: Vec<Vec<C64>> = vec![vec![ZERO; dim]; 7];
    let mut tmp = vec![ZERO; dim];
    let mut err = vec![ZERO; dim];
    let mut t = ts;
    rhs(h, t, &y, &mut k[0], &mut stats)?;

    // Starting step from the size of the derivative.
    let d0 = error_norm(&y, &y, &y, cfg);
    let d1 = error_norm(&k[0], &y, &y, cfg);
    let mut step = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * (tf - ts)
    } else {
        0.01 * d0 / d1
    }
    .min(hmax);

    rec.take(t, &y, 0.0);
    let span = tf - ts;
    while t < tf {
        let target = rec.target(tf);
        let remaining = target - t;
        let landing = step >= remaining * (1.0 - 1e-12);
        let hs = if landing { remaining } else { step };
        if hs < 1e-14 * span.max(t.abs()) && !landing {
            return Err(Error::StepUnderflow { t, h: hs });
        }
        if stats.accepted_steps + stats.rejected_steps >= cfg.max_steps {
            return Err(Error::StepBudget {
                max_steps: cfg.max_steps,
                t,
            });
        }

        for s in 1..7 {
            for i in 0..dim {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += kj[i] * (a * hs);
                    }
                }
                tmp[i] = acc;
            }
            rhs(h, t + C[s] * hs, &tmp, &mut k[s], &mut stats)?;
        }
        // tmp holds the fifth-order solution (stage 7 argument, FSAL).
        for i in 0..dim {
            let mut e = ZERO;
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += kj[i] * E[j];
                }
            }
            err[i] = e * hs;
        }
        let en = error_norm(&err, &y, &tmp, cfg);
        if en <= 1.0 {
            stats.accepted_steps += 1;
            t = if landing { target } else { t + hs };
            std::mem::swap(&mut y, &mut tmp);
            k.swap(0, 6);
            let drift = check_norm(&y, t, stats.accepted_steps, &mut stats)?;
            rec.take(t, &y, drift);
            let fac = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            // a clipped landing step says nothing about the natural step size
            if !landing || hs >= step {
                step = (hs * fac).min(hmax);
            }
        } else {
            stats.rejected_steps += 1;
            step = hs * (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    let state = QuantumState::from_vector_unchecked(DVector::from_vec(y));
    Ok((Propagation { state, stats }, rec.record))
}

fn magnus4(
    h: &dyn TimeDependentHamiltonian,
    psi0: &QuantumState,
    ts: f64,
    tf: f64,
    cfg: &PropagatorConfig,
    samples: &[f64],
) -> Result<(Propagation, TrajectoryRecord)> {
    let hstep = match h.oscillation_period() {
        Some(p) => p / cfg.fixed_steps_per_oscillation as f64,
        None => (tf - ts) / cfg.fixed_steps as f64,
    };
    // Gauss nodes and the two-exponential weights.
    let r3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
    let (a, b) = ((3.0 + 2.0 * r3) / 12.0, (3.0 - 2.0 * r3) / 12.0);

    let mut stats = PropagationStats::default();
    let mut rec = Recorder {
        samples,
        next: 0,
        record: TrajectoryRecord::default(),
    };
    let mut y = psi0.clone().into_inner();
    let mut t = ts;
    rec.take(t, y.as_slice(), 0.0);
    while t < tf {
        let target = rec.target(tf);
        let len = target - t;
        if len > 0.0 {
            let n = (len / hstep).ceil().max(1.0) as usize;
            if stats.accepted_steps + n > cfg.max_steps {
                return Err(Error::StepBudget {
                    max_steps: cfg.max_steps,
                    t,
                });
            }
            let dt = len / n as f64;
            for i in 0..n {
                let t0 = t + i as f64 * dt;
                let m1 = h.matrix(t0 + c1 * dt)?;
                let m2 = h.matrix(t0 + c2 * dt)?;
                stats.hamiltonian_evaluations += 2;
                let mut first = m1.scale(a);
                first.add_scaled(b, &m2);
                let mut second = m1.scale(b);
                second.add_scaled(a, &m2);
                y = unitary_step(&first, dt)? * y;
                y = unitary_step(&second, dt)? * y;
                stats.accepted_steps += 1;
                check_norm(y.as_slice(), t0 + dt, stats.accepted_steps, &mut stats)?;
            }
        }
        t = target;
        let drift = (y.norm() - 1.0).abs();
        rec.take(t, y.as_slice(), drift);
    }
    let state = QuantumState::from_vector_unchecked(y);
    Ok((Propagation { state, stats }, rec.record))
}
