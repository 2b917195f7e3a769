//! Observables along a recorded trajectory.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::integrate::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::models::HamiltonianFamily;
use crate::operators::{eigendecompose, QuantumState, C64, ZERO};
use crate::schedules::Schedule;

/// Overlap margin below which the continuation choice is flagged.
pub const TRACKING_AMBIGUITY: f64 = 1e-3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelitySeries {
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `|<n(λ(t))|ψ(t)>|²` for the tracked level.
    pub fidelity: Vec<f64>,
    /// `<ψ(t)|H(λ(t))|ψ(t)>`.
    pub energy: Vec<f64>,
    /// Set where the two best continuation candidates were within
    /// [`TRACKING_AMBIGUITY`] of each other.
    pub ambiguous: Vec<bool>,
}

impl FidelitySeries {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelity.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn any_ambiguous(&self) -> bool {
        self.ambiguous.iter().any(|&a| a)
    }
}

/// Fidelity with the instantaneous eigenstate that starts as level `level`
/// of `H(λ(t₀))` and is continued by maximal overlap from sample to sample.
/// Degenerate levels are treated as one cluster; the tracked vector is the
/// projection of the previous one onto the chosen cluster.
pub fn instantaneous_fidelity_series(
    record: &TrajectoryRecord,
    family: &HamiltonianFamily,
    schedule: &Schedule,
    level: usize,
) -> Result<FidelitySeries> {
    let mut out = FidelitySeries::default();
    let mut tracked: Option<DVector<C64>> = None;
    for (&t, psi) in record.times.iter().zip(&record.states) {
        let lambda = schedule.lambda(t);
        let h = family.at(lambda);
        let eig = eigendecompose(&h)?;
        let dim = eig.dim();
        if level >= dim {
            return Err(Error::IndexOutOfRange {
                what: "tracked level",
                index: level,
                len: dim,
            });
        }
        let tol = 1e-9 * eig.spectral_norm().max(1.0);
        let mut clusters: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for n in 1..=dim {
            if n == dim || eig.energies[n] - eig.energies[n - 1] > tol {
                clusters.push((start, n));
                start = n;
            }
        }

        let (next, ambiguous) = match &tracked {
            None => (eig.vectors.column(level).into_owned(), false),
            Some(prev) => {
                let mut weights: Vec<(f64, usize)> = clusters
                    .iter()
                    .enumerate()
                    .map(|(ci, &(a, b))| {
                        let w: f64 = (a..b)
                            .map(|n| eig.vectors.column(n).dotc(prev).norm_sqr())
                            .sum();
                        (w, ci)
                    })
                    .collect();
                weights.sort_by(|x, y| y.0.total_cmp(&x.0));
                let ambiguous =
                    weights.len() > 1 && weights[0].0 - weights[1].0 < TRACKING_AMBIGUITY;
                let (a, b) = clusters[weights[0].1];
                let mut v = DVector::<C64>::from_element(dim, ZERO);
                for n in a..b {
                    let col = eig.vectors.column(n);
                    v += col * col.dotc(prev);
                }
                let norm = v.norm();
                if norm > 0.0 {
                    v /= C64::new(norm, 0.0);
                }
                (v, ambiguous)
            }
        };
        let state = QuantumState::from_vector_unchecked(next.clone());
        out.times.push(t);
        out.lambda.push(lambda);
        out.fidelity.push(state.fidelity(psi));
        out.energy.push(h.expectation(psi).re);
        out.ambiguous.push(ambiguous);
        tracked = Some(next);
    }
    Ok(out)
}

/// One row of an exported trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub lambda: f64,
    pub fidelity_target: f64,
    pub fidelity_instantaneous: f64,
    pub energy: f64,
    pub norm_drift: f64,
}

/// Rows for the trajectory CSV: target and instantaneous ground-state
/// fidelities, bare energy and norm drift at each sample.
pub fn trajectory_rows(
    record: &TrajectoryRecord,
    family: &HamiltonianFamily,
    schedule: &Schedule,
    target: &QuantumState,
) -> Result<Vec<TrajectoryRow>> {
    let series = instantaneous_fidelity_series(record, family, schedule, 0)?;
    Ok(record
        .states
        .iter()
        .enumerate()
        .map(|(i, psi)| TrajectoryRow {
            t: series.times[i],
            lambda: series.lambda[i],
            fidelity_target: target.fidelity(psi),
            fidelity_instantaneous: series.fidelity[i],
            energy: series.energy[i],
            norm_drift: record.norm_drift[i],
        })
        .collect())
}

/// `n + 1` evenly spaced times on `[t0, t1]`.
pub fn sample_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|i| {
            if i == n {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / n as f64
            }
        })
        .collect()
}
