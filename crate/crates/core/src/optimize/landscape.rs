//! Exhaustive cost evaluation on a rectangular grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub params: Vec<f64>,
    /// `+∞` when the evaluation failed.
    pub cost: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub axes: Vec<Vec<f64>>,
    /// Row-major: the last axis varies fastest.
    pub rows: Vec<LandscapeRow>,
    /// Index of the lowest finite cost.
    pub min_index: Option<usize>,
}

impl Landscape {
    pub fn min_row(&self) -> Option<&LandscapeRow> {
        self.min_index.map(|i| &self.rows[i])
    }

    /// Indices of interior rows whose cost is below both neighbours (1D scans).
    pub fn local_minima(&self) -> Vec<usize> {
        let c: Vec<f64> = self.rows.iter().map(|r| r.cost).collect();
        (1..c.len().saturating_sub(1))
            .filter(|&i| c[i] < c[i - 1] && c[i] <= c[i + 1])
            .collect()
    }

    /// Sign changes of the discrete derivative along a 1D scan.
    pub fn gradient_sign_changes(&self) -> usize {
        let d: Vec<f64> = self
            .rows
            .windows(2)
            .map(|w| w[1].cost - w[0].cost)
            .filter(|v| *v != 0.0)
            .collect();
        d.windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count()
    }
}

/// `n` evenly spaced samples on `[lo, hi]` (both ends included).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Evaluates `cost` at every grid point. Points run in parallel; the table
/// order is deterministic.
pub fn landscape_scan<F>(cost: F, grid: &[Vec<f64>], max_points: usize) -> Result<Landscape>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if grid.is_empty() || grid.iter().any(|a| a.is_empty()) {
        return Err(Error::Config(
            "every scan axis needs at least one sample".into(),
        ));
    }
    let total = grid
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|&n| n <= max_points)
        .ok_or_else(|| Error::Config(format!("grid exceeds the budget of {max_points} points")))?;

    let point = |mut idx: usize| -> Vec<f64> {
        let mut p = vec![0.0; grid.len()];
        for (d, axis) in grid.iter().enumerate().rev() {
            p[d] = axis[idx % axis.len()];
            idx /= axis.len();
        }
        p
    };
    let rows: Vec<LandscapeRow> = (0..total)
        .into_par_iter()
        .map(|i| {
            let params = point(i);
            match cost(&params) {
                Ok(c) if c.is_finite() => LandscapeRow {
                    params,
                    cost: c,
                    error: None,
                },
                Ok(c) => LandscapeRow {
                    params,
                    cost: f64::INFINITY,
                    error: Some(format!("non-finite cost {c}")),
                },
                Err(e) => LandscapeRow {
                    params,
                    cost: f64::INFINITY,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let min_index = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.cost.is_finite())
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, _)| i);
    Ok(Landscape {
        axes: grid.to_vec(),
        rows,
        min_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_order_and_minimum() {
        let grid = vec![vec![0.0, 1.0], vec![10.0, 20.0, 30.0]];
        let l = landscape_scan(|p| Ok(p[0] + p[1]), &grid, 100).unwrap();
        let params: Vec<Vec<f64>> = l.rows.iter().map(|r| r.params.clone()).collect();
        assert_eq!(params[1], vec![0.0, 20.0]);
        assert_eq!(params[3], vec![1.0, 10.0]);
        assert_eq!(l.min_row().unwrap().params, vec![0.0, 10.0]);
    }

    #[test]
    fn constant_cost_is_flat() {
        let l = landscape_scan(|_| Ok(0.5), &[linspace(-1.0, 1.0, 11)], 100).unwrap();
        assert!(l.rows.iter().all(|r| r.cost == 0.5));
        assert_eq!(l.gradient_sign_changes(), 0);
    }

    #[test]
    fn failures_are_recorded_per_row() {
        let l = landscape_scan(
            |p| {
                if p[0] > 0.0 {
                    Err(Error::Optimization("boom".into()))
                } else {
                    Ok(-p[0])
                }
            },
            &[vec![-1.0, 0.0, 1.0]],
            10,
        )
        .unwrap();
        assert!(l.rows[2].error.is_some());
        assert_eq!(l.min_index, Some(1));
    }

    #[test]
    fn budget_enforced() {
        assert!(landscape_scan(|_| Ok(0.0), &[linspace(0.0, 1.0, 11)], 10).is_err());
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(-3.0, 3.0, 7);
        assert_eq!(v, vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }
}
