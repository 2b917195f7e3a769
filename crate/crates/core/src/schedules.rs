//! Protocol schedules `λ(t)` and piecewise-constant drive tables `β_k(t)`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `sin²((π/2)·sin²(πt/2τ))`, with vanishing slope at both ends.
    Smooth,
    /// `t/τ`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub tau: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { kind, tau })
    }

    pub fn smooth(tau: f64) -> Result<Self> {
        Self::new(ScheduleKind::Smooth, tau)
    }

    pub fn linear(tau: f64) -> Result<Self> {
        Self::new(ScheduleKind::Linear, tau)
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(0.0..=self.tau).contains(&t) {
            return Err(Error::OutOfDomain {
                name: "t",
                value: t,
                lo: 0.0,
                hi: self.tau,
            });
        }
        Ok(())
    }

    /// `λ(t)` without a domain check.
    #[inline]
    pub fn lambda(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Smooth => {
                let s = (FRAC_PI_2 * t / self.tau).sin().powi(2);
                (FRAC_PI_2 * s).sin().powi(2)
            }
            ScheduleKind::Linear => t / self.tau,
        }
    }

    /// `dλ/dt` without a domain check.
    #[inline]
    pub fn lambda_dot(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Smooth => {
                let v = FRAC_PI_2 * t / self.tau;
                let u = FRAC_PI_2 * v.sin().powi(2);
                (2.0 * u).sin() * FRAC_PI_2 * (2.0 * v).sin() * FRAC_PI_2 / self.tau
            }
            ScheduleKind::Linear => 1.0 / self.tau,
        }
    }
}

pub fn lambda_at(s: &Schedule, t: f64) -> Result<f64> {
    s.check(t)?;
    Ok(s.lambda(t))
}

pub fn lambda_dot_at(s: &Schedule, t: f64) -> Result<f64> {
    s.check(t)?;
    Ok(s.lambda_dot(t))
}

/// `N_k × N_τ` table of drive coefficients, in units of ω₀.
///
/// Segment `j` (1-based) covers `[(j-1)τ/N_τ, jτ/N_τ)`; `t = τ` belongs to
/// the last segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseBeta {
    /// `values[k-1][j-1] = β_k^(j)`.
    values: Vec<Vec<f64>>,
    tau: f64,
    bounds: Option<(f64, f64)>,
}

impl PiecewiseBeta {
    pub fn new(values: Vec<Vec<f64>>, tau: f64, bounds: Option<(f64, f64)>) -> Result<Self> {
        if values.is_empty() || values[0].is_empty() {
            return Err(Error::Config("beta table must be non-empty".into()));
        }
        let nt = values[0].len();
        if values.iter().any(|row| row.len() != nt) {
            return Err(Error::Config("beta table rows differ in length".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        if let Some((lo, hi)) = bounds {
            if !(lo < hi) {
                return Err(Error::Config(format!("invalid bounds ({lo}, {hi})")));
            }
            for &v in values.iter().flatten() {
                if !(lo..=hi).contains(&v) {
                    return Err(Error::OutOfDomain {
                        name: "beta",
                        value: v,
                        lo,
                        hi,
                    });
                }
            }
        }
        Ok(Self {
            values,
            tau,
            bounds,
        })
    }

    pub fn zeros(harmonics: usize, segments: usize, tau: f64) -> Result<Self> {
        Self::new(vec![vec![0.0; segments]; harmonics.max(1)], tau, None)
    }

    /// Builds the table from a flat harmonic-major vector
    /// `[β_1^(1..N_τ), β_2^(1..N_τ), ...]`.
    pub fn from_flat(
        flat: &[f64],
        harmonics: usize,
        tau: f64,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        if harmonics == 0 || !flat.len().is_multiple_of(harmonics) {
            return Err(Error::Config(format!(
                "{} parameters cannot form {} harmonics",
                flat.len(),
                harmonics
            )));
        }
        let nt = flat.len() / harmonics;
        Self::new(flat.chunks(nt).map(<[f64]>::to_vec).collect(), tau, bounds)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn harmonics(&self) -> usize {
        self.values.len()
    }

    pub fn segments(&self) -> usize {
        self.values[0].len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `β_k^(j)` with 1-based `k` and `j`.
    pub fn entry(&self, k: usize, j: usize) -> Result<f64> {
        let row =
            k.checked_sub(1)
                .and_then(|i| self.values.get(i))
                .ok_or(Error::IndexOutOfRange {
                    what: "harmonic",
                    index: k,
                    len: self.harmonics(),
                })?;
        j.checked_sub(1)
            .and_then(|i| row.get(i))
            .copied()
            .ok_or(Error::IndexOutOfRange {
                what: "segment",
                index: j,
                len: self.segments(),
            })
    }

    /// Sets `β_k^(j)` (1-based).
    pub fn set(&mut self, k: usize, j: usize, value: f64) -> Result<()> {
        self.entry(k, j)?;
        if let Some((lo, hi)) = self.bounds {
            if !(lo..=hi).contains(&value) {
                return Err(Error::OutOfDomain {
                    name: "beta",
                    value,
                    lo,
                    hi,
                });
            }
        }
        self.values[k - 1][j - 1] = value;
        Ok(())
    }

    /// 1-based segment holding time `t`.
    #[inline]
    pub fn segment_of(&self, t: f64) -> usize {
        let nt = self.segments();
        let j = (t * nt as f64 / self.tau).floor();
        if j < 0.0 {
            1
        } else {
            (j as usize + 1).min(nt)
        }
    }

    /// `[start, end]` of 1-based segment `j`.
    pub fn segment_window(&self, j: usize) -> (f64, f64) {
        let dt = self.tau / self.segments() as f64;
        ((j - 1) as f64 * dt, j as f64 * dt)
    }

    /// `β_k` at time `t`, without domain checks (0-based harmonic index).
    #[inline]
    pub fn value(&self, k0: usize, t: f64) -> f64 {
        self.values[k0][self.segment_of(t) - 1]
    }
}

/// `β_k(t)`, with `1 ≤ k ≤ N_k` and `0 ≤ t ≤ τ`.
pub fn beta_at(b: &PiecewiseBeta, k: usize, t: f64) -> Result<f64> {
    if !(0.0..=b.tau).contains(&t) {
        return Err(Error::OutOfDomain {
            name: "t",
            value: t,
            lo: 0.0,
            hi: b.tau,
        });
    }
    b.entry(k, b.segment_of(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn smooth_boundary_values() {
        let s = Schedule::smooth(0.1).unwrap();
        assert_eq!(lambda_at(&s, 0.0).unwrap(), 0.0);
        assert_relative_eq!(lambda_at(&s, 0.1).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(lambda_at(&s, 0.05).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(lambda_dot_at(&s, 0.0).unwrap(), 0.0);
        assert!(lambda_dot_at(&s, 0.1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn linear_values() {
        let s = Schedule::linear(2.0).unwrap();
        assert_relative_eq!(lambda_at(&s, 0.6).unwrap(), 0.3, epsilon = 1e-15);
        for t in [0.0, 0.3, 1.7, 2.0] {
            assert_eq!(lambda_dot_at(&s, t).unwrap(), 0.5);
        }
    }

    #[test]
    fn domain_checked() {
        let s = Schedule::smooth(1.0).unwrap();
        assert!(lambda_at(&s, -0.01).is_err());
        assert!(lambda_dot_at(&s, 1.01).is_err());
        assert!(Schedule::smooth(0.0).is_err());
    }

    #[test]
    fn smooth_derivative_matches_central_difference() {
        let tau = 0.1;
        let s = Schedule::smooth(tau).unwrap();
        let t = 0.37 * tau;
        let h = 1e-6 * tau;
        let fd = (s.lambda(t + h) - s.lambda(t - h)) / (2.0 * h);
        assert_relative_eq!(s.lambda_dot(t), fd, max_relative = 1e-6);
    }

    #[test]
    fn derivative_integrates_to_one() {
        // composite Simpson, 2000 panels
        for s in [
            Schedule::smooth(0.1).unwrap(),
            Schedule::linear(0.1).unwrap(),
        ] {
            let n = 2000;
            let h = s.tau / n as f64;
            let mut acc = s.lambda_dot(0.0) + s.lambda_dot(s.tau);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * s.lambda_dot(i as f64 * h);
            }
            assert_relative_eq!(acc * h / 3.0, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn beta_segments() {
        let b = PiecewiseBeta::new(vec![vec![1.5]], 1.0, None).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(beta_at(&b, 1, t).unwrap(), 1.5);
        }
        let b = PiecewiseBeta::new(vec![vec![1.0, 2.0]], 1.0, None).unwrap();
        assert_eq!(beta_at(&b, 1, 0.5 - 1e-12).unwrap(), 1.0);
        assert_eq!(beta_at(&b, 1, 0.5).unwrap(), 2.0);
        assert_eq!(beta_at(&b, 1, 1.0).unwrap(), 2.0);
        let vals: Vec<f64> = (1..=12).map(f64::from).collect();
        let b = PiecewiseBeta::new(vec![vals], 1.0, None).unwrap();
        assert_eq!(beta_at(&b, 1, 0.99).unwrap(), 12.0);
        assert!(beta_at(&b, 2, 0.5).is_err());
        assert!(beta_at(&b, 0, 0.5).is_err());
        assert!(beta_at(&b, 1, 1.5).is_err());
    }

    #[test]
    fn bounds_enforced() {
        assert!(PiecewiseBeta::new(vec![vec![1.5]], 1.0, Some((0.0, 1.0))).is_err());
        let mut b = PiecewiseBeta::new(vec![vec![0.5]], 1.0, Some((0.0, 1.0))).unwrap();
        assert!(b.set(1, 1, 2.0).is_err());
        b.set(1, 1, 0.25).unwrap();
        assert_eq!(b.entry(1, 1).unwrap(), 0.25);
    }

    #[test]
    fn flat_layout_is_harmonic_major() {
        let b = PiecewiseBeta::from_flat(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 1.0, None).unwrap();
        assert_eq!(b.segments(), 3);
        assert_eq!(b.entry(2, 1).unwrap(), 4.0);
        assert_eq!(b.to_flat(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    proptest! {
        #[test]
        fn smooth_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let s = Schedule::smooth(0.1).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(s.lambda(hi * 0.1) >= s.lambda(lo * 0.1));
        }

        #[test]
        fn beta_constant_within_segment(nt in 1usize..40, frac in 0.0f64..1.0, seg in 0usize..40) {
            let seg = seg % nt;
            let vals: Vec<f64> = (0..nt).map(|j| (j as f64).sin()).collect();
            let b = PiecewiseBeta::new(vec![vals.clone()], 0.1, None).unwrap();
            let (t0, t1) = b.segment_window(seg + 1);
            let t = t0 + frac * (t1 - t0) * 0.999;
            prop_assert_eq!(beta_at(&b, 1, t).unwrap().to_bits(), vals[seg].to_bits());
        }
    }
}
