//! Experiment configuration.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agp::AnalyticalBeta;
use crate::dynamics::{PropagatorConfig, DEFAULT_MIN_OSCILLATIONS};
use crate::error::{Error, Result};
use crate::models::{Boundary, IsingParams, ModelSpec};
use crate::operators::DEFAULT_MAX_SITES;
use crate::optimize::{Bounds, DualAnnealingConfig, DEFAULT_SEED};
use crate::schedules::{Schedule, ScheduleKind};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Bare anneal `H(λ(t))`.
    Unassisted,
    /// Bare anneal plus an optimized `Σ_k γ_k sin(2πkt/τ) Σ Z_i` term.
    OptimizedAnneal,
    /// Floquet drive with the closed-form two-qubit `β₁(λ(t))`.
    AnalyticalFloquet,
    /// Exact counterdiabatic drive.
    ExactCd,
    /// Floquet drive with an optimized piecewise-constant β table.
    Caffeine,
}

impl Arm {
    pub const ALL: [Arm; 5] = [
        Arm::Unassisted,
        Arm::OptimizedAnneal,
        Arm::AnalyticalFloquet,
        Arm::ExactCd,
        Arm::Caffeine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Unassisted => "unassisted",
            Arm::OptimizedAnneal => "optimized_anneal",
            Arm::AnalyticalFloquet => "analytical_floquet",
            Arm::ExactCd => "exact_cd",
            Arm::Caffeine => "caffeine",
        }
    }

    /// Accepts `snake_case` and `kebab-case` names.
    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown arm '{s}'")))
    }

    pub fn needs_two_qubit(self) -> bool {
        self == Arm::AnalyticalFloquet
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Floquet drive settings. β values are in units of ω₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    /// `N_k`.
    pub harmonics: usize,
    /// `N_τ`.
    pub segments: usize,
    pub beta_bounds: (f64, f64),
    /// `ω = omega_multiple · ω₀`.
    pub omega_multiple: f64,
    /// Defaults to `2π/τ`.
    pub omega0: Option<f64>,
    pub min_oscillations: f64,
    pub analytical_form: AnalyticalBeta,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            harmonics: 1,
            segments: 1,
            beta_bounds: (-3.0, 3.0),
            omega_multiple: 1000.0,
            omega0: None,
            min_oscillations: DEFAULT_MIN_OSCILLATIONS,
            analytical_form: AnalyticalBeta::Resummed,
        }
    }
}

impl DriveConfig {
    pub fn omega0(&self, tau: f64) -> f64 {
        self.omega0.unwrap_or(2.0 * PI / tau)
    }

    pub fn omega(&self, tau: f64) -> f64 {
        self.omega_multiple * self.omega0(tau)
    }
}

/// Optimized-anneal control term, γ in units of ω₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub harmonics: usize,
    pub gamma_bounds: (f64, f64),
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            harmonics: 1,
            gamma_bounds: (-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Trajectory samples per protocol (intervals, so `n + 1` rows).
    pub trajectory_samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            trajectory_samples: 200,
        }
    }
}

/// Grid of Ising annealing runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealGridConfig {
    pub sites: Vec<usize>,
    pub harmonics: Vec<usize>,
    pub segments: Vec<usize>,
    /// Start each optimization from the best table of a coarser cell with the
    /// same `N` (fewer harmonics, segment count dividing this one).
    pub warm_start: bool,
}

impl Default for AnnealGridConfig {
    fn default() -> Self {
        Self {
            sites: vec![2, 4],
            harmonics: vec![1],
            segments: vec![1],
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    /// Bounds for the learned β, in units of ω₀.
    pub bounds: (f64, f64),
    /// Smooth schedule: segments ending after `tail_start · τ` are flagged
    /// and left out of the agreement score.
    pub tail_start: f64,
    /// RMS agreement threshold, in units of ω₀.
    pub rms_threshold: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            bounds: (-1.0, 0.0),
            tail_start: 0.8,
            rms_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandscapeKind {
    /// Optimized-anneal γ vector.
    Gamma,
    /// CAFFEINE β table, flattened harmonic-major.
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    /// Index into the parameter vector.
    #[serde(default)]
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl AxisSpec {
    /// Parses `lo:hi:points` or `index:lo:hi:points`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || Error::Config(format!("axis '{s}' is not [index:]lo:hi:points"));
        let num = |p: &str| p.parse::<f64>().map_err(|_| bad());
        let int = |p: &str| p.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            [lo, hi, n] => Ok(Self {
                index: 0,
                lo: num(lo)?,
                hi: num(hi)?,
                points: int(n)?,
            }),
            [i, lo, hi, n] => Ok(Self {
                index: int(i)?,
                lo: num(lo)?,
                hi: num(hi)?,
                points: int(n)?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub kind: LandscapeKind,
    pub axes: Vec<AxisSpec>,
    pub max_points: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            kind: LandscapeKind::Gamma,
            axes: vec![AxisSpec {
                index: 0,
                lo: -1.0,
                hi: 1.0,
                points: 101,
            }],
            max_points: 100_000,
        }
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_arms() -> Vec<Arm> {
    Arm::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every optimizer seed is derived from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelSpec,
    pub schedule: Schedule,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    #[serde(default)]
    pub optimizer: DualAnnealingConfig,
    /// Propagator for final numbers and trajectories.
    #[serde(default)]
    pub propagator: PropagatorConfig,
    /// Propagator used inside optimizer cost evaluations; `propagator` when
    /// absent. Optimized parameters are always re-scored with `propagator`.
    #[serde(default)]
    pub search_propagator: Option<PropagatorConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub anneal: AnnealGridConfig,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub landscape: LandscapeConfig,
}

fn check_bounds(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Config(format!(
            "{name} must satisfy lo < hi, got ({lo}, {hi})"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Two-qubit state preparation with the default parameters.
    pub fn two_qubit_default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            model: ModelSpec::TwoQubit(Default::default()),
            schedule: Schedule {
                kind: ScheduleKind::Smooth,
                tau: 0.1,
            },
            drive: DriveConfig::default(),
            control: ControlConfig::default(),
            arms: default_arms(),
            optimizer: DualAnnealingConfig::default(),
            propagator: PropagatorConfig::default(),
            search_propagator: None,
            output: OutputConfig::default(),
            anneal: AnnealGridConfig::default(),
            learning: LearningConfig::default(),
            landscape: LandscapeConfig::default(),
        }
    }

    /// Ising annealing with uniform unit couplings and zero fields.
    pub fn ising_default() -> Self {
        Self {
            model: ModelSpec::Ising(IsingParams::uniform(2, 1.0)),
            arms: vec![Arm::Unassisted, Arm::Caffeine],
            ..Self::two_qubit_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if !(s.tau > 0.0 && s.tau.is_finite()) {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                s.tau
            )));
        }
        if let Some(a) = self.arms.iter().find(|a| a.needs_two_qubit()) {
            if self.model.two_qubit().is_none() {
                return Err(Error::Config(format!(
                    "arm '{a}' uses the closed-form gauge potential and needs the two-qubit model"
                )));
            }
        }
        if let ModelSpec::TwoQubit(p) = &self.model {
            p.validate()?;
        }
        if self.model.sites() > DEFAULT_MAX_SITES {
            return Err(Error::SizeLimit {
                sites: self.model.sites(),
                cap: DEFAULT_MAX_SITES,
            });
        }
        let d = &self.drive;
        if d.harmonics == 0 || d.segments == 0 {
            return Err(Error::Config(
                "drive needs at least one harmonic and one segment".into(),
            ));
        }
        check_bounds("drive.beta_bounds", d.beta_bounds)?;
        if !(d.omega_multiple > 0.0 && d.omega_multiple.is_finite()) {
            return Err(Error::Config(format!(
                "drive.omega_multiple must be positive, got {}",
                d.omega_multiple
            )));
        }
        if let Some(w0) = d.omega0 {
            if !(w0 > 0.0 && w0.is_finite()) {
                return Err(Error::Config(format!(
                    "drive.omega0 must be positive, got {w0}"
                )));
            }
        }
        let periods = d.omega(s.tau) * s.tau / (2.0 * PI);
        if periods < d.min_oscillations * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "the drive completes {periods:.1} periods per protocol, below the required {}",
                d.min_oscillations
            )));
        }
        if self.control.harmonics == 0 {
            return Err(Error::Config("control needs at least one harmonic".into()));
        }
        check_bounds("control.gamma_bounds", self.control.gamma_bounds)?;
        check_bounds("learning.bounds", self.learning.bounds)?;
        if !(self.learning.tail_start > 0.0 && self.learning.tail_start <= 1.0) {
            return Err(Error::Config(format!(
                "learning.tail_start must lie in (0, 1], got {}",
                self.learning.tail_start
            )));
        }
        if !(self.learning.rms_threshold > 0.0) {
            return Err(Error::Config(
                "learning.rms_threshold must be positive".into(),
            ));
        }
        self.propagator.validate()?;
        if let Some(p) = &self.search_propagator {
            p.validate()?;
        }
        // x0 is checked per run, against the actual parameter count
        DualAnnealingConfig {
            x0: None,
            ..self.optimizer.clone()
        }
        .validate(&Bounds::uniform(1, 0.0, 1.0)?)?;
        if self.anneal.sites.iter().any(|&n| n < 2) {
            return Err(Error::Config(
                "anneal.sites entries must be at least 2".into(),
            ));
        }
        if let Some(&n) = self.anneal.sites.iter().find(|&&n| n > DEFAULT_MAX_SITES) {
            return Err(Error::SizeLimit {
                sites: n,
                cap: DEFAULT_MAX_SITES,
            });
        }
        if self.anneal.harmonics.contains(&0) || self.anneal.segments.contains(&0) {
            return Err(Error::Config("anneal grid entries must be positive".into()));
        }
        Ok(())
    }

    pub fn search_propagator(&self) -> &PropagatorConfig {
        self.search_propagator.as_ref().unwrap_or(&self.propagator)
    }

    /// Ising parameters for a chain of `sites` spins, taken from the uniform
    /// couplings and fields of the configured Ising model.
    pub fn ising_for(&self, sites: usize) -> Result<IsingParams> {
        let ModelSpec::Ising(p) = &self.model else {
            return Err(Error::Config(
                "the anneal experiment needs an Ising model".into(),
            ));
        };
        if p.sites == sites {
            return Ok(p.clone());
        }
        let uniform = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        let transverse_uniform = p.transverse.as_deref().is_none_or(uniform);
        if !uniform(&p.couplings) || !uniform(&p.fields) || !transverse_uniform {
            return Err(Error::Config(
                "resizing an Ising chain needs uniform couplings, fields and transverse strengths"
                    .into(),
            ));
        }
        let j = p.couplings.first().copied().unwrap_or(1.0);
        let h = p.fields.first().copied().unwrap_or(0.0);
        let mut q = IsingParams::uniform(sites, j);
        q.fields = vec![h; sites];
        if let Some(g) = p.transverse.as_ref().and_then(|g| g.first()) {
            q = q.with_transverse(vec![*g; sites]);
        }
        if p.boundary == Boundary::Periodic {
            q = q.with_boundary(Boundary::Periodic);
        }
        Ok(q)
    }
}

/// Seed for job `index` of a run with master seed `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
