use thiserror::Error;

/// Errors raised by the simulation and optimization engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("system of {sites} sites exceeds the configured cap of {cap}")]
    SizeLimit { sites: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("{name} = {value} lies outside [{lo}, {hi}]")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("degenerate levels {m} and {n} (gap {gap:.3e}) are coupled by dH (|<m|dH|n>| = {coupling:.3e}); the gauge potential diverges")]
    DegenerateCoupling {
        m: usize,
        n: usize,
        gap: f64,
        coupling: f64,
    },

    #[error("no beta/alpha calibration for harmonic k = {0}")]
    UncalibratedHarmonic(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("propagation exceeded the step budget of {max_steps} at t = {t}")]
    StepBudget { max_steps: usize, t: f64 },

    #[error("norm drift {drift:.3e} at t = {t} exceeds the abort threshold")]
    NormDrift { drift: f64, t: f64, steps: usize },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("ground state is degenerate (gap {gap:.3e})")]
    DegenerateGroundState { gap: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("segment {segment} failed: {source}")]
    Segment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
