//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the laboratory. Divergent integrals are errors rather
/// than infinities so that Lyapunov checks fail loudly.
#[derive(Debug, Error)]
pub enum Error {
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("invalid integration region: {0}")]
    InvalidRegion(String),

    #[error("empty jump tail: {0}")]
    EmptyTail(String),

    #[error("suspected explosion: |x| = {radius:.3e} at t = {time:.6}")]
    ExplosionSuspected { time: f64, radius: f64 },

    #[error("unstable step: dt = {dt} exceeds 1/(2L) for Lipschitz bound L = {lipschitz}")]
    UnstableStep { dt: f64, lipschitz: f64 },

    #[error("operation requires additive noise: {0}")]
    NotAdditiveNoise(String),

    #[error("non-positive input: {0}")]
    NonPositiveInput(String),

    #[error("no finite limit: {0}")]
    NoFiniteLimit(String),

    #[error("not dissipative enough: {0}")]
    NotDissipativeEnough(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("inconclusive limit: {0}")]
    InconclusiveLimit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
