use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Gamma function pole at z = {z}")]
    GammaPole { z: Complex64 },

    #[error("sample count {got} does not match grid size {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scattering denominator vanishes at P = {p}")]
    DegenerateDenominator { p: f64 },

    #[error("smooth-barrier matching is singular (|A|^2 - |B|^2 = 0) at P = {p}")]
    SingularMatching { p: f64 },

    #[error(
        "pole on the real momentum axis at P = {p}: the causal (divergent) expansion of a \
         rectangular barrier becomes infinite at E = V/2; supply a pole shift delta > 0"
    )]
    PoleOnAxis { p: f64 },

    #[error("momentum grid spacing {spacing} exceeds dP/20 = {limit}")]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error("incident packets overlap at launch: separation {separation} < {required}")]
    SeparationViolated { separation: f64, required: f64 },

    #[error("region charge {charge:e} is below 1e-12")]
    EmptyRegion { charge: f64 },

    #[error("transmitted packet not clear of the barrier: {fraction:.3e} of its charge at X <= 1")]
    NotClear { fraction: f64 },

    #[error("crossing event not found: {0}")]
    EventNotFound(String),

    #[error("grid does not resolve the field: {0}")]
    Resolution(String),

    #[error("numerical instability at T = {time}: growth {growth:e} exceeds the allowed envelope")]
    Instability { time: f64, growth: f64 },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Failures caused by the numerics rather than by the inputs or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::GammaPole { .. }
                | Error::DegenerateDenominator { .. }
                | Error::SingularMatching { .. }
                | Error::PoleOnAxis { .. }
                | Error::Instability { .. }
                | Error::EmptyRegion { .. }
                | Error::NotClear { .. }
                | Error::EventNotFound(_)
        )
    }
}
