use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {index} at ({x}, {y}) lies outside the unit box")]
    PointOutsideDomain { index: usize, x: f64, y: f64 },

    #[error("non-finite coordinate for point {index}")]
    NonFinitePoint { index: usize },

    #[error("tolerance {0:e} outside the supported range [1e-14, 1e-4]")]
    ToleranceOutOfRange(f64),

    #[error("direct summation of {points} points x {modes} modes exceeds the 1e8 guard")]
    DirectSizeGuard { points: usize, modes: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid mode grid: {0}")]
    InvalidGrid(String),

    #[error("invalid shape function: {0}")]
    InvalidShape(String),

    #[error("truncation radius {radius} is below the minimum {minimum} for shape radius {shape_radius}")]
    TruncationTooSmall {
        radius: f64,
        minimum: f64,
        shape_radius: f64,
    },

    #[error("precomputation requires an extension factor of 4, got {0}")]
    PrecomputeNeedsAlpha4(usize),

    #[error("solver configuration: {0}")]
    InvalidConfig(String),

    #[error("imaginary residue {residue:e} relative to field magnitude exceeds {limit:e}")]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("target {index} at radius {radius} is outside the safe disk of radius {limit}")]
    NearBoundary {
        index: usize,
        radius: f64,
        limit: f64,
    },

    #[error("particle {index} escaped at step {step}")]
    ParticleEscaped { index: usize, step: usize },

    #[error("particle {index} leaves the collocated grid stencil")]
    StencilOutOfGrid { index: usize },

    #[error("kernel cache: {0}")]
    KernelCache(String),

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable tag used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::PointOutsideDomain { .. } => "point_outside_domain",
            Error::NonFinitePoint { .. } => "non_finite_point",
            Error::ToleranceOutOfRange(_) => "tolerance_out_of_range",
            Error::DirectSizeGuard { .. } => "direct_size_guard",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidShape(_) => "invalid_shape",
            Error::TruncationTooSmall { .. } => "truncation_too_small",
            Error::PrecomputeNeedsAlpha4(_) => "precompute_needs_alpha4",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ImaginaryResidue { .. } => "imaginary_residue",
            Error::NearBoundary { .. } => "near_boundary",
            Error::ParticleEscaped { .. } => "particle_escaped",
            Error::StencilOutOfGrid { .. } => "stencil_out_of_grid",
            Error::KernelCache(_) => "kernel_cache",
            Error::AtStep { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Error {
        match self {
            e @ (Error::AtStep { .. } | Error::ParticleEscaped { .. }) => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}
