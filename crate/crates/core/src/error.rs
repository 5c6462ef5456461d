use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension overflow: {n_sites} sites exceeds the cap of {max_sites}")]
    DimensionOverflow { n_sites: usize, max_sites: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate spectrum: cannot normalize a spectrum of width {0:e}")]
    DegenerateSpectrum(f64),

    #[error("eigensolver failure")]
    EigensolverFailure,

    #[error("negative inverse temperature: beta = {0}")]
    NegativeBeta(f64),

    #[error("p undefined: the coupling J must be nonzero")]
    PUndefined,

    #[error("invalid site {site} for a chain of {n_sites} sites")]
    InvalidSite { site: usize, n_sites: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("integrator divergence (reduce step_dt): trace error {trace_error:e} at t = {t}")]
    Divergence { t: f64, trace_error: f64 },

    #[error("positivity violated: minimum eigenvalue {min_eigenvalue:e} at t = {t}")]
    Positivity { t: f64, min_eigenvalue: f64 },

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("{0} rate is zero: use the noiseless closed form")]
    UseNoiseless(&'static str),
}
