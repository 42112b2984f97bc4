use thiserror::Error;

/// Errors produced by the mesh, schemes and runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell level {0} is already at the finest level")]
    LevelOverflow(u8),

    #[error("tree is not graded near {0}: neighbor levels differ by more than one")]
    Ungraded(String),

    #[error("prediction stencil incomplete at {0}")]
    MissingStencil(String),

    #[error("inadmissible gas state: rho = {rho}, p = {p}")]
    InadmissibleState { rho: f64, p: f64 },

    #[error("degenerate CFL state: zero wave speed and zero diffusion, and no dt override given")]
    CflDegenerate,

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid value for {key}: {msg}")]
    Constraint { key: String, msg: String },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("unknown scheme '{0}'")]
    UnknownScheme(String),

    #[error("zero denominator in self-convergence ratio (finer runs are identical)")]
    ZeroDenominator,

    #[error("flux partner requested across a non-periodic domain boundary at {0}")]
    BoundaryFace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
