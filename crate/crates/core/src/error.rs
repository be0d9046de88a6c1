use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("inadmissible configuration: clearance {margin:.6e} at phi = {phi:.6}")]
    Inadmissible { margin: f64, phi: f64 },

    #[error("mesh generation failed: {0}")]
    Mesh(String),

    #[error("degenerate triangle {index} (signed area {area:.3e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error(
        "linear solver stalled after {iterations} iterations \
         (relative residual {residual:.3e})"
    )]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        /// Relative residual per iteration, for post-mortems.
        history: Vec<f64>,
    },

    #[error("circles touch or intersect (r0 + d >= r1): energy is unbounded")]
    OracleDomain,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
