use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("degenerate triangle {triangle} (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("boundary condition error: {0}")]
    BoundaryCondition(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver did not reach the residual target: achieved {achieved:e}, wanted {target:e}")]
    Residual { achieved: f64, target: f64 },

    #[error("point ({x}, {y}) lies outside the mesh (distance {distance:e})")]
    PointOutside { x: f64, y: f64, distance: f64 },

    #[error("empty integration domain: {0}")]
    EmptyDomain(String),

    #[error("schwarz iteration failed: {0}")]
    Schwarz(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
