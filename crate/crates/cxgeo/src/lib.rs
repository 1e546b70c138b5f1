//! Numerical geometry of holomorphic Riemannian space forms and complex
//! metrics on surfaces.
//!
//! The crate is organized around one pipeline: complex metrics and shape
//! operators on a 2D chart ([`cmetric`], [`immersion`]) are checked
//! against the Gauss-Codazzi equations, packaged into a flat
//! skew-matrix-valued connection form, and integrated to develop
//! immersions into the quadric model spaces of [`spaceforms`], from which
//! monodromy representatives and traces are extracted. [`families`] runs
//! the pipeline over holomorphic one-parameter families and tests the
//! traces for holomorphy. [`calg`] supplies the complex-bilinear linear
//! algebra underneath.

pub mod calg;
pub mod cmetric;
pub mod families;
pub mod immersion;
pub mod spaceforms;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate frame: isotropic intermediate vector at index {index}")]
    DegenerateFrame { index: usize },

    #[error("input is not traceless (|tr| = {trace_norm:.3e})")]
    NotTraceless { trace_norm: f64 },

    #[error("vector is not tangent at the base point (defect {defect:.3e})")]
    NotTangent { defect: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular point: {0}")]
    Singular(String),

    #[error("metric degenerate at ({x:.6}, {y:.6}): {detail}")]
    DegenerateMetric { x: f64, y: f64, detail: String },

    #[error("degenerate frame at grid point ({x:.6}, {y:.6})")]
    FrameAt { x: f64, y: f64 },

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("metric is not positive: {0}")]
    Classification(String),

    #[error("gate '{name}' failed: {value:.6e} > {threshold:.6e}")]
    Gate {
        name: String,
        value: f64,
        threshold: f64,
    },

    #[error("integration failed at arc position {position:.6}: {message}")]
    Integration { position: f64, message: String },

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("boundary point has no centered stencil ({x:.6}, {y:.6})")]
    BoundaryStencil { x: f64, y: f64 },

    #[error("bad data: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
