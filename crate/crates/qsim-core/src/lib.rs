//! Numerical model of a silicon-photonic two-qutrit entanglement chip.
//!
//! The crate is organized bottom-up: [`qcore`] provides complex linear algebra
//! and state functionals, [`ring`] models the dual-MZI micro-ring pair source,
//! [`circuit`] the programmable interferometer mesh, [`experiment`] the
//! coincidence engine with noise and fringes, [`tomography`] the 81-setting
//! state reconstruction, and [`analysis`] the Bell/contextuality/metrology
//! evaluations. [`exec`] selects a parallel or sequential execution strategy
//! and [`io`] holds the CSV/JSON export formats.

#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod circuit;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod qcore;
pub mod ring;
pub mod tomography;

/// Errors produced by simulator operations with violated preconditions.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not unitary (defect {defect:.3e} > tol {tol:.3e})")]
    NotUnitary { defect: f64, tol: f64 },
    #[error("chain-matrix conversion is singular: {0}")]
    SingularConversion(String),
    #[error("state is not normalizable: {0}")]
    NotNormalizable(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("wavelength {0} nm is not at a transmission resonance")]
    NotAResonance(f64),
    #[error("coincidence efficiency undefined for all-zero counts")]
    UndefinedEfficiency,
    #[error("conditional probability undefined: heralding marginal is zero")]
    UndefinedConditional,
    #[error("correlation coefficient undefined for zero total counts")]
    ZeroCounts,
    #[error("tomography design matrix is singular (corrupted schedule)")]
    SingularDesign,
    #[error("graph error: {0}")]
    Graph(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("json failure: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
