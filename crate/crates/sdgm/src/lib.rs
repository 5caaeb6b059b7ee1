//! Spectral dependence analysis for multivariate spatial point patterns.
//!
//! The pipeline estimates per-frequency spectral matrices from the discrete
//! Fourier transform of each component pattern, smooths them, inverts them,
//! and thresholds the supremum of the rescaled inverse (partial coherence)
//! to obtain an undirected conditional-dependence graph. A cluster-process
//! simulator is included for validation.

pub mod error;
pub mod graph;
pub mod partial;
pub mod pattern;
pub mod pipeline;
pub mod sim;
pub mod spectra;

pub use error::{Error, Result};
pub use graph::{build_sdgm, DependenceGraph, Edge};
pub use partial::{
    invert_spectra, partial_cross_spectrum_direct, recursive_partial, rescaled_inverse,
    sup_rescaled_inverse, InverseSpectralField, PartialCoherenceField, DEFAULT_RIDGE_EPSILON,
};
pub use pattern::{
    load_pattern, CsvSchema, Event, LoadReport, MultiTypePointPattern, ObservationWindow,
};
pub use pipeline::{analyze, AnalysisConfig, AnalysisReport};
pub use sim::{parse_sim_spec, simulate, Component, SimSpec, TypeSpec};
pub use spectra::{
    spectral_matrix, ComplexField, CrossSpectrumDecomposition, FrequencyGrid, RealField,
    SmoothingSpec, SpectralMatrixField,
};
