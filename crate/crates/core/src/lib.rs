//! Discrete spectrum above the band of the lattice operator `H0 + μV` on ℤ²,
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! where `V` acts by `a` at the origin and `b` on the four nearest neighbours.
//!
//! The crate splits into dispersion models, torus quadrature, threshold
//! constants, Fredholm determinants, spectrum assembly, a finite-box lattice
//! oracle, and near-threshold asymptotics.

pub mod asymptotics;
pub mod context;
pub mod determinant;
pub mod dispersion;
pub mod error;
pub mod fit;
pub mod lanczos;
pub mod lattice;
pub mod roots;
pub mod sector;
pub mod spectrum;
pub mod thresholds;
pub mod torus_quad;

pub use context::{ModelContext, TORUS_AREA};
pub use determinant::{EigenvalueRecord, RootOptions};
pub use dispersion::{DispersionKind, DispersionModel, HoppingTable, ModelSpec, MorseData, PI_VEC};
pub use error::{Error, Result};
pub use sector::Sector;
pub use thresholds::{CouplingThresholds, EsConstants, SectorConstants, Threshold};
