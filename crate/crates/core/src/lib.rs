//! Near-field multi-source localization.
//!
//! The crate simulates spherical-wave snapshots received by a uniform linear
//! or planar array and estimates the angle/range of every source with three
//! methods:
//!
//! * **NEMO-DE**: sequential differential-evolution searches over a
//!   residual least-squares cost, with projection deflation and a
//!   separation penalty between detected modes.
//! * **NEEF-DE**: one joint differential-evolution search over all sources,
//!   minimizing the eigen-subspace fitting residual of the sample covariance.
//! * **MUSIC**: exhaustive pseudospectrum evaluation on an angle/range
//!   (and elevation) grid, used as the baseline.
//!
//! The [`eval`] module drives Monte-Carlo sweeps of these estimators and
//! reports Cartesian RMSE after optimal estimate-to-truth matching.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod de;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod localize;
pub mod nfsn;
pub mod objectives;
pub mod rng;
pub mod subspace;

pub use num_complex::Complex64 as C64;

/// Dense complex matrix (column-major).
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

pub use channel::{ChannelModel, Correlation, Scenario, SnapshotMatrix, SourceSpec};
pub use de::{DeConfig, DeRunResult, DeSettings};
pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, ArrayKind, ArrayResponse, PhaseModel, SourceLocation};
pub use localize::{LocalizationResult, Method, SearchDomain};
pub use objectives::PenaltyConfig;
