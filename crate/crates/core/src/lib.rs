//! Chern–Weil forms, Chern–Simons transgressions and `ℂ/ℤ`-valued
//! differential characters for connections on trivial bundles over
//! discretized flat tori, with the tertiary invariants of paths of flat
//! connections and executable rigidity checks.

pub mod algebra;
pub mod characters;
pub mod chern_weil;
pub mod connection;
pub mod error;
pub mod expr;
pub mod forms;
pub mod matrix;
pub mod quadrature;
pub mod report;
pub mod rigidity;
pub mod scenario;
pub mod suite;
pub mod torus;

pub use error::{Error, Result};
pub use forms::{MatrixForm, SupportMask};
pub use torus::{Cycle, CycleComponent, GridProduct, GridTorus};
