//! Cross-holdings financial network analysis.
//!
//! Institutions own fractions of one another (cross-holdings `C`) and of
//! primitive assets (`D` at prices `p`). Equity values solve the linear
//! system `V = Dp + CV`; market values are the externally held slice
//! `v = Ĉ V`, where `Ĉ` is the diagonal of self-holdings. On top of the
//! linear model sits a discontinuous failure rule: an institution whose
//! market value drops below its threshold incurs a failure cost, which can
//! cascade through the holdings graph.
//!
//! The crate is organized by concern:
//!
//! - [`net`] — data types, validation, and the JSON interchange format.
//! - [`valuation`] — failure-free valuation via closed form, Neumann
//!   series, and the column-stochastic flow process, cross-checkable
//!   against each other.
//! - [`cascade`] — failure equilibria: consistency checking, best-case and
//!   worst-case fixed points, and exhaustive enumeration at desk scale.
//! - [`sensitivity`] — perturbation bounds for cross-holding changes and
//!   the four-bank construction showing the bounds are tight.
//! - [`shock`] — adversarial price-drop search, balanced-biclique solving,
//!   and the biclique-to-network reduction generator.
//! - [`random`] — seeded generators for networks, graphs, and
//!   perturbation pairs.
//! - [`fixtures`] — small canonical networks used across tests and docs.

pub mod cascade;
pub mod error;
pub mod fixtures;
pub mod net;
pub mod random;
pub mod sensitivity;
pub mod shock;
pub mod valuation;

pub use error::{Error, Result};
pub use net::{FinancialNetwork, Shock, SparseMatrix, ValuationResult, Violation};
pub use valuation::SolverConfig;
