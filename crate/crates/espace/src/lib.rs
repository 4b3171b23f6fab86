//! Credits-Loans transaction fields on a two-dimensional risk domain.
//!
//! Economic agents are mapped to risk coordinates; pairwise transactions
//! between agents at risk `x` and risk `y` aggregate into macro fields on the
//! square `[0, X]²`. This crate implements the coupled two-field model of
//! Credits-Loans and Payment-on-Credits rates end to end:
//!
//! - [`params`] — model constants, sign conventions, linear acceleration
//!   potentials, closed-form steady-state distributions;
//! - [`aggregate`] — micro-to-macro aggregation of sampled agent and
//!   transaction data into binned field grids;
//! - [`wave`] — the characteristic quartic of surface-like wave profiles,
//!   root classification, dispersion solving, analytic mode construction,
//!   border integrals, and interior growth profiles;
//! - [`solver`] — explicit time integration of the linearized coupled
//!   potential system on the risk square with a surface boundary condition;
//! - [`scenario`] — config-driven orchestration with deterministic CSV
//!   output, used by the `espace` binary.

pub mod aggregate;
pub mod output;
pub mod params;
pub mod scenario;
pub mod solver;
pub mod wave;

pub use params::{LinearPotential, ModelParams};
pub use wave::{QuarticCoeffs, RootSet, WaveMode};
