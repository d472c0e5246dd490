//! Numerical laboratory for power-reinforced urn models.
//!
//! An urn holds `n` colours of balls. At each step a random subset of colours
//! is drawn from a fixed law, then one colour in the subset is reinforced with
//! probability proportional to its ball count raised to a power `alpha > 1`.
//! This crate provides:
//!
//! - [`model`] — model definitions, graph-based builders, symmetry checks,
//!   JSON (de)serialization;
//! - [`dynamics`] — the mean-field drift, its Jacobian, a Lyapunov function
//!   and a simplex-preserving integrator;
//! - [`equilibria`] — exhaustive equilibrium search with eigenvalue
//!   classification, plus closed-form solvers for star, triangle and whisker
//!   families;
//! - [`thresholds`] — critical values of `alpha` where equilibria change
//!   stability class;
//! - [`reduction`] — composing equilibria of vertex-disjoint subgraphs into
//!   equilibria of the parent graph;
//! - [`simulate`] — exact Monte-Carlo simulation of the urn process with
//!   reproducible seeding and endpoint statistics.

pub mod dynamics;
pub mod equilibria;
pub mod model;
pub mod reduction;
pub mod simulate;
pub mod thresholds;

pub use dynamics::{drift, flow, jacobian, lyapunov, FlowOptions, SimplexPoint, Trajectory};
pub use equilibria::{classify, find_equilibria, Equilibrium, EquilibriumCatalog, Stability};
pub use model::{GraphSpec, SubsetDistribution, WarmModel};
