//! Globally conservative solutions of the weakly dissipative Camassa–Holm
//! equation.
//!
//! The equation is solved in the time-weighted variable `k = e^{λt} u`, which
//! turns the dissipative problem into one with a conserved H¹ energy. Instead of
//! discretizing the PDE in space, the solver integrates the equivalent
//! semilinear system along characteristics: per-node unknowns
//! `(y, K, V, W, Q)` on a uniform grid in the Lagrangian label `ξ`. Wave
//! breaking shows up there as `V → 1` while every unknown stays bounded, so the
//! same integrator runs through collisions and continues the conservative
//! solution.
//!
//! Module map:
//!
//! - [`model`]: equation parameters, the source polynomial `H`, state types.
//! - [`nonlocal`]: the convolution terms `P`, `G` in O(N) via exponential scans.
//! - [`transform`]: Eulerian initial data → Lagrangian state and back.
//! - [`evolve`]: right-hand side, RK4 stepping, the simulation driver.
//! - [`peakon`]: the multipeakon ODE and closed-form single peakon.
//! - [`harness`]: configuration, CSV output, weak-form and characteristic
//!   diagnostics, convergence studies and the CLI.

pub mod error;
pub mod evolve;
pub mod harness;
pub mod model;
pub mod nonlocal;
pub mod peakon;
pub(crate) mod quadrature;
pub mod transform;

pub use error::SolverError;
pub use evolve::{simulate, step_rk4, DiagnosticsRow, SimulationOutput, StepControls};
pub use model::{LagrangianGrid, LagrangianState, ModelParams, Tolerances};
pub use nonlocal::{compute_pg, NonlocalTerms};
pub use peakon::PeakonState;
pub use transform::{eulerianize, lagrangianize, EulerianField, InitialData};
