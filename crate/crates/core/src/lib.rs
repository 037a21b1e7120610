//! Numerical laboratory for a prey-predator system whose predator carries an
//! infectious disease. The crate locates equilibria and the disease-free
//! limit cycle, evaluates the reproduction-number markers tied to disease
//! invasion, verifies the boundary-flow and Lyapunov conditions behind
//! uniform persistence, and reproduces the van der Pol counterexample in
//! which the cycle condition holds yet persistence fails.

pub mod equilibria;
pub mod models;
pub mod ode;

pub use equilibria::{Classification, EquilibriumReport, Regime, RegimeTag};
pub use models::{CounterexampleParams, ModelParams, State3};
pub use ode::{SectionDirection, SectionEvent, SolverSettings, Trajectory};
