//! Equilibrium-finding toolkit for two-player zero-sum poker games.
//!
//! * [`game`]: Kuhn and Leduc poker rules and the compiled [`game::GameTree`].
//! * [`evaluation`]: exact best responses, NashConv and exploitability.
//! * [`tabular`]: CFR, external-sampling MCCFR, XFP, exploitability descent, NeuRD and
//!   the QPG/RPG/RMPG policy-gradient family with exact critics.
//! * [`approx`]: from-scratch MLPs, optimizers and replay memories.
//! * [`neural`]: RCFR, neural exploitability descent, neural NeuRD, Deep CFR and NFSP.
//! * [`psro`]: policy-space response oracles with uniform, Nash and PRD meta-solvers.
//! * [`harness`]: config parsing, experiment runs, CSV logging and grid sweeps.

pub mod approx;
pub mod error;
pub mod evaluation;
pub mod game;
pub mod harness;
pub mod neural;
pub mod psro;
pub mod solver;
pub mod tabular;

pub use error::{Error, Result};
pub use solver::Solver;
