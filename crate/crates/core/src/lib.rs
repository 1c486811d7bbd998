//! Distributed continuous-time solvers for the Sylvester equation
//! `AX + XB = C`, where agent `i` of a connected network only knows a row
//! band of `A` and column bands of `B` and `C`.
//!
//! Three flows are provided: a least-squares flow, an exact-solution flow
//! for consistent instances, and an L1-regularized flow with derivative
//! feedback. Centralized oracles, KKT residuals and Lyapunov functions are
//! available for certifying what the flows converge to.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod matcore;
pub mod network;
pub mod penalty;
pub mod problem;
pub mod simulator;

pub use dynamics::{Algorithm, NetworkState};
pub use error::{Error, Result};
pub use matcore::{BlockPartition, DenseMatrix};
pub use network::Network;
pub use penalty::{AlphaMode, PenaltySpec};
pub use problem::SylvesterProblem;
pub use simulator::{run, SimConfig};
