//! Synthesis toolchain for disturbed linear systems: finite grid
//! abstractions with control/disturbance label sets, temporal-logic
//! specification robustification, two-player fixpoint synthesis on the
//! abstraction, derived sampled-data controllers, and closed-loop
//! verification of the original specification.

pub mod abstraction;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod logic;
pub mod numerics;
pub mod plant;
pub mod project;
pub mod runtime;

pub use abstraction::{Abstraction, Params};
pub use error::{Error, Result};
pub use game::{AltSystem, Strategy, WinningReport};
pub use logic::{Atom, Formula};
pub use numerics::{Matrix, Polytope, Vector};
pub use plant::{DenseTrajectory, InputSignal, LinearSystem};
pub use runtime::{ClosedLoopRun, Controller, VerdictReport};
