//! Synchronous machines in lossless power networks: the full flux-linkage
//! model, the reduced models of order 6 down to 2, their energy functions and
//! constant-structure port-Hamiltonian forms, plus a small ODE toolbox to
//! simulate and audit them.

// NaN must fail the parameter checks, so they are written as !(x > 0).
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod frames;
pub mod fullmachine;
pub mod machines;
pub mod network;
pub mod params;
pub mod ph;
pub mod sim;

pub use nalgebra;
pub use num_complex;

pub use error::{Error, Result};
pub use frames::Angle;
pub use fullmachine::{FullInputs, FullState, InternalEmfs};
pub use machines::{Layout, MachineInputs, MachineState, MultiMachine, Order, Var};
pub use network::{build_grid, ClassicalGrid, Grid, Line};
pub use params::{FundamentalParams, StandardParams, TimescaleMargins, Violation};
pub use ph::{Equilibrium, PHSystem};
pub use sim::{Method, Trajectory};
