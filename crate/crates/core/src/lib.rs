//! Analysis and simulation of randomized join-the-shortest-queue routing in
//! large heterogeneous processor-sharing server farms.
//!
//! - [`stability`]: stability regions of static, finite-N SQ(2) and
//!   asymptotic SQ(2) routing;
//! - [`static_routing`]: delay-optimal state-independent routing;
//! - [`meanfield`]: the SQ(2) mean-field ODE, its certified equilibrium and
//!   the performance measures derived from it;
//! - [`hybrid`]: class-biased SQ(2) and its optimal bias;
//! - [`sim`]: an exact event-driven simulator of the finite system.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod error;
pub mod hybrid;
pub mod meanfield;
pub mod model;
pub mod sim;
pub mod stability;
pub mod static_routing;

pub use error::{Error, Result};
pub use model::{ServerClass, SystemConfig, TailFamily, TailVector};
