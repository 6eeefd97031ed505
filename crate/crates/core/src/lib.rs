//! Monte Carlo lab for the random loop representation of O(n) quantum spin
//! chains with interaction `u·T + (1-u)·Q`.

pub mod clusters;
pub mod dsu;
pub mod error;
pub mod geometry;
pub mod linkconfig;
pub mod loops;
pub mod mirror;
pub mod observables;
pub mod quantum;
pub mod sampler;
pub mod smallexact;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Domain, DomainKind, Edge, Parity};
pub use linkconfig::{Link, LinkConfig, LinkKind, Move, SimParams};
