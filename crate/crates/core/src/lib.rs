// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classifier;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod fitkit;
pub mod io;
pub mod ising;
pub mod lattice;
pub mod observables;
pub mod rbm;
pub mod rg;
pub mod theory;

pub use error::{Error, Result};
