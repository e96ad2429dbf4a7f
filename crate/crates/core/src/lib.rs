//! Parabolic Monge-Ampere type flow of Gauduchon metrics on flat complex
//! tori, together with the Hermitian-geometry toolkit it is built from.

// index loops follow the tensor notation; `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod chern;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod forms;
pub mod grid;
pub mod io;
mod kernel;
pub mod linalg;
pub mod run;
pub mod trig;

pub use error::{Error, Result};
