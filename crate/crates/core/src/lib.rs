//! Balance functions and entry-exit predictions for particles near invariant
//! manifolds.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod balance;
pub mod dynsys;
pub mod error;
pub mod flows;
pub mod ingest;
pub mod roots;
pub mod smallalg;

pub use error::{Error, Result};
