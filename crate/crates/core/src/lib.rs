// `!(x > 0.0)` is used to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod approx;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod hardness;
pub mod heuristics;
pub mod loss;
pub mod numeric;
pub mod oracle;
pub mod solver;
pub mod statgen;
