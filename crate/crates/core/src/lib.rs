//! Hybrid decomposition toolkit. Problems are split into a QUBO part for a
//! pluggable sampler and a classical LP/MILP part solved exactly.

// `!(x > 0.0)` is how NaN gets rejected here; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod qubo;
pub mod sampler;
pub mod partition;
pub mod trace;
pub mod lp;
pub mod molconf;
pub mod jobshop;
pub mod cellform;
pub mod vrp;
pub mod bench;
