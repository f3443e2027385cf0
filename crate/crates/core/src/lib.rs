//! Totally corrective boosting with an explicit cardinality penalty.
//!
//! Columns (decision stumps) are generated one at a time by the most
//! violated dual constraint. Each restricted master problem is solved over
//! fixed-point binary weights by multistart tabu search or exhaustive
//! enumeration, then the selected support is refined by a bound-constrained
//! convex solver. The `experiments` module runs the convex baselines and
//! the penalized variants side by side and compares their Pareto frontiers.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boost;
pub mod convex_opt;
pub mod dataset;
pub mod discrete_opt;
pub mod error;
pub mod experiments;
pub mod hypotheses;
pub mod loss;
pub mod selftest;

pub use error::{Error, Result};
