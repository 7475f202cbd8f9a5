// Negated comparisons are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod error;
pub mod geometry;
pub mod instance;
pub mod invariants;
pub mod metrics;
pub mod ply;
pub mod rng;
pub mod samplers;
pub mod synth;
