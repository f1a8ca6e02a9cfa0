//! Front end for the `bhppm` binary: problem files, CSV traces, property
//! suites and the subcommands that tie them together.

// `!(x > 0.0)` style guards are deliberate: NaN has to fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod problem;
pub mod suites;
pub mod trace;
