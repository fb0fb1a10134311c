//! Monte Carlo engines for American-style optimal stopping via
//! entropy-regularized penalization of reflected backward SDEs.
//!
//! The crate prices the American max-call on independent geometric Brownian
//! motions three ways — classical penalization, an implicit
//! entropy-regularized scheme, and a policy improvement iteration — and
//! validates them against a product binomial tree. A randomized-stopping
//! evaluator turns any stopping intensity into a lower-bound estimate, and
//! the `singular` module explores the large-penalization limit where the
//! generator becomes logarithmically singular and the value acquires a
//! defaultable-claim interpretation.
//!
//! Start with the `examples/` directory: each file is a runnable walkthrough
//! of one capability. The `entropy-pricer` binary exposes the same machinery
//! as subcommands (`price`, `table1`, `nsweep`, `defaultcheck`, `proptest`).

pub mod benchmark;
pub mod drivers;
pub mod error;
pub mod experiment;
pub mod market;
pub mod regression;
pub mod rng;
pub mod schemes;
pub mod singular;

pub use error::{Error, Result};
