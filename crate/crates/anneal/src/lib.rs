//! Adaptive cooling schedules for discrete partition functions, and
//! telescoping-product estimators built on top of them.
//!
//! A discrete system with integer Hamiltonian levels has partition function
//! `Z(β) = Σ_i a_i e^{-iβ}`; counting problems (colorings, matchings,
//! independent sets, Ising ground states) are evaluations of `Z` at the ends
//! of the β axis. This crate provides:
//!
//! * [`partfn`] — an exact, log-space oracle for explicitly given `Z`:
//!   evaluation, derivatives, Chebyshev step ratios, and schedule
//!   verification. Everything else in the crate is tested against it.
//! * [`models`] — concrete combinatorial systems with desk-scale exhaustive
//!   enumeration into explicit partition functions.
//! * [`samplers`] — Hamiltonian-level sampling oracles: exact inverse-CDF
//!   sampling, Metropolis matchings chain, Glauber dynamics, and a
//!   warm-start chain driver.
//! * [`sched_nonadaptive`] — fixed formula schedules, the greedy
//!   lower-bound witness for non-adaptive schedules, and the reversibility
//!   augmentation for warm starts.
//! * [`sched_theory`] — constructive schedule existence: piecewise-linear
//!   approximation of the convex log-partition curve, the derived
//!   e²-schedule, the greedy length-optimal schedule, and the adaptive
//!   lower-bound instance.
//! * [`sched_adaptive`] — the sampling-driven schedule generator: interval
//!   partition, heaviness tests, rough ratio estimation, and the
//!   optimal/long/interval move loop, with a full run transcript.
//! * [`estimator`] — per-ratio sampling, product aggregation with the
//!   standard sample-count formulas, median amplification, and end-to-end
//!   counting runs.
//! * [`cli`] — the `anneal` command-line front end (schedule / estimate /
//!   lowerbound / plapprox / verify).
//!
//! The `examples/` directory of this crate has one runnable program per
//! major capability; start with `cargo run --example adaptive_schedule`.

pub mod cli;
pub mod estimator;
pub mod graph;
pub mod logspace;
pub mod models;
pub mod partfn;
pub mod samplers;
pub mod sched_adaptive;
pub mod sched_nonadaptive;
pub mod sched_theory;
pub mod schedule;
pub mod zgen;

pub use graph::Graph;
pub use logspace::LogWeight;
pub use models::{Config, CountTarget, GibbsSystem};
pub use partfn::{Beta, PartitionFunction};
pub use schedule::{CoolingSchedule, MoveKind};
