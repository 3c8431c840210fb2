//! Decision support for crowdsourced software development marketplaces.
//!
//! The crate ingests a worker-task event history, rebuilds a classifier
//! every day on completed tasks, and turns the day's class probabilities
//! into three products: ranked tasks per worker, ranked registered workers
//! per task, and cancellation warnings for tasks heading toward zero
//! qualified submissions. An evaluation harness walks the model forward
//! day by day and reports accuracy, ranking quality, and effort savings.
//! A seeded synthetic marketplace generator makes the whole pipeline
//! runnable end to end without production data.

pub mod engine;
pub mod eval;
pub mod features;
pub mod learn;
pub mod market;
pub mod rng;
pub mod synth;
