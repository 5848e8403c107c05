//! IO, file formats, parallel execution and the command-line harness for
//! `tmlmc-core`.

pub mod cli;
pub mod config;
pub mod envspec;
pub mod parallel;
pub mod report;
pub mod schema;

pub use parallel::RayonSweep;
