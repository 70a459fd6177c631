//! Monte Carlo harness, scenario files, result tables and the command-line
//! front end for `ciest-core`.
//!
//! Agent ids are one-based in files and tables and zero-based in the API.

pub mod cli;
pub mod harness;
pub mod results;
pub mod scenario_file;
