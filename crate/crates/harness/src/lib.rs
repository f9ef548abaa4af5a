//! Verification suites, data generation and experiment runs on top of
//! `vlpl_core`, shared by the `vlpl` binary and the acceptance tests.

pub mod data;
pub mod error;
pub mod fixtures;
pub mod profile;
pub mod run;
pub mod table1;
pub mod verify;

pub use error::{HarnessError, Result};

