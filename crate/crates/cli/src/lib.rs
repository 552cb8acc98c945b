//! Command-line front end for `awreg`: CSV in, JSON and CSV out.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input, 3 numerical failure.

pub mod commands;
pub mod io;
pub mod json;
pub mod report;
