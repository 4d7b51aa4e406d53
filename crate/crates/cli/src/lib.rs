//! Command-line front end: file formats and command implementations live
//! here so integration tests can drive them directly.

pub mod commands;
pub mod io;
