//! Library side of the `snaq` command-line tool: output formatting, file
//! formats and the acceptance suite.

pub mod circuit_json;
pub mod format;
pub mod io;
pub mod suite;
