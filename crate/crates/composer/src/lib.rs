//! File formats and the command-line pipeline around `composer-core`.

pub mod cli;
pub mod docs;
pub mod fcidump;
