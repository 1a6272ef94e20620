//! File formats, dataset output and the command-line pipeline around
//! [`semloc_core`].

#![forbid(unsafe_code)]

pub mod cli;
pub mod dataset;
pub mod formats;
pub mod fsio;

pub use cli::run;
