//! File formats, reports and the command-line driver around [`ttc_core`].

pub mod checkpoint;
pub mod cli;
pub mod compare;
pub mod config;
pub mod dataset_io;
pub mod report;
pub mod taxonomy_io;

pub use checkpoint::Checkpoint;
pub use compare::{run_compare, CompareReport};
