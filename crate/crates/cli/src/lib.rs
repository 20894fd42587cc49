//! Command-line harness: data ingestion, run configuration, model dispatch,
//! and trace/result export for the matfact toolkit.

pub mod io;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] matfact::Error),
}

pub use io::{load_dense, load_matrix, load_triplets, write_dense, write_triplets, DataFormat};
pub use run::{evaluate, export_plot_data, run, RunConfig, RunOutput};
