//! Config-driven runs and the files they emit.

mod config;
mod output;
mod run;

pub use config::{
    check_config, load_config, parse_config, Diagnostic, Emit, ModelConfig, ModelSource, ObservableSpec,
    RunConfig, SymmetrySpec,
};
pub use output::{scan2d_csv, scan2d_plot_data, signal_name, Header, SpectrumTable, SPECTRUM_COLUMNS};
pub use run::{first_populated_gap, run, sweep, RunSummary};

use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Process exit status for a failed command: numerical failures map to 3, everything else to 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::NonFinite(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}
