//! Report tables and the run store.

mod store;
mod tables;

pub use store::{
    case_id, run_id, IndexEntry, OptimizeRun, RunPayload, RunRecord, RunStore, RunTiming, DATA_DIR_ENV,
    SCHEMA_VERSION,
};
pub use tables::{
    export_convergence, export_convergence_series, read_screening_csv, write_comparison_table,
    write_screening_csv, ComparisonRow, PartialShed, ScreeningRow,
};
