//! Data readers, result writers and the command-line interface.

pub mod cli;
mod emit;
mod nist;
mod table;

pub use emit::{fmt_f64, run_to_csv, run_to_json};
pub use nist::{parse_nist_str, parse_nist_strd, NistDataset};
pub use table::{parse_csv, parse_csv_str, ColumnRef};
