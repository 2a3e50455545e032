//! A named study run from code, written as CSV to standard output. The
//! `stsbench study` subcommand does the same from the command line.
//!
//! cargo run --release --example study_sweep -- eigmode

use stsdiff::bench::{run_study, write_csv, ExperimentConfig, ReferenceStore, Study};

fn main() -> stsdiff::Result<()> {
    let study: Study = std::env::args().nth(1).as_deref().unwrap_or("eigmode").parse()?;
    let base = ExperimentConfig { nv: 48, nx: 4, jobs: 2, ..Default::default() };
    let rows = run_study(study, &base, &ReferenceStore::new(None))?;
    write_csv(std::io::stdout().lock(), &rows)
}
