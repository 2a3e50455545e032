//! Component-wise against cell-wise error norms for RKL2 on the DG benchmark.
//!
//! cargo run --release --example norm_compare

use stsdiff::bench::{run_experiment, ExperimentConfig, ProblemKind, ReferenceStore};
use stsdiff::NormKind;

fn main() -> stsdiff::Result<()> {
    let store = ReferenceStore::new(None);
    for norm in [NormKind::Component, NormKind::Cell] {
        let cfg = ExperimentConfig {
            problem: ProblemKind::Dg,
            norm,
            nu: 10.0,
            rtol: vec![1e-2, 1e-3, 1e-4],
            ..Default::default()
        };
        for row in run_experiment(&cfg, &store, "example")? {
            println!(
                "{norm:<9} rtol {:.0e}: error {:.2e}, rejected {:>3} of {:>4}, {} rhs evals",
                row.rtol_or_h,
                row.error_linf20,
                row.rejected,
                row.steps + row.rejected,
                row.rhs_evals
            );
        }
    }
    Ok(())
}
