//! Fixed-step SSP schemes against RKL2 on the DG benchmark: the explicit SSP
//! schemes need tiny steps to stay stable, STS does not.
//!
//! cargo run --release --example ssp_blowup

use stsdiff::bench::{BenchProblem, ProblemKind};
use stsdiff::timeloop::{advance_fixed, uniform_sample_times, Method, SolverConfig};
use stsdiff::ToleranceSpec;

fn main() -> stsdiff::Result<()> {
    let p = BenchProblem::new(ProblemKind::Dg, 1.0, 120, 20)?;
    let times = uniform_sample_times(1.0, 20);
    let cfg = |m| SolverConfig::new(m, ToleranceSpec::new(1e-4, 1e-11).unwrap());
    for m in [Method::Ssp2, Method::Ssp3, Method::Ssp4, Method::Rkl] {
        let line: Vec<String> = (0..5)
            .map(|k| {
                let h = 0.01 / f64::from(1u32 << k);
                let out = advance_fixed(p.rhs(), &p.initial_condition(), h, &times, &cfg(m)).unwrap();
                format!("{h:.2e}:{}", out.status.label())
            })
            .collect();
        println!("{m:<5} {}", line.join("  "));
    }
    Ok(())
}
