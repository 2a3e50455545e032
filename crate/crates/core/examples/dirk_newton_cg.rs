//! DIRK on the FD benchmark: each stage is a Newton solve whose linear
//! systems go to Jacobi-preconditioned CG with matrix-free products.
//!
//! cargo run --release --example dirk_newton_cg

use stsdiff::bench::{error_metrics, expm_reference, BenchProblem, ProblemKind};
use stsdiff::timeloop::{advance_adaptive, uniform_sample_times, Method, SolverConfig};
use stsdiff::ToleranceSpec;

fn main() -> stsdiff::Result<()> {
    let p = BenchProblem::new(ProblemKind::Fd, 10.0, 64, 64)?;
    let times = uniform_sample_times(1.0, 20);
    let reference = expm_reference(&p, &times)?;
    for m in [Method::Dirk2, Method::Dirk3] {
        for rtol in [1e-3, 1e-5] {
            let cfg = SolverConfig::new(m, ToleranceSpec::new(rtol, 1e-11)?);
            let out = advance_adaptive(p.rhs(), &p.initial_condition(), &times, &cfg)?.into_result()?;
            let (err, _) = error_metrics(&out.samples, &reference)?;
            let s = &out.stats;
            println!(
                "{m} rtol {rtol:e}: error {err:.2e}, {} steps ({} rejected), {} newton, {} cg, {} rhs evals",
                s.accepted, s.rejected, s.newton_iters, s.cg_iters, s.rhs_evals
            );
        }
    }
    Ok(())
}
