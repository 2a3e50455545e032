//! Adaptive RKL2 run on the DG benchmark, scored against the exact solution.
//!
//! cargo run --release --example adaptive_run -- 1e-5

use stsdiff::bench::{error_metrics, expm_reference, BenchProblem, ProblemKind};
use stsdiff::timeloop::{advance_adaptive, uniform_sample_times, Method, SolverConfig};
use stsdiff::ToleranceSpec;

fn main() -> stsdiff::Result<()> {
    let rtol: f64 = std::env::args().nth(1).map_or(Ok(1e-4), |s| s.parse()).expect("rtol must be a number");
    let p = BenchProblem::new(ProblemKind::Dg, 1.0, 120, 20)?;
    let times = uniform_sample_times(1.0, 20);

    let mut cfg = SolverConfig::new(Method::Rkl, ToleranceSpec::new(rtol, 1e-11)?);
    cfg.record_log = true;
    let out = advance_adaptive(p.rhs(), &p.initial_condition(), &times, &cfg)?.into_result()?;
    let (linf, _) = error_metrics(&out.samples, &expm_reference(&p, &times)?)?;

    for rec in out.log.iter().take(8) {
        println!("{rec}");
    }
    let s = &out.stats;
    println!(
        "rtol {rtol:e}: error {linf:.2e}, {} steps, {} rejected, {} rhs evals, {} stages, {:.3}s",
        s.accepted,
        s.rejected,
        s.rhs_evals,
        s.stages_total,
        s.wall_time.as_secs_f64()
    );
    Ok(())
}
