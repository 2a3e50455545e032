//! Dominant eigenvalue of the DG benchmark operator by matrix-free power
//! iteration, next to the analytic bound and the dense spectrum of one line.
//!
//! cargo run --release --example power_iteration

use nalgebra::SymmetricEigen;
use stsdiff::bench::{BenchProblem, ProblemKind};
use stsdiff::domeig::{effective_lambda, power_iterate, EigSafety, PowerIterConfig};
use stsdiff::ToleranceSpec;

fn main() -> stsdiff::Result<()> {
    let p = BenchProblem::new(ProblemKind::Dg, 1.0, 120, 20)?;
    let tol = ToleranceSpec::new(1e-4, 1e-11)?;
    let u0 = p.initial_condition();

    // every x line shares one operator, so a line's spectrum is the full spectrum
    let dense = SymmetricEigen::new(p.line_matrix()?).eigenvalues;
    let lam_true = dense.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    for warmup_iters in [0, 10] {
        let cfg = PowerIterConfig { warmup_iters, ..Default::default() };
        let est = power_iterate(p.rhs(), 0.0, &u0, &cfg, &tol)?;
        let eff = effective_lambda(&est, &EigSafety::new(1.1)?)?;
        println!(
            "warmups {warmup_iters:>2}: lambda_approx {:.1} ({} checks, {} rhs evals), q*lambda {eff:.1}, /true {:.3}",
            est.lambda_approx,
            est.iters,
            est.rhs_evals,
            est.lambda_approx.abs() / lam_true
        );
    }
    println!(
        "dense |lambda_max| {lam_true:.1}, analytic bound {:.1} ({:.3}x)",
        p.lambda_user(),
        p.lambda_user() / lam_true
    );
    Ok(())
}
