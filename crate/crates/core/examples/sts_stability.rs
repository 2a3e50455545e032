//! Stability intervals of the RKC2 and RKL2 families, and how many stages a
//! step needs against a given eigenvalue.
//!
//! cargo run --release --example sts_stability

use stsdiff::sts::{beta, coefficients, stability_polynomial, stage_count, StsFamily};

fn main() -> stsdiff::Result<()> {
    println!("{:>4} {:>12} {:>12}", "s", "beta rkc2", "beta rkl2");
    for s in [2, 3, 5, 10, 20, 50] {
        println!("{s:>4} {:>12.3} {:>12.3}", beta(StsFamily::Rkc2, s), beta(StsFamily::Rkl2, s));
    }

    // |R_s| across the interval, and just past its end
    let co = coefficients(StsFamily::Rkl2, 10)?;
    let b = co.beta();
    let inside = (0..=200).map(|i| stability_polynomial(&co, -b * i as f64 / 200.0).abs()).fold(0.0, f64::max);
    println!(
        "rkl2 s=10: max |R| on [-beta, 0] = {inside:.6}, |R(-1.2 beta)| = {:.3}",
        stability_polynomial(&co, -1.2 * b).abs()
    );

    let lambda = 8000.0;
    for h in [1e-4, 1e-3, 1e-2] {
        let rkc = stage_count(h, lambda, StsFamily::Rkc2, 10_000)?;
        let rkl = stage_count(h, lambda, StsFamily::Rkl2, 10_000)?;
        println!("h {h:e}, h*lambda {:>5.0}: rkc2 s={rkc}, rkl2 s={rkl}", h * lambda);
    }
    Ok(())
}
