//! Reference solutions: computed once, written with a self-describing
//! header, and read back by fingerprint.
//!
//! cargo run --release --example reference_cache

use stsdiff::bench::{BenchProblem, ProblemKind, ReferenceStore};

fn main() -> stsdiff::Result<()> {
    let dir = std::env::temp_dir().join("stsdiff-reference-example");
    let store = ReferenceStore::new(Some(dir.clone()));
    let p = BenchProblem::new(ProblemKind::Fd, 0.1, 64, 64)?;

    let r = store.get(&p, 1.0)?;
    let path = store.path_for(&r.fingerprint).expect("store has a directory");
    let header = std::fs::read(&path)?.split(|b| *b == b'\n').next().map(|l| String::from_utf8_lossy(l).into_owned());
    println!("{}", path.display());
    println!("{}", header.unwrap_or_default());
    println!("{} snapshots, provenance {}", r.snapshots.len(), r.provenance);

    // a fresh store finds the file instead of recomputing
    let again = ReferenceStore::new(Some(dir)).get(&p, 1.0)?;
    assert_eq!(again.snapshots, r.snapshots);
    Ok(())
}
