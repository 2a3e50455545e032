//! Benchmark driver: `stsbench run` for one experiment, `stsbench study <name>` for a sweep.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stsdiff::bench::{
    parse_list, run_experiment, run_study, write_csv_to, OneOrMany, PartialConfig, ReferenceStore, Study,
};
use stsdiff::timeloop::{EigMode, Method};
use stsdiff::NormKind;

#[derive(Parser)]
#[command(name = "stsbench", version, about = "Adaptive STS/SSP/DIRK benchmarks on a stiff diffusion problem")]
struct Cli {
    /// Flat key = value config file; keys are the long flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One experiment: one CSV row per rtol (or per fixed step).
    Run(Flags),
    /// A named sweep: efficiency, stability, eigsafety, normcompare or eigmode.
    Study {
        name: String,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args, Default)]
struct Flags {
    /// fd or dg
    #[arg(long)]
    problem: Option<String>,
    /// rkc, rkl, ssp2, ssp3, ssp4, dirk2 or dirk3
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    /// Comma-separated list, e.g. 1e-2,1e-3
    #[arg(long)]
    rtol: Option<String>,
    #[arg(long)]
    atol: Option<f64>,
    /// component or cell
    #[arg(long)]
    norm: Option<NormKind>,
    /// user or power
    #[arg(long)]
    eig_mode: Option<EigMode>,
    #[arg(long)]
    q_lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tf: Option<f64>,
    /// Comma-separated fixed step sizes; switches off adaptivity
    #[arg(long)]
    fixed_h: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reference cache directory (default .stsbench-cache)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Worker threads for studies
    #[arg(long)]
    jobs: Option<usize>,
}

impl Flags {
    fn into_partial(self) -> stsdiff::Result<PartialConfig> {
        Ok(PartialConfig {
            problem: self.problem.map(|p| p.parse()).transpose()?,
            method: self.method,
            nu: self.nu,
            nv: self.nv,
            nx: self.nx,
            rtol: self.rtol.map(|s| parse_list(&s)).transpose()?.map(OneOrMany::Many),
            atol: self.atol,
            norm: self.norm,
            eig_mode: self.eig_mode,
            q_lambda: self.q_lambda,
            tau: self.tau,
            tf: self.tf,
            fixed_h: self.fixed_h.map(|s| parse_list(&s)).transpose()?.map(OneOrMany::Many),
            seed: self.seed,
            out: self.out,
            cache_dir: self.cache_dir,
            jobs: self.jobs,
        })
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stsbench: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> stsdiff::Result<()> {
    let file = match &cli.config {
        Some(p) => PartialConfig::from_file(p)?,
        None => PartialConfig::default(),
    };
    let (study, flags) = match cli.cmd {
        Cmd::Run(f) => (None, f),
        Cmd::Study { name, flags } => (Some(name.parse::<Study>()?), flags),
    };
    let cfg = file.merge(flags.into_partial()?).resolve()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let store = ReferenceStore::new(Some(cfg.cache_dir.clone().unwrap_or_else(|| ".stsbench-cache".into())));
    let rows = match study {
        None => run_experiment(&cfg, &store, "run")?,
        Some(s) => run_study(s, &cfg, &store)?,
    };
    write_csv_to(cfg.out.as_deref(), &rows)?;
    if let Some(p) = &cfg.out {
        eprintln!("wrote {} rows to {}", rows.len(), p.display());
    }
    Ok(())
}
