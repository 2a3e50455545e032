//! Named parameter sweeps over the benchmark.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{run_point, ExperimentConfig, ProblemKind, ReferenceStore, Row};
use crate::error::{Error, Result};
use crate::state::NormKind;
use crate::timeloop::{EigMode, Method};

pub const NUS: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Study {
    /// Error and cost against rtol for every adaptive method.
    Efficiency,
    /// Fixed-step sweep `h = 0.01 / 2^k`, `k = 0..4`.
    Stability,
    /// STS failure rates against the eigenvalue safety factor.
    Eigsafety,
    /// Component against cell-wise error norm.
    Normcompare,
    /// Analytic bound against power-iteration estimate.
    Eigmode,
}

impl Study {
    pub const ALL: [Study; 5] =
        [Study::Efficiency, Study::Stability, Study::Eigsafety, Study::Normcompare, Study::Eigmode];

    pub fn name(self) -> &'static str {
        match self {
            Study::Efficiency => "efficiency",
            Study::Stability => "stability",
            Study::Eigsafety => "eigsafety",
            Study::Normcompare => "normcompare",
            Study::Eigmode => "eigmode",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Study::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown study '{s}' (expected one of efficiency, stability, eigsafety, normcompare, eigmode)"
            ))
        })
    }
}

fn rtol_sweep() -> Vec<f64> {
    (2..=8).map(|i| 10f64.powi(-i)).collect()
}

fn explicit_methods() -> Vec<Method> {
    vec![Method::Rkc, Method::Rkl, Method::Ssp2, Method::Ssp3, Method::Ssp4]
}

fn methods_for(problem: ProblemKind) -> Vec<Method> {
    match problem {
        ProblemKind::Fd => Method::ALL.to_vec(),
        ProblemKind::Dg => explicit_methods(),
    }
}

/// Expands `base` into single-point configs; `base` supplies problem, grid, `t_f`, atol, tau and seed.
pub fn study_configs(study: Study, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out = vec![];
    let mut push = |method: Method, nu: f64, f: &dyn Fn(&mut ExperimentConfig)| {
        let mut c = base.clone();
        c.method = method;
        c.nu = nu;
        c.fixed_h.clear();
        f(&mut c);
        out.push(c);
    };
    for nu in NUS {
        match study {
            Study::Efficiency => {
                for m in methods_for(base.problem) {
                    for r in rtol_sweep() {
                        push(m, nu, &|c| c.rtol = vec![r]);
                    }
                }
            }
            Study::Stability => {
                let methods = match base.problem {
                    ProblemKind::Fd => Method::ALL.to_vec(),
                    ProblemKind::Dg => explicit_methods(),
                };
                for m in methods {
                    for k in 0..=4 {
                        let h = 0.01 / f64::from(1u32 << k);
                        push(m, nu, &|c| c.fixed_h = vec![h]);
                    }
                }
            }
            Study::Eigsafety => {
                for m in [Method::Rkc, Method::Rkl] {
                    for q in [1.0, 1.05, 1.1, 1.2] {
                        for r in rtol_sweep() {
                            push(m, nu, &|c| {
                                c.eig_mode = EigMode::Power;
                                c.q_lambda = q;
                                c.rtol = vec![r];
                            });
                        }
                    }
                }
            }
            Study::Normcompare => {
                for m in explicit_methods() {
                    for norm in [NormKind::Component, NormKind::Cell] {
                        for r in rtol_sweep() {
                            push(m, nu, &|c| {
                                c.norm = norm;
                                c.rtol = vec![r];
                            });
                        }
                    }
                }
            }
            Study::Eigmode => {
                for m in [Method::Rkc, Method::Rkl] {
                    for mode in [EigMode::User, EigMode::Power] {
                        for r in rtol_sweep() {
                            push(m, nu, &|c| {
                                c.eig_mode = mode;
                                c.rtol = vec![r];
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Runs every point of the study on `base.jobs` worker threads; rows keep sweep order.
pub fn run_study(study: Study, base: &ExperimentConfig, store: &ReferenceStore) -> Result<Vec<Row>> {
    base.validate()?;
    let configs = study_configs(study, base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(base.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        // references first, one per distinct problem
        let mut seen = vec![];
        for c in &configs {
            if !seen.iter().any(|s: &ExperimentConfig| s.nu == c.nu) {
                seen.push(c.clone());
            }
        }
        seen.par_iter().try_for_each(|c| store.get(&c.build_problem()?, c.tf).map(|_| ()))?;

        configs
            .par_iter()
            .map(|c| {
                let problem = c.build_problem()?;
                let reference = store.get(&problem, c.tf)?;
                let h = c.fixed_h.first().copied();
                Ok(run_point(c, &problem, &reference, c.rtol[0], h, study.name())?.0)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Study::ALL {
            assert_eq!(s.name().parse::<Study>().unwrap(), s);
        }
        assert!("bogus".parse::<Study>().is_err());
    }

    #[test]
    fn sweep_sizes() {
        let base = ExperimentConfig::default();
        assert_eq!(study_configs(Study::Eigsafety, &base).len(), 3 * 2 * 4 * 7);
        assert_eq!(study_configs(Study::Stability, &base).len(), 3 * 5 * 5);
        assert_eq!(study_configs(Study::Efficiency, &base).len(), 3 * 5 * 7);
        let fd = ExperimentConfig { problem: ProblemKind::Fd, nv: 64, nx: 64, ..base };
        assert_eq!(study_configs(Study::Efficiency, &fd).len(), 3 * 7 * 7);
        for c in study_configs(Study::Normcompare, &fd) {
            assert!(c.validate().is_ok());
            assert_eq!(c.rtol.len(), 1);
        }
        let hs: Vec<f64> = study_configs(Study::Stability, &fd).iter().take(5).map(|c| c.fixed_h[0]).collect();
        assert_eq!(hs, vec![0.01, 0.005, 0.0025, 0.00125, 0.000625]);
    }
}
