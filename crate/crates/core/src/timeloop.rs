//! Adaptive and fixed-step drivers shared by every method.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dirk::{dirk_step, dirk_tableau, ButcherTableau, NewtonConfig};
use crate::domeig::{effective_lambda, matvec_dq_slice, power_iterate_from, EigSafety, PowerIterConfig};
use crate::error::{Error, Result, StepFailure};
use crate::problem::Rhs;
use crate::ssp::{is_blown_up, ssp_scheme, ssp_step, ShuOsherScheme};
use crate::state::{max_abs, wrms_slice, GridLayout, NormKind, ToleranceSpec};
use crate::sts::{self, hermite_error, sts_step, StsCoefficients, StsFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rkc,
    Rkl,
    Ssp2,
    Ssp3,
    Ssp4,
    Dirk2,
    Dirk3,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Rkc, Method::Rkl, Method::Ssp2, Method::Ssp3, Method::Ssp4, Method::Dirk2, Method::Dirk3];

    /// Classical order of the propagated solution.
    pub fn order(self) -> usize {
        match self {
            Method::Rkc | Method::Rkl | Method::Ssp2 | Method::Dirk2 => 2,
            Method::Ssp3 | Method::Dirk3 => 3,
            Method::Ssp4 => 4,
        }
    }

    /// Order `q` of the local error estimate; the controller exponent is `1/(q+1)`.
    pub fn error_order(self) -> usize {
        match self {
            Method::Rkc | Method::Rkl => 2,
            other => other.order() - 1,
        }
    }

    pub fn sts_family(self) -> Option<StsFamily> {
        match self {
            Method::Rkc => Some(StsFamily::Rkc2),
            Method::Rkl => Some(StsFamily::Rkl2),
            _ => None,
        }
    }

    pub fn is_sts(self) -> bool {
        self.sts_family().is_some()
    }

    pub fn is_implicit(self) -> bool {
        matches!(self, Method::Dirk2 | Method::Dirk3)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Rkc => "rkc",
            Method::Rkl => "rkl",
            Method::Ssp2 => "ssp2",
            Method::Ssp3 => "ssp3",
            Method::Ssp4 => "ssp4",
            Method::Dirk2 => "dirk2",
            Method::Dirk3 => "dirk3",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Where the dominant eigenvalue for stage selection comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EigMode {
    /// Problem-supplied analytic bound, used as is.
    User,
    /// Power-iteration estimate scaled by the safety factor.
    #[default]
    Power,
}

impl fmt::Display for EigMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            EigMode::User => "user",
            EigMode::Power => "power",
        })
    }
}

impl FromStr for EigMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(EigMode::User),
            "power" => Ok(EigMode::Power),
            other => Err(Error::Config(format!("unknown eig mode '{other}'"))),
        }
    }
}

/// When the dominant eigenvalue is re-estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefreshPolicy {
    /// A single estimate at the first step.
    Once,
    /// Re-estimate every `k` accepted steps.
    Periodic(usize),
    /// Every `k` accepted steps and after every rejected step.
    OnFailure(usize),
}

impl RefreshPolicy {
    pub const DEFAULT_PERIOD: usize = 25;
}

/// A single estimate suffices for linear time-invariant operators such as the benchmark.
impl Default for RefreshPolicy {
    fn default() -> Self {
        RefreshPolicy::Once
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigSettings {
    pub mode: EigMode,
    pub safety: EigSafety,
    pub power: PowerIterConfig,
    pub policy: RefreshPolicy,
    /// Restart each refresh from the previous iterate instead of a fresh random vector.
    pub warm_start: bool,
    /// Unchecked power iterations before the first estimate of a run.
    pub first_warmups: usize,
    pub stage_cap: usize,
}

impl Default for EigSettings {
    fn default() -> Self {
        Self {
            mode: EigMode::Power,
            safety: EigSafety::default(),
            power: PowerIterConfig::default(),
            policy: RefreshPolicy::default(),
            warm_start: true,
            first_warmups: 10,
            stage_cap: sts::DEFAULT_STAGE_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub safety: f64,
    /// Growth cap on the first accepted step.
    pub first_growth: f64,
    pub growth: f64,
    pub shrink: f64,
    /// Initial step; `None` picks one from derivative estimates, capped at `1e-4 t_f`.
    pub h0: Option<f64>,
    /// Abort threshold; `None` means `1e-14 t_f`.
    pub h_min: Option<f64>,
    pub max_consecutive_rejections: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            safety: 0.9,
            first_growth: 20.0,
            growth: 1.5,
            shrink: 0.1,
            h0: None,
            h_min: None,
            max_consecutive_rejections: 10,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.safety > 0.0
            && self.safety <= 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.growth > 1.0
            && self.first_growth > 1.0
            && self.max_consecutive_rejections > 0;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid controller settings {self:?}")));
        }
        Ok(())
    }

    /// Step multiplier after an error estimate `err` for an estimator of order `q`.
    pub fn factor(&self, err: f64, q: usize, max_growth: f64) -> f64 {
        let raw = if err == 0.0 { f64::INFINITY } else { self.safety * err.powf(-1.0 / (q as f64 + 1.0)) };
        if raw.is_nan() {
            return self.shrink;
        }
        raw.clamp(self.shrink, max_growth)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub method: Method,
    pub tol: ToleranceSpec,
    pub norm: NormKind,
    pub eig: EigSettings,
    pub controller: ControllerConfig,
    pub newton: NewtonConfig,
    /// Keep one [`StepRecord`] per attempted step.
    pub record_log: bool,
}

impl SolverConfig {
    pub fn new(method: Method, tol: ToleranceSpec) -> Self {
        Self {
            method,
            tol,
            norm: NormKind::Cell,
            eig: EigSettings::default(),
            controller: ControllerConfig::default(),
            newton: NewtonConfig::default(),
            record_log: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub stages_total: usize,
    pub domeig_calls: usize,
    pub domeig_iters: usize,
    pub newton_iters: usize,
    pub cg_iters: usize,
    pub wall_time: Duration,
}

impl RunStats {
    pub fn failure_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.rejected as f64 / self.attempted as f64
        }
    }
}

/// One attempted step, for debugging logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub h: f64,
    pub err: f64,
    pub accepted: bool,
    pub stages: usize,
    pub lambda_eff: f64,
}

impl fmt::Display for StepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={:.12e} h={:.6e} err={:.6e} accepted={} stages={} lambda_eff={:.6e}",
            self.t, self.h, self.err, self.accepted as u8, self.stages, self.lambda_eff
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    BlewUp { t: f64 },
    Aborted { t: f64, reason: String },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "ok",
            RunStatus::BlewUp { .. } => "blew_up",
            RunStatus::Aborted { .. } => "aborted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub sample_times: Vec<f64>,
    /// One state per sample time reached; shorter than `sample_times` on early exit.
    pub samples: Vec<Vec<f64>>,
    pub stats: RunStats,
    pub log: Vec<StepRecord>,
    pub status: RunStatus,
}

impl RunOutput {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn blew_up(&self) -> bool {
        matches!(self.status, RunStatus::BlewUp { .. })
    }

    /// Converts an abort into [`Error::Aborted`].
    pub fn into_result(self) -> Result<Self> {
        match &self.status {
            RunStatus::Aborted { t, reason } => Err(Error::Aborted { t: *t, reason: reason.clone() }),
            _ => Ok(self),
        }
    }
}

/// `k t_f / n` for `k = 1..=n`.
pub fn uniform_sample_times(t_f: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 * t_f / n as f64).collect()
}

/// Wraps an operator and counts its evaluations.
pub struct CountingRhs<'a> {
    inner: &'a dyn Rhs,
    count: AtomicUsize,
}

impl<'a> CountingRhs<'a> {
    pub fn new(inner: &'a dyn Rhs) -> Self {
        Self { inner, count: AtomicUsize::new(0) }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

impl Rhs for CountingRhs<'_> {
    fn layout(&self) -> &GridLayout {
        self.inner.layout()
    }
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]) {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(t, u, du)
    }
    fn lambda_user(&self) -> Option<f64> {
        self.inner.lambda_user()
    }
    fn jacobian_diagonal(&self) -> Option<Vec<f64>> {
        self.inner.jacobian_diagonal()
    }
    fn constant_mode(&self) -> Option<Vec<f64>> {
        self.inner.constant_mode()
    }
}

/// Per-method machinery built once per run.
enum Stepper {
    Sts(StsFamily),
    Ssp(ShuOsherScheme),
    Dirk(ButcherTableau, Option<Vec<f64>>),
}

struct Trial {
    f_next: Vec<f64>,
    error: Vec<f64>,
    stages: usize,
}

/// Dominant-eigenvalue bookkeeping across a run.
struct EigTracker {
    settings: EigSettings,
    tol: ToleranceSpec,
    norm: NormKind,
    lambda_eff: Option<f64>,
    vector: Option<Vec<f64>>,
    since_refresh: usize,
    stale: bool,
}

impl EigTracker {
    fn new(settings: EigSettings, tol: ToleranceSpec, norm: NormKind) -> Self {
        Self { settings, tol, norm, lambda_eff: None, vector: None, since_refresh: 0, stale: true }
    }

    fn note_accept(&mut self) {
        self.since_refresh += 1;
        match self.settings.policy {
            RefreshPolicy::Periodic(k) | RefreshPolicy::OnFailure(k) if self.since_refresh >= k.max(1) => {
                self.stale = true
            }
            _ => {}
        }
    }

    fn note_reject(&mut self) {
        if let RefreshPolicy::OnFailure(_) = self.settings.policy {
            self.stale = true;
        }
    }

    fn current(&mut self, rhs: &dyn Rhs, t: f64, u: &[f64], stats: &mut RunStats) -> Result<f64> {
        if self.settings.mode == EigMode::User {
            if self.lambda_eff.is_none() {
                let l = rhs.lambda_user().ok_or_else(|| {
                    Error::InvalidArgument("eig mode 'user' needs a problem with an analytic bound".into())
                })?;
                self.lambda_eff = Some(l);
            }
            return Ok(self.lambda_eff.unwrap());
        }
        if self.stale || self.lambda_eff.is_none() {
            let start = if self.settings.warm_start { self.vector.as_deref() } else { None };
            let mut cfg = PowerIterConfig { norm_kind: self.norm, ..self.settings.power };
            if self.vector.is_none() {
                cfg.warmup_iters += self.settings.first_warmups;
            }
            let est = power_iterate_from(rhs, t, u, &cfg, &self.tol, start)?;
            stats.domeig_calls += 1;
            stats.domeig_iters += est.iters;
            self.lambda_eff = Some(effective_lambda(&est, &self.settings.safety)?);
            self.vector = Some(est.vector);
            self.since_refresh = 0;
            self.stale = false;
        }
        Ok(self.lambda_eff.unwrap())
    }
}

fn build_stepper(rhs: &dyn Rhs, method: Method) -> Result<Stepper> {
    Ok(match method {
        Method::Rkc | Method::Rkl => Stepper::Sts(method.sts_family().unwrap()),
        Method::Ssp2 => Stepper::Ssp(ssp_scheme(2)?),
        Method::Ssp3 => Stepper::Ssp(ssp_scheme(3)?),
        Method::Ssp4 => Stepper::Ssp(ssp_scheme(4)?),
        Method::Dirk2 => Stepper::Dirk(dirk_tableau(2)?, rhs.jacobian_diagonal()),
        Method::Dirk3 => Stepper::Dirk(dirk_tableau(3)?, rhs.jacobian_diagonal()),
    })
}

/// Runs one trial step. `stages` must already be chosen for STS methods.
#[allow(clippy::too_many_arguments)]
fn trial(
    stepper: &Stepper,
    rhs: &dyn Rhs,
    t: f64,
    u: &[f64],
    h: f64,
    stages: usize,
    cfg: &SolverConfig,
    stats: &mut RunStats,
    want_error: bool,
) -> std::result::Result<Trial, StepFailure> {
    match stepper {
        Stepper::Sts(family) => {
            let coeffs: StsCoefficients =
                sts::coefficients(*family, stages).map_err(|e| StepFailure::LinearSolver(e.to_string()))?;
            let out = sts_step(rhs, t, u, h, &coeffs)?;
            let error = if want_error { hermite_error(u, &out.f_next, &out.g_n, &out.g_next, h) } else { vec![] };
            Ok(Trial { f_next: out.f_next, error, stages })
        }
        Stepper::Ssp(scheme) => {
            let out = ssp_step(rhs, t, u, h, scheme)?;
            Ok(Trial { f_next: out.f_next, error: out.error, stages: scheme.stages })
        }
        Stepper::Dirk(tab, diag) => {
            let out = dirk_step(rhs, t, u, h, tab, &cfg.newton, &cfg.tol, diag.as_deref())?;
            stats.newton_iters += out.counters.newton_iters;
            stats.cg_iters += out.counters.cg_iters;
            Ok(Trial { f_next: out.f_next, error: out.error, stages: tab.stages })
        }
    }
}

fn check_samples(t0: f64, sample_times: &[f64]) -> Result<()> {
    if sample_times.is_empty() {
        return Err(Error::InvalidArgument("need at least one sample time".into()));
    }
    let mut last = t0;
    for &s in sample_times {
        if !(s >= last) || !s.is_finite() {
            return Err(Error::InvalidArgument("sample times must be finite, sorted and >= t0".into()));
        }
        last = s;
    }
    Ok(())
}

/// Step that lands exactly on `target` and avoids leaving a sliver behind.
fn clamp_to_target(t: f64, h: f64, target: f64) -> (f64, bool) {
    let remaining = target - t;
    if h >= remaining {
        (remaining, true)
    } else if 2.0 * h > remaining {
        (remaining / 2.0, false)
    } else {
        (h, false)
    }
}

/// Step whose predicted error estimate is about one half.
///
/// Treats the solution derivatives as growing geometrically, `|u^(k)| ~ d1 r^(k-1)`,
/// with `d1 = |f(u0)|` and `r = |J f(u0)| / d1` in the weighted norm. Costs two evaluations.
pub fn initial_step(rhs: &dyn Rhs, u0: &[f64], q: usize, cfg: &SolverConfig) -> Result<f64> {
    let layout = rhs.layout();
    let n = u0.len();
    let mut g0 = vec![0.0; n];
    rhs.eval(0.0, u0, &mut g0);
    let d1 = wrms_slice(cfg.norm, layout, &g0, u0, &cfg.tol);
    if !d1.is_finite() {
        return Err(Error::StepFailure(StepFailure::NonFinite));
    }
    if d1 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut jg = vec![0.0; n];
    let mut work = vec![0.0; n];
    matvec_dq_slice(rhs, 0.0, u0, &g0, &g0, &cfg.tol, cfg.norm, &mut jg, &mut work)?;
    let r = wrms_slice(cfg.norm, layout, &jg, u0, &cfg.tol) / d1;
    Ok((0.5 / (d1 * r.powi(q as i32))).powf(1.0 / (q as f64 + 1.0)))
}

/// Adaptive integration from `t = 0` to the last sample time.
pub fn advance_adaptive(rhs: &dyn Rhs, u0: &[f64], sample_times: &[f64], cfg: &SolverConfig) -> Result<RunOutput> {
    cfg.tol.validate()?;
    cfg.controller.validate()?;
    cfg.newton.validate()?;
    check_samples(0.0, sample_times)?;
    if u0.len() != rhs.layout().len() {
        return Err(Error::LayoutMismatch(format!("u0 has {} entries, operator {}", u0.len(), rhs.layout().len())));
    }
    let counted = CountingRhs::new(rhs);
    let rhs: &dyn Rhs = &counted;
    let layout = *rhs.layout();
    let t_f = *sample_times.last().unwrap();
    let ctl = cfg.controller;
    let q = cfg.method.error_order();
    let stepper = build_stepper(rhs, cfg.method)?;
    let mut eig = EigTracker::new(cfg.eig, cfg.tol, cfg.norm);

    let mut stats = RunStats::default();
    let mut log = vec![];
    let mut samples = vec![];
    let start = Instant::now();

    let mut t = 0.0;
    let mut u = u0.to_vec();
    let mut h = match ctl.h0 {
        Some(h0) => h0,
        None => initial_step(rhs, &u, q, cfg)?.min(1e-4 * t_f),
    };
    let h_min = ctl.h_min.unwrap_or(1e-14 * t_f.max(f64::MIN_POSITIVE));
    let mut first = true;
    let mut after_reject = false;
    let mut consecutive = 0;
    let mut status = RunStatus::Completed;

    'samples: for &target in sample_times {
        while t < target {
            let (mut h_step, mut landing) = clamp_to_target(t, h, target);
            let mut stages = 0;
            let mut lambda_eff = 0.0;
            if let Stepper::Sts(family) = stepper {
                lambda_eff = eig.current(rhs, t, &u, &mut stats)?;
                stages = match sts::stage_count(h_step, lambda_eff, family, cfg.eig.stage_cap) {
                    Ok(s) => s,
                    Err(Error::StageCap { .. }) => {
                        h_step = sts::max_step_for_cap(lambda_eff, family, cfg.eig.stage_cap) * (1.0 - 1e-12);
                        landing = false;
                        cfg.eig.stage_cap
                    }
                    Err(e) => return Err(e),
                };
            }
            let result = trial(&stepper, rhs, t, &u, h_step, stages, cfg, &mut stats, true);
            stats.attempted += 1;
            let (err, outcome) = match result {
                Ok(tr) => (wrms_slice(cfg.norm, &layout, &tr.error, &u, &cfg.tol), Some(tr)),
                Err(_) => (f64::INFINITY, None),
            };
            let accepted = err <= 1.0 && outcome.is_some();
            if cfg.record_log {
                log.push(StepRecord { t, h: h_step, err, accepted, stages, lambda_eff });
            }
            if accepted {
                let tr = outcome.unwrap();
                stats.accepted += 1;
                stats.stages_total += tr.stages;
                u = tr.f_next;
                t = if landing { target } else { t + h_step };
                consecutive = 0;
                eig.note_accept();
                let max_growth = if first {
                    ctl.first_growth
                } else if after_reject {
                    1.0
                } else {
                    ctl.growth
                };
                let factor = ctl.factor(err, q, max_growth);
                let mut h_new = h_step * factor;
                if landing && factor >= 1.0 {
                    h_new = h_new.max(h.min(h_step * max_growth.max(1.0) * 1e6));
                }
                h = h_new;
                first = false;
                after_reject = false;
            } else {
                if let Some(tr) = &outcome {
                    stats.stages_total += tr.stages;
                }
                stats.rejected += 1;
                consecutive += 1;
                eig.note_reject();
                h = h_step * ctl.factor(err, q, 1.0).min(1.0);
                after_reject = true;
                if consecutive >= ctl.max_consecutive_rejections {
                    status = RunStatus::Aborted { t, reason: format!("{consecutive} consecutive rejected steps") };
                    break 'samples;
                }
            }
            if h < h_min {
                status = RunStatus::Aborted { t, reason: format!("step size {h:e} fell below h_min {h_min:e}") };
                break 'samples;
            }
        }
        samples.push(u.clone());
    }
    stats.wall_time = start.elapsed();
    stats.rhs_evals = counted.count();
    Ok(RunOutput { sample_times: sample_times.to_vec(), samples, stats, log, status })
}

/// Fixed-step integration with step `h`, landing exactly on sample times.
///
/// The run stops early, flagged as blown up, once the state grows past
/// [`crate::ssp::BLOWUP_FACTOR`] times its initial max-norm or turns non-finite.
pub fn advance_fixed(rhs: &dyn Rhs, u0: &[f64], h: f64, sample_times: &[f64], cfg: &SolverConfig) -> Result<RunOutput> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("fixed step must be > 0, got {h}")));
    }
    cfg.tol.validate()?;
    check_samples(0.0, sample_times)?;
    if u0.len() != rhs.layout().len() {
        return Err(Error::LayoutMismatch(format!("u0 has {} entries, operator {}", u0.len(), rhs.layout().len())));
    }
    let counted = CountingRhs::new(rhs);
    let rhs: &dyn Rhs = &counted;
    let stepper = build_stepper(rhs, cfg.method)?;
    let mut eig = EigTracker::new(cfg.eig, cfg.tol, cfg.norm);
    let init_max = max_abs(u0);

    let mut stats = RunStats::default();
    let mut log = vec![];
    let mut samples = vec![];
    let start = Instant::now();
    let mut t = 0.0;
    let mut u = u0.to_vec();
    let mut status = RunStatus::Completed;

    'samples: for &target in sample_times {
        while t < target {
            let (h_step, landing) = if h >= target - t { (target - t, true) } else { (h, false) };
            let mut stages = 0;
            let mut lambda_eff = 0.0;
            if let Stepper::Sts(family) = stepper {
                lambda_eff = eig.current(rhs, t, &u, &mut stats)?;
                stages = sts::stage_count(h_step, lambda_eff, family, cfg.eig.stage_cap)?;
            }
            stats.attempted += 1;
            match trial(&stepper, rhs, t, &u, h_step, stages, cfg, &mut stats, false) {
                Ok(tr) => {
                    stats.accepted += 1;
                    stats.stages_total += tr.stages;
                    if cfg.record_log {
                        log.push(StepRecord { t, h: h_step, err: f64::NAN, accepted: true, stages, lambda_eff });
                    }
                    u = tr.f_next;
                    t = if landing { target } else { t + h_step };
                    eig.note_accept();
                    if is_blown_up(&u, init_max) {
                        status = RunStatus::BlewUp { t };
                        break 'samples;
                    }
                }
                Err(StepFailure::NonFinite) => {
                    status = RunStatus::BlewUp { t };
                    break 'samples;
                }
                Err(other) => {
                    status = RunStatus::Aborted { t, reason: other.to_string() };
                    break 'samples;
                }
            }
        }
        samples.push(u.clone());
    }
    stats.wall_time = start.elapsed();
    stats.rhs_evals = counted.count();
    Ok(RunOutput { sample_times: sample_times.to_vec(), samples, stats, log, status })
}
