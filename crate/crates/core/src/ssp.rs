//! Strong-stability-preserving explicit Runge-Kutta methods with embedded
//! error estimates: SSP(2,2), SSP(4,3) and the ten-stage SSP(10,4).
//!
//! Steps run in low-storage form. The embedded solution is accumulated in one
//! running register as stage derivatives become available.

use crate::error::{Error, Result, StepFailure};
use crate::problem::Rhs;

/// Shu-Osher rows for one scheme plus the derived Butcher form.
///
/// Row `i` of `alpha`/`beta` produces stage `i + 1` (stage 0 is `f_n`); the last
/// row produces the step result. The embedding has its own output row.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuOsherScheme {
    pub name: &'static str,
    pub stages: usize,
    pub order: usize,
    pub embedded_order: usize,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub alpha_embedded: Vec<f64>,
    pub beta_embedded: Vec<f64>,
    /// Butcher stage matrix `A` (strictly lower triangular).
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub b_embedded: Vec<f64>,
    pub c: Vec<f64>,
}

impl ShuOsherScheme {
    /// `min alpha_ij / beta_ij` over entries with `beta_ij > 0`.
    pub fn ssp_coefficient(&self) -> f64 {
        ssp_coefficient(&self.alpha, &self.beta)
    }

    pub fn embedded_ssp_coefficient(&self) -> f64 {
        ssp_coefficient(std::slice::from_ref(&self.alpha_embedded), std::slice::from_ref(&self.beta_embedded))
    }
}

fn ssp_coefficient(alpha: &[Vec<f64>], beta: &[Vec<f64>]) -> f64 {
    let mut c = f64::INFINITY;
    for (ar, br) in alpha.iter().zip(beta) {
        for (a, b) in ar.iter().zip(br) {
            if *b > 0.0 {
                c = c.min(a / b);
            }
        }
    }
    c
}

/// Converts Shu-Osher rows to Butcher form.
///
/// Stage `k` is `f_n + h sum_j A_kj F_j`; each row `z = sum_j alpha_j z_j + h beta_j F_j`
/// maps to `A_row = sum_j alpha_j A_j + beta_j e_j`.
pub fn butcher_from_shu_osher(alpha: &[Vec<f64>], beta: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let s = alpha.len();
    let mut a = vec![vec![0.0; s]; s + 1];
    for i in 0..s {
        let mut row = vec![0.0; s];
        for j in 0..alpha[i].len() {
            for (r, prev) in row.iter_mut().zip(&a[j]) {
                *r += alpha[i][j] * prev;
            }
            row[j] += beta[i][j];
        }
        a[i + 1] = row;
    }
    let b = a.pop().expect("at least one row");
    (a, b)
}

fn embedded_weights(alpha: &[Vec<f64>], beta: &[Vec<f64>], ae: &[f64], be: &[f64]) -> Vec<f64> {
    let (a, _) = butcher_from_shu_osher(alpha, beta);
    let s = a.len();
    let mut row = vec![0.0; s];
    for j in 0..s {
        for (r, prev) in row.iter_mut().zip(&a[j]) {
            *r += ae[j] * prev;
        }
        row[j] += be[j];
    }
    row
}

fn build(
    name: &'static str,
    order: usize,
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    alpha_embedded: Vec<f64>,
    beta_embedded: Vec<f64>,
) -> ShuOsherScheme {
    let (a, b) = butcher_from_shu_osher(&alpha, &beta);
    let c = a.iter().map(|r| r.iter().sum()).collect();
    let b_embedded = embedded_weights(&alpha, &beta, &alpha_embedded, &beta_embedded);
    ShuOsherScheme {
        name,
        stages: alpha.len(),
        order,
        embedded_order: order - 1,
        alpha,
        beta,
        alpha_embedded,
        beta_embedded,
        a,
        b,
        b_embedded,
        c,
    }
}

/// Row with `vals` placed at the given stage indices, padded with zeros.
fn row(len: usize, vals: &[(usize, f64)]) -> Vec<f64> {
    let mut r = vec![0.0; len];
    for (j, v) in vals {
        r[*j] = *v;
    }
    r
}

pub fn ssp_scheme(order: usize) -> Result<ShuOsherScheme> {
    match order {
        2 => Ok(build(
            "ssp2",
            2,
            vec![row(1, &[(0, 1.0)]), row(2, &[(0, 0.5), (1, 0.5)])],
            vec![row(1, &[(0, 1.0)]), row(2, &[(1, 0.5)])],
            row(2, &[(0, 0.5), (1, 0.5)]),
            row(2, &[(0, 0.25), (1, 0.25)]),
        )),
        3 => Ok(build(
            "ssp3",
            3,
            vec![
                row(1, &[(0, 1.0)]),
                row(2, &[(1, 1.0)]),
                row(3, &[(0, 2.0 / 3.0), (2, 1.0 / 3.0)]),
                row(4, &[(3, 1.0)]),
            ],
            vec![row(1, &[(0, 0.5)]), row(2, &[(1, 0.5)]), row(3, &[(2, 1.0 / 6.0)]), row(4, &[(3, 0.5)])],
            row(4, &[(0, 1.0 / 3.0), (2, 2.0 / 3.0)]),
            row(4, &[(2, 1.0 / 3.0)]),
        )),
        4 => {
            let s = 10;
            let mut alpha = vec![];
            let mut beta = vec![];
            for i in 0..s {
                let len = i + 1;
                if i == 4 {
                    // stage 6 = 3/5 f_n + 2/5 z_5 + h/15 F_5
                    alpha.push(row(len, &[(0, 0.6), (4, 0.4)]));
                    beta.push(row(len, &[(4, 1.0 / 15.0)]));
                } else if i == 9 {
                    // result = 1/25 f_n + 9/25 z_5 + 3/5 z_10 + 3h/50 F_5 + h/10 F_10
                    alpha.push(row(len, &[(0, 1.0 / 25.0), (4, 9.0 / 25.0), (9, 0.6)]));
                    beta.push(row(len, &[(4, 3.0 / 50.0), (9, 0.1)]));
                } else {
                    alpha.push(row(len, &[(i, 1.0)]));
                    beta.push(row(len, &[(i, 1.0 / 6.0)]));
                }
            }
            Ok(build(
                "ssp4",
                4,
                alpha,
                beta,
                row(s, &[(2, 1.0 / 3.0), (4, 5.0 / 24.0), (8, 11.0 / 24.0)]),
                row(s, &[(4, 7.0 / 72.0), (8, 13.0 / 48.0)]),
            ))
        }
        other => Err(Error::InvalidArgument(format!("no SSP scheme of order {other}; use 2, 3 or 4"))),
    }
}

/// Growth factor over the initial max-norm past which a state counts as blown up.
pub const BLOWUP_FACTOR: f64 = 1e10;

/// `true` when `u` is non-finite or exceeds `BLOWUP_FACTOR * initial_max`.
pub fn is_blown_up(u: &[f64], initial_max: f64) -> bool {
    let limit = BLOWUP_FACTOR * initial_max.max(f64::MIN_POSITIVE);
    u.iter().any(|x| !x.is_finite() || x.abs() > limit)
}

#[derive(Debug, Clone)]
pub struct SspStep {
    pub f_next: Vec<f64>,
    /// `f_next - f_embedded`.
    pub error: Vec<f64>,
}

/// Register set reused across steps.
#[derive(Debug, Default)]
struct Registers {
    q1: Vec<f64>,
    q2: Vec<f64>,
    g: Vec<f64>,
    emb: Vec<f64>,
}

impl Registers {
    fn new(f_n: &[f64]) -> Self {
        let n = f_n.len();
        Self { q1: f_n.to_vec(), q2: vec![0.0; n], g: vec![0.0; n], emb: f_n.to_vec() }
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One step of `scheme` in low-storage form.
pub fn ssp_step(
    rhs: &dyn Rhs,
    t_n: f64,
    f_n: &[f64],
    h: f64,
    scheme: &ShuOsherScheme,
) -> std::result::Result<SspStep, StepFailure> {
    let mut r = Registers::new(f_n);
    let be = &scheme.b_embedded;
    match scheme.order {
        2 => {
            rhs.eval(t_n, &r.q1, &mut r.g);
            axpy(&mut r.emb, h * be[0], &r.g);
            axpy(&mut r.q1, h, &r.g);
            rhs.eval(t_n + h, &r.q1, &mut r.g);
            axpy(&mut r.emb, h * be[1], &r.g);
            // 1/2 f_n + 1/2 (z_2 + h F_2), written relative to f_n
            for i in 0..f_n.len() {
                r.q1[i] = f_n[i] + 0.5 * ((r.q1[i] - f_n[i]) + h * r.g[i]);
            }
        }
        3 => {
            for k in 0..2 {
                rhs.eval(t_n + 0.5 * h * k as f64, &r.q1, &mut r.g);
                axpy(&mut r.emb, h * be[k], &r.g);
                axpy(&mut r.q1, 0.5 * h, &r.g);
            }
            rhs.eval(t_n + h, &r.q1, &mut r.g);
            axpy(&mut r.emb, h * be[2], &r.g);
            for i in 0..f_n.len() {
                r.q1[i] = f_n[i] + ((r.q1[i] - f_n[i]) + 0.5 * h * r.g[i]) / 3.0;
            }
            rhs.eval(t_n + 0.5 * h, &r.q1, &mut r.g);
            axpy(&mut r.emb, h * be[3], &r.g);
            axpy(&mut r.q1, 0.5 * h, &r.g);
        }
        4 => {
            // registers are kept relative to f_n so a steady state stays bit-exact;
            // q2 holds 9/25 of the offset reached after the fifth update
            let c = &scheme.c;
            for k in 0..5 {
                rhs.eval(t_n + c[k] * h, &r.q1, &mut r.g);
                axpy(&mut r.emb, h * be[k], &r.g);
                axpy(&mut r.q1, h / 6.0, &r.g);
            }
            for i in 0..f_n.len() {
                let d = r.q1[i] - f_n[i];
                r.q2[i] = 9.0 / 25.0 * d;
                r.q1[i] = f_n[i] + 0.4 * d;
            }
            for k in 5..9 {
                rhs.eval(t_n + c[k] * h, &r.q1, &mut r.g);
                axpy(&mut r.emb, h * be[k], &r.g);
                axpy(&mut r.q1, h / 6.0, &r.g);
            }
            rhs.eval(t_n + c[9] * h, &r.q1, &mut r.g);
            axpy(&mut r.emb, h * be[9], &r.g);
            for i in 0..f_n.len() {
                r.q1[i] = f_n[i] + (r.q2[i] + 0.6 * (r.q1[i] - f_n[i]) + 0.1 * h * r.g[i]);
            }
        }
        _ => unreachable!("schemes are built by ssp_scheme"),
    }
    if !r.q1.iter().all(|x| x.is_finite()) {
        return Err(StepFailure::NonFinite);
    }
    let error = r.q1.iter().zip(&r.emb).map(|(a, b)| a - b).collect();
    Ok(SspStep { f_next: r.q1, error })
}
