//! Minimisation: Adam followed by BFGS, or L-BFGS alone, with a strong Wolfe
//! line search and finite-difference gradients.
//!
//! Objectives return `+∞` to signal an infeasible point; the line search treats
//! that as a rejected trial step.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ParamSign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub max_iter: usize,
    pub tol: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.01, max_iter: 1000, tol: 1e-6, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum QuasiNewton {
    Bfgs,
    Lbfgs { memory: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LineSearch {
    StrongWolfe { c1: f64, c2: f64 },
    Fixed { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiNewtonConfig {
    pub method: QuasiNewton,
    pub line_search: LineSearch,
    pub max_iter: usize,
    pub param_tol: f64,
}

impl QuasiNewtonConfig {
    pub fn bfgs() -> Self {
        Self {
            method: QuasiNewton::Bfgs,
            line_search: LineSearch::StrongWolfe { c1: 1e-4, c2: 0.9 },
            max_iter: 1000,
            param_tol: 1e-5,
        }
    }

    pub fn lbfgs() -> Self {
        Self { method: QuasiNewton::Lbfgs { memory: 10 }, ..Self::bfgs() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GradientSpec {
    Analytic,
    CentralDifference { rel_step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptSchedule {
    pub phase1: Option<AdamConfig>,
    pub phase2: Option<QuasiNewtonConfig>,
    pub gradient: GradientSpec,
    #[serde(default)]
    pub reparameterize: bool,
}

impl OptSchedule {
    /// Adam then BFGS.
    pub fn adam_bfgs() -> Self {
        Self {
            phase1: Some(AdamConfig::default()),
            phase2: Some(QuasiNewtonConfig::bfgs()),
            gradient: GradientSpec::CentralDifference { rel_step: 1e-6 },
            reparameterize: false,
        }
    }

    /// L-BFGS with strong Wolfe line search.
    pub fn lbfgs() -> Self {
        Self {
            phase1: None,
            phase2: Some(QuasiNewtonConfig::lbfgs()),
            gradient: GradientSpec::CentralDifference { rel_step: 1e-6 },
            reparameterize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = &self.phase1 {
            if !(a.lr > 0.0) || !(a.tol > 0.0) {
                return Err(Error::InvalidInput("Adam needs lr > 0 and tol > 0".into()));
            }
        }
        if let Some(q) = &self.phase2 {
            if !(q.param_tol > 0.0) {
                return Err(Error::InvalidInput("param_tol must be positive".into()));
            }
            if let LineSearch::StrongWolfe { c1, c2 } = q.line_search {
                if !(0.0 < c1 && c1 < c2 && c2 < 1.0) {
                    return Err(Error::InvalidInput("strong Wolfe needs 0 < c1 < c2 < 1".into()));
                }
            }
            if let QuasiNewton::Lbfgs { memory } = q.method {
                if memory == 0 {
                    return Err(Error::InvalidInput("L-BFGS memory must be positive".into()));
                }
            }
        }
        if let GradientSpec::CentralDifference { rel_step } = self.gradient {
            if !(rel_step > 0.0) {
                return Err(Error::InvalidInput("gradient step must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ParamTol,
    GradientTol,
    ObjectiveTol,
    MaxIter,
    LineSearchFailed,
    GradientFailed,
    InfeasibleStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub phase: u8,
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

/// Diagnostics of an accepted quasi-Newton step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub alpha: f64,
    pub f0: f64,
    pub f1: f64,
    pub slope0: f64,
    pub slope1: f64,
}

impl StepDiagnostics {
    pub fn armijo(&self, c1: f64) -> bool {
        self.f1 <= self.f0 + c1 * self.alpha * self.slope0
    }
    pub fn curvature(&self, c2: f64) -> bool {
        self.slope1.abs() <= c2 * self.slope0.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_clock: f64,
    pub failure_reason: Option<String>,
    pub stop_reason: StopReason,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRow>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub steps: Vec<StepDiagnostics>,
}

/// Central-difference gradient with step `max(rel·|θᵢ|, 1e-8)`; an infinite
/// probe falls back to a one-sided difference.
pub fn gradient_fd<F: Fn(&[f64]) -> f64 + ?Sized>(
    f: &F,
    theta: &[f64],
    f0: Option<f64>,
    rel_step: f64,
) -> Result<Vec<f64>> {
    let mut x = theta.to_vec();
    let mut g = vec![0.0; theta.len()];
    let mut center = f0;
    for i in 0..theta.len() {
        let s = (rel_step * theta[i].abs()).max(1e-8);
        x[i] = theta[i] + s;
        let fp = f(&x);
        x[i] = theta[i] - s;
        let fm = f(&x);
        x[i] = theta[i];
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * s)
        } else {
            let c = *center.get_or_insert_with(|| f(theta));
            if !c.is_finite() {
                return Err(Error::Estimation("objective not finite at gradient centre".into()));
            }
            if fp.is_finite() {
                (fp - c) / s
            } else if fm.is_finite() {
                (c - fm) / s
            } else {
                return Err(Error::Estimation(format!("objective infinite on both sides of parameter {i}")));
            }
        };
        if !g[i].is_finite() {
            return Err(Error::Estimation(format!("non-finite gradient component {i}")));
        }
    }
    Ok(g)
}

type GradFn<'a> = dyn Fn(&[f64]) -> Option<Vec<f64>> + 'a;

struct Problem<'a> {
    f: &'a dyn Fn(&[f64]) -> f64,
    grad: Option<&'a GradFn<'a>>,
    rel_step: f64,
    evals: usize,
}

impl Problem<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn gradient(&mut self, x: &[f64], f0: f64) -> Result<Vec<f64>> {
        if let Some(g) = self.grad {
            let v = g(x).ok_or_else(|| Error::Estimation("analytic gradient failed".into()))?;
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Estimation("non-finite analytic gradient".into()));
            }
            return Ok(v);
        }
        self.evals += 2 * x.len();
        let f = self.f;
        let wrapped = |y: &[f64]| {
            let v = f(y);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        gradient_fd(&wrapped, x, Some(f0), self.rel_step)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], a: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(xi, pi)| xi + a * pi).collect()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

fn trial(pr: &mut Problem, x: &[f64], p: &[f64], a: f64) -> (Vec<f64>, f64) {
    let xa = axpy(x, a, p);
    let fa = pr.value(&xa);
    (xa, fa)
}

/// Strong Wolfe line search (bracketing plus cubic-interpolation zoom).
fn strong_wolfe(pr: &mut Problem, cur: &Point, p: &[f64], c1: f64, c2: f64, a_init: f64) -> Option<(Point, f64)> {
    let f0 = cur.f;
    let d0 = dot(&cur.g, p);
    if !(d0 < 0.0) {
        return None;
    }
    let a_max = 1e10;
    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut d_prev = d0;
    let mut a = a_init;
    for i in 0..50 {
        let (xa, fa) = trial(pr, &cur.x, p, a);
        if !fa.is_finite() || fa > f0 + c1 * a * d0 || (i > 0 && fa >= f_prev) {
            return zoom(pr, cur, p, c1, c2, (a_prev, f_prev, d_prev), (a, fa, f64::NAN));
        }
        let ga = pr.gradient(&xa, fa).ok()?;
        let da = dot(&ga, p);
        if da.abs() <= -c2 * d0 {
            return Some((Point { x: xa, f: fa, g: ga }, a));
        }
        if da >= 0.0 {
            return zoom(pr, cur, p, c1, c2, (a, fa, da), (a_prev, f_prev, d_prev));
        }
        a_prev = a;
        f_prev = fa;
        d_prev = da;
        a = (2.0 * a).min(a_max);
    }
    None
}

/// Minimiser of the cubic through `(a, fa, da)` and `(b, fb, db)`, safeguarded.
fn cubic_min(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (x0, f0, d0) = a;
    let (x1, f1, d1) = b;
    if !(f1.is_finite() && d1.is_finite() && d0.is_finite()) {
        return None;
    }
    let d_1 = d0 + d1 - 3.0 * (f0 - f1) / (x0 - x1);
    let rad = d_1 * d_1 - d0 * d1;
    if !(rad >= 0.0) {
        return None;
    }
    let d_2 = (x1 - x0).signum() * rad.sqrt();
    let t = x1 - (x1 - x0) * (d1 + d_2 - d_1) / (d1 - d0 + 2.0 * d_2);
    t.is_finite().then_some(t)
}

fn zoom(
    pr: &mut Problem,
    cur: &Point,
    p: &[f64],
    c1: f64,
    c2: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
) -> Option<(Point, f64)> {
    let f0 = cur.f;
    let d0 = dot(&cur.g, p);
    for _ in 0..60 {
        let (a_lo, a_hi) = (lo.0, hi.0);
        let width = (a_hi - a_lo).abs();
        if width < 1e-16 * a_lo.abs().max(1e-16) {
            return None;
        }
        let (left, right) = (a_lo.min(a_hi), a_lo.max(a_hi));
        let a = match cubic_min(lo, hi) {
            Some(t) if t > left + 0.1 * width && t < right - 0.1 * width => t,
            _ => 0.5 * (a_lo + a_hi),
        };
        let (xa, fa) = trial(pr, &cur.x, p, a);
        if !fa.is_finite() || fa > f0 + c1 * a * d0 || fa >= lo.1 {
            hi = (a, fa, f64::NAN);
            continue;
        }
        let ga = pr.gradient(&xa, fa).ok()?;
        let da = dot(&ga, p);
        if da.abs() <= -c2 * d0 {
            return Some((Point { x: xa, f: fa, g: ga }, a));
        }
        if da * (a_hi - a_lo) >= 0.0 {
            hi = lo;
        }
        lo = (a, fa, da);
    }
    None
}

fn fixed_step(pr: &mut Problem, cur: &Point, p: &[f64], step: f64) -> Option<(Point, f64)> {
    let (xa, fa) = trial(pr, &cur.x, p, step);
    if !fa.is_finite() || fa >= cur.f {
        return None;
    }
    let ga = pr.gradient(&xa, fa).ok()?;
    Some((Point { x: xa, f: fa, g: ga }, step))
}

struct Outcome {
    best: Point,
    iterations: usize,
    stop: StopReason,
    trace: Vec<TraceRow>,
    steps: Vec<StepDiagnostics>,
}

fn adam(pr: &mut Problem, start: Point, cfg: &AdamConfig) -> Outcome {
    let n = start.x.len();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut x = start.x.clone();
    let mut g = start.g.clone();
    let mut f_last = start.f;
    let mut best = start;
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIter;
    let mut iterations = 0;
    for t in 1..=cfg.max_iter {
        iterations = t;
        let (b1t, b2t) = (1.0 - cfg.beta1.powi(t as i32), 1.0 - cfg.beta2.powi(t as i32));
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            x[i] -= cfg.lr * (m[i] / b1t) / ((v[i] / b2t).sqrt() + cfg.eps);
        }
        let fx = pr.value(&x);
        if !fx.is_finite() {
            stop = StopReason::LineSearchFailed;
            break;
        }
        let Ok(gx) = pr.gradient(&x, fx) else {
            stop = StopReason::GradientFailed;
            break;
        };
        trace.push(TraceRow { phase: 1, iteration: t, objective: fx, grad_norm: norm(&gx) });
        g = gx;
        if fx < best.f {
            best = Point { x: x.clone(), f: fx, g: g.clone() };
        }
        if (fx - f_last).abs() < cfg.tol {
            stop = StopReason::ObjectiveTol;
            break;
        }
        f_last = fx;
    }
    Outcome { best, iterations, stop, trace, steps: Vec::new() }
}

fn quasi_newton(pr: &mut Problem, start: Point, cfg: &QuasiNewtonConfig) -> Outcome {
    let n = start.x.len();
    let mut cur = start;
    let mut trace = Vec::new();
    let mut steps = Vec::new();
    let mut hinv: Vec<f64> = Vec::new();
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stop = StopReason::MaxIter;
    let mut iterations = 0;
    let mut scale = 1.0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let gn = norm(&cur.g);
        if gn == 0.0 {
            stop = StopReason::GradientTol;
            break;
        }
        let p: Vec<f64> = match cfg.method {
            QuasiNewton::Bfgs => {
                if hinv.is_empty() {
                    cur.g.iter().map(|gi| -gi * scale).collect()
                } else {
                    (0..n).map(|i| -(0..n).map(|j| hinv[i * n + j] * cur.g[j]).sum::<f64>()).collect()
                }
            }
            QuasiNewton::Lbfgs { .. } => two_loop(&cur.g, &pairs, scale),
        };
        let a_init = if hinv.is_empty() && pairs.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
        let res = match cfg.line_search {
            LineSearch::StrongWolfe { c1, c2 } => strong_wolfe(pr, &cur, &p, c1, c2, a_init),
            LineSearch::Fixed { step } => fixed_step(pr, &cur, &p, step),
        };
        let Some((next, alpha)) = res else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        steps.push(StepDiagnostics {
            alpha,
            f0: cur.f,
            f1: next.f,
            slope0: dot(&cur.g, &p),
            slope1: dot(&next.g, &p),
        });
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let step_norm = norm(&s);
        cur = next;
        trace.push(TraceRow { phase: 2, iteration: it, objective: cur.f, grad_norm: norm(&cur.g) });
        if step_norm < cfg.param_tol {
            stop = StopReason::ParamTol;
            break;
        }
        if sy > 1e-12 * step_norm * norm(&y) {
            let rho = 1.0 / sy;
            match cfg.method {
                QuasiNewton::Bfgs => {
                    if hinv.is_empty() {
                        let g0 = sy / dot(&y, &y);
                        hinv = vec![0.0; n * n];
                        for i in 0..n {
                            hinv[i * n + i] = g0;
                        }
                    }
                    bfgs_update(&mut hinv, &s, &y, rho);
                }
                QuasiNewton::Lbfgs { memory } => {
                    scale = sy / dot(&y, &y);
                    if pairs.len() == memory {
                        pairs.pop_front();
                    }
                    pairs.push_back((s, y, rho));
                }
            }
        }
    }
    Outcome { best: cur, iterations, stop, trace, steps }
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, scale: f64) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    for qi in q.iter_mut() {
        *qi *= scale;
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// `H ← (I - ρsyᵀ) H (I - ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], rho: f64) {
    let n = s.len();
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Minimise `f` from `theta_init`.
pub fn minimize(f: &dyn Fn(&[f64]) -> f64, theta_init: &[f64], schedule: &OptSchedule) -> FitResult {
    minimize_with(f, None, theta_init, None, schedule)
}

/// Full entry point: optional analytic gradient and optional sign
/// constraints for the log reparameterisation.
pub fn minimize_with(
    f: &dyn Fn(&[f64]) -> f64,
    grad: Option<&GradFn>,
    theta_init: &[f64],
    signs: Option<&[ParamSign]>,
    schedule: &OptSchedule,
) -> FitResult {
    let started = Instant::now();
    let fail = |reason: String, stop: StopReason| FitResult {
        theta_hat: theta_init.to_vec(),
        objective: f64::INFINITY,
        iterations: 0,
        converged: false,
        wall_clock: started.elapsed().as_secs_f64(),
        failure_reason: Some(reason),
        stop_reason: stop,
        trace: Vec::new(),
        steps: Vec::new(),
    };
    if let Err(e) = schedule.validate() {
        return fail(e.to_string(), StopReason::InfeasibleStart);
    }
    let use_grad = matches!(schedule.gradient, GradientSpec::Analytic);
    if use_grad && grad.is_none() {
        return fail("analytic gradient requested but none supplied".into(), StopReason::GradientFailed);
    }
    let rel_step = match schedule.gradient {
        GradientSpec::CentralDifference { rel_step } => rel_step,
        GradientSpec::Analytic => 1e-6,
    };
    let signs: Vec<ParamSign> = match (schedule.reparameterize, signs) {
        (true, Some(s)) if s.len() == theta_init.len() => s.to_vec(),
        _ => vec![ParamSign::Free; theta_init.len()],
    };
    let Some(phi_init) = to_unconstrained(theta_init, &signs) else {
        return fail("initial point violates the sign constraints".into(), StopReason::InfeasibleStart);
    };
    let sg = signs.clone();
    let fphi = move |phi: &[f64]| f(&from_unconstrained(phi, &sg));
    let sg2 = signs.clone();
    let gphi = move |phi: &[f64]| -> Option<Vec<f64>> {
        let theta = from_unconstrained(phi, &sg2);
        let g = grad?(&theta)?;
        Some(g.iter().zip(&theta).zip(&sg2).map(|((gi, ti), s)| if *s == ParamSign::Free { *gi } else { gi * ti }).collect())
    };
    let mut pr = Problem {
        f: &fphi,
        grad: if use_grad { Some(&gphi) } else { None },
        rel_step,
        evals: 0,
    };
    let f0 = pr.value(&phi_init);
    if !f0.is_finite() {
        return fail("objective is not finite at the initial point".into(), StopReason::InfeasibleStart);
    }
    let g0 = match pr.gradient(&phi_init, f0) {
        Ok(g) => g,
        Err(e) => return fail(e.to_string(), StopReason::GradientFailed),
    };
    let mut point = Point { x: phi_init, f: f0, g: g0 };
    let mut trace = vec![TraceRow { phase: 0, iteration: 0, objective: f0, grad_norm: norm(&point.g) }];
    let mut steps = Vec::new();
    let mut iterations = 0;
    let mut stop = StopReason::MaxIter;
    if let Some(a) = &schedule.phase1 {
        let out = adam(&mut pr, point, a);
        iterations += out.iterations;
        stop = out.stop;
        trace.extend(out.trace);
        point = out.best;
    }
    if let Some(q) = &schedule.phase2 {
        let out = quasi_newton(&mut pr, point, q);
        iterations += out.iterations;
        stop = out.stop;
        trace.extend(out.trace);
        steps = out.steps;
        point = out.best;
    }
    let converged = point.f.is_finite()
        && match stop {
            StopReason::ParamTol | StopReason::GradientTol | StopReason::ObjectiveTol => true,
            // a line search that cannot improve along a vanishing slope is a converged point
            StopReason::LineSearchFailed => norm(&point.g) <= 1e-6 * (1.0 + point.f.abs()),
            _ => false,
        };
    let failure_reason = (!converged).then(|| format!("stopped without convergence: {stop:?}"));
    FitResult {
        theta_hat: from_unconstrained(&point.x, &signs),
        objective: point.f,
        iterations,
        converged,
        wall_clock: started.elapsed().as_secs_f64(),
        failure_reason,
        stop_reason: stop,
        trace,
        steps,
    }
}

fn to_unconstrained(theta: &[f64], signs: &[ParamSign]) -> Option<Vec<f64>> {
    theta
        .iter()
        .zip(signs)
        .map(|(t, s)| match s {
            ParamSign::Free => Some(*t),
            ParamSign::Positive => (*t > 0.0).then(|| t.ln()),
            ParamSign::Negative => (*t < 0.0).then(|| (-t).ln()),
        })
        .collect()
}

fn from_unconstrained(phi: &[f64], signs: &[ParamSign]) -> Vec<f64> {
    phi.iter()
        .zip(signs)
        .map(|(p, s)| match s {
            ParamSign::Free => *p,
            ParamSign::Positive => p.exp(),
            ParamSign::Negative => -p.exp(),
        })
        .collect()
}
