//! Parametric model families: map a parameter vector to each estimator's objective.

use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{
    em_objective, ga_objective, ll_objective, sk_em_velocity_objective, sk_ga3_objective,
    sk_ll_lamperti_objective, ss_objective, Estimator, ObjectiveValue, ObservationSet, Status,
};
use crate::error::{Error, Result};
use crate::models::linear::{ou_model, LinearSde};
use crate::models::sk::{sk_split_roots, sk_split_with, RootChoice, SkParams, SK_PARAM_NAMES};
use crate::models::wf::{in_open_simplex, wf_split, WfModel, WfParams, WF_PARAM_NAMES};
use crate::models::{SplitModel, ZeroRemainder};

/// Sign constraint used by the optional log reparameterisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSign {
    Free,
    Positive,
    Negative,
}

pub trait ModelFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn param_names(&self) -> Vec<String>;
    fn objective(&self, est: Estimator, data: &ObservationSet, theta: &[f64]) -> ObjectiveValue;

    fn n_params(&self) -> usize {
        self.param_names().len()
    }

    fn signs(&self) -> Vec<ParamSign> {
        vec![ParamSign::Free; self.n_params()]
    }
}

fn invalid() -> ObjectiveValue {
    ObjectiveValue { value: f64::INFINITY, per_transition: Vec::new(), status: Status::InvalidParameters }
}

fn check_len(theta: &[f64], n: usize) -> bool {
    theta.len() == n && theta.iter().all(|v| v.is_finite())
}

/// Wright–Fisher diffusion in reduced parameters `(κ, K, λ)`, split at the
/// empirical mean of the data.
#[derive(Debug, Clone, Copy, Default)]
pub struct WfFamily;

impl ModelFamily for WfFamily {
    fn dim(&self) -> usize {
        3
    }

    fn param_names(&self) -> Vec<String> {
        WF_PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn signs(&self) -> Vec<ParamSign> {
        let mut s = vec![ParamSign::Free; 15];
        s[..3].fill(ParamSign::Positive);
        s
    }

    fn objective(&self, est: Estimator, data: &ObservationSet, theta: &[f64]) -> ObjectiveValue {
        if data.dim() != 3 || !check_len(theta, 15) {
            return invalid();
        }
        if (0..=data.n_transitions()).any(|k| !in_open_simplex(data.state(k))) {
            return invalid();
        }
        let Ok(p) = WfParams::from_theta(theta) else { return invalid() };
        match est {
            Estimator::Ss => {
                let m = data.mean();
                match wf_split(&p, &Vector3::new(m[0], m[1], m[2])) {
                    Ok(split) => ss_objective(&split, data),
                    Err(_) => invalid(),
                }
            }
            Estimator::Em => em_objective(&WfModel::new(p), data),
            Estimator::Ga => ga_objective(&WfModel::new(p), data),
            Estimator::Ll => ll_objective(&WfModel::new(p), data),
        }
    }
}

/// Student Kramers oscillator, `θ = (η, a, b, c, d, α, β, γ)`.
#[derive(Debug, Clone, Copy)]
pub struct SkFamily {
    pub root: RootChoice,
}

impl Default for SkFamily {
    fn default() -> Self {
        Self { root: RootChoice::NearestMean }
    }
}

impl SkFamily {
    /// Resolve `NearestMean` into a fixed root at `theta` so the split centre
    /// cannot jump between wells while the parameters move.
    pub fn frozen_at(&self, data: &ObservationSet, theta: &[f64]) -> Result<Self> {
        if self.root != RootChoice::NearestMean {
            return Ok(*self);
        }
        let p = SkParams::from_theta(theta)?;
        let (mean, var) = (data.mean()[0], data.variance(0));
        let (plus, minus) = sk_split_roots(&p, mean, var);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::InvalidInput("split roots are not finite at the initial point".into()));
        }
        let root = if (plus - mean).abs() <= (minus - mean).abs() { RootChoice::Plus } else { RootChoice::Minus };
        Ok(Self { root })
    }
}

impl ModelFamily for SkFamily {
    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        SK_PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn signs(&self) -> Vec<ParamSign> {
        use ParamSign::*;
        vec![Positive, Negative, Free, Free, Free, Positive, Free, Positive]
    }

    fn objective(&self, est: Estimator, data: &ObservationSet, theta: &[f64]) -> ObjectiveValue {
        if data.dim() != 2 || !check_len(theta, 8) {
            return invalid();
        }
        let Ok(p) = SkParams::from_theta(theta) else { return invalid() };
        match est {
            Estimator::Ss => {
                if p.a == 0.0 {
                    return invalid();
                }
                match sk_split_with(&p, data.mean()[0], data.variance(0), self.root) {
                    Ok(split) => ss_objective(&split, data),
                    Err(_) => invalid(),
                }
            }
            Estimator::Em => sk_em_velocity_objective(&p, data),
            Estimator::Ga => sk_ga3_objective(&p, data),
            Estimator::Ll => sk_ll_lamperti_objective(&p, data),
        }
    }
}

/// One-dimensional OU process, `θ = (λ, m, σ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct OuFamily;

impl ModelFamily for OuFamily {
    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["lambda".into(), "m".into(), "sigma".into()]
    }

    fn signs(&self) -> Vec<ParamSign> {
        vec![ParamSign::Positive, ParamSign::Free, ParamSign::Positive]
    }

    fn objective(&self, est: Estimator, data: &ObservationSet, theta: &[f64]) -> ObjectiveValue {
        if data.dim() != 1 || !check_len(theta, 3) {
            return invalid();
        }
        let Ok(model) = ou_model(theta[0], theta[1], theta[2]) else { return invalid() };
        if est == Estimator::Ss {
            let split: SplitModel<1, ZeroRemainder> = SplitModel { linear: model, remainder: ZeroRemainder };
            return ss_objective(&split, data);
        }
        let Ok(sde) = LinearSde::<1>::new(model) else { return invalid() };
        match est {
            Estimator::Em => em_objective(&sde, data),
            Estimator::Ga => ga_objective(&sde, data),
            _ => ll_objective(&sde, data),
        }
    }
}

/// Exact OU transition likelihood in the same `log det + quadratic` convention.
pub fn ou_exact_objective(data: &ObservationSet, theta: &[f64]) -> ObjectiveValue {
    let (l, m, s) = (theta[0], theta[1], theta[2]);
    if data.dim() != 1 || !(l > 0.0) || !(s != 0.0) {
        return invalid();
    }
    let h = data.step();
    let e = (-l * h).exp();
    let var = s * s * (1.0 - e * e) / (2.0 * l);
    let terms: Vec<f64> = (1..=data.n_transitions())
        .map(|k| {
            let r = data.state(k)[0] - m - (data.state(k - 1)[0] - m) * e;
            var.ln() + r * r / var
        })
        .collect();
    let value = terms.iter().sum();
    ObjectiveValue { value, per_transition: terms, status: Status::Ok }
}

/// A family with some parameters pinned to fixed values.
#[derive(Clone)]
pub struct ConstrainedFamily {
    inner: Arc<dyn ModelFamily>,
    fixed: Vec<Option<f64>>,
}

impl ConstrainedFamily {
    pub fn new(inner: Arc<dyn ModelFamily>, fixed: &[(usize, f64)]) -> Result<Self> {
        let n = inner.n_params();
        let mut slots = vec![None; n];
        for &(i, v) in fixed {
            if i >= n || !v.is_finite() {
                return Err(Error::InvalidInput(format!("bad fixed parameter ({i}, {v})")));
            }
            slots[i] = Some(v);
        }
        Ok(Self { inner, fixed: slots })
    }

    /// Full parameter vector from the free ones.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut it = free.iter();
        self.fixed.iter().map(|f| f.unwrap_or_else(|| *it.next().unwrap_or(&f64::NAN))).collect()
    }

    /// Free sub-vector of a full parameter vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.fixed.iter().zip(full).filter(|(f, _)| f.is_none()).map(|(_, v)| *v).collect()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.fixed.len()).filter(|&i| self.fixed[i].is_none()).collect()
    }
}

impl ModelFamily for ConstrainedFamily {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn param_names(&self) -> Vec<String> {
        let names = self.inner.param_names();
        self.free_indices().into_iter().map(|i| names[i].clone()).collect()
    }

    fn signs(&self) -> Vec<ParamSign> {
        let s = self.inner.signs();
        self.free_indices().into_iter().map(|i| s[i]).collect()
    }

    fn objective(&self, est: Estimator, data: &ObservationSet, theta: &[f64]) -> ObjectiveValue {
        if theta.len() != self.n_params() {
            return invalid();
        }
        self.inner.objective(est, data, &self.expand(theta))
    }
}

/// Nested oscillator models used for model comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NestedSk {
    /// `b = d = α = β = 0`.
    M1,
    /// `b = d = 0`.
    M2,
    /// Full model.
    M3,
}

impl NestedSk {
    pub fn fixed(&self) -> Vec<(usize, f64)> {
        match self {
            NestedSk::M1 => vec![(2, 0.0), (4, 0.0), (5, 0.0), (6, 0.0)],
            NestedSk::M2 => vec![(2, 0.0), (4, 0.0)],
            NestedSk::M3 => vec![],
        }
    }

    pub fn family(&self, base: SkFamily) -> ConstrainedFamily {
        ConstrainedFamily::new(Arc::new(base), &self.fixed()).expect("static constraints are valid")
    }

    pub fn name(&self) -> &'static str {
        match self {
            NestedSk::M1 => "m1",
            NestedSk::M2 => "m2",
            NestedSk::M3 => "m3",
        }
    }
}

impl std::str::FromStr for NestedSk {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(NestedSk::M1),
            "m2" => Ok(NestedSk::M2),
            "m3" => Ok(NestedSk::M3),
            o => Err(Error::InvalidInput(format!("unknown model '{o}'"))),
        }
    }
}
