//! Replicated simulation studies, outlier filtering, model comparison on a
//! scalar series, and the JSON/CSV artefacts they produce.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::asymptotics::{asymptotic_sd, delta_transform, info_sk, info_wf, spd_inverse};
use crate::error::{Error, Result};
use crate::estimators::{
    impute_velocity, Estimator, ModelFamily, NestedSk, ObservationSet, OuFamily, SkFamily, WfFamily,
};
use crate::models::sk::{skew_t_params, SkParams, SK_PARAM_NAMES};
use crate::models::wf::{
    wf_back_transform_jacobian, wf_natural_to_reduced, wf_reduced_to_natural, WfNaturalParams, WfParams,
    WF_NATURAL_NAMES, WF_PARAM_NAMES,
};
use crate::optimizer::{minimize_with, FitResult, OptSchedule};
use crate::sim::{simulate_sk_milstein, simulate_wf, subsample, Path, SimConfig};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Wf,
    Sk,
    Ou,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wf" => Ok(ModelKind::Wf),
            "sk" => Ok(ModelKind::Sk),
            "ou" => Ok(ModelKind::Ou),
            o => Err(Error::InvalidInput(format!("unknown model '{o}'"))),
        }
    }
}

impl ModelKind {
    pub fn dim(&self) -> usize {
        match self {
            ModelKind::Wf => 3,
            ModelKind::Sk => 2,
            ModelKind::Ou => 1,
        }
    }

    pub fn default_schedule(&self) -> OptSchedule {
        match self {
            ModelKind::Wf => OptSchedule::adam_bfgs(),
            _ => OptSchedule::lbfgs(),
        }
    }

    /// Family whose objective is evaluated on `data`, with any data-dependent
    /// choices fixed at `init`.
    pub fn family(&self, data: &ObservationSet, init: &[f64]) -> Result<Arc<dyn ModelFamily>> {
        Ok(match self {
            ModelKind::Wf => Arc::new(WfFamily),
            ModelKind::Sk => Arc::new(SkFamily::default().frozen_at(data, init)?),
            ModelKind::Ou => Arc::new(OuFamily),
        })
    }

    pub fn param_names(&self) -> Vec<String> {
        let v: Vec<&str> = match self {
            ModelKind::Wf => WF_PARAM_NAMES.to_vec(),
            ModelKind::Sk => SK_PARAM_NAMES.to_vec(),
            ModelKind::Ou => vec!["lambda", "m", "sigma"],
        };
        v.into_iter().map(String::from).collect()
    }

    /// Parameter vector from a config map (`wf.*` natural, `sk.*`, `ou.*`).
    pub fn theta_from_map(&self, m: &Map<String, Value>) -> Result<Vec<f64>> {
        match self {
            ModelKind::Wf => Ok(wf_natural_to_reduced(&WfNaturalParams::from_map(m)?).to_theta()),
            ModelKind::Sk => Ok(SkParams::from_map(m)?.to_theta()),
            ModelKind::Ou => ["ou.lambda", "ou.m", "ou.sigma"]
                .iter()
                .map(|k| {
                    m.get(*k)
                        .and_then(Value::as_f64)
                        .ok_or_else(|| Error::InvalidInput(format!("missing numeric field {k}")))
                })
                .collect(),
        }
    }

    pub fn default_truth_map(&self) -> Map<String, Value> {
        match self {
            ModelKind::Wf => WfNaturalParams::paper_truth().to_map(),
            ModelKind::Sk => SkParams::paper_truth().to_map(),
            ModelKind::Ou => ou_map(1.0, 0.0, 0.5),
        }
    }

    pub fn default_init_map(&self) -> Map<String, Value> {
        match self {
            ModelKind::Wf => WfNaturalParams::paper_init().to_map(),
            ModelKind::Sk => SkParams::paper_init().to_map(),
            ModelKind::Ou => ou_map(0.5, 0.1, 1.0),
        }
    }
}

fn ou_map(l: f64, m: f64, s: f64) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("ou.lambda".into(), json!(l));
    map.insert("ou.m".into(), json!(m));
    map.insert("ou.sigma".into(), json!(s));
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierRule {
    pub multiplier: f64,
    pub passes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdPathConfig {
    #[serde(rename = "T")]
    pub t_total: f64,
    pub h: f64,
    pub seed: u64,
}

impl Default for SdPathConfig {
    fn default() -> Self {
        Self { t_total: 200.0, h: 0.001, seed: 20_240_601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: ModelKind,
    pub theta0: Map<String, Value>,
    #[serde(default)]
    pub theta_init: Option<Map<String, Value>>,
    #[serde(rename = "T")]
    pub t_total: f64,
    pub h_values: Vec<f64>,
    pub replications: usize,
    pub h_sim: f64,
    pub base_seed: u64,
    pub estimators: Vec<Estimator>,
    pub outlier_rule: OutlierRule,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub schedule: Option<OptSchedule>,
    #[serde(default)]
    pub sd_path: SdPathConfig,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl StudyConfig {
    /// Desk-scale Wright–Fisher study.
    pub fn wf_default() -> Self {
        Self {
            model: ModelKind::Wf,
            theta0: ModelKind::Wf.default_truth_map(),
            theta_init: Some(ModelKind::Wf.default_init_map()),
            t_total: 20.0,
            h_values: vec![0.02, 0.2],
            replications: 20,
            h_sim: 1e-4,
            base_seed: 1,
            estimators: Estimator::ALL.to_vec(),
            outlier_rule: OutlierRule { multiplier: 3.0, passes: 1 },
            x0: vec![0.25, 0.25, 0.25],
            schedule: None,
            sd_path: SdPathConfig::default(),
            workers: 1,
        }
    }

    /// Desk-scale Student Kramers study.
    pub fn sk_default() -> Self {
        Self {
            model: ModelKind::Sk,
            theta0: ModelKind::Sk.default_truth_map(),
            theta_init: Some(ModelKind::Sk.default_init_map()),
            t_total: 50.0,
            h_values: vec![0.01, 0.02],
            replications: 20,
            h_sim: 1e-4,
            base_seed: 1,
            estimators: Estimator::ALL.to_vec(),
            outlier_rule: OutlierRule { multiplier: 1.5, passes: 2 },
            x0: vec![0.0, 0.0],
            schedule: None,
            sd_path: SdPathConfig::default(),
            workers: 1,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_total / self.h_sim).round() as usize
    }

    pub fn factor(&self, h: f64) -> usize {
        (h / self.h_sim).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.model == ModelKind::Ou {
            return Err(Error::InvalidInput("studies support the wf and sk models".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be at least 1".into()));
        }
        if self.estimators.is_empty() || self.h_values.is_empty() {
            return Err(Error::InvalidInput("need at least one estimator and one step".into()));
        }
        if !(self.h_sim > 0.0) || !(self.t_total > 0.0) {
            return Err(Error::InvalidInput("h_sim and T must be positive".into()));
        }
        let n = self.n_steps();
        if ((n as f64) * self.h_sim - self.t_total).abs() > 1e-9 * self.t_total {
            return Err(Error::InvalidInput("h_sim must divide T".into()));
        }
        for &h in &self.h_values {
            let f = self.factor(h);
            if f == 0 || ((f as f64) * self.h_sim - h).abs() > 1e-9 * h || n % f != 0 || n / f < 2 {
                return Err(Error::InvalidInput(format!("step {h} is not a divisor multiple of h_sim over T")));
            }
        }
        if !(self.outlier_rule.multiplier > 0.0) || self.outlier_rule.passes == 0 {
            return Err(Error::InvalidInput("outlier rule needs multiplier > 0 and passes >= 1".into()));
        }
        if self.x0.len() != self.model.dim() {
            return Err(Error::InvalidInput("x0 has the wrong dimension".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidInput("workers must be at least 1".into()));
        }
        self.model.theta_from_map(&self.theta0)?;
        self.model.theta_from_map(&self.init_map())?;
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }

    pub fn init_map(&self) -> Map<String, Value> {
        self.theta_init.clone().unwrap_or_else(|| self.model.default_init_map())
    }

    pub fn schedule(&self) -> OptSchedule {
        self.schedule.clone().unwrap_or_else(|| self.model.default_schedule())
    }

    /// Names of the parameters in which errors are reported.
    pub fn error_names(&self) -> Vec<String> {
        match self.model {
            ModelKind::Wf => WF_NATURAL_NAMES.iter().map(|s| s.to_string()).collect(),
            m => m.param_names(),
        }
    }
}

/// Set a dotted path (`study.h-values`) in a JSON document. The value is
/// parsed as JSON, then as a comma-separated number list, then kept as a string.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<()> {
    let keys: Vec<String> = path.split('.').map(|k| k.replace('-', "_")).collect();
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| {
        let nums: Option<Vec<f64>> = raw.split(',').map(|s| s.trim().parse().ok()).collect();
        match nums {
            Some(v) if raw.contains(',') => json!(v),
            _ => Value::String(raw.to_string()),
        }
    });
    let mut cur = doc;
    for (i, k) in keys.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::InvalidInput(format!("cannot set '{path}': parent is not an object")))?;
        if i == keys.len() - 1 {
            let value = match (obj.get(k), value) {
                (Some(Value::Array(_)), v @ (Value::Number(_) | Value::String(_))) => json!([v]),
                (_, v) => v,
            };
            obj.insert(k.clone(), value);
            return Ok(());
        }
        cur = obj.entry(k.clone()).or_insert_with(|| Value::Object(Map::new()));
    }
    Err(Error::InvalidInput(format!("empty override path '{path}'")))
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
    s.sort_by(f64::total_cmp);
    quantile(&s, 0.5)
}

fn iqr_pass(rows: &[&[f64]], multiplier: f64) -> Vec<bool> {
    let p = rows.first().map_or(0, |r| r.len());
    let mut flag = vec![false; rows.len()];
    for j in 0..p {
        let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&col, 0.25), quantile(&col, 0.75));
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - multiplier * iqr, q3 + multiplier * iqr);
        for (i, r) in rows.iter().enumerate() {
            if r[j] < lo || r[j] > hi {
                flag[i] = true;
            }
        }
    }
    flag
}

/// A row is an outlier if any coordinate leaves `[Q1 - m·IQR, Q3 + m·IQR]`;
/// each further pass re-applies the rule to the rows retained so far.
pub fn iqr_outliers(rows: &[Vec<f64>], rule: OutlierRule) -> Vec<bool> {
    let mut out = vec![false; rows.len()];
    for _ in 0..rule.passes {
        let kept: Vec<usize> = (0..rows.len()).filter(|&i| !out[i]).collect();
        if kept.len() < 2 {
            break;
        }
        let view: Vec<&[f64]> = kept.iter().map(|&i| rows[i].as_slice()).collect();
        let flags = iqr_pass(&view, rule.multiplier);
        if !flags.iter().any(|&f| f) {
            break;
        }
        for (k, f) in kept.into_iter().zip(flags) {
            out[k] |= f;
        }
    }
    out
}

/// `½L + ½Nd log 2π`.
pub fn nll_from_objective(objective: f64, n_transitions: usize, d: usize) -> f64 {
    0.5 * objective + 0.5 * (n_transitions * d) as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Dimension of the Gaussian in each transition term.
pub fn transition_dim(model: ModelKind, est: Estimator) -> usize {
    match (model, est) {
        (ModelKind::Sk, Estimator::Em) => 1,
        (m, _) => m.dim(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub fit: FitResult,
    pub status: String,
}

/// Fit one dataset; `status` is `ok`, `not-converged`, or the objective
/// status at the starting point when that is infeasible.
pub fn fit_family(family: &dyn ModelFamily, est: Estimator, data: &ObservationSet, init: &[f64], schedule: &OptSchedule) -> FitOutcome {
    let f = |th: &[f64]| family.objective(est, data, th).sentinel();
    let signs = family.signs();
    let fit = minimize_with(&f, None, init, Some(&signs), schedule);
    let status = if fit.converged {
        "ok".to_string()
    } else if fit.objective.is_finite() {
        "not-converged".to_string()
    } else {
        let at_init = family.objective(est, data, init).status;
        if at_init.is_ok() {
            "optimizer-failure".to_string()
        } else {
            at_init.label().to_string()
        }
    };
    FitOutcome { fit, status }
}

pub fn fit_dataset(model: ModelKind, est: Estimator, data: &ObservationSet, init: &[f64], schedule: &OptSchedule) -> Result<FitOutcome> {
    if data.dim() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "data has dimension {}, model needs {}",
            data.dim(),
            model.dim()
        )));
    }
    let family = model.family(data, init)?;
    Ok(fit_family(family.as_ref(), est, data, init, schedule))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub estimator: Estimator,
    pub h: f64,
    pub theta_hat: Vec<f64>,
    pub error: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normalized_error: Option<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub wall_clock: f64,
    pub status: String,
    pub outlier: bool,
}

impl ReplicationRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
    pub fn retained(&self) -> bool {
        self.ok() && !self.outlier
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub estimator: Estimator,
    pub h: f64,
    pub n_total: usize,
    pub n_failed: usize,
    pub n_outliers: usize,
    pub removal_pct: f64,
    pub failure_pct: f64,
    pub median_error: Vec<f64>,
    pub iqr_error: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub median_abs_normalized_error: Option<Vec<f64>>,
    pub median_wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdEntry {
    pub h: f64,
    pub n: usize,
    pub sd: Vec<f64>,
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema: u32,
    pub command: String,
    pub config: StudyConfig,
    pub param_names: Vec<String>,
    pub truth: Vec<f64>,
    pub rows: Vec<ReplicationRow>,
    pub aggregates: Vec<Aggregate>,
    pub asymptotic_sd: Vec<SdEntry>,
}

impl StudyReport {
    pub fn aggregate(&self, est: Estimator, h: f64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.estimator == est && (a.h - h).abs() < 1e-12)
    }

    pub fn sd(&self, h: f64) -> Option<&SdEntry> {
        self.asymptotic_sd.iter().find(|s| (s.h - h).abs() < 1e-12)
    }

    /// `replication,estimator,h,param,error,wall_clock,status`, one line per parameter.
    pub fn write_rows_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "replication,estimator,h,param,error,wall_clock,status")?;
        for r in &self.rows {
            let status = if r.ok() && r.outlier { "outlier" } else { r.status.as_str() };
            for (name, e) in self.param_names.iter().zip(&r.error) {
                writeln!(w, "{},{},{},{},{:.16e},{:.6},{}", r.replication, r.estimator.name(), r.h, name, e, r.wall_clock, status)?;
            }
        }
        Ok(())
    }

    /// `estimator,h,median_wall_clock,n_retained`.
    pub fn write_bench_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "estimator,h,median_wall_clock,n_retained")?;
        for a in &self.aggregates {
            let n = a.n_total - a.n_failed - a.n_outliers;
            writeln!(w, "{},{},{:.6},{}", a.estimator.name(), a.h, a.median_wall_clock, n)?;
        }
        Ok(())
    }
}

struct Prepared {
    truth: Vec<f64>,
    init: Vec<f64>,
    truth_errors: Vec<f64>,
    wf_natural: Option<WfNaturalParams>,
}

fn prepare(cfg: &StudyConfig) -> Result<Prepared> {
    let truth = cfg.model.theta_from_map(&cfg.theta0)?;
    let init = cfg.model.theta_from_map(&cfg.init_map())?;
    let (truth_errors, wf_natural) = match cfg.model {
        ModelKind::Wf => {
            let n = WfNaturalParams::from_map(&cfg.theta0)?;
            (n.to_theta(), Some(n))
        }
        _ => (truth.clone(), None),
    };
    Ok(Prepared { truth, init, truth_errors, wf_natural })
}

fn simulate(cfg: &StudyConfig, truth: &[f64], seed: u64, stream: u64, n_steps: usize) -> Result<Path> {
    let sc = SimConfig { h_sim: cfg.h_sim, n_steps, seed, stream, x0: cfg.x0.clone() };
    match cfg.model {
        ModelKind::Wf => simulate_wf(&WfParams::from_theta(truth)?, &sc),
        ModelKind::Sk => simulate_sk_milstein(&SkParams::from_theta(truth)?, &sc),
        ModelKind::Ou => Err(Error::InvalidInput("studies support the wf and sk models".into())),
    }
}

fn reported(prep: &Prepared, theta: &[f64]) -> Result<Vec<f64>> {
    match &prep.wf_natural {
        Some(n) => Ok(wf_reduced_to_natural(&WfParams::from_theta(theta)?, n.tau, n.q[3])?.to_theta()),
        None => Ok(theta.to_vec()),
    }
}

fn run_replication(cfg: &StudyConfig, prep: &Prepared, r: usize) -> Vec<ReplicationRow> {
    let schedule = cfg.schedule();
    let np = prep.truth_errors.len();
    let path = simulate(cfg, &prep.truth, cfg.base_seed, r as u64, cfg.n_steps());
    let mut rows = Vec::new();
    for &h in &cfg.h_values {
        let data = path
            .as_ref()
            .map_err(|e| e.to_string())
            .and_then(|p| subsample(p, cfg.factor(h)).and_then(|s| s.to_observations()).map_err(|e| e.to_string()));
        for &est in &cfg.estimators {
            let mut row = ReplicationRow {
                replication: r,
                estimator: est,
                h,
                theta_hat: vec![f64::NAN; prep.truth.len()],
                error: vec![f64::NAN; np],
                normalized_error: None,
                objective: f64::NAN,
                iterations: 0,
                wall_clock: 0.0,
                status: String::new(),
                outlier: false,
            };
            match &data {
                Err(_) => row.status = "simulation-failure".into(),
                Ok(obs) => match fit_dataset(cfg.model, est, obs, &prep.init, &schedule) {
                    Err(_) => row.status = "invalid-input".into(),
                    Ok(out) => {
                        row.theta_hat = out.fit.theta_hat.clone();
                        row.objective = out.fit.objective;
                        row.iterations = out.fit.iterations;
                        row.wall_clock = out.fit.wall_clock;
                        row.status = out.status;
                        if let Ok(rep) = reported(prep, &out.fit.theta_hat) {
                            row.error = rep.iter().zip(&prep.truth_errors).map(|(a, b)| a - b).collect();
                        }
                        if cfg.model == ModelKind::Sk {
                            row.normalized_error =
                                Some(row.error.iter().zip(&prep.truth_errors).map(|(e, t)| e / t).collect());
                        }
                        if row.error.iter().any(|e| !e.is_finite()) && row.ok() {
                            row.status = "non-finite-estimate".into();
                        }
                    }
                },
            }
            rows.push(row);
        }
    }
    rows
}

/// Mark outliers per `(estimator, h)` and compute retained aggregates.
pub fn aggregate_rows(rows: &mut [ReplicationRow], rule: OutlierRule) -> Vec<Aggregate> {
    let mut keys: Vec<(Estimator, f64)> = Vec::new();
    for r in rows.iter() {
        if !keys.iter().any(|(e, h)| *e == r.estimator && *h == r.h) {
            keys.push((r.estimator, r.h));
        }
    }
    let mut out = Vec::new();
    for (est, h) in keys {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].estimator == est && rows[i].h == h).collect();
        let ok: Vec<usize> = idx.iter().copied().filter(|&i| rows[i].ok()).collect();
        let errs: Vec<Vec<f64>> = ok.iter().map(|&i| rows[i].error.clone()).collect();
        for (&i, f) in ok.iter().zip(iqr_outliers(&errs, rule)) {
            rows[i].outlier = f;
        }
        let kept: Vec<&ReplicationRow> = idx.iter().map(|&i| &rows[i]).filter(|r| r.retained()).collect();
        let np = rows[idx[0]].error.len();
        let col = |j: usize| -> Vec<f64> { kept.iter().map(|r| r.error[j]).collect() };
        let median_error = (0..np).map(|j| median(&col(j))).collect();
        let iqr_error = (0..np)
            .map(|j| {
                let mut c = col(j);
                c.sort_by(f64::total_cmp);
                quantile(&c, 0.75) - quantile(&c, 0.25)
            })
            .collect();
        let median_abs_normalized_error = rows[idx[0]].normalized_error.as_ref().map(|_| {
            (0..np)
                .map(|j| median(&kept.iter().filter_map(|r| r.normalized_error.as_ref().map(|v| v[j].abs())).collect::<Vec<_>>()))
                .collect()
        });
        let n_total = idx.len();
        let n_failed = n_total - ok.len();
        let n_outliers = ok.iter().filter(|&&i| rows[i].outlier).count();
        out.push(Aggregate {
            estimator: est,
            h,
            n_total,
            n_failed,
            n_outliers,
            removal_pct: 100.0 * n_outliers as f64 / n_total as f64,
            failure_pct: 100.0 * n_failed as f64 / n_total as f64,
            median_error,
            iqr_error,
            median_abs_normalized_error,
            median_wall_clock: median(&kept.iter().map(|r| r.wall_clock).collect::<Vec<_>>()),
        });
    }
    out
}

/// Plug-in standard deviations at each observation step, from an auxiliary
/// long path at the true parameters. Wright–Fisher values are for the
/// natural parameters.
pub fn study_sd(cfg: &StudyConfig) -> Result<Vec<SdEntry>> {
    let prep = prepare(cfg)?;
    let aux_steps = (cfg.sd_path.t_total / cfg.h_sim).round() as usize;
    let aux_factor = (cfg.sd_path.h / cfg.h_sim).round().max(1.0) as usize;
    let path = simulate(cfg, &prep.truth, cfg.sd_path.seed, u64::MAX, aux_steps - aux_steps % aux_factor)?;
    let path = subsample(&path, aux_factor)?;
    let mut out = Vec::new();
    for &h in &cfg.h_values {
        let n = cfg.n_steps() / cfg.factor(h);
        let entry = match cfg.model {
            ModelKind::Sk => {
                let info = info_sk(&path, &SkParams::from_theta(&prep.truth)?)?;
                let sd = asymptotic_sd(&info, n, h)?;
                SdEntry { h, n, jitter: sd.jitter1.max(sd.jitter2), sd: sd.all() }
            }
            ModelKind::Wf => {
                let c = info_wf(&path, &WfParams::from_theta(&prep.truth)?)?;
                let (ci, jitter) = spd_inverse(&c)?;
                let cov = ci / (n as f64 * h);
                let tau = prep.wf_natural.map(|w| w.tau).unwrap_or(10.0);
                let nat = delta_transform(&wf_back_transform_jacobian(tau)?, &cov)?;
                SdEntry { h, n, jitter, sd: nat.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect() }
            }
            ModelKind::Ou => return Err(Error::InvalidInput("no plug-in SD for this model".into())),
        };
        out.push(entry);
    }
    Ok(out)
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut per_rep: Vec<(usize, Vec<ReplicationRow>)> = pool.install(|| {
        (0..cfg.replications).into_par_iter().map(|r| (r, run_replication(cfg, &prep, r))).collect()
    });
    per_rep.sort_by_key(|(r, _)| *r);
    let mut rows: Vec<ReplicationRow> = per_rep.into_iter().flat_map(|(_, v)| v).collect();
    let aggregates = aggregate_rows(&mut rows, cfg.outlier_rule);
    let asymptotic_sd = study_sd(cfg)?;
    Ok(StudyReport {
        schema: SCHEMA,
        command: "study".into(),
        config: cfg.clone(),
        param_names: cfg.error_names(),
        truth: prep.truth_errors.clone(),
        rows,
        aggregates,
        asymptotic_sd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcecoreFit {
    pub model: NestedSk,
    pub estimator: Estimator,
    pub estimates: Map<String, Value>,
    pub theta_hat: Vec<f64>,
    pub objective: f64,
    pub nll: f64,
    pub converged: bool,
    pub status: String,
    pub skew_t: Option<SkewT>,
    pub wall_clock: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewT {
    pub nu: f64,
    pub mu: f64,
    pub nu_sigma2: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcecoreReport {
    pub schema: u32,
    pub command: String,
    pub config: Value,
    pub n_transitions: usize,
    pub h: f64,
    pub velocity_imputation: String,
    pub fits: Vec<IcecoreFit>,
}

/// Fit nested oscillator models to a scalar series with imputed velocity.
/// Models are fitted in the given order; a model containing an earlier one
/// starts from that model's estimate so the optimised objectives nest.
pub fn icecore(series: &Path, models: &[NestedSk], est: Estimator, init: &SkParams, schedule: &OptSchedule, config: Value) -> Result<IcecoreReport> {
    if series.dim() != 1 {
        return Err(Error::InvalidInput("expected a single state column".into()));
    }
    let data = impute_velocity(&series.coord(0), series.step())?;
    let mut fits: Vec<IcecoreFit> = Vec::new();
    for &m in models {
        let mut start = init.to_theta();
        for (i, v) in m.fixed() {
            start[i] = v;
        }
        if let Some(prev) = fits.iter().rev().find(|f| f.converged && contains(m, f.model)) {
            start = prev.theta_hat.clone();
        }
        let base = SkFamily::default().frozen_at(&data, &start)?;
        let family = m.family(base);
        let out = fit_family(&family, est, &data, &family.restrict(&start), schedule);
        let theta_hat = family.expand(&out.fit.theta_hat);
        let p = SkParams::from_theta(&theta_hat)?;
        let skew_t = skew_t_params(p.eta, p.alpha, p.beta, p.gamma)
            .ok()
            .map(|(nu, mu, nu_sigma2, omega)| SkewT { nu, mu, nu_sigma2, omega });
        let mut estimates = Map::new();
        for (n, v) in SK_PARAM_NAMES.iter().zip(&theta_hat) {
            estimates.insert((*n).to_string(), json!(v));
        }
        fits.push(IcecoreFit {
            model: m,
            estimator: est,
            estimates,
            nll: nll_from_objective(out.fit.objective, data.n_transitions(), transition_dim(ModelKind::Sk, est)),
            objective: out.fit.objective,
            converged: out.fit.converged,
            status: out.status,
            theta_hat,
            skew_t,
            wall_clock: out.fit.wall_clock,
        });
    }
    Ok(IcecoreReport {
        schema: SCHEMA,
        command: "icecore".into(),
        config,
        n_transitions: data.n_transitions(),
        h: data.step(),
        velocity_imputation: "forward-difference (uncorrected)".into(),
        fits,
    })
}

/// True if `outer` has every free parameter of `inner`.
fn contains(outer: NestedSk, inner: NestedSk) -> bool {
    let fixed_outer = outer.fixed();
    let fixed_inner = inner.fixed();
    fixed_outer.iter().all(|(i, _)| fixed_inner.iter().any(|(j, _)| i == j))
}
