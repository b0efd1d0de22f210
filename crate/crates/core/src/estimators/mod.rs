//! Gaussian pseudo-likelihood objectives: Strang splitting (SS),
//! Euler–Maruyama (EM), Gaussian approximation (GA) and local linearisation (LL).
//!
//! Every objective returns `Σ_k [log det Ω_k + Z_kᵀ Ω_k⁻¹ Z_k]` (plus the SS
//! Jacobian term), i.e. twice the negative log-likelihood without the
//! `d log 2π` constant per transition.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::block_expm;
use crate::models::sk::{Lamperti, SkLampertiModel, SkParams};
use crate::models::{Mat, Remainder, Sde, SplitModel, Vect};

pub mod family;

pub use family::{
    ou_exact_objective, ConstrainedFamily, ModelFamily, NestedSk, OuFamily, ParamSign, SkFamily, WfFamily,
};

/// Equidistant observations `X_{t_0}, …, X_{t_N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    h: f64,
    dim: usize,
    states: Vec<f64>,
}

impl ObservationSet {
    pub fn new(h: f64, dim: usize, states: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        if dim == 0 || states.len() % dim != 0 {
            return Err(Error::InvalidInput("state array does not match dimension".into()));
        }
        if states.len() / dim < 3 {
            return Err(Error::InvalidInput("need at least two transitions".into()));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        Ok(Self { h, dim, states })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of transitions `N`.
    pub fn n_transitions(&self) -> usize {
        self.states.len() / self.dim - 1
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn vect<const D: usize>(&self, k: usize) -> Vect<D> {
        Vect::<D>::from_column_slice(self.state(k))
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = (self.n_transitions() + 1) as f64;
        let mut m = vec![0.0; self.dim];
        for k in 0..=self.n_transitions() {
            for (mi, xi) in m.iter_mut().zip(self.state(k)) {
                *mi += xi / n;
            }
        }
        m
    }

    /// Population variance of one coordinate.
    pub fn variance(&self, coord: usize) -> f64 {
        let n = (self.n_transitions() + 1) as f64;
        let m = self.mean()[coord];
        (0..=self.n_transitions())
            .map(|k| (self.state(k)[coord] - m).powi(2))
            .sum::<f64>()
            / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Status {
    Ok,
    IndefiniteCovariance { index: usize },
    FlowFailure { index: usize },
    InvalidParameters,
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::IndefiniteCovariance { .. } => "indefinite-covariance",
            Status::FlowFailure { .. } => "flow-failure",
            Status::InvalidParameters => "invalid-parameters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub per_transition: Vec<f64>,
    pub status: Status,
}

impl ObjectiveValue {
    fn failed(status: Status) -> Self {
        Self { value: f64::INFINITY, per_transition: Vec::new(), status }
    }

    fn from_terms(per_transition: Vec<f64>) -> Self {
        let value = per_transition.iter().sum();
        Self { value, per_transition, status: Status::Ok }
    }

    /// Objective value or `+∞` for any failure.
    pub fn sentinel(&self) -> f64 {
        if self.status.is_ok() && self.value.is_finite() {
            self.value
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ss,
    Em,
    Ga,
    Ll,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Ss, Estimator::Em, Estimator::Ga, Estimator::Ll];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Ss => "ss",
            Estimator::Em => "em",
            Estimator::Ga => "ga",
            Estimator::Ll => "ll",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(Estimator::Ss),
            "em" => Ok(Estimator::Em),
            "ga" => Ok(Estimator::Ga),
            "ll" => Ok(Estimator::Ll),
            other => Err(Error::InvalidInput(format!("unknown estimator '{other}'"))),
        }
    }
}

/// `log det Ω + zᵀΩ⁻¹z` by Cholesky; `None` if `Ω` is not positive definite.
pub fn gaussian_term<const D: usize>(z: &Vect<D>, omega: &Mat<D>) -> Option<f64> {
    let chol = omega.cholesky()?;
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..D {
        logdet += l[(i, i)].ln();
    }
    let w = l.solve_lower_triangular(z)?;
    let v = 2.0 * logdet + w.norm_squared();
    v.is_finite().then_some(v)
}

/// Standardised residual `L⁻¹z` with `LLᵀ = Ω`.
pub fn whiten<const D: usize>(z: &Vect<D>, omega: &Mat<D>) -> Option<Vect<D>> {
    let chol = omega.cholesky()?;
    chol.l_dirty().solve_lower_triangular(z)
}

/// One classical Runge–Kutta step for `dx/dt = N(x)` with its Jacobian.
pub fn rk4_flow<const D: usize, R: Remainder<D> + ?Sized>(
    n: &R,
    x: &Vect<D>,
    h: f64,
) -> Option<(Vect<D>, Mat<D>)> {
    let id = Mat::<D>::identity();
    let k1 = n.value(x);
    let dk1 = n.jacobian(x);
    let x2 = x + k1 * (h / 2.0);
    let k2 = n.value(&x2);
    let dk2 = n.jacobian(&x2) * (id + dk1 * (h / 2.0));
    let x3 = x + k2 * (h / 2.0);
    let k3 = n.value(&x3);
    let dk3 = n.jacobian(&x3) * (id + dk2 * (h / 2.0));
    let x4 = x + k3 * h;
    let k4 = n.value(&x4);
    let dk4 = n.jacobian(&x4) * (id + dk3 * h);
    let f = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let df = id + (dk1 + dk2 * 2.0 + dk3 * 2.0 + dk4) * (h / 6.0);
    let finite = f.iter().chain(df.iter()).all(|v| v.is_finite());
    finite.then_some((f, df))
}

/// Value-only version of [`rk4_flow`].
pub fn rk4_flow_value<const D: usize, R: Remainder<D> + ?Sized>(
    n: &R,
    x: &Vect<D>,
    h: f64,
) -> Option<Vect<D>> {
    let k1 = n.value(x);
    let k2 = n.value(&(x + k1 * (h / 2.0)));
    let k3 = n.value(&(x + k2 * (h / 2.0)));
    let k4 = n.value(&(x + k3 * h));
    let f = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    f.iter().all(|v| v.is_finite()).then_some(f)
}

/// Strang splitting objective.
pub fn ss_objective<const D: usize, R: Remainder<D>>(
    split: &SplitModel<D, R>,
    data: &ObservationSet,
) -> ObjectiveValue {
    ss_objective_impl(split, data, true)
}

/// SS objective without the `-2 Σ log|det Df_{-h/2}|` term.
pub fn ss_objective_without_jacobian<const D: usize, R: Remainder<D>>(
    split: &SplitModel<D, R>,
    data: &ObservationSet,
) -> ObjectiveValue {
    ss_objective_impl(split, data, false)
}

fn ss_objective_impl<const D: usize, R: Remainder<D>>(
    split: &SplitModel<D, R>,
    data: &ObservationSet,
    with_jacobian: bool,
) -> ObjectiveValue {
    debug_assert_eq!(data.dim(), D);
    let h = data.step();
    let cache = match split.linear.omega_cache(h) {
        Ok(c) => c,
        Err(_) => return ObjectiveValue::failed(Status::FlowFailure { index: 0 }),
    };
    let n = data.n_transitions();
    let mut terms = Vec::with_capacity(n);
    let mut mu = Vect::<D>::zeros();
    let mut omega = Mat::<D>::zeros();
    for k in 1..=n {
        let prev = data.vect::<D>(k - 1);
        let cur = data.vect::<D>(k);
        let Some(fwd) = split.remainder.flow_value(&prev, h / 2.0) else {
            return ObjectiveValue::failed(Status::FlowFailure { index: k });
        };
        let Some((back, dback)) = split.remainder.flow(&cur, -h / 2.0) else {
            return ObjectiveValue::failed(Status::FlowFailure { index: k });
        };
        cache.mean_into(fwd.as_slice(), mu.as_mut_slice());
        cache.omega_into(fwd.as_slice(), omega.as_mut_slice());
        let z = back - mu;
        let Some(mut t) = gaussian_term(&z, &omega) else {
            return ObjectiveValue::failed(Status::IndefiniteCovariance { index: k });
        };
        if with_jacobian {
            let det = DMatrix::from_column_slice(D, D, dback.as_slice()).determinant().abs();
            if !(det > 0.0) || !det.is_finite() {
                return ObjectiveValue::failed(Status::FlowFailure { index: k });
            }
            t -= 2.0 * det.ln();
        }
        terms.push(t);
    }
    ObjectiveValue::from_terms(terms)
}

/// Standardised SS residuals `L⁻¹Z_k`.
pub fn ss_residuals<const D: usize, R: Remainder<D>>(
    split: &SplitModel<D, R>,
    data: &ObservationSet,
) -> Result<Vec<Vect<D>>> {
    let h = data.step();
    let cache = split.linear.omega_cache(h)?;
    let mut out = Vec::with_capacity(data.n_transitions());
    for k in 1..=data.n_transitions() {
        let fwd = split
            .remainder
            .flow_value(&data.vect::<D>(k - 1), h / 2.0)
            .ok_or(Error::FlowFailure { index: k })?;
        let back = split
            .remainder
            .flow_value(&data.vect::<D>(k), -h / 2.0)
            .ok_or(Error::FlowFailure { index: k })?;
        let mut mu = Vect::<D>::zeros();
        let mut omega = Mat::<D>::zeros();
        cache.mean_into(fwd.as_slice(), mu.as_mut_slice());
        cache.omega_into(fwd.as_slice(), omega.as_mut_slice());
        out.push(whiten(&(back - mu), &omega).ok_or(Error::IndefiniteCovariance { index: k })?);
    }
    Ok(out)
}

/// Euler–Maruyama objective: `X_k ~ N(X_{k-1} + hF, hΣΣᵀ)`.
pub fn em_objective<const D: usize, M: Sde<D>>(model: &M, data: &ObservationSet) -> ObjectiveValue {
    let h = data.step();
    let n = data.n_transitions();
    let mut terms = Vec::with_capacity(n);
    for k in 1..=n {
        let prev = data.vect::<D>(k - 1);
        let cur = data.vect::<D>(k);
        let z = cur - prev - model.drift(&prev) * h;
        let Some(t) = gaussian_term(&z, &(model.sst(&prev) * h)) else {
            return ObjectiveValue::failed(Status::IndefiniteCovariance { index: k });
        };
        terms.push(t);
    }
    ObjectiveValue::from_terms(terms)
}

/// Mean and covariance of the second-order Gaussian approximation.
pub fn ga_moments<const D: usize, M: Sde<D>>(model: &M, x: &Vect<D>, h: f64) -> (Vect<D>, Mat<D>) {
    let f = model.drift(x);
    let df = model.drift_jacobian(x);
    let s = model.sst(x);
    let hs = model.drift_hessians(x);
    let mut lf = df * f;
    for i in 0..D {
        lf[i] += 0.5 * hs[i].component_mul(&s).sum();
    }
    let mu = x + f * h + lf * (h * h / 2.0);
    let ls = model.diffusion().generator_sst(x.as_slice(), f.as_slice());
    let ls = Mat::<D>::from_column_slice(ls.as_slice());
    let omega = s * h + (df * s + s * df.transpose() + ls) * (h * h / 2.0);
    (mu, omega)
}

/// Gaussian approximation objective of order 2.
pub fn ga_objective<const D: usize, M: Sde<D>>(model: &M, data: &ObservationSet) -> ObjectiveValue {
    let h = data.step();
    let n = data.n_transitions();
    let mut terms = Vec::with_capacity(n);
    for k in 1..=n {
        let prev = data.vect::<D>(k - 1);
        let (mu, omega) = ga_moments(model, &prev, h);
        let Some(t) = gaussian_term(&(data.vect::<D>(k) - mu), &omega) else {
            return ObjectiveValue::failed(Status::IndefiniteCovariance { index: k });
        };
        terms.push(t);
    }
    ObjectiveValue::from_terms(terms)
}

/// Mean and order-3 covariance of the Gaussian approximation for the
/// Student Kramers oscillator.
pub fn sk_ga3_moments(p: &SkParams, x: f64, v: f64, h: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let (eta, a, b, c, d) = (p.eta, p.a, p.b, p.c, p.d);
    let (al, be, ga) = (p.alpha, p.beta, p.gamma);
    let u1 = -p.force(x);
    let u2 = -p.force_prime(x);
    let mu = Vector2::new(
        x + h * v - h * h / 2.0 * (eta * v + u1),
        v - h * (eta * v + u1) + h * h / 2.0 * (eta * eta * v + eta * u1 - u2 * v),
    );
    let h2 = h * h / 2.0;
    let h3 = h * h * h / 6.0;
    let s2 = v * (v * al + be) + ga;
    let (x2, x3) = (x * x, x * x * x);
    let common = 2.0 * b * v * x2 * al + 2.0 * a * v * x3 * al + v * v * al * al + b * x2 * be
        + a * x3 * be
        + v * al * be
        + d * (2.0 * v * al + be);
    let o11 = h * h * h / 3.0 * s2;
    let o12 = h2 * s2
        + h3 * common
        + h3 * (c * x * (2.0 * v * al + be) + al * ga - (5.0 * v * v * al + 4.0 * v * be + 3.0 * ga) * eta);
    let o22 = h * s2
        + h2 * common
        + h2 * (c * x * (2.0 * v * al + be) + al * ga - (4.0 * v * v * al + 3.0 * v * be + 2.0 * ga) * eta)
        + h3 * (2.0 * d * d * al + 8.0 * b * v * v * x * al + 12.0 * a * v * v * x2 * al)
        + h3 * (2.0 * b * b * x2 * x2 * al
            + 4.0 * a * b * x2 * x3 * al
            + 2.0 * a * a * x3 * x3 * al
            + 2.0 * b * v * x2 * al * al
            + 2.0 * a * v * x3 * al * al
            + v * v * al * al * al
            + 6.0 * b * v * x * be
            + 9.0 * a * v * x2 * be
            + b * x2 * al * be)
        + h3 * (a * x3 * al * be
            + v * al * al * be
            + d * al * (4.0 * x * (c + x * (b + a * x)) + 2.0 * v * al + be)
            + 4.0 * b * x * ga
            + 6.0 * a * x2 * ga
            + al * al * ga
            + 2.0 * c * c * x2 * al)
        + h3 * (-d * (10.0 * v * al + 3.0 * be) * eta
            - (b * x2 * (10.0 * v * al + 3.0 * be)
                + a * x3 * (10.0 * v * al + 3.0 * be)
                + al * (6.0 * v * v * al + 5.0 * v * be + 4.0 * ga))
                * eta)
        + h3 * c
            * (4.0 * v * v * al
                + 4.0 * x3 * (b + a * x) * al
                + 3.0 * v * be
                + x * al * be
                + 2.0 * ga
                + 2.0 * v * x * al * (al - 5.0 * eta)
                - 3.0 * x * be * eta)
        + h3 * (12.0 * v * v * al + 7.0 * v * be + 4.0 * ga) * eta * eta;
    (mu, Matrix2::new(o11, o12, o12, o22))
}

/// GA objective for the oscillator with the order-3 covariance.
pub fn sk_ga3_objective(p: &SkParams, data: &ObservationSet) -> ObjectiveValue {
    let h = data.step();
    let n = data.n_transitions();
    let mut terms = Vec::with_capacity(n);
    for k in 1..=n {
        let prev = data.state(k - 1);
        let (mu, omega) = sk_ga3_moments(p, prev[0], prev[1], h);
        let z = data.vect::<2>(k) - mu;
        let Some(t) = gaussian_term(&z, &omega) else {
            return ObjectiveValue::failed(Status::IndefiniteCovariance { index: k });
        };
        terms.push(t);
    }
    ObjectiveValue::from_terms(terms)
}

/// EM on the velocity equation only: `V_k ~ N(V_{k-1} + hF₂, hσ²(V_{k-1}))`.
pub fn sk_em_velocity_objective(p: &SkParams, data: &ObservationSet) -> ObjectiveValue {
    let h = data.step();
    let n = data.n_transitions();
    let mut terms = Vec::with_capacity(n);
    for k in 1..=n {
        let prev = data.state(k - 1);
        let cur = data.state(k);
        let (x, v) = (prev[0], prev[1]);
        let r = cur[1] - v - h * (-p.eta * v + p.force(x));
        let var = h * p.sigma2(v);
        if !(var > 0.0) || !var.is_finite() {
            return ObjectiveValue::failed(Status::IndefiniteCovariance { index: k });
        }
        terms.push(var.ln() + r * r / var);
    }
    ObjectiveValue::from_terms(terms)
}

/// `R_{h,0} = ∫₀ʰ e^{Ju} du` and `hR_{h,0} - R_{h,1}` with `R_{h,1} = ∫₀ʰ e^{Ju} u du`.
pub fn ll_integrals(j: &DMatrix<f64>, h: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = j.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let mut f = DMatrix::<f64>::zeros(2 * d, 2 * d);
    f.view_mut((0, d), (d, d)).copy_from(&id);
    let mut g = DMatrix::<f64>::zeros(2 * d, d);
    g.view_mut((d, 0), (d, d)).copy_from(&id);
    let e = block_expm(&f, &g, j, h)?;
    let top = e.view((0, 2 * d), (d, d)).into_owned();
    let r0 = e.view((d, 2 * d), (d, d)).into_owned();
    Ok((r0, top))
}

/// Local-linearisation mean and covariance at `x`.
pub fn ll_moments<const D: usize, M: Sde<D>>(model: &M, x: &Vect<D>, h: f64) -> Result<(Vect<D>, Mat<D>)> {
    let f = model.drift(x);
    let jac = model.drift_jacobian(x);
    let s = model.sst(x);
    let hs = model.drift_hessians(x);
    let mut m = Vect::<D>::zeros();
    for i in 0..D {
        m[i] = 0.5 * hs[i].component_mul(&s).sum();
    }
    let jd = DMatrix::from_column_slice(D, D, jac.as_slice());
    let (r0, hr0_r1) = ll_integrals(&jd, h)?;
    let r0 = Mat::<D>::from_column_slice(r0.as_slice());
    let hr0_r1 = Mat::<D>::from_column_slice(hr0_r1.as_slice());
    let mu = x + r0 * f + hr0_r1 * m;
    let sd = DMatrix::from_column_slice(D, D, s.as_slice());
    let blk = block_expm(&jd, &sd, &(-jd.transpose()), h)?;
    let phi11 = Mat::<D>::from_fn(|i, k| blk[(i, k)]);
    let phi12 = Mat::<D>::from_fn(|i, k| blk[(i, D + k)]);
    let omega = phi12 * phi11.transpose();
    let omega = (omega + omega.transpose()) * 0.5;
    if mu.iter().chain(omega.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Overflow { norm: f64::INFINITY });
    }
    Ok((mu, omega))
}

/// Local-linearisation objective with locally constant diffusion.
pub fn ll_objective<const D: usize, M: Sde<D>>(model: &M, data: &ObservationSet) -> ObjectiveValue {
    let h = data.step();
    let n = data.n_transitions();
    let mut terms = Vec::with_capacity(n);
    for k in 1..=n {
        let prev = data.vect::<D>(k - 1);
        let Ok((mu, omega)) = ll_moments(model, &prev, h) else {
            return ObjectiveValue::failed(Status::FlowFailure { index: k });
        };
        let Some(t) = gaussian_term(&(data.vect::<D>(k) - mu), &omega) else {
            return ObjectiveValue::failed(Status::IndefiniteCovariance { index: k });
        };
        terms.push(t);
    }
    ObjectiveValue::from_terms(terms)
}

/// LL for the oscillator after the Lamperti transform of `V`, with the
/// change-of-variables term `Σ log σ²(V_k) = -Σ log ψ'(V_k)²`.
pub fn sk_ll_lamperti_objective(p: &SkParams, data: &ObservationSet) -> ObjectiveValue {
    let (Ok(model), Ok(lt)) = (SkLampertiModel::new(*p), Lamperti::new(p.alpha, p.beta, p.gamma)) else {
        return ObjectiveValue::failed(Status::InvalidParameters);
    };
    let mut states = Vec::with_capacity(data.states().len());
    for k in 0..=data.n_transitions() {
        let s = data.state(k);
        states.push(s[0]);
        states.push(lt.psi(s[1]));
    }
    let Ok(transformed) = ObservationSet::new(data.step(), 2, states) else {
        return ObjectiveValue::failed(Status::FlowFailure { index: 0 });
    };
    let mut out = ll_objective(&model, &transformed);
    if out.status.is_ok() {
        for (k, t) in out.per_transition.iter_mut().enumerate() {
            *t -= 2.0 * lt.psi_prime(data.state(k + 1)[1]).ln();
        }
        out.value = out.per_transition.iter().sum();
    }
    out
}

/// Pair a scalar series with forward-difference velocities `(X_{k+1} - X_k)/h`.
pub fn impute_velocity(x: &[f64], h: f64) -> Result<ObservationSet> {
    if x.len() < 3 {
        return Err(Error::InvalidInput("velocity imputation needs at least 3 samples".into()));
    }
    let mut states = Vec::with_capacity(2 * (x.len() - 1));
    for k in 0..x.len() - 1 {
        states.push(x[k]);
        states.push((x[k + 1] - x[k]) / h);
    }
    ObservationSet::new(h, 2, states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ZeroRemainder;

    #[test]
    fn zero_remainder_flow_is_identity() {
        let x = Vect::<2>::new(0.3, -1.0);
        let (f, df) = rk4_flow(&ZeroRemainder, &x, 0.1).unwrap();
        assert_eq!(f, x);
        assert_eq!(df, Mat::<2>::identity());
    }

    #[test]
    fn ll_integrals_at_zero() {
        let (r0, top) = ll_integrals(&DMatrix::zeros(2, 2), 0.3).unwrap();
        assert!((r0 - DMatrix::identity(2, 2) * 0.3).amax() < 1e-15);
        // hR₀ - R₁ = h² - h²/2
        assert!((top - DMatrix::identity(2, 2) * 0.045).amax() < 1e-15);
    }

    #[test]
    fn ga11_matches_closed_form() {
        let p = SkParams::paper_truth();
        let (h, x, v) = (0.01, 0.4, 2.0);
        let (_, om) = sk_ga3_moments(&p, x, v, h);
        assert!((om[(0, 0)] - h.powi(3) / 3.0 * p.sigma2(v)).abs() < 1e-18);
    }

    #[test]
    fn imputation() {
        let h = 0.1;
        let ramp: Vec<f64> = (0..10).map(|k| 2.0 * k as f64 * h).collect();
        let d = impute_velocity(&ramp, h).unwrap();
        assert_eq!(d.n_transitions(), 8);
        for k in 0..=8 {
            assert!((d.state(k)[1] - 2.0).abs() < 1e-12);
        }
        assert!(impute_velocity(&[1.0, 2.0], h).is_err());
    }
}
