//! Student Kramers oscillator
//! `dX = V dt`, `dV = (-ηV - U'(X)) dt + √(αV² + βV + γ) dW`
//! with `U(x) = -ax⁴/4 - bx³/3 - cx²/2 - dx`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde_json::{json, Map, Value};

use super::{Mat, Remainder, Sde, SplitModel, Vect};
use crate::error::{Error, Result};
use crate::moments::{LinearPearson, QuadraticDiffusion};
use crate::quadrature::adaptive_gk;

pub const SK_PARAM_NAMES: [&str; 8] = ["eta", "a", "b", "c", "d", "alpha", "beta", "gamma"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkParams {
    pub eta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl SkParams {
    pub fn from_theta(t: &[f64]) -> Result<Self> {
        if t.len() != 8 {
            return Err(Error::InvalidInput(format!(
                "Student Kramers expects 8 parameters, got {}",
                t.len()
            )));
        }
        Ok(Self {
            eta: t[0],
            a: t[1],
            b: t[2],
            c: t[3],
            d: t[4],
            alpha: t[5],
            beta: t[6],
            gamma: t[7],
        })
    }

    pub fn to_theta(&self) -> Vec<f64> {
        vec![self.eta, self.a, self.b, self.c, self.d, self.alpha, self.beta, self.gamma]
    }

    /// Parameters of the simulation study.
    pub fn paper_truth() -> Self {
        Self::from_theta(&[30.0, -125.0, 40.0, 150.0, -20.0, 20.0, -8.0, 1280.8]).unwrap()
    }

    pub fn paper_init() -> Self {
        Self::from_theta(&[50.0, -200.0, 10.0, 100.0, 10.0, 30.0, -5.0, 1000.0]).unwrap()
    }

    /// Requires `a < 0`, `α > 0`, `β² < 4αγ` and `α < 2η`.
    pub fn validate(&self) -> Result<()> {
        if self.to_theta().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("Student Kramers parameters must be finite".into()));
        }
        if !(self.a < 0.0) {
            return Err(Error::InvalidInput("a must be negative".into()));
        }
        if !(self.alpha > 0.0) || !(self.beta * self.beta < 4.0 * self.alpha * self.gamma) {
            return Err(Error::InvalidInput("need alpha > 0 and beta^2 < 4 alpha gamma".into()));
        }
        if !(self.alpha < 2.0 * self.eta) {
            return Err(Error::InvalidInput("need alpha < 2 eta".into()));
        }
        Ok(())
    }

    /// `-U'(x) = ax³ + bx² + cx + d`.
    pub fn force(&self, x: f64) -> f64 {
        ((self.a * x + self.b) * x + self.c) * x + self.d
    }

    /// `-U''(x)`.
    pub fn force_prime(&self, x: f64) -> f64 {
        (3.0 * self.a * x + 2.0 * self.b) * x + self.c
    }

    /// `-U'''(x)`.
    pub fn force_second(&self, x: f64) -> f64 {
        6.0 * self.a * x + 2.0 * self.b
    }

    pub fn potential(&self, x: f64) -> f64 {
        -(((self.a * x / 4.0 + self.b / 3.0) * x + self.c / 2.0) * x + self.d) * x
    }

    /// `σ²(v) = αv² + βv + γ`.
    pub fn sigma2(&self, v: f64) -> f64 {
        (self.alpha * v + self.beta) * v + self.gamma
    }

    pub fn drift(&self, x: f64, v: f64) -> Vector2<f64> {
        Vector2::new(v, -self.eta * v + self.force(x))
    }

    pub fn drift_jacobian(&self, x: f64) -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, self.force_prime(x), -self.eta)
    }

    pub fn to_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        for (n, v) in SK_PARAM_NAMES.iter().zip(self.to_theta()) {
            m.insert(format!("sk.{n}"), json!(v));
        }
        m
    }

    pub fn from_map(m: &Map<String, Value>) -> Result<Self> {
        let mut t = Vec::with_capacity(8);
        for n in SK_PARAM_NAMES {
            let key = format!("sk.{n}");
            let v = m
                .get(&key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::InvalidInput(format!("missing numeric field {key}")))?;
            t.push(v);
        }
        Self::from_theta(&t)
    }
}

/// Only the `(2,2)` entry of `ΣΣᵀ` is nonzero: `αv² + βv + γ`.
pub fn sk_diffusion_spec(p: &SkParams) -> QuadraticDiffusion {
    let mut alpha = DMatrix::zeros(4, 4);
    alpha[(3, 3)] = p.alpha;
    let mut beta = DMatrix::zeros(4, 2);
    beta[(3, 1)] = p.beta;
    let mut gamma = DVector::zeros(4);
    gamma[3] = p.gamma;
    QuadraticDiffusion::new(alpha, beta, gamma).expect("(2,2)-only spec is symmetric")
}

#[derive(Debug, Clone)]
pub struct SkModel {
    pub params: SkParams,
    spec: QuadraticDiffusion,
}

impl SkModel {
    pub fn new(params: SkParams) -> Self {
        Self { spec: sk_diffusion_spec(&params), params }
    }
}

impl Sde<2> for SkModel {
    fn drift(&self, z: &Vect<2>) -> Vect<2> {
        self.params.drift(z[0], z[1])
    }
    fn drift_jacobian(&self, z: &Vect<2>) -> Mat<2> {
        self.params.drift_jacobian(z[0])
    }
    fn drift_hessians(&self, z: &Vect<2>) -> [Mat<2>; 2] {
        [
            Mat::<2>::zeros(),
            Mat::<2>::new(self.params.force_second(z[0]), 0.0, 0.0, 0.0),
        ]
    }
    fn diffusion(&self) -> &QuadraticDiffusion {
        &self.spec
    }
    fn sst(&self, z: &Vect<2>) -> Mat<2> {
        Mat::<2>::new(0.0, 0.0, 0.0, self.params.sigma2(z[1]))
    }
}

/// `N(x, v) = (0, ax³ + bx² + cx + d - A₂₁(x - b_x))`.
#[derive(Debug, Clone, Copy)]
pub struct SkRemainder {
    pub params: SkParams,
    pub a21: f64,
    pub bx: f64,
}

impl SkRemainder {
    fn n2(&self, x: f64) -> f64 {
        self.params.force(x) - self.a21 * (x - self.bx)
    }
    fn n2_prime(&self, x: f64) -> f64 {
        self.params.force_prime(x) - self.a21
    }
}

impl Remainder<2> for SkRemainder {
    fn value(&self, z: &Vect<2>) -> Vect<2> {
        Vect::<2>::new(0.0, self.n2(z[0]))
    }
    fn jacobian(&self, z: &Vect<2>) -> Mat<2> {
        Mat::<2>::new(0.0, 0.0, self.n2_prime(z[0]), 0.0)
    }
    /// `x` is constant and `v` moves linearly, so the flow is exact.
    fn flow(&self, z: &Vect<2>, h: f64) -> Option<(Vect<2>, Mat<2>)> {
        let f = Vect::<2>::new(z[0], z[1] + h * self.n2(z[0]));
        let df = Mat::<2>::new(1.0, 0.0, h * self.n2_prime(z[0]), 1.0);
        Some((f, df))
    }
    fn flow_value(&self, z: &Vect<2>, h: f64) -> Option<Vect<2>> {
        Some(Vect::<2>::new(z[0], z[1] + h * self.n2(z[0])))
    }
}

/// Which root `b_x±` to use as the `x`-coordinate of the split centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootChoice {
    Plus,
    Minus,
    NearestMean,
}

/// The two candidate centres `-b/(3a) ± √(var + (mean + b/(3a))²)`.
pub fn sk_split_roots(p: &SkParams, mean_x: f64, var_x: f64) -> (f64, f64) {
    let shift = p.b / (3.0 * p.a);
    let r = (var_x + (mean_x + shift).powi(2)).sqrt();
    (-shift + r, -shift - r)
}

pub fn sk_split_with(
    p: &SkParams,
    mean_x: f64,
    var_x: f64,
    choice: RootChoice,
) -> Result<SplitModel<2, SkRemainder>> {
    if !(var_x >= 0.0) {
        return Err(Error::InvalidInput(format!("var_x must be non-negative, got {var_x}")));
    }
    let ex2 = var_x + mean_x * mean_x;
    let a21 = 3.0 * p.a * ex2 + 2.0 * p.b * mean_x + p.c;
    let (plus, minus) = sk_split_roots(p, mean_x, var_x);
    let bx = match choice {
        RootChoice::Plus => plus,
        RootChoice::Minus => minus,
        RootChoice::NearestMean => {
            if (plus - mean_x).abs() <= (minus - mean_x).abs() {
                plus
            } else {
                minus
            }
        }
    };
    let linear = LinearPearson::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, a21, -p.eta]),
        DVector::from_vec(vec![bx, 0.0]),
        sk_diffusion_spec(p),
    )?;
    Ok(SplitModel { linear, remainder: SkRemainder { params: *p, a21, bx } })
}

/// Split with `b_x` chosen as the root nearest the empirical mean.
pub fn sk_split(p: &SkParams, mean_x: f64, var_x: f64) -> Result<SplitModel<2, SkRemainder>> {
    sk_split_with(p, mean_x, var_x, RootChoice::NearestMean)
}

/// Approximate (decoupled) invariant densities, unnormalised.
#[derive(Debug, Clone, Copy)]
pub struct ApproxInvariantDensities {
    params: SkParams,
}

pub fn sk_invariant_densities(p: &SkParams) -> Result<ApproxInvariantDensities> {
    if !(p.alpha < 2.0 * p.eta) || !(p.alpha > 0.0) || !(4.0 * p.alpha * p.gamma > p.beta * p.beta) {
        return Err(Error::InvalidInput(
            "invariant densities need 0 < alpha < 2 eta and beta^2 < 4 alpha gamma".into(),
        ));
    }
    Ok(ApproxInvariantDensities { params: *p })
}

impl ApproxInvariantDensities {
    /// `exp(-((2η - α)/γ) U(x))`.
    pub fn pi_x(&self, x: f64) -> f64 {
        let p = &self.params;
        (-(2.0 * p.eta - p.alpha) / p.gamma * p.potential(x)).exp()
    }

    pub fn pi_v(&self, v: f64) -> f64 {
        let p = &self.params;
        let k = (4.0 * p.alpha * p.gamma - p.beta * p.beta).sqrt();
        let pow = p.sigma2(v).powf(-(p.eta / p.alpha + 1.0));
        let skew = (2.0 * p.beta * p.eta / (p.alpha * k) * ((2.0 * p.alpha * v + p.beta) / k).atan()).exp();
        pow * skew
    }

    pub fn normalizer_x(&self, lo: f64, hi: f64) -> Result<f64> {
        adaptive_gk(|x| self.pi_x(x), lo, hi, 1e-14, 1e-10)
    }

    pub fn normalizer_v(&self, lo: f64, hi: f64) -> Result<f64> {
        adaptive_gk(|v| self.pi_v(v), lo, hi, 1e-300, 1e-10)
    }
}

/// Skew-t parameters `(ν, μ, νσ², ω)` of the `V` marginal with rate `λ`.
pub fn skew_t_params(lambda: f64, alpha: f64, beta: f64, gamma: f64) -> Result<(f64, f64, f64, f64)> {
    if !(alpha > 0.0) || !(4.0 * alpha * gamma > beta * beta) {
        return Err(Error::InvalidInput(
            "skew-t mapping needs alpha > 0 and 4 alpha gamma > beta^2".into(),
        ));
    }
    let disc = 4.0 * alpha * gamma - beta * beta;
    let nu = 2.0 * lambda / alpha + 1.0;
    let mu = -beta / (2.0 * alpha);
    let nu_sigma2 = disc / (4.0 * alpha * alpha);
    let omega = 2.0 * beta * lambda / (alpha * disc.sqrt());
    Ok((nu, mu, nu_sigma2, omega))
}

/// Lamperti transform `ψ(v) = α^{-1/2} asinh((2αv + β)/√(4αγ - β²))`.
#[derive(Debug, Clone, Copy)]
pub struct Lamperti {
    alpha: f64,
    beta: f64,
    k: f64,
}

impl Lamperti {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let disc = 4.0 * alpha * gamma - beta * beta;
        if !(alpha > 0.0) || !(disc > 0.0) {
            return Err(Error::InvalidInput(
                "Lamperti transform needs alpha > 0 and 4 alpha gamma > beta^2".into(),
            ));
        }
        Ok(Self { alpha, beta, k: disc.sqrt() })
    }

    pub fn psi(&self, v: f64) -> f64 {
        ((2.0 * self.alpha * v + self.beta) / self.k).asinh() / self.alpha.sqrt()
    }

    pub fn psi_inv(&self, u: f64) -> f64 {
        (self.k * (self.alpha.sqrt() * u).sinh() - self.beta) / (2.0 * self.alpha)
    }

    /// `ψ'(v) = 1/σ(v)`.
    pub fn psi_prime(&self, v: f64) -> f64 {
        let s2 = (self.k * self.k + (2.0 * self.alpha * v + self.beta).powi(2)) / (4.0 * self.alpha);
        1.0 / s2.sqrt()
    }
}

/// The oscillator in `(x, u = ψ(v))` coordinates, with unit noise on `u`.
#[derive(Debug, Clone)]
pub struct SkLampertiModel {
    pub params: SkParams,
    q: f64,
    r: f64,
    spec: QuadraticDiffusion,
}

impl SkLampertiModel {
    pub fn new(params: SkParams) -> Result<Self> {
        Lamperti::new(params.alpha, params.beta, params.gamma)?;
        let q = (params.gamma - params.beta * params.beta / (4.0 * params.alpha)).sqrt();
        let spec = QuadraticDiffusion::additive(&DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))?;
        Ok(Self { params, q, r: params.alpha.sqrt(), spec })
    }

    fn shift(&self, x: f64) -> f64 {
        let p = &self.params;
        p.beta * p.eta / (2.0 * p.alpha) + p.force(x)
    }
}

impl Sde<2> for SkLampertiModel {
    fn drift(&self, z: &Vect<2>) -> Vect<2> {
        let p = &self.params;
        let s = self.r * z[1];
        let f1 = self.q * s.sinh() / self.r - p.beta / (2.0 * p.alpha);
        let f2 = -(p.eta + p.alpha / 2.0) * s.tanh() / self.r + self.shift(z[0]) / (self.q * s.cosh());
        Vect::<2>::new(f1, f2)
    }

    fn drift_jacobian(&self, z: &Vect<2>) -> Mat<2> {
        let p = &self.params;
        let s = self.r * z[1];
        let (ch, th) = (s.cosh(), s.tanh());
        Mat::<2>::new(
            0.0,
            self.q * ch,
            p.force_prime(z[0]) / (self.q * ch),
            -(p.eta + p.alpha / 2.0) / (ch * ch) - self.shift(z[0]) * self.r * th / (self.q * ch),
        )
    }

    fn drift_hessians(&self, z: &Vect<2>) -> [Mat<2>; 2] {
        let p = &self.params;
        let r = self.r;
        let s = r * z[1];
        let (ch, th) = (s.cosh(), s.tanh());
        let sech = 1.0 / ch;
        let h1 = Mat::<2>::new(0.0, 0.0, 0.0, self.q * r * s.sinh());
        let fxx = p.force_second(z[0]) / (self.q * ch);
        let fxu = -p.force_prime(z[0]) * r * th / (self.q * ch);
        let fuu = 2.0 * (p.eta + p.alpha / 2.0) * r * sech * sech * th
            + self.shift(z[0]) / self.q * r * r * sech * (th * th - sech * sech);
        let h2 = Mat::<2>::new(fxx, fxu, fxu, fuu);
        [h1, h2]
    }

    fn diffusion(&self) -> &QuadraticDiffusion {
        &self.spec
    }

    fn sst(&self, _z: &Vect<2>) -> Mat<2> {
        Mat::<2>::new(0.0, 0.0, 0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_values() {
        let p = SkParams::paper_truth();
        let f = p.drift(1.0, 0.0);
        assert_eq!((f[0], f[1]), (0.0, 45.0));
        assert!((p.sigma2(1.0) - 1292.8).abs() < 1e-9);
        assert!((p.sigma2(0.2) - 1280.0).abs() < 1e-9);
        let s = sk_diffusion_spec(&p).sigma_sigma_t(&[0.0, 1.0]);
        assert!((s[(1, 1)] - 1292.8).abs() < 1e-9 && s[(0, 0)] == 0.0 && s[(0, 1)] == 0.0);
    }

    #[test]
    fn skew_t_table_values() {
        let (nu, mu, ns2, om) = skew_t_params(67.9, 64.3, 233.2, 4387.8).unwrap();
        assert!((nu - 3.11).abs() < 0.01);
        assert!((mu + 1.81).abs() < 0.01);
        assert!((ns2 - 65.0).abs() < 1.0);
        assert!((om - 0.475).abs() < 0.005);
        assert!(skew_t_params(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn split_roots_and_flow() {
        let mut p = SkParams::paper_truth();
        p.b = 0.0;
        let (plus, minus) = sk_split_roots(&p, 0.3, 0.5);
        let ex2: f64 = 0.5 + 0.09;
        assert!((plus - ex2.sqrt()).abs() < 1e-14 && (minus + ex2.sqrt()).abs() < 1e-14);
        let s = sk_split(&SkParams::paper_truth(), 0.2, 0.4).unwrap();
        let z = Vect::<2>::new(0.7, -3.0);
        let (f, _) = s.remainder.flow(&z, 0.01).unwrap();
        let (back, _) = s.remainder.flow(&f, -0.01).unwrap();
        assert_eq!(back[0], z[0]);
        assert!((back[1] - z[1]).abs() < 1e-15);
    }

    #[test]
    fn lamperti_roundtrip() {
        let l = Lamperti::new(20.0, -8.0, 1280.8).unwrap();
        for i in 0..=200 {
            let v = -100.0 + i as f64;
            assert!((l.psi_inv(l.psi(v)) - v).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }
}
