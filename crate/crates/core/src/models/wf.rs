//! Reduced three-dimensional Wright–Fisher diffusion with mutation and
//! selection for one locus with four alleles.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde_json::{json, Map, Value};

use super::{Mat, Remainder, Sde, SplitModel, Vect};
use crate::error::{Error, Result};
use crate::moments::{LinearPearson, QuadraticDiffusion};

/// Reduced parameters: `F(x) = κ + Kx - x xᵀλ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WfParams {
    pub kappa: Vector3<f64>,
    pub k: Matrix3<f64>,
    pub lambda: Vector3<f64>,
}

/// Natural parameters: mutation rate `τ`, selection `q` and row-stochastic `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WfNaturalParams {
    pub tau: f64,
    pub q: [f64; 4],
    pub p: [[f64; 4]; 4],
}

pub const WF_PARAM_NAMES: [&str; 15] = [
    "kappa1", "kappa2", "kappa3", "K11", "K12", "K13", "K21", "K22", "K23", "K31", "K32", "K33",
    "lambda1", "lambda2", "lambda3",
];

pub const WF_NATURAL_NAMES: [&str; 15] = [
    "q1", "q2", "q3", "p11", "p12", "p13", "p21", "p22", "p23", "p31", "p32", "p33", "p41", "p42",
    "p43",
];

impl WfParams {
    /// Unpack `θ = (κ, K row-major, λ)`.
    pub fn from_theta(theta: &[f64]) -> Result<Self> {
        if theta.len() != 15 {
            return Err(Error::InvalidInput(format!(
                "Wright-Fisher expects 15 parameters, got {}",
                theta.len()
            )));
        }
        Ok(Self {
            kappa: Vector3::from_column_slice(&theta[0..3]),
            k: Matrix3::from_row_slice(&theta[3..12]),
            lambda: Vector3::from_column_slice(&theta[12..15]),
        })
    }

    pub fn to_theta(&self) -> Vec<f64> {
        let mut t = self.kappa.as_slice().to_vec();
        for i in 0..3 {
            for j in 0..3 {
                t.push(self.k[(i, j)]);
            }
        }
        t.extend_from_slice(self.lambda.as_slice());
        t
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.to_theta();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("Wright-Fisher parameters must be finite".into()));
        }
        if self.kappa.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidInput("Wright-Fisher kappa must be positive".into()));
        }
        Ok(())
    }

    pub fn drift(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.kappa + self.k * x - x * x.dot(&self.lambda)
    }

    pub fn drift_jacobian(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        self.k - Matrix3::identity() * x.dot(&self.lambda) - x * self.lambda.transpose()
    }

    pub fn to_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("wf.kappa".into(), json!(self.kappa.as_slice()));
        let rows: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| self.k[(i, j)]).collect()).collect();
        m.insert("wf.K".into(), json!(rows));
        m.insert("wf.lambda".into(), json!(self.lambda.as_slice()));
        m
    }

    pub fn from_map(m: &Map<String, Value>) -> Result<Self> {
        let kappa = read_vec(m, "wf.kappa", 3)?;
        let lambda = read_vec(m, "wf.lambda", 3)?;
        let rows = m
            .get("wf.K")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::InvalidInput("missing field wf.K".into()))?;
        if rows.len() != 3 {
            return Err(Error::InvalidInput("wf.K must have 3 rows".into()));
        }
        let mut k = Matrix3::zeros();
        for (i, r) in rows.iter().enumerate() {
            let r = value_vec(r, "wf.K", 3)?;
            for j in 0..3 {
                k[(i, j)] = r[j];
            }
        }
        Ok(Self {
            kappa: Vector3::from_column_slice(&kappa),
            k,
            lambda: Vector3::from_column_slice(&lambda),
        })
    }
}

fn value_vec(v: &Value, name: &str, n: usize) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::InvalidInput(format!("{name} must be an array")))?;
    let out: Option<Vec<f64>> = arr.iter().map(|x| x.as_f64()).collect();
    match out {
        Some(o) if o.len() == n => Ok(o),
        _ => Err(Error::InvalidInput(format!("{name} must hold {n} numbers"))),
    }
}

fn read_vec(m: &Map<String, Value>, name: &str, n: usize) -> Result<Vec<f64>> {
    let v = m
        .get(name)
        .ok_or_else(|| Error::InvalidInput(format!("missing field {name}")))?;
    value_vec(v, name, n)
}

impl WfNaturalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidInput("tau must be positive".into()));
        }
        for row in &self.p {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput("rows of P must be probability vectors".into()));
            }
        }
        if self.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("q must be finite".into()));
        }
        Ok(())
    }

    /// `(q₁, q₂, q₃, p₁₁ … p₃₃, p₄₁, p₄₂, p₄₃)`.
    pub fn to_theta(&self) -> Vec<f64> {
        let mut t = self.q[..3].to_vec();
        for j in 0..4 {
            for i in 0..3 {
                t.push(self.p[j][i]);
            }
        }
        t
    }

    pub fn to_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("wf.tau".into(), json!(self.tau));
        m.insert("wf.q".into(), json!(self.q));
        m.insert("wf.P".into(), json!(self.p));
        m
    }

    pub fn from_map(m: &Map<String, Value>) -> Result<Self> {
        let tau = m
            .get("wf.tau")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::InvalidInput("missing numeric field wf.tau".into()))?;
        let q = read_vec(m, "wf.q", 4)?;
        let rows = m
            .get("wf.P")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::InvalidInput("missing field wf.P".into()))?;
        if rows.len() != 4 {
            return Err(Error::InvalidInput("wf.P must have 4 rows".into()));
        }
        let mut p = [[0.0; 4]; 4];
        for (i, r) in rows.iter().enumerate() {
            p[i].copy_from_slice(&value_vec(r, "wf.P", 4)?);
        }
        let n = Self { tau, q: [q[0], q[1], q[2], q[3]], p };
        n.validate()?;
        Ok(n)
    }

    /// The values used in the simulation study.
    pub fn paper_truth() -> Self {
        Self {
            tau: 10.0,
            q: [25.0, 40.0, 30.0, 10.0],
            p: [
                [0.2, 0.3, 0.15, 0.35],
                [0.2, 0.05, 0.35, 0.40],
                [0.25, 0.6, 0.1, 0.05],
                [0.15, 0.1, 0.1, 0.65],
            ],
        }
    }

    /// Starting point of the optimisation in the simulation study.
    pub fn paper_init() -> Self {
        Self {
            tau: 10.0,
            q: [11.0, 11.0, 11.0, 10.0],
            p: [
                [0.53, 0.05, 0.05, 0.37],
                [0.05, 0.53, 0.05, 0.37],
                [0.05, 0.05, 0.53, 0.37],
                [0.05, 0.05, 0.05, 0.85],
            ],
        }
    }
}

/// `κᵢ = (τ/2)p₄ᵢ`, `λᵢ = qᵢ - q₄`, `Kᵢⱼ = (τ/2)(pⱼᵢ - p₄ᵢ - δᵢⱼ) + δᵢⱼλᵢ`.
pub fn wf_natural_to_reduced(n: &WfNaturalParams) -> WfParams {
    let half = n.tau / 2.0;
    let lambda = Vector3::from_fn(|i, _| n.q[i] - n.q[3]);
    let kappa = Vector3::from_fn(|i, _| half * n.p[3][i]);
    let k = Matrix3::from_fn(|i, j| {
        let dij = if i == j { 1.0 } else { 0.0 };
        half * (n.p[j][i] - n.p[3][i] - dij) + dij * lambda[i]
    });
    WfParams { kappa, k, lambda }
}

/// Inverse of [`wf_natural_to_reduced`] given the non-identifiable `τ₀`, `q₄⁰`.
pub fn wf_reduced_to_natural(p: &WfParams, tau0: f64, q4: f64) -> Result<WfNaturalParams> {
    if !(tau0 > 0.0) {
        return Err(Error::InvalidInput(format!("tau0 must be positive, got {tau0}")));
    }
    let mut pm = [[0.0; 4]; 4];
    for i in 0..3 {
        pm[3][i] = 2.0 * p.kappa[i] / tau0;
    }
    for j in 0..3 {
        for i in 0..3 {
            let dij = if i == j { 1.0 } else { 0.0 };
            pm[j][i] = 2.0 * p.k[(i, j)] / tau0 + pm[3][i] + dij * (1.0 - 2.0 * p.lambda[i] / tau0);
        }
    }
    for row in pm.iter_mut() {
        row[3] = 1.0 - row[..3].iter().sum::<f64>();
    }
    let q = [p.lambda[0] + q4, p.lambda[1] + q4, p.lambda[2] + q4, q4];
    Ok(WfNaturalParams { tau: tau0, q, p: pm })
}

/// Jacobian of the affine map reduced `θ` to natural `θ̃` (both 15-vectors).
pub fn wf_back_transform_jacobian(tau0: f64) -> Result<DMatrix<f64>> {
    if !(tau0 > 0.0) {
        return Err(Error::InvalidInput(format!("tau0 must be positive, got {tau0}")));
    }
    let s = 2.0 / tau0;
    let mut j = DMatrix::zeros(15, 15);
    for i in 0..3 {
        j[(i, 12 + i)] = 1.0;
        j[(12 + i, i)] = s;
    }
    for r in 0..3 {
        for i in 0..3 {
            let row = 3 + 3 * r + i;
            j[(row, 3 + 3 * i + r)] = s;
            j[(row, i)] = s;
            if r == i {
                j[(row, 12 + i)] = -s;
            }
        }
    }
    Ok(j)
}

/// `ΣΣᵀ(x) = diag(x) - xxᵀ`: `α̌ = -I₉`, `β̌` selecting the diagonal, `γ̌ = 0`.
pub fn wf_diffusion_spec() -> QuadraticDiffusion {
    let mut beta = DMatrix::zeros(9, 3);
    beta[(0, 0)] = 1.0;
    beta[(4, 1)] = 1.0;
    beta[(8, 2)] = 1.0;
    QuadraticDiffusion::new(-DMatrix::identity(9, 9), beta, DVector::zeros(9))
        .expect("Wright-Fisher spec is symmetric")
}

/// `(diag(x) - xxᵀ)⁻¹ = diag(x)⁻¹ + 11ᵀ/(1 - 1ᵀx)`.
pub fn wf_sst_inverse(x: &Vector3<f64>) -> Matrix3<f64> {
    let x4 = 1.0 - x.sum();
    Matrix3::from_fn(|i, j| (if i == j { 1.0 / x[i] } else { 0.0 }) + 1.0 / x4)
}

/// True if `x` is strictly inside the simplex.
pub fn in_open_simplex(x: &[f64]) -> bool {
    x.iter().all(|&v| v > 0.0) && x.iter().sum::<f64>() < 1.0
}

#[derive(Debug, Clone)]
pub struct WfModel {
    pub params: WfParams,
    spec: QuadraticDiffusion,
}

impl WfModel {
    pub fn new(params: WfParams) -> Self {
        Self { params, spec: wf_diffusion_spec() }
    }
}

impl Sde<3> for WfModel {
    fn drift(&self, x: &Vect<3>) -> Vect<3> {
        self.params.drift(x)
    }
    fn drift_jacobian(&self, x: &Vect<3>) -> Mat<3> {
        self.params.drift_jacobian(x)
    }
    fn drift_hessians(&self, _x: &Vect<3>) -> [Mat<3>; 3] {
        // ∂²/∂x_j∂x_k of -xᵢ xᵀλ is -(δᵢⱼλ_k + δᵢ_kλⱼ)
        let l = self.params.lambda;
        std::array::from_fn(|i| {
            Mat::<3>::from_fn(|j, k| {
                let mut v = 0.0;
                if i == j {
                    v -= l[k];
                }
                if i == k {
                    v -= l[j];
                }
                v
            })
        })
    }
    fn diffusion(&self) -> &QuadraticDiffusion {
        &self.spec
    }
    fn sst(&self, x: &Vect<3>) -> Mat<3> {
        Mat::<3>::from_diagonal(x) - x * x.transpose()
    }
}

/// `N(x) = F(b) - (x - b)(x - b)ᵀλ`.
#[derive(Debug, Clone, Copy)]
pub struct WfRemainder {
    pub b: Vector3<f64>,
    pub f_b: Vector3<f64>,
    pub lambda: Vector3<f64>,
}

impl Remainder<3> for WfRemainder {
    fn value(&self, x: &Vect<3>) -> Vect<3> {
        let d = x - self.b;
        self.f_b - d * d.dot(&self.lambda)
    }
    fn jacobian(&self, x: &Vect<3>) -> Mat<3> {
        let d = x - self.b;
        -Mat::<3>::identity() * d.dot(&self.lambda) - d * self.lambda.transpose()
    }
}

/// Split around `b` = the empirical mean, with `A = DF(b)`.
pub fn wf_split(p: &WfParams, mean: &Vector3<f64>) -> Result<SplitModel<3, WfRemainder>> {
    let a = p.drift_jacobian(mean);
    let linear = LinearPearson::new(
        DMatrix::from_column_slice(3, 3, a.as_slice()),
        DVector::from_column_slice(mean.as_slice()),
        wf_diffusion_spec(),
    )?;
    Ok(SplitModel {
        linear,
        remainder: WfRemainder { b: *mean, f_b: p.drift(mean), lambda: p.lambda },
    })
}
