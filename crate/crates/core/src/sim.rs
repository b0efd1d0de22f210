//! Forward simulation: Euler–Maruyama, the six-Brownian Wright–Fisher scheme,
//! Milstein for the Student Kramers oscillator, subsampling and CSV I/O.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ObservationSet;
use crate::models::sk::SkParams;
use crate::models::wf::{in_open_simplex, WfParams};

/// Default simplex clamp.
pub const WF_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub h_sim: f64,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    pub x0: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_sim > 0.0) || !self.h_sim.is_finite() {
            return Err(Error::InvalidInput(format!("h_sim must be positive, got {}", self.h_sim)));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        if self.x0.is_empty() || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("x0 must be a finite, non-empty vector".into()));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        rng_for(self.seed, self.stream)
    }
}

/// Generator for `(seed, stream)`; streams are independent.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// An equidistant sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    h: f64,
    dim: usize,
    states: Vec<f64>,
}

impl Path {
    pub fn new(h: f64, dim: usize, states: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        if dim == 0 || states.is_empty() || states.len() % dim != 0 {
            return Err(Error::InvalidInput("state array does not match dimension".into()));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("path contains non-finite values".into()));
        }
        Ok(Self { h, dim, states })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored states (`N + 1`).
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// Values of one coordinate.
    pub fn coord(&self, i: usize) -> Vec<f64> {
        self.states.iter().skip(i).step_by(self.dim).copied().collect()
    }

    pub fn to_observations(&self) -> Result<ObservationSet> {
        ObservationSet::new(self.h, self.dim, self.states.clone())
    }

    /// States `k0..=k1` as a new path.
    pub fn window(&self, k0: usize, k1: usize) -> Result<Path> {
        if k0 > k1 || k1 >= self.len() {
            return Err(Error::InvalidInput(format!("bad window {k0}..={k1}")));
        }
        Path::new(self.h, self.dim, self.states[k0 * self.dim..(k1 + 1) * self.dim].to_vec())
    }

    /// CSV with header `t,x1,...,xd`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<String> =
            std::iter::once("t".to_string()).chain((1..=self.dim).map(|i| format!("x{i}"))).collect();
        out.write_record(&header).map_err(csv_err)?;
        let mut row = Vec::with_capacity(self.dim + 1);
        for k in 0..self.len() {
            row.clear();
            row.push(format!("{:.16e}", k as f64 * self.h));
            row.extend(self.state(k).iter().map(|v| format!("{v:.16e}")));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parse a `t,x1,...` CSV; times must be equally spaced.
    pub fn read_csv<R: Read>(r: R) -> Result<Path> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let cols = rdr.headers().map_err(csv_err)?.clone();
        if cols.len() < 2 || &cols[0] != "t" {
            return Err(Error::InvalidInput("CSV header must start with 't' followed by state columns".into()));
        }
        let dim = cols.len() - 1;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("line {}: {e}", n + 2)))?;
            times.push(vals[0]);
            states.extend_from_slice(&vals[1..]);
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput("need at least two rows".into()));
        }
        let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let tol = 1e-6 * h.abs().max(1e-300);
        for (k, t) in times.iter().enumerate() {
            if (t - (times[0] + k as f64 * h)).abs() > tol {
                return Err(Error::InvalidInput(format!("non-uniform time spacing at row {}", k + 2)));
            }
        }
        Path::new(h, dim, states)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::InvalidInput(e.to_string()),
    }
}

/// Keep every `factor`-th state.
pub fn subsample(path: &Path, factor: usize) -> Result<Path> {
    let n = path.len() - 1;
    if factor == 0 || n % factor != 0 {
        return Err(Error::InvalidInput(format!("factor {factor} does not divide {n} steps")));
    }
    let mut states = Vec::with_capacity((n / factor + 1) * path.dim);
    for k in (0..=n).step_by(factor) {
        states.extend_from_slice(path.state(k));
    }
    Path::new(path.h * factor as f64, path.dim, states)
}

/// `X_{k+1} = X_k + hF(X_k) + Σ(X_k)√h Z_k` with a `d×m` factor `Σ`.
pub fn euler_maruyama<F, G>(drift: F, factor: G, cfg: &SimConfig) -> Result<Path>
where
    F: Fn(&[f64]) -> DVector<f64>,
    G: Fn(&[f64]) -> DMatrix<f64>,
{
    cfg.validate()?;
    let d = cfg.x0.len();
    let h = cfg.h_sim;
    let sq = h.sqrt();
    let mut rng = cfg.rng();
    let mut states = Vec::with_capacity((cfg.n_steps + 1) * d);
    states.extend_from_slice(&cfg.x0);
    let mut x = DVector::from_column_slice(&cfg.x0);
    for step in 1..=cfg.n_steps {
        let f = drift(x.as_slice());
        let s = factor(x.as_slice());
        if f.len() != d || s.nrows() != d {
            return Err(Error::InvalidInput("drift or diffusion factor has the wrong shape".into()));
        }
        let z = DVector::from_fn(s.ncols(), |_, _| normal(&mut rng));
        x += f * h + s * z * sq;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        states.extend_from_slice(x.as_slice());
    }
    Path::new(h, d, states)
}

/// Ornstein–Uhlenbeck `dX = -λ(X - m)dt + σdW` by Euler–Maruyama.
pub fn simulate_ou(lambda: f64, m: f64, sigma: f64, cfg: &SimConfig) -> Result<Path> {
    if cfg.x0.len() != 1 {
        return Err(Error::InvalidInput("OU x0 must have one component".into()));
    }
    euler_maruyama(
        |x| DVector::from_element(1, -lambda * (x[0] - m)),
        |_| DMatrix::from_element(1, 1, sigma),
        cfg,
    )
}

/// Clamp into `{x ≥ ε, Σx ≤ 1 - ε}`.
pub fn clamp_simplex(x: &mut [f64], eps: f64) {
    for v in x.iter_mut() {
        *v = v.clamp(eps, 1.0 - eps);
    }
    let s: f64 = x.iter().sum();
    let target = 1.0 - eps;
    if s > target {
        let m = x.len() as f64 * eps;
        let scale = (target - m) / (s - m);
        for v in x.iter_mut() {
            *v = eps + (*v - eps) * scale;
        }
    }
}

/// One step of the six-Brownian scheme with increments `dw` (variance `h`).
pub fn wf_step(p: &WfParams, x: &[f64; 3], h: f64, dw: &[f64; 6], noise_scale: f64, eps: f64) -> [f64; 3] {
    let xv = nalgebra::Vector3::new(x[0], x[1], x[2]);
    let f = p.drift(&xv);
    let x4 = (1.0 - x[0] - x[1] - x[2]).max(0.0);
    let r = |a: f64, b: f64| (a * b).max(0.0).sqrt();
    let n1 = r(x[0], x[1]) * dw[0] + r(x[0], x[2]) * dw[1] + r(x[0], x4) * dw[2];
    let n2 = -r(x[0], x[1]) * dw[0] + r(x[1], x[2]) * dw[3] + r(x[1], x4) * dw[4];
    let n3 = -r(x[0], x[2]) * dw[1] - r(x[1], x[2]) * dw[3] + r(x[2], x4) * dw[5];
    let mut y = [
        x[0] + h * f[0] + noise_scale * n1,
        x[1] + h * f[1] + noise_scale * n2,
        x[2] + h * f[2] + noise_scale * n3,
    ];
    clamp_simplex(&mut y, eps);
    y
}

/// Wright–Fisher path with the default clamp.
pub fn simulate_wf(p: &WfParams, cfg: &SimConfig) -> Result<Path> {
    simulate_wf_with(p, cfg, WF_EPS, 1.0)
}

/// Wright–Fisher path with explicit clamp and noise multiplier.
pub fn simulate_wf_with(p: &WfParams, cfg: &SimConfig, eps: f64, noise_scale: f64) -> Result<Path> {
    cfg.validate()?;
    if cfg.x0.len() != 3 || !in_open_simplex(&cfg.x0) {
        return Err(Error::InvalidInput("x0 must lie strictly inside the 3-simplex".into()));
    }
    if p.to_theta().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("Wright-Fisher parameters must be finite".into()));
    }
    let h = cfg.h_sim;
    let sq = h.sqrt();
    let mut rng = cfg.rng();
    let mut x = [cfg.x0[0], cfg.x0[1], cfg.x0[2]];
    let mut states = Vec::with_capacity(3 * (cfg.n_steps + 1));
    states.extend_from_slice(&x);
    let mut dw = [0.0; 6];
    for step in 1..=cfg.n_steps {
        for w in dw.iter_mut() {
            *w = sq * normal(&mut rng);
        }
        x = wf_step(p, &x, h, &dw, noise_scale, eps);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        states.extend_from_slice(&x);
    }
    Path::new(h, 3, states)
}

/// One Milstein step for the oscillator with Brownian increment `dw`.
pub fn sk_milstein_step(p: &SkParams, x: f64, v: f64, h: f64, dw: f64) -> Option<(f64, f64)> {
    let s2 = p.sigma2(v);
    if !(s2 >= 0.0) {
        return None;
    }
    let x1 = x + h * v;
    let v1 = v + h * (-p.eta * v + p.force(x))
        + s2.sqrt() * dw
        + 0.25 * (2.0 * p.alpha * v + p.beta) * (dw * dw - h);
    (x1.is_finite() && v1.is_finite()).then_some((x1, v1))
}

/// Milstein path driven by the given increments.
pub fn simulate_sk_increments(p: &SkParams, x0: [f64; 2], h: f64, dw: &[f64]) -> Result<Path> {
    let mut states = Vec::with_capacity(2 * (dw.len() + 1));
    let (mut x, mut v) = (x0[0], x0[1]);
    states.extend_from_slice(&x0);
    for (i, &w) in dw.iter().enumerate() {
        (x, v) = sk_milstein_step(p, x, v, h, w).ok_or(Error::Divergence { step: i + 1 })?;
        states.push(x);
        states.push(v);
    }
    Path::new(h, 2, states)
}

/// Student Kramers path by the Milstein scheme.
pub fn simulate_sk_milstein(p: &SkParams, cfg: &SimConfig) -> Result<Path> {
    cfg.validate()?;
    if cfg.x0.len() != 2 {
        return Err(Error::InvalidInput("oscillator x0 must have two components".into()));
    }
    p.validate()?;
    let sq = cfg.h_sim.sqrt();
    let mut rng = cfg.rng();
    let dw: Vec<f64> = (0..cfg.n_steps).map(|_| sq * normal(&mut rng)).collect();
    simulate_sk_increments(p, [cfg.x0[0], cfg.x0[1]], cfg.h_sim, &dw)
}
