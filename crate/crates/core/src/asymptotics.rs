//! Plug-in asymptotic covariance of the splitting estimator from ergodic
//! averages along a path.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::sk::SkParams;
use crate::models::wf::{in_open_simplex, wf_sst_inverse, WfParams};
use crate::sim::Path;

/// Drift block `C1` and diffusion block `C2` (empty if the diffusion has no
/// free parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrices {
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
}

/// `∂F/∂θ` for the Wright–Fisher drift in the order `(κ, K row-major, λ)`.
pub fn wf_drift_param_jacobian(x: &Vector3<f64>) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(3, 15);
    for i in 0..3 {
        g[(i, i)] = 1.0;
        for l in 0..3 {
            g[(i, 3 + 3 * i + l)] = x[l];
            g[(i, 12 + l)] = -x[i] * x[l];
        }
    }
    g
}

/// `C(θ₀) = avg Gᵀ(diag(x)⁻¹ + 11ᵀ/x₄)G` over the path. Independent of `θ₀`
/// because the drift is linear in its parameters.
pub fn info_wf(path: &Path, _theta0: &WfParams) -> Result<DMatrix<f64>> {
    if path.dim() != 3 {
        return Err(Error::InvalidInput("Wright-Fisher information needs a 3-D path".into()));
    }
    let mut c = DMatrix::zeros(15, 15);
    for k in 0..path.len() {
        let s = path.state(k);
        if !in_open_simplex(s) {
            return Err(Error::InvalidInput(format!("state {k} is on the simplex boundary")));
        }
        let x = Vector3::new(s[0], s[1], s[2]);
        let g = wf_drift_param_jacobian(&x);
        let w = wf_sst_inverse(&x);
        let w = DMatrix::from_column_slice(3, 3, w.as_slice());
        c += g.transpose() * w * g;
    }
    c /= path.len() as f64;
    Ok(symmetrize(c))
}

/// `C1 = avg g gᵀ/σ²(v)` with `g = (-v, x³, x², x, 1)` and
/// `C2 = ½ avg w wᵀ/σ⁴(v)` with `w = (v², v, 1)`.
pub fn info_sk(path: &Path, theta0: &SkParams) -> Result<InfoMatrices> {
    if path.dim() != 2 {
        return Err(Error::InvalidInput("oscillator information needs a 2-D path".into()));
    }
    let mut c1 = DMatrix::zeros(5, 5);
    let mut c2 = DMatrix::zeros(3, 3);
    for k in 0..path.len() {
        let s = path.state(k);
        let (x, v) = (s[0], s[1]);
        let s2 = theta0.sigma2(v);
        if !(s2 > 0.0) {
            return Err(Error::InvalidInput(format!("non-positive diffusion at state {k}")));
        }
        let g = DVector::from_vec(vec![-v, x * x * x, x * x, x, 1.0]);
        let w = DVector::from_vec(vec![v * v, v, 1.0]);
        c1 += &g * g.transpose() / s2;
        c2 += &w * w.transpose() / (2.0 * s2 * s2);
    }
    let n = path.len() as f64;
    Ok(InfoMatrices { c1: symmetrize(c1 / n), c2: symmetrize(c2 / n) })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Inverse of an SPD matrix by Cholesky, with diagonal jitter
/// `1e-10·tr/dim` on failure. Returns the jitter used.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidInput("matrix must be square".into()));
    }
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0));
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok((ch.inverse(), 0.0));
    }
    let jitter = 1e-10 * m.trace() / n as f64;
    let shifted = m + DMatrix::identity(n, n) * jitter;
    match shifted.cholesky() {
        Some(ch) if jitter > 0.0 => Ok((ch.inverse(), jitter)),
        _ => Err(Error::Singular("information matrix is not positive definite".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSd {
    pub sd1: Vec<f64>,
    pub sd2: Vec<f64>,
    pub jitter1: f64,
    pub jitter2: f64,
}

impl AsymptoticSd {
    /// Both blocks concatenated.
    pub fn all(&self) -> Vec<f64> {
        self.sd1.iter().chain(&self.sd2).copied().collect()
    }
}

/// `sqrt(diag(C1⁻¹)/(Nh))` and `sqrt(diag(C2⁻¹)/N)`.
pub fn asymptotic_sd(info: &InfoMatrices, n: usize, h: f64) -> Result<AsymptoticSd> {
    if n == 0 || !(h > 0.0) {
        return Err(Error::InvalidInput("need N > 0 and h > 0".into()));
    }
    let (i1, jitter1) = spd_inverse(&info.c1)?;
    let (i2, jitter2) = spd_inverse(&info.c2)?;
    let nf = n as f64;
    let sd1 = i1.diagonal().iter().map(|d| (d / (nf * h)).sqrt()).collect();
    let sd2 = i2.diagonal().iter().map(|d| (d / nf).sqrt()).collect();
    Ok(AsymptoticSd { sd1, sd2, jitter1, jitter2 })
}

/// `J·cov·Jᵀ`, symmetrised.
pub fn delta_transform(j: &DMatrix<f64>, cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if j.ncols() != cov.nrows() || cov.nrows() != cov.ncols() {
        return Err(Error::InvalidInput(format!(
            "cannot transform a {}x{} covariance with a {}x{} Jacobian",
            cov.nrows(),
            cov.ncols(),
            j.nrows(),
            j.ncols()
        )));
    }
    Ok(symmetrize(j * cov * j.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_info() {
        let info = InfoMatrices { c1: DMatrix::identity(2, 2), c2: DMatrix::identity(3, 3) };
        let sd = asymptotic_sd(&info, 100, 0.01).unwrap();
        assert!(sd.sd1.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(sd.sd2.iter().all(|v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn wf_single_state_block() {
        let path = Path::new(0.1, 3, vec![0.25; 3]).unwrap();
        let c = info_wf(&path, &WfParams::from_theta(&[1.0; 15]).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 8.0 } else { 4.0 };
                assert!((c[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}
