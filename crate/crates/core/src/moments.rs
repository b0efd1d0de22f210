//! Exact transition moments of multivariate Pearson diffusions
//! `dX = A(X - b) dt + Σ(X) dW` with `vec ΣΣᵀ(x) = α̌ vec(xxᵀ) + β̌ x + γ̌`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{block_expm, expm, kron, kron_sum, van_loan_integral};

/// Quadratic diffusion specification `(α̌, β̌, γ̌)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDiffusion {
    dim: usize,
    alpha: DMatrix<f64>,
    beta: DMatrix<f64>,
    gamma: DVector<f64>,
}

impl QuadraticDiffusion {
    pub fn new(alpha: DMatrix<f64>, beta: DMatrix<f64>, gamma: DVector<f64>) -> Result<Self> {
        let d = beta.ncols();
        let d2 = d * d;
        if d == 0
            || alpha.nrows() != d2
            || alpha.ncols() != d2
            || beta.nrows() != d2
            || gamma.len() != d2
        {
            return Err(Error::InvalidInput(format!(
                "diffusion spec shapes: alpha {}x{}, beta {}x{}, gamma {}",
                alpha.nrows(),
                alpha.ncols(),
                beta.nrows(),
                beta.ncols(),
                gamma.len()
            )));
        }
        if alpha.iter().chain(beta.iter()).chain(gamma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("diffusion spec has non-finite entries".into()));
        }
        let spec = Self { dim: d, alpha, beta, gamma };
        // ΣΣᵀ(x) symmetric for all x: rows (i,j) and (j,i) must act alike on
        // symmetric vec(xxᵀ), and β̌, γ̌ rows must coincide.
        for i in 0..d {
            for j in (i + 1)..d {
                let (r1, r2) = (i + j * d, j + i * d);
                let sa = spec.alpha_block(i, j);
                let sb = spec.alpha_block(j, i);
                let asym = (&sa + sa.transpose()) - (&sb + sb.transpose());
                let scale = 1.0 + sa.amax() + sb.amax();
                let beta_gap = (spec.beta.row(r1) - spec.beta.row(r2)).amax();
                let gamma_gap = (spec.gamma[r1] - spec.gamma[r2]).abs();
                if asym.amax() > 1e-12 * scale
                    || beta_gap > 1e-12 * (1.0 + spec.beta.amax())
                    || gamma_gap > 1e-12 * (1.0 + spec.gamma.amax())
                {
                    return Err(Error::InvalidInput(format!(
                        "diffusion spec gives asymmetric ΣΣᵀ in entry ({i},{j})"
                    )));
                }
            }
        }
        Ok(spec)
    }

    /// Constant diffusion `ΣΣᵀ(x) = s`.
    pub fn additive(s: &DMatrix<f64>) -> Result<Self> {
        let d = s.nrows();
        Self::new(
            DMatrix::zeros(d * d, d * d),
            DMatrix::zeros(d * d, d),
            crate::linalg::vec(s),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    /// The `d x d` matrix `α^{ij}` with `[ΣΣᵀ]_ij ⊃ xᵀ α^{ij} x`.
    pub fn alpha_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let d = self.dim;
        let row = i + j * d;
        DMatrix::from_fn(d, d, |k, l| self.alpha[(row, k + l * d)])
    }

    /// Writes `vec ΣΣᵀ(x)` into `out` (length `d²`).
    pub fn sst_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let d2 = d * d;
        out[..d2].copy_from_slice(self.gamma.as_slice());
        for l in 0..d {
            for k in 0..d {
                let xx = x[k] * x[l];
                if xx == 0.0 {
                    continue;
                }
                let col = self.alpha.column(k + l * d);
                for (o, a) in out.iter_mut().zip(col.iter()) {
                    *o += a * xx;
                }
            }
        }
        for (k, &xk) in x.iter().enumerate().take(d) {
            let col = self.beta.column(k);
            for (o, b) in out.iter_mut().zip(col.iter()) {
                *o += b * xk;
            }
        }
    }

    pub fn sigma_sigma_t(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut v = vec![0.0; d * d];
        self.sst_vec_into(x, &mut v);
        let m = DMatrix::from_column_slice(d, d, &v);
        (&m + m.transpose()) * 0.5
    }

    /// Gradient of the entry `[ΣΣᵀ]_ij` at `x`.
    pub fn sst_gradient(&self, i: usize, j: usize, x: &[f64]) -> DVector<f64> {
        let a = self.alpha_block(i, j);
        let xv = DVector::from_column_slice(x);
        let row = i + j * self.dim;
        (&a + a.transpose()) * xv + self.beta.row(row).transpose()
    }

    /// `𝕃[ΣΣᵀ]` for the generator with drift value `drift` and diffusion
    /// `ΣΣᵀ(x)`: `(D[ΣΣᵀ]_ij)ᵀ F + Σ_kl α^{ij}_kl [ΣΣᵀ]_kl`.
    pub fn generator_sst(&self, x: &[f64], drift: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let s = self.sigma_sigma_t(x);
        let f = DVector::from_column_slice(drift);
        let svec = crate::linalg::vec(&s);
        let second = &self.alpha * svec;
        let mut out = DMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                out[(i, j)] = self.sst_gradient(i, j, x).dot(&f) + second[i + j * d];
            }
        }
        (&out + out.transpose()) * 0.5
    }
}

/// `𝕃φ(x) = Σ ∂ᵢφ Fⁱ + ½ Σ ∂²ᵢⱼφ [ΣΣᵀ]ᵢⱼ` given the gradient and Hessian of φ at `x`.
pub fn generator_apply(
    drift: &[f64],
    spec: &QuadraticDiffusion,
    grad: &[f64],
    hess: &DMatrix<f64>,
    x: &[f64],
) -> f64 {
    let s = spec.sigma_sigma_t(x);
    let first: f64 = grad.iter().zip(drift).map(|(g, f)| g * f).sum();
    let second: f64 = hess.component_mul(&s).sum();
    first + 0.5 * second
}

/// Linear-drift Pearson model `F(x) = A(x - b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPearson {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub diffusion: QuadraticDiffusion,
}

/// The five Van Loan integrals of the covariance formula, plus `exp(Ft)`.
#[derive(Debug, Clone)]
pub struct MomentIntegrals {
    pub exp_f: DMatrix<f64>,
    pub i1: DMatrix<f64>,
    pub i2: DMatrix<f64>,
    pub i3: DMatrix<f64>,
    pub i4: DMatrix<f64>,
    pub i5: DMatrix<f64>,
}

impl LinearPearson {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, diffusion: QuadraticDiffusion) -> Result<Self> {
        let d = diffusion.dim();
        if a.nrows() != d || a.ncols() != d || b.len() != d {
            return Err(Error::InvalidInput(format!(
                "linear model dimensions: A {}x{}, b {}, diffusion d = {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                d
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("linear model has non-finite entries".into()));
        }
        Ok(Self { a, b, diffusion })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// True if every eigenvalue of `A` has negative real part.
    pub fn is_stable(&self) -> bool {
        self.a
            .complex_eigenvalues()
            .iter()
            .all(|z| z.re < 0.0)
    }

    pub fn drift(&self, x: &[f64]) -> DVector<f64> {
        &self.a * (DVector::from_column_slice(x) - &self.b)
    }

    /// `F = A ⊕ A + α̌`.
    pub fn moment_generator(&self) -> DMatrix<f64> {
        kron_sum(&self.a, &self.a).expect("square") + self.diffusion.alpha()
    }

    pub fn mean_at(&self, m0: &[f64], t: f64) -> Result<DVector<f64>> {
        check_time(t)?;
        let e = expm(&(&self.a * t))?;
        Ok(e * (DVector::from_column_slice(m0) - &self.b) + &self.b)
    }

    pub fn moment_integrals(&self, t: f64) -> Result<MomentIntegrals> {
        check_time(t)?;
        let d = self.dim();
        let id = DMatrix::<f64>::identity(d, d);
        let f = self.moment_generator();
        let alpha = self.diffusion.alpha();
        let asum = kron_sum(&self.a, &self.a)?;
        let n = d * d;
        let blk = block_expm(&f, alpha, &asum, t)?;
        let exp_f = blk.view((0, 0), (n, n)).into_owned();
        let i1 = blk.view((0, n), (n, n)).into_owned();
        let i2 = van_loan_integral(&f, alpha, &kron(&id, &self.a), t)?;
        let i3 = van_loan_integral(&f, alpha, &kron(&self.a, &id), t)?;
        let i4 = van_loan_integral(&f, self.diffusion.beta(), &self.a, t)?;
        let i5 = van_loan_integral(
            &f,
            &DMatrix::identity(n, n),
            &DMatrix::zeros(n, n),
            t,
        )?;
        Ok(MomentIntegrals { exp_f, i1, i2, i3, i4, i5 })
    }

    /// Covariance at time `t` started from mean `m0` and covariance `c0`.
    pub fn covariance_at(&self, m0: &[f64], c0: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if m0.len() != d || c0.nrows() != d || c0.ncols() != d {
            return Err(Error::InvalidInput("covariance_at: dimension mismatch".into()));
        }
        check_psd(c0)?;
        let ints = self.moment_integrals(t)?;
        let delta = DVector::from_column_slice(m0) - &self.b;
        let b = &self.b;
        let v = &ints.exp_f * crate::linalg::vec(c0)
            + &ints.i1 * crate::linalg::vec(&(&delta * delta.transpose()))
            + &ints.i2 * crate::linalg::vec(&(&delta * b.transpose()))
            + &ints.i3 * crate::linalg::vec(&(b * delta.transpose()))
            + &ints.i4 * &delta
            + &ints.i5 * crate::linalg::vec(&self.diffusion.sigma_sigma_t(b.as_slice()));
        let c = DMatrix::from_column_slice(d, d, v.as_slice());
        Ok((&c + c.transpose()) * 0.5)
    }

    /// Conditional covariance `Ω_h(x)` of `X_h` given `X_0 = x`.
    pub fn omega_h(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let d = self.dim();
        self.covariance_at(x, &DMatrix::zeros(d, d), h)
    }

    pub fn omega_cache(&self, h: f64) -> Result<OmegaCache> {
        OmegaCache::new(self, h)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

fn check_psd(c: &DMatrix<f64>) -> Result<()> {
    let scale = 1.0 + c.amax();
    if (c - c.transpose()).amax() > 1e-10 * scale {
        return Err(Error::InvalidInput("initial covariance is not symmetric".into()));
    }
    if c.amax() == 0.0 {
        return Ok(());
    }
    let ev = c.clone().symmetric_eigenvalues();
    if ev.min() < -1e-10 * scale {
        return Err(Error::InvalidInput("initial covariance is not positive semidefinite".into()));
    }
    Ok(())
}

/// Everything in `Ω_h(x)` and `μ_h(x)` that does not depend on `x`.
///
/// With `δ = x - b`, `vec Ω_h(x) = I₁ vec(δδᵀ) + L δ + c` where
/// `L = I₂(b ⊗ I) + I₃(I ⊗ b) + I₄` and `c = I₅ vec ΣΣᵀ(b)`.
#[derive(Debug, Clone)]
pub struct OmegaCache {
    d: usize,
    h: f64,
    b: Vec<f64>,
    exp_ah: DMatrix<f64>,
    i1: DMatrix<f64>,
    l: DMatrix<f64>,
    c: DVector<f64>,
}

impl OmegaCache {
    pub fn new(model: &LinearPearson, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        let d = model.dim();
        let ints = model.moment_integrals(h)?;
        let id = DMatrix::<f64>::identity(d, d);
        let bcol = DMatrix::from_column_slice(d, 1, model.b.as_slice());
        let l = &ints.i2 * kron(&bcol, &id) + &ints.i3 * kron(&id, &bcol) + &ints.i4;
        let c = &ints.i5 * crate::linalg::vec(&model.diffusion.sigma_sigma_t(model.b.as_slice()));
        Ok(Self {
            d,
            h,
            b: model.b.as_slice().to_vec(),
            exp_ah: expm(&(&model.a * h))?,
            i1: ints.i1,
            l,
            c,
        })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `e^{Ah}`.
    pub fn exp_ah(&self) -> &DMatrix<f64> {
        &self.exp_ah
    }

    /// `μ_h(x) = e^{Ah}(x - b) + b` written into `out`.
    pub fn mean_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            let mut s = self.b[i];
            for j in 0..d {
                s += self.exp_ah[(i, j)] * (x[j] - self.b[j]);
            }
            out[i] = s;
        }
    }

    /// Column-major `Ω_h(x)` written into `out` (length `d²`), symmetrised.
    pub fn omega_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        let n = d * d;
        out[..n].copy_from_slice(self.c.as_slice());
        let mut stack = [0.0f64; 16];
        let mut heap;
        let delta: &mut [f64] = if d <= 16 {
            &mut stack[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap[..]
        };
        for i in 0..d {
            delta[i] = x[i] - self.b[i];
        }
        for l in 0..d {
            for k in 0..d {
                let dd = delta[k] * delta[l];
                let col = self.i1.column(k + l * d);
                for (o, a) in out.iter_mut().zip(col.iter()) {
                    *o += a * dd;
                }
            }
        }
        for (k, &dk) in delta.iter().enumerate() {
            let col = self.l.column(k);
            for (o, a) in out.iter_mut().zip(col.iter()) {
                *o += a * dk;
            }
        }
        for j in 0..d {
            for i in (j + 1)..d {
                let s = 0.5 * (out[i + j * d] + out[j + i * d]);
                out[i + j * d] = s;
                out[j + i * d] = s;
            }
        }
    }

    pub fn omega(&self, x: &[f64]) -> DMatrix<f64> {
        let mut v = vec![0.0; self.d * self.d];
        self.omega_into(x, &mut v);
        DMatrix::from_column_slice(self.d, self.d, &v)
    }

    pub fn mean(&self, x: &[f64]) -> DVector<f64> {
        let mut v = vec![0.0; self.d];
        self.mean_into(x, &mut v);
        DVector::from_column_slice(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(lambda: f64, m: f64, sigma: f64) -> LinearPearson {
        LinearPearson::new(
            DMatrix::from_element(1, 1, -lambda),
            DVector::from_element(1, m),
            QuadraticDiffusion::additive(&DMatrix::from_element(1, 1, sigma * sigma)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_mean_decay() {
        let m = ou(1.0, 0.0, 1.0);
        let got = m.mean_at(&[2.0], 2f64.ln()).unwrap()[0];
        assert!((got - 1.0).abs() < 1e-14);
        assert_eq!(m.mean_at(&[2.0], 0.0).unwrap()[0], 2.0);
    }

    #[test]
    fn ou_conditional_variance() {
        let (l, s, h) = (1.7, 0.6, 0.3);
        let got = ou(l, 0.4, s).omega_h(&[1.3], h).unwrap()[(0, 0)];
        let want = s * s * (1.0 - (-2.0 * l * h).exp()) / (2.0 * l);
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn covariance_at_zero_time_is_initial() {
        let m = ou(1.0, 0.0, 1.0);
        let c0 = DMatrix::from_element(1, 1, 0.25);
        assert!((m.covariance_at(&[0.3], &c0, 0.0).unwrap()[(0, 0)] - 0.25).abs() < 1e-15);
        assert!(m.covariance_at(&[0.3], &DMatrix::from_element(1, 1, -1.0), 0.1).is_err());
    }

    #[test]
    fn asymmetric_spec_rejected() {
        let mut beta = DMatrix::zeros(4, 2);
        beta[(1, 0)] = 1.0;
        let r = QuadraticDiffusion::new(DMatrix::zeros(4, 4), beta, DVector::zeros(4));
        assert!(r.is_err());
    }

    #[test]
    fn generator_of_constant_and_linear() {
        let spec = QuadraticDiffusion::additive(&DMatrix::identity(2, 2)).unwrap();
        let z = DMatrix::zeros(2, 2);
        assert_eq!(generator_apply(&[1.0, 2.0], &spec, &[0.0, 0.0], &z, &[0.3, 0.1]), 0.0);
        let v = generator_apply(&[1.0, 2.0], &spec, &[0.0, 1.0], &z, &[0.3, 0.1]);
        assert_eq!(v, 2.0);
    }
}
