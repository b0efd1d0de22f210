#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pearson_core::moments::{LinearPearson, QuadraticDiffusion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adaptive Dormand–Prince 5(4) integration of `y' = f(t, y)` from `t0` to `t1`.
pub fn dopri<F>(f: F, y0: &[f64], t0: f64, t1: f64, rtol: f64, atol: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = (t1 - t0) / 100.0;
    if t1 == t0 {
        return y;
    }
    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                for i in 0..n {
                    ys[i] += h * A[s][j] * kj[i];
                }
            }
            k.push(f(t + C[s] * h, &ys));
        }
        let mut y5 = y.clone();
        let mut err = 0.0f64;
        for i in 0..n {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for s in 0..7 {
                s5 += B5[s] * k[s][i];
                s4 += B4[s] * k[s][i];
            }
            y5[i] += h * s5;
            let sc = atol + rtol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (s5 - s4)).abs() / sc);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    y
}

/// `exp(M)` by a plain Taylor series (for modest norms).
pub fn taylor_expm(m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=terms {
        term = &term * m / k as f64;
        out += &term;
    }
    out
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * (2.0 * r.random::<f64>() - 1.0))
}

/// A random stable matrix: `-(c I + S Sᵀ) + small skew part`.
pub fn random_stable(r: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let s = random_matrix(r, d, d, 0.8);
    let k = random_matrix(r, d, d, 0.5);
    let skew = &k - k.transpose();
    -(DMatrix::identity(d, d) * 0.5 + &s * s.transpose()) + skew
}

/// A random quadratic diffusion with symmetric `α^{ij}`, `β^{ij}`, `γ^{ij}`.
pub fn random_spec(r: &mut ChaCha8Rng, d: usize, scale: f64) -> QuadraticDiffusion {
    let d2 = d * d;
    let mut alpha = DMatrix::zeros(d2, d2);
    let mut beta = DMatrix::zeros(d2, d);
    let mut gamma = DVector::zeros(d2);
    for j in 0..d {
        for i in 0..=j {
            let a = random_matrix(r, d, d, scale);
            let a = (&a + a.transpose()) * 0.5;
            let b = random_matrix(r, d, 1, scale);
            let g = scale * (2.0 * r.random::<f64>() - 1.0);
            for &(p, q) in &[(i, j), (j, i)] {
                let row = p + q * d;
                for l in 0..d {
                    for k in 0..d {
                        alpha[(row, k + l * d)] = a[(k, l)];
                    }
                    beta[(row, l)] = b[(l, 0)];
                }
                gamma[row] = g;
            }
        }
    }
    QuadraticDiffusion::new(alpha, beta, gamma).unwrap()
}

pub fn random_linear_model(r: &mut ChaCha8Rng, d: usize) -> LinearPearson {
    let a = random_stable(r, d);
    let b = DVector::from_fn(d, |_, _| 2.0 * r.random::<f64>() - 1.0);
    LinearPearson::new(a, b, random_spec(r, d, 0.3)).unwrap()
}

/// Mean and covariance at `t` from the moment ODEs
/// `m' = A(m - b)`, `C' = AC + CAᵀ + ΣΣᵀ(m) + unvec(α̌ vec C)`.
pub fn moment_ode(model: &LinearPearson, m0: &[f64], c0: &DMatrix<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
    let d = model.dim();
    let mut y0 = m0.to_vec();
    y0.extend_from_slice(c0.as_slice());
    let rhs = |_t: f64, y: &[f64]| -> Vec<f64> {
        let m = DVector::from_column_slice(&y[..d]);
        let c = DMatrix::from_column_slice(d, d, &y[d..]);
        let dm = &model.a * (&m - &model.b);
        let ac = DVector::from_column_slice(c.as_slice());
        let extra = model.diffusion.alpha() * ac;
        let dc = &model.a * &c + &c * model.a.transpose()
            + model.diffusion.sigma_sigma_t(m.as_slice())
            + DMatrix::from_column_slice(d, d, extra.as_slice());
        let mut out = dm.as_slice().to_vec();
        out.extend_from_slice(dc.as_slice());
        out
    };
    let y = dopri(rhs, &y0, 0.0, t, 1e-13, 1e-15);
    (
        DVector::from_column_slice(&y[..d]),
        DMatrix::from_column_slice(d, d, &y[d..]),
    )
}

/// Central finite-difference gradient.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
