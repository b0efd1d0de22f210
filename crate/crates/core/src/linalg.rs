//! Dense matrix kernels: matrix exponential, Kronecker products, column-major
//! vectorisation and Van Loan block integrals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068,
    5.371920351148152,
];

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!(
            "expm needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("expm input has non-finite entries".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = one_norm(m);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = m * m;

    let (u, v, squarings) = if norm <= THETA[0] {
        let (u, v) = pade_low(m, &a2, &ident, &PADE3);
        (u, v, 0)
    } else if norm <= THETA[1] {
        let (u, v) = pade_low(m, &a2, &ident, &PADE5);
        (u, v, 0)
    } else if norm <= THETA[2] {
        let (u, v) = pade_low(m, &a2, &ident, &PADE7);
        (u, v, 0)
    } else if norm <= THETA[3] {
        let (u, v) = pade_low(m, &a2, &ident, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
        if s > 1000 {
            return Err(Error::Overflow { norm });
        }
        let scale = 2f64.powi(-s);
        let a = m * scale;
        let a2 = &a2 * (scale * scale);
        let (u, v) = pade13(&a, &a2, &ident);
        (u, v, s)
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Singular("Padé denominator".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}

fn pade_low(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    ident: &DMatrix<f64>,
    b: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    // even/odd split: U = A * sum b[2k+1] A^{2k}, V = sum b[2k] A^{2k}
    let mut odd = ident * b[1];
    let mut even = ident * b[0];
    let mut pow = ident.clone();
    let mut k = 1;
    while 2 * k < b.len() {
        pow = &pow * a2;
        even += &pow * b[2 * k];
        if 2 * k + 1 < b.len() {
            odd += &pow * b[2 * k + 1];
        }
        k += 1;
    }
    (a * odd, even)
}

fn pade13(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    ident: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE13;
    let a4 = a2 * a2;
    let a6 = &a4 * a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + a2 * b[3] + ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + a2 * b[2] + ident * b[0];
    (u, v)
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Kronecker sum `A ⊕ B = A ⊗ I + I ⊗ B`.
pub fn kron_sum(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::InvalidInput("kron_sum needs square matrices".into()));
    }
    let ia = DMatrix::<f64>::identity(a.nrows(), a.nrows());
    let ib = DMatrix::<f64>::identity(b.nrows(), b.nrows());
    Ok(a.kronecker(&ib) + ia.kronecker(b))
}

/// Column-major vectorisation.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a `rows x cols` matrix.
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::InvalidInput(format!(
            "unvec: length {} does not match {}x{}",
            v.len(),
            rows,
            cols
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Exponential of the block upper-triangular matrix `[[F, G], [0, H]] t`.
pub fn block_expm(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    t: f64,
) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let m = h.nrows();
    if !f.is_square() || !h.is_square() || g.nrows() != n || g.ncols() != m {
        return Err(Error::InvalidInput(format!(
            "van Loan blocks have incompatible shapes F {}x{}, G {}x{}, H {}x{}",
            f.nrows(),
            f.ncols(),
            g.nrows(),
            g.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let mut big = DMatrix::<f64>::zeros(n + m, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(&(f * t));
    big.view_mut((0, n), (n, m)).copy_from(&(g * t));
    big.view_mut((n, n), (m, m)).copy_from(&(h * t));
    expm(&big)
}

/// `∫₀ᵗ exp(F(t-s)) G exp(Hs) ds`, read off the top-right block of
/// [`block_expm`].
pub fn van_loan_integral(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    t: f64,
) -> Result<DMatrix<f64>> {
    let e = block_expm(f, g, h, t)?;
    Ok(e.view((0, f.nrows()), (f.nrows(), h.nrows())).into_owned())
}
