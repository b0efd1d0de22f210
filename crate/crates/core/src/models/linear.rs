//! Linear-drift validation models (OU, CIR) and an `Sde` view of any
//! [`LinearPearson`].

use nalgebra::{DMatrix, DVector};

use super::{Mat, Sde, Vect};
use crate::error::{Error, Result};
use crate::moments::{LinearPearson, QuadraticDiffusion};

/// Ornstein–Uhlenbeck `dX = -λ(X - m) dt + σ dW`.
pub fn ou_model(lambda: f64, m: f64, sigma: f64) -> Result<LinearPearson> {
    if !(lambda > 0.0) || !m.is_finite() || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "OU needs lambda > 0 and finite m, sigma (got {lambda}, {m}, {sigma})"
        )));
    }
    LinearPearson::new(
        DMatrix::from_element(1, 1, -lambda),
        DVector::from_element(1, m),
        QuadraticDiffusion::additive(&DMatrix::from_element(1, 1, sigma * sigma))?,
    )
}

/// Cox–Ingersoll–Ross `dX = -λ(X - m) dt + √(βX) dW`.
pub fn cir_model(lambda: f64, m: f64, beta: f64) -> Result<LinearPearson> {
    if !(lambda > 0.0) || !(beta > 0.0) || !(2.0 * lambda * m >= beta) {
        return Err(Error::InvalidInput(format!(
            "CIR needs lambda > 0, beta > 0 and 2 lambda m >= beta (got {lambda}, {m}, {beta})"
        )));
    }
    LinearPearson::new(
        DMatrix::from_element(1, 1, -lambda),
        DVector::from_element(1, m),
        QuadraticDiffusion::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, beta),
            DVector::zeros(1),
        )?,
    )
}

/// A [`LinearPearson`] viewed as an [`Sde`] of fixed dimension.
#[derive(Debug, Clone)]
pub struct LinearSde<const D: usize> {
    pub model: LinearPearson,
    a: Mat<D>,
    b: Vect<D>,
}

impl<const D: usize> LinearSde<D> {
    pub fn new(model: LinearPearson) -> Result<Self> {
        if model.dim() != D {
            return Err(Error::InvalidInput(format!(
                "model has dimension {}, expected {D}",
                model.dim()
            )));
        }
        let a = Mat::<D>::from_column_slice(model.a.as_slice());
        let b = Vect::<D>::from_column_slice(model.b.as_slice());
        Ok(Self { model, a, b })
    }
}

impl<const D: usize> Sde<D> for LinearSde<D> {
    fn drift(&self, x: &Vect<D>) -> Vect<D> {
        self.a * (x - self.b)
    }
    fn drift_jacobian(&self, _x: &Vect<D>) -> Mat<D> {
        self.a
    }
    fn drift_hessians(&self, _x: &Vect<D>) -> [Mat<D>; D] {
        [Mat::<D>::zeros(); D]
    }
    fn diffusion(&self) -> &QuadraticDiffusion {
        &self.model.diffusion
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_and_cir_moments() {
        let (l, m, s, h) = (0.8, 1.5, 0.4, 0.25);
        let ou = ou_model(l, m, s).unwrap();
        let om = ou.omega_h(&[0.2], h).unwrap()[(0, 0)];
        assert!((om - s * s * (1.0 - (-2.0 * l * h).exp()) / (2.0 * l)).abs() < 1e-15);

        let cir = cir_model(l, m, 0.3).unwrap();
        let x = 0.7;
        let mean = cir.mean_at(&[x], h).unwrap()[0];
        assert!((mean - (x * (-l * h).exp() + m * (1.0 - (-l * h).exp()))).abs() < 1e-14);

        assert!(ou_model(-1.0, 0.0, 1.0).is_err());
        assert!(cir_model(1.0, 0.1, 1.0).is_err());
    }
}
