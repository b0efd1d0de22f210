//! Concrete diffusion models and the drift-splitting interface.

use nalgebra::{SMatrix, SVector};

use crate::moments::{LinearPearson, QuadraticDiffusion};

pub mod linear;
pub mod sk;
pub mod wf;

pub type Vect<const D: usize> = SVector<f64, D>;
pub type Mat<const D: usize> = SMatrix<f64, D, D>;

/// A diffusion `dX = F(X) dt + Σ(X) dW` with quadratic `ΣΣᵀ`.
pub trait Sde<const D: usize>: Send + Sync {
    fn drift(&self, x: &Vect<D>) -> Vect<D>;
    fn drift_jacobian(&self, x: &Vect<D>) -> Mat<D>;
    /// Hessian of each drift component.
    fn drift_hessians(&self, x: &Vect<D>) -> [Mat<D>; D];
    fn diffusion(&self) -> &QuadraticDiffusion;

    fn sst(&self, x: &Vect<D>) -> Mat<D> {
        let mut m = Mat::<D>::zeros();
        self.diffusion().sst_vec_into(x.as_slice(), m.as_mut_slice());
        (m + m.transpose()) * 0.5
    }
}

/// The nonlinear drift remainder `N` of a split `F(x) = A(x - b) + N(x)`.
pub trait Remainder<const D: usize>: Send + Sync {
    fn value(&self, x: &Vect<D>) -> Vect<D>;
    fn jacobian(&self, x: &Vect<D>) -> Mat<D>;

    /// Flow `f_h` of `dx/dt = N(x)` and its Jacobian; `h` may be negative.
    fn flow(&self, x: &Vect<D>, h: f64) -> Option<(Vect<D>, Mat<D>)> {
        crate::estimators::rk4_flow(self, x, h)
    }

    /// Flow value only.
    fn flow_value(&self, x: &Vect<D>, h: f64) -> Option<Vect<D>> {
        crate::estimators::rk4_flow_value(self, x, h)
    }
}

/// `N ≡ 0`, for models whose drift is already linear.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRemainder;

impl<const D: usize> Remainder<D> for ZeroRemainder {
    fn value(&self, _x: &Vect<D>) -> Vect<D> {
        Vect::<D>::zeros()
    }
    fn jacobian(&self, _x: &Vect<D>) -> Mat<D> {
        Mat::<D>::zeros()
    }
    fn flow(&self, x: &Vect<D>, _h: f64) -> Option<(Vect<D>, Mat<D>)> {
        Some((*x, Mat::<D>::identity()))
    }
    fn flow_value(&self, x: &Vect<D>, _h: f64) -> Option<Vect<D>> {
        Some(*x)
    }
}

/// Linear Pearson part plus nonlinear remainder.
#[derive(Debug, Clone)]
pub struct SplitModel<const D: usize, R> {
    pub linear: LinearPearson,
    pub remainder: R,
}

impl<const D: usize, R: Remainder<D>> SplitModel<D, R> {
    /// `A(x - b) + N(x)`.
    pub fn drift(&self, x: &Vect<D>) -> Vect<D> {
        let a = Mat::<D>::from_column_slice(self.linear.a.as_slice());
        let b = Vect::<D>::from_column_slice(self.linear.b.as_slice());
        a * (x - b) + self.remainder.value(x)
    }

    /// `A + DN(x)`.
    pub fn drift_jacobian(&self, x: &Vect<D>) -> Mat<D> {
        Mat::<D>::from_column_slice(self.linear.a.as_slice()) + self.remainder.jacobian(x)
    }
}
