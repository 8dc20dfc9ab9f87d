use crate::scalar::{Ring, Scalar};

use super::{EnergyDensity, NZ};

/// `Ψ = Σ_m ½ k_m (z_m − z0_m)²`, a quadratic test energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalQuadratic<S> {
    pub k: [S; NZ],
    pub z0: [S; NZ],
    pub rho: S,
    pub c: S,
}

impl<S: Scalar> DiagonalQuadratic<S> {
    /// `Ψ = F11²`.
    pub fn f11_squared() -> Self {
        let mut k = [S::zero(); NZ];
        k[0] = S::lit(2.0);
        Self {
            k,
            z0: [S::zero(); NZ],
            rho: S::one(),
            c: S::zero(),
        }
    }

    /// `Ψ = ½μ|F − I|² + ½κ|∇F|²`, stress free at the reference state.
    pub fn linear_elastic(mu: S, kappa: S) -> Self {
        let mut k = [kappa; NZ];
        let mut z0 = [S::zero(); NZ];
        for i in 0..3 {
            for j in 0..3 {
                k[3 * i + j] = mu;
            }
            z0[4 * i] = S::one();
        }
        Self {
            k,
            z0,
            rho: S::one(),
            c: S::zero(),
        }
    }
}

impl<S: Scalar> EnergyDensity<S> for DiagonalQuadratic<S> {
    fn psi<R: Ring<S>>(&self, z: &[R; NZ]) -> R {
        let mut acc = R::zero_value();
        for m in 0..NZ {
            if self.k[m] != S::zero() {
                let d = z[m].clone() - R::constant(self.z0[m]);
                acc += (d.clone() * d).scale(S::lit(0.5) * self.k[m]);
            }
        }
        acc
    }

    fn gradient<R: Ring<S>>(&self, z: &[R; NZ]) -> [R; NZ] {
        std::array::from_fn(|m| (z[m].clone() - R::constant(self.z0[m])).scale(self.k[m]))
    }

    fn hessian_upper<R: Ring<S>>(&self, _z: &[R; NZ], emit: &mut impl FnMut(usize, usize, R)) {
        for m in 0..NZ {
            if self.k[m] != S::zero() {
                emit(m, m, R::constant(self.k[m]));
            }
        }
    }

    fn density(&self) -> S {
        self.rho
    }

    fn damping(&self) -> S {
        self.c
    }
}
