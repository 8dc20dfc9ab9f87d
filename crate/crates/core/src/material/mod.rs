//! Three-well free energy in reparameterized Green-Lagrange strains, with a
//! strain-gradient regularization.
//!
//! States are flattened into 36 variables: `z[3i + J] = F_iJ` and
//! `z[9 + 9i + 3J + K] = F_iJ,K`.

mod poly;
mod threewell;
mod toy;

pub use poly::{build_psi_polynomial, Monomial, PolynomialEnergy, SparsePolynomial};
pub use threewell::ThreeWell;
pub use toy::DiagonalQuadratic;

use crate::scalar::{Ring, Scalar};

/// Number of state variables per quadrature point.
pub const NZ: usize = 36;
/// Number of deformation-gradient variables (the first `NF` of `NZ`).
pub const NF: usize = 9;

#[inline]
pub const fn f_index(i: usize, j: usize) -> usize {
    3 * i + j
}

#[inline]
pub const fn gf_index(i: usize, j: usize, k: usize) -> usize {
    9 + 9 * i + 3 * j + k
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaterialError {
    #[error("invalid material parameter {name} = {value}: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Energy coefficients, length scale, well radius, density and damping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams<S> {
    pub b1: S,
    pub b2: S,
    pub b3: S,
    pub b4: S,
    pub b5: S,
    pub l: S,
    pub r: S,
    pub rho: S,
    pub c: S,
}

impl<S: Scalar> MaterialParams<S> {
    /// Wells of unit depth at radius `r`: `B2 = -1.5/r²`, `B3 = 1/r³`,
    /// `B4 = 1.5/r⁴`, with `B1 = 500`, `B5 = 250`, `l = 0.025`, `ρ = 1`.
    pub fn with_radius(r: S, l: S, c: S) -> Self {
        Self {
            b1: S::lit(500.0),
            b2: S::lit(-1.5) / (r * r),
            b3: S::one() / (r * r * r),
            b4: S::lit(1.5) / (r * r * r * r),
            b5: S::lit(250.0),
            l,
            r,
            rho: S::one(),
            c,
        }
    }

    /// `r = 0.25`, `l = 0.025`, no damping.
    pub fn reference() -> Self {
        Self::with_radius(S::lit(0.25), S::lit(0.025), S::zero())
    }

    pub fn with_damping(mut self, c: S) -> Self {
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let checks: [(&'static str, S, bool, &'static str); 8] = [
            ("B1", self.b1, self.b1 > S::zero(), "must be positive"),
            ("B4", self.b4, self.b4 > S::zero(), "must be positive"),
            ("B5", self.b5, self.b5 > S::zero(), "must be positive"),
            ("rho", self.rho, self.rho > S::zero(), "must be positive"),
            ("c", self.c, self.c >= S::zero(), "must be non-negative"),
            ("l", self.l, self.l > S::zero(), "must be positive"),
            ("r", self.r, self.r > S::zero(), "must be positive"),
            (
                "B2/B3",
                self.b2 + self.b3,
                self.b2.is_finite() && self.b3.is_finite(),
                "must be finite",
            ),
        ];
        for (name, value, ok, reason) in checks {
            if !ok {
                return Err(MaterialError::Invalid {
                    name,
                    value: value.to_f64_lossy(),
                    reason,
                });
            }
        }
        Ok(())
    }

    /// `B2(e2²+e3²) + B3 e3(e3² − 3e2²) + B4(e2²+e3²)²`.
    pub fn non_convex(&self, e2: S, e3: S) -> S {
        let rho = e2 * e2 + e3 * e3;
        self.b2 * rho + self.b3 * e3 * (e3 * e3 - S::lit(3.0) * e2 * e2) + self.b4 * rho * rho
    }

    /// Well points `(e2, e3)` of the X, Y and Z variants.
    pub fn wells(&self) -> [(S, S); 3] {
        let h = S::lit(3.0).sqrt() * S::lit(0.5) * self.r;
        let half = S::lit(0.5) * self.r;
        [(h, half), (-h, half), (S::zero(), -self.r)]
    }
}

impl<S: Scalar> Default for MaterialParams<S> {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    None,
    X,
    Y,
    Z,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::None => "none",
            Phase::X => "X",
            Phase::Y => "Y",
            Phase::Z => "Z",
        }
    }
}

/// Variant whose well is nearest, if the non-convex part is below −0.5.
pub fn classify_phase<S: Scalar>(e2: S, e3: S, params: &MaterialParams<S>) -> Phase {
    if params.non_convex(e2, e3) >= S::lit(-0.5) {
        return Phase::None;
    }
    let mut best = (S::infinity(), Phase::None);
    for ((w2, w3), ph) in params.wells().into_iter().zip([Phase::X, Phase::Y, Phase::Z]) {
        let d = (e2 - w2) * (e2 - w2) + (e3 - w3) * (e3 - w3);
        if d < best.0 {
            best = (d, ph);
        }
    }
    best.1
}

/// Deformation gradient and its spatial gradient at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadState<S> {
    pub f: [[S; 3]; 3],
    pub grad_f: [[[S; 3]; 3]; 3],
}

impl<S: Scalar> QuadState<S> {
    pub fn identity() -> Self {
        let mut f = [[S::zero(); 3]; 3];
        for (i, row) in f.iter_mut().enumerate() {
            row[i] = S::one();
        }
        Self {
            f,
            grad_f: [[[S::zero(); 3]; 3]; 3],
        }
    }

    pub fn to_zeta(&self) -> [S; NZ] {
        let mut z = [S::zero(); NZ];
        for i in 0..3 {
            for j in 0..3 {
                z[f_index(i, j)] = self.f[i][j];
                for k in 0..3 {
                    z[gf_index(i, j, k)] = self.grad_f[i][j][k];
                }
            }
        }
        z
    }

    pub fn from_zeta(z: &[S; NZ]) -> Self {
        let mut s = Self::identity();
        for i in 0..3 {
            for j in 0..3 {
                s.f[i][j] = z[f_index(i, j)];
                for k in 0..3 {
                    s.grad_f[i][j][k] = z[gf_index(i, j, k)];
                }
            }
        }
        s
    }
}

/// First Piola-Kirchhoff stress `P` and higher-order stress `B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StressPair<S> {
    pub p: [[S; 3]; 3],
    pub b: [[[S; 3]; 3]; 3],
}

impl<S: Scalar> StressPair<S> {
    pub fn from_flat(g: &[S; NZ]) -> Self {
        let s = QuadState::from_zeta(g);
        Self { p: s.f, b: s.grad_f }
    }

    pub fn to_flat(&self) -> [S; NZ] {
        QuadState {
            f: self.p,
            grad_f: self.b,
        }
        .to_zeta()
    }
}

/// A free energy density of the 36 state variables.
///
/// The methods are generic over [`Ring`] so the same expressions produce
/// numbers, truncated line expansions and exact polynomials.
pub trait EnergyDensity<S: Scalar>: Send + Sync {
    fn psi<R: Ring<S>>(&self, z: &[R; NZ]) -> R;

    fn gradient<R: Ring<S>>(&self, z: &[R; NZ]) -> [R; NZ];

    /// Calls `emit(m, n, v)` with additive contributions to the Hessian entry
    /// `(m, n)`, `m <= n`. The lower triangle is implied by symmetry.
    fn hessian_upper<R: Ring<S>>(&self, z: &[R; NZ], emit: &mut impl FnMut(usize, usize, R));

    /// Dense symmetric Hessian.
    fn hessian(&self, z: &[S; NZ]) -> Box<[[S; NZ]; NZ]> {
        let mut h = Box::new([[S::zero(); NZ]; NZ]);
        self.hessian_upper(z, &mut |m, n, v| {
            h[m][n] += v;
            if m != n {
                h[n][m] += v;
            }
        });
        h
    }

    /// Number density `ρ` of the material, used for the inertia term.
    fn density(&self) -> S;

    /// Scalar damping coefficient `c` in `C = c·I`.
    fn damping(&self) -> S;
}

/// `E = ½(FᵀF − I)`.
pub fn green_lagrange<S: Scalar>(f: &[[S; 3]; 3]) -> [[S; 3]; 3] {
    let mut e = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let c: S = (0..3).map(|k| f[k][i] * f[k][j]).sum();
            e[i][j] = S::lit(0.5) * (c - if i == j { S::one() } else { S::zero() });
        }
    }
    e
}

/// Reparameterized strains `e1..e6` and the gradients of `e2`, `e3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReparamStrains<S> {
    pub e: [S; 6],
    pub grad_e2: [S; 3],
    pub grad_e3: [S; 3],
}

/// Coefficients of `e1`, `e2`, `e3` on the diagonal of `E`.
pub fn diagonal_strain_coeffs<S: Scalar>() -> [[S; 3]; 3] {
    let s3 = S::one() / S::lit(3.0).sqrt();
    let s2 = S::one() / S::lit(2.0).sqrt();
    let s6 = S::one() / S::lit(6.0).sqrt();
    [[s3, s3, s3], [s2, -s2, S::zero()], [s6, s6, S::lit(-2.0) * s6]]
}

/// `grad_e[I][J][K] = E_IJ,K`; pass zeros when only `e1..e6` are needed.
pub fn reparam_strains<S: Scalar>(e: &[[S; 3]; 3], grad_e: &[[[S; 3]; 3]; 3]) -> ReparamStrains<S> {
    let c = diagonal_strain_coeffs::<S>();
    let diag = |a: usize| (0..3).map(|i| c[a][i] * e[i][i]).sum::<S>();
    let gdiag = |a: usize, k: usize| (0..3).map(|i| c[a][i] * grad_e[i][i][k]).sum::<S>();
    ReparamStrains {
        e: [diag(0), diag(1), diag(2), e[1][2], e[0][2], e[0][1]],
        grad_e2: [0, 1, 2].map(|k| gdiag(1, k)),
        grad_e3: [0, 1, 2].map(|k| gdiag(2, k)),
    }
}

/// `E_IJ,K = ½(F_kI,K F_kJ + F_kI F_kJ,K)`.
pub fn green_lagrange_gradient<S: Scalar>(state: &QuadState<S>) -> [[[S; 3]; 3]; 3] {
    let mut g = [[[S::zero(); 3]; 3]; 3];
    let (f, gf) = (&state.f, &state.grad_f);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                g[i][j][k] = S::lit(0.5) * (0..3).map(|m| gf[m][i][k] * f[m][j] + f[m][i] * gf[m][j][k]).sum::<S>();
            }
        }
    }
    g
}

/// Energy density of the three-well model.
pub fn psi<S: Scalar>(state: &QuadState<S>, params: &MaterialParams<S>) -> S {
    ThreeWell::new(*params).psi(&state.to_zeta())
}

/// `P = ∂Ψ/∂F` and `B = ∂Ψ/∂∇F`.
pub fn stresses<S: Scalar>(state: &QuadState<S>, params: &MaterialParams<S>) -> StressPair<S> {
    StressPair::from_flat(&ThreeWell::new(*params).gradient(&state.to_zeta()))
}

/// `(e2, e3)` of a deformation gradient.
pub fn e2_e3<S: Scalar>(f: &[[S; 3]; 3]) -> (S, S) {
    let e = green_lagrange(f);
    let r = reparam_strains(&e, &[[[S::zero(); 3]; 3]; 3]);
    (r.e[1], r.e[2])
}

#[cfg(test)]
mod tests;
