use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::scalar::{Ring, Scalar};

use super::{EnergyDensity, MaterialParams, ThreeWell, NF, NZ};

/// Exponents of the 36 state variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub [u8; NZ]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0; NZ]);

    pub fn degree_f(&self) -> usize {
        self.0[..NF].iter().map(|&d| d as usize).sum()
    }

    pub fn degree_grad_f(&self) -> usize {
        self.0[NF..].iter().map(|&d| d as usize).sum()
    }

    fn times(&self, other: &Monomial) -> Monomial {
        let mut m = self.0;
        for (a, b) in m.iter_mut().zip(other.0.iter()) {
            *a += *b;
        }
        Monomial(m)
    }
}

/// Multivariate polynomial over the state variables; zero coefficients are
/// never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePolynomial<S> {
    terms: BTreeMap<Monomial, S>,
}

impl<S: Scalar> SparsePolynomial<S> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn variable(v: usize) -> Self {
        let mut m = Monomial::ONE;
        m.0[v] = 1;
        Self {
            terms: BTreeMap::from([(m, S::one())]),
        }
    }

    fn insert_add(&mut self, m: Monomial, c: S) {
        if c == S::zero() {
            return;
        }
        let e = self.terms.entry(m).or_insert(S::zero());
        *e += c;
        if *e == S::zero() {
            self.terms.remove(&m);
        }
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &S)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> S {
        self.terms.get(m).copied().unwrap_or(S::zero())
    }

    pub fn max_degree_f(&self) -> usize {
        self.terms.keys().map(Monomial::degree_f).max().unwrap_or(0)
    }

    pub fn max_degree_grad_f(&self) -> usize {
        self.terms.keys().map(Monomial::degree_grad_f).max().unwrap_or(0)
    }

    fn max_exponents(&self) -> [u8; NZ] {
        let mut out = [0u8; NZ];
        for m in self.terms.keys() {
            for (o, d) in out.iter_mut().zip(m.0.iter()) {
                *o = (*o).max(*d);
            }
        }
        out
    }

    pub fn derivative(&self, v: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let d = m.0[v];
            if d > 0 {
                let mut mm = *m;
                mm.0[v] -= 1;
                out.insert_add(mm, *c * S::from_usize_lossy(d as usize));
            }
        }
        out
    }

    /// Evaluate with variables taken from any ring.
    pub fn eval<R: Ring<S>>(&self, z: &[R; NZ]) -> R {
        let maxe = self.max_exponents();
        let powers: Vec<Vec<R>> = (0..NZ)
            .map(|v| {
                let mut p = vec![R::constant(S::one())];
                for d in 1..=maxe[v] as usize {
                    let next = p[d - 1].clone() * z[v].clone();
                    p.push(next);
                }
                p
            })
            .collect();
        let mut acc = R::zero_value();
        for (m, c) in &self.terms {
            let mut t: Option<R> = None;
            for (v, &d) in m.0.iter().enumerate() {
                if d > 0 {
                    let pv = powers[v][d as usize].clone();
                    t = Some(match t {
                        None => pv,
                        Some(x) => x * pv,
                    });
                }
            }
            acc += match t {
                None => R::constant(*c),
                Some(x) => x.scale(*c),
            };
        }
        acc
    }
}

impl<S: Scalar> Add for SparsePolynomial<S> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<S: Scalar> AddAssign for SparsePolynomial<S> {
    fn add_assign(&mut self, rhs: Self) {
        for (m, c) in rhs.terms {
            self.insert_add(m, c);
        }
    }
}

impl<S: Scalar> Sub for SparsePolynomial<S> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (m, c) in rhs.terms {
            self.insert_add(m, -c);
        }
        self
    }
}

impl<S: Scalar> Neg for SparsePolynomial<S> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.terms.values_mut().for_each(|c| *c = -*c);
        self
    }
}

impl<S: Scalar> Mul for SparsePolynomial<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.insert_add(ma.times(mb), *ca * *cb);
            }
        }
        out
    }
}

impl<S: Scalar> Ring<S> for SparsePolynomial<S> {
    fn constant(c: S) -> Self {
        let mut p = Self::zero();
        p.insert_add(Monomial::ONE, c);
        p
    }

    fn scale(&self, c: S) -> Self {
        if c == S::zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(m, v)| (*m, *v * c)).filter(|(_, v)| *v != S::zero()).collect(),
        }
    }
}

/// Expand the three-well energy into monomials of the state variables by
/// running the analytic expressions on symbolic inputs.
pub fn build_psi_polynomial<S: Scalar>(params: &MaterialParams<S>) -> SparsePolynomial<S> {
    let vars: [SparsePolynomial<S>; NZ] = std::array::from_fn(SparsePolynomial::variable);
    ThreeWell::new(*params).psi(&vars)
}

/// Energy backed by an explicit polynomial and its precomputed derivatives.
#[derive(Clone, Debug)]
pub struct PolynomialEnergy<S> {
    pub psi: SparsePolynomial<S>,
    grad: Vec<SparsePolynomial<S>>,
    /// nonzero upper-triangular second derivatives
    hess: Vec<(usize, usize, SparsePolynomial<S>)>,
    rho: S,
    c: S,
}

impl<S: Scalar> PolynomialEnergy<S> {
    pub fn new(psi: SparsePolynomial<S>, rho: S, c: S) -> Self {
        let grad: Vec<_> = (0..NZ).map(|v| psi.derivative(v)).collect();
        let mut hess = Vec::new();
        for m in 0..NZ {
            for n in m..NZ {
                let h = grad[m].derivative(n);
                if h.n_terms() > 0 {
                    hess.push((m, n, h));
                }
            }
        }
        Self { psi, grad, hess, rho, c }
    }

    pub fn from_params(params: &MaterialParams<S>) -> Self {
        Self::new(build_psi_polynomial(params), params.rho, params.c)
    }

    pub fn gradient_polynomials(&self) -> &[SparsePolynomial<S>] {
        &self.grad
    }
}

impl<S: Scalar> EnergyDensity<S> for PolynomialEnergy<S> {
    fn psi<R: Ring<S>>(&self, z: &[R; NZ]) -> R {
        self.psi.eval(z)
    }

    fn gradient<R: Ring<S>>(&self, z: &[R; NZ]) -> [R; NZ] {
        std::array::from_fn(|m| self.grad[m].eval(z))
    }

    fn hessian_upper<R: Ring<S>>(&self, z: &[R; NZ], emit: &mut impl FnMut(usize, usize, R)) {
        for (m, n, h) in &self.hess {
            emit(*m, *n, h.eval(z));
        }
    }

    fn density(&self) -> S {
        self.rho
    }

    fn damping(&self) -> S {
        self.c
    }
}
