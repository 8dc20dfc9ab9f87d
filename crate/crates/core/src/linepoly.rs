//! Bivariate truncated polynomials in `(s, t)`.
//!
//! Evaluating the energy along the line `ζ⁻ + s·ΔF + t·Δ∇F` in this ring gives
//! the exact Taylor coefficients needed by the Taylor-series scheme: the
//! deformation-gradient part of ζ carries the `s` direction, the
//! second-gradient part carries `t`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::scalar::{Ring, Scalar};

/// Highest power of `s` kept.
pub const MAX_S: usize = 8;
/// Highest power of `t` kept.
pub const MAX_T: usize = 2;

const NS: usize = MAX_S + 1;
const NT: usize = MAX_T + 1;
/// Length of a coefficient table indexed like [`LinePoly::coeff`].
pub const N_COEFFS: usize = NS * NT;

/// `Σ c[a + NS·b] sᵃ tᵇ` with `a ≤ MAX_S`, `b ≤ MAX_T`.
///
/// `ds`/`dt` are upper bounds on the occupied degrees so products only touch
/// live coefficients. Terms beyond the caps are dropped; the energies used
/// here never produce them. `cap` lowers the `s` cap further, truncating
/// every result at that degree; combining two values keeps the smaller cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinePoly<S> {
    c: [S; NS * NT],
    ds: u8,
    dt: u8,
    cap: u8,
}

impl<S: Scalar> LinePoly<S> {
    pub fn constant(v: S) -> Self {
        let mut c = [S::zero(); NS * NT];
        c[0] = v;
        Self {
            c,
            ds: 0,
            dt: 0,
            cap: MAX_S as u8,
        }
    }

    /// The same polynomial truncated at `s` degree `cap`.
    pub fn truncated(mut self, cap: usize) -> Self {
        let cap = cap.min(self.cap as usize);
        for b in 0..=self.dt as usize {
            for a in cap + 1..=self.ds as usize {
                self.c[a + NS * b] = S::zero();
            }
        }
        self.cap = cap as u8;
        self.ds = self.ds.min(self.cap);
        self
    }

    /// `v + slope·s`.
    pub fn along_s(v: S, slope: S) -> Self {
        let mut p = Self::constant(v);
        p.c[1] = slope;
        p.ds = 1;
        p
    }

    /// `v + slope·t`.
    pub fn along_t(v: S, slope: S) -> Self {
        let mut p = Self::constant(v);
        p.c[NS] = slope;
        p.dt = 1;
        p
    }

    #[inline]
    pub fn coeff(&self, a: usize, b: usize) -> S {
        if a <= self.ds as usize && b <= self.dt as usize {
            self.c[a + NS * b]
        } else {
            S::zero()
        }
    }

    pub fn degree_s(&self) -> usize {
        self.ds as usize
    }

    pub fn degree_t(&self) -> usize {
        self.dt as usize
    }

    pub fn eval(&self, s: S, t: S) -> S {
        let mut acc = S::zero();
        let mut tp = S::one();
        for b in 0..=self.dt as usize {
            let mut inner = S::zero();
            for a in (0..=self.ds as usize).rev() {
                inner = inner * s + self.c[a + NS * b];
            }
            acc += inner * tp;
            tp = tp * t;
        }
        acc
    }

    /// Table of `w(a, b)` laid out for [`LinePoly::dot`].
    pub fn weight_table(mut w: impl FnMut(usize, usize) -> S) -> [S; N_COEFFS] {
        std::array::from_fn(|k| w(k % NS, k / NS))
    }

    /// `Σ w_ab c_ab` over the live coefficients, with `w` from
    /// [`LinePoly::weight_table`].
    #[inline]
    pub fn dot(&self, w: &[S; N_COEFFS]) -> S {
        let mut acc = S::zero();
        for b in 0..=self.dt as usize {
            let row = NS * b;
            for a in 0..=self.ds as usize {
                acc += w[row + a] * self.c[row + a];
            }
        }
        acc
    }

    /// `Σ w(a, b) c_ab` over the live coefficients.
    pub fn weighted_sum(&self, mut w: impl FnMut(usize, usize) -> S) -> S {
        let mut acc = S::zero();
        for b in 0..=self.dt as usize {
            for a in 0..=self.ds as usize {
                let v = self.c[a + NS * b];
                if v != S::zero() {
                    acc += w(a, b) * v;
                }
            }
        }
        acc
    }
}

impl<S: Scalar> Add for LinePoly<S> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<S: Scalar> AddAssign for LinePoly<S> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        if rhs.cap < self.cap {
            *self = self.truncated(rhs.cap as usize);
        }
        let ds = self.ds.max(rhs.ds).min(self.cap);
        for b in 0..=rhs.dt as usize {
            for a in 0..=(rhs.ds.min(ds)) as usize {
                self.c[a + NS * b] += rhs.c[a + NS * b];
            }
        }
        self.ds = ds;
        self.dt = self.dt.max(rhs.dt);
    }
}

impl<S: Scalar> Sub for LinePoly<S> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        if rhs.cap < self.cap {
            self = self.truncated(rhs.cap as usize);
        }
        let ds = self.ds.max(rhs.ds).min(self.cap);
        for b in 0..=rhs.dt as usize {
            for a in 0..=(rhs.ds.min(ds)) as usize {
                self.c[a + NS * b] -= rhs.c[a + NS * b];
            }
        }
        self.ds = ds;
        self.dt = self.dt.max(rhs.dt);
        self
    }
}

impl<S: Scalar> Neg for LinePoly<S> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        for b in 0..=self.dt as usize {
            for a in 0..=self.ds as usize {
                self.c[a + NS * b] = -self.c[a + NS * b];
            }
        }
        self
    }
}

impl<S: Scalar> Mul for LinePoly<S> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let cap = self.cap.min(rhs.cap);
        let ds = (self.ds + rhs.ds).min(cap);
        let dt = (self.dt + rhs.dt).min(MAX_T as u8);
        let mut c = [S::zero(); NS * NT];
        for b1 in 0..=self.dt as usize {
            for a1 in 0..=self.ds.min(cap) as usize {
                let x = self.c[a1 + NS * b1];
                if x == S::zero() {
                    continue;
                }
                for b2 in 0..=(rhs.dt as usize).min(MAX_T - b1) {
                    let row = NS * (b1 + b2);
                    for a2 in 0..=(rhs.ds.min(cap) as usize).min(cap as usize - a1) {
                        c[row + a1 + a2] += x * rhs.c[a2 + NS * b2];
                    }
                }
            }
        }
        Self { c, ds, dt, cap }
    }
}

impl<S: Scalar> Ring<S> for LinePoly<S> {
    #[inline]
    fn constant(c: S) -> Self {
        LinePoly::constant(c)
    }

    #[inline]
    fn scale(&self, k: S) -> Self {
        let mut out = *self;
        for b in 0..=self.dt as usize {
            for a in 0..=self.ds as usize {
                out.c[a + NS * b] = out.c[a + NS * b] * k;
            }
        }
        out
    }
}
