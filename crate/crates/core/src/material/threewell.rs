use crate::scalar::{Ring, Scalar};

use super::{diagonal_strain_coeffs, f_index, gf_index, EnergyDensity, MaterialParams, NZ};

/// The three-well energy evaluated analytically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeWell<S> {
    pub params: MaterialParams<S>,
    c: [[S; 3]; 3],
}

/// Intermediate quantities shared by value, gradient and Hessian.
struct Strains<R> {
    /// `e1..e6`
    e: [R; 6],
    /// `g[a][K] = e_{a+2},K` for `a ∈ {0, 1}`
    g: [[R; 3]; 2],
}

impl<S: Scalar> ThreeWell<S> {
    pub fn new(params: MaterialParams<S>) -> Self {
        Self {
            params,
            c: diagonal_strain_coeffs(),
        }
    }

    fn strains<R: Ring<S>>(&self, z: &[R; NZ]) -> Strains<R> {
        let f = |i: usize, j: usize| &z[f_index(i, j)];
        // C_IJ = F_kI F_kJ
        let cm = |i: usize, j: usize| -> R {
            let mut acc = f(0, i).clone() * f(0, j).clone();
            acc += f(1, i).clone() * f(1, j).clone();
            acc += f(2, i).clone() * f(2, j).clone();
            acc
        };
        let half = S::lit(0.5);
        let cd = [cm(0, 0), cm(1, 1), cm(2, 2)];
        let ed: [R; 3] = std::array::from_fn(|i| (cd[i].clone() - R::constant(S::one())).scale(half));
        let lin = |a: usize, v: &[R; 3]| -> R {
            let mut acc = v[0].scale(self.c[a][0]);
            acc += v[1].scale(self.c[a][1]);
            if self.c[a][2] != S::zero() {
                acc += v[2].scale(self.c[a][2]);
            }
            acc
        };
        let e = [
            lin(0, &ed),
            lin(1, &ed),
            lin(2, &ed),
            cm(1, 2).scale(half),
            cm(0, 2).scale(half),
            cm(0, 1).scale(half),
        ];
        // E_II,K = F_kI F_kI,K
        let g = std::array::from_fn(|a| {
            std::array::from_fn(|k| {
                let egrad: [R; 3] = std::array::from_fn(|i| {
                    let mut acc = z[f_index(0, i)].clone() * z[gf_index(0, i, k)].clone();
                    acc += z[f_index(1, i)].clone() * z[gf_index(1, i, k)].clone();
                    acc += z[f_index(2, i)].clone() * z[gf_index(2, i, k)].clone();
                    acc
                });
                lin(a + 1, &egrad)
            })
        });
        Strains { e, g }
    }

    /// `∂W/∂e_a` for the local part.
    fn local_first<R: Ring<S>>(&self, e: &[R; 6]) -> [R; 6] {
        let p = &self.params;
        let two = S::lit(2.0);
        let (e2, e3) = (&e[1], &e[2]);
        let rho = e2.clone() * e2.clone() + e3.clone() * e3.clone();
        let four_b4_rho = rho.scale(S::lit(4.0) * p.b4);
        let w2 = e2.scale(two * p.b2) - (e3.clone() * e2.clone()).scale(S::lit(6.0) * p.b3)
            + e2.clone() * four_b4_rho.clone();
        let w3 = e3.scale(two * p.b2)
            + (e3.clone() * e3.clone() - e2.clone() * e2.clone()).scale(S::lit(3.0) * p.b3)
            + e3.clone() * four_b4_rho;
        [
            e[0].scale(two * p.b1),
            w2,
            w3,
            e[3].scale(two * p.b5),
            e[4].scale(two * p.b5),
            e[5].scale(two * p.b5),
        ]
    }

    /// Symmetric `S = ∂W/∂E` (treating `E_IJ`, `E_JI` as one variable split evenly).
    fn second_pk<R: Ring<S>>(&self, w: &[R; 6]) -> [[R; 3]; 3] {
        let half = S::lit(0.5);
        let d: [R; 3] = std::array::from_fn(|i| {
            let mut acc = w[0].scale(self.c[0][i]);
            acc += w[1].scale(self.c[1][i]);
            acc += w[2].scale(self.c[2][i]);
            acc
        });
        let s23 = w[3].scale(half);
        let s13 = w[4].scale(half);
        let s12 = w[5].scale(half);
        [
            [d[0].clone(), s12.clone(), s13.clone()],
            [s12, d[1].clone(), s23.clone()],
            [s13, s23, d[2].clone()],
        ]
    }
}

impl<S: Scalar> EnergyDensity<S> for ThreeWell<S> {
    fn psi<R: Ring<S>>(&self, z: &[R; NZ]) -> R {
        let p = &self.params;
        let Strains { e, g } = self.strains(z);
        let sq = |x: &R| x.clone() * x.clone();
        let rho = sq(&e[1]) + sq(&e[2]);
        let mut w = sq(&e[0]).scale(p.b1);
        w += rho.scale(p.b2);
        w += (e[2].clone() * (sq(&e[2]) - sq(&e[1]).scale(S::lit(3.0)))).scale(p.b3);
        w += sq(&rho).scale(p.b4);
        w += (sq(&e[3]) + sq(&e[4]) + sq(&e[5])).scale(p.b5);
        let mut grad = R::zero_value();
        for row in &g {
            for v in row {
                grad += sq(v);
            }
        }
        w + grad.scale(p.l * p.l)
    }

    fn gradient<R: Ring<S>>(&self, z: &[R; NZ]) -> [R; NZ] {
        let Strains { e, g } = self.strains(z);
        let w = self.local_first(&e);
        let s = self.second_pk(&w);
        let two_l2 = S::lit(2.0) * self.params.l * self.params.l;
        let mut out: [R; NZ] = std::array::from_fn(|_| R::zero_value());
        for k in 0..3 {
            for l in 0..3 {
                // P_kL = F_kJ S_JL
                let mut acc = z[f_index(k, 0)].clone() * s[0][l].clone();
                acc += z[f_index(k, 1)].clone() * s[1][l].clone();
                acc += z[f_index(k, 2)].clone() * s[2][l].clone();
                // gradient part: 2l² Σ_{a,K} g_aK c_aI F_kI,K with I = l
                let mut gp = R::zero_value();
                for a in 0..2 {
                    let ca = self.c[a + 1][l];
                    if ca == S::zero() {
                        continue;
                    }
                    for kk in 0..3 {
                        gp += (g[a][kk].clone() * z[gf_index(k, l, kk)].clone()).scale(ca);
                    }
                }
                out[f_index(k, l)] = acc + gp.scale(two_l2);
                // B_kLK = 2l² Σ_a g_aK c_aL F_kL
                for kk in 0..3 {
                    let mut b = R::zero_value();
                    for a in 0..2 {
                        let ca = self.c[a + 1][l];
                        if ca != S::zero() {
                            b += g[a][kk].scale(ca);
                        }
                    }
                    out[gf_index(k, l, kk)] = (b * z[f_index(k, l)].clone()).scale(two_l2);
                }
            }
        }
        out
    }

    fn hessian_upper<R: Ring<S>>(&self, z: &[R; NZ], emit: &mut impl FnMut(usize, usize, R)) {
        let p = &self.params;
        let Strains { e, g } = self.strains(z);
        let w = self.local_first(&e);
        let s = self.second_pk(&w);
        let half = S::lit(0.5);
        let two = S::lit(2.0);
        let f = |k: usize, j: usize| z[f_index(k, j)].clone();

        // de[a][kL] = ∂e_a/∂F_kL
        let de: [[R; 9]; 6] = std::array::from_fn(|a| {
            std::array::from_fn(|m| {
                let (k, l) = (m / 3, m % 3);
                match a {
                    0..=2 => f(k, l).scale(self.c[a][l]),
                    _ => {
                        // off-diagonal strain E_PQ with {P, Q} the complement of axis (a-3)
                        let (pp, qq) = match a {
                            3 => (1, 2),
                            4 => (0, 2),
                            _ => (0, 1),
                        };
                        if l == pp {
                            f(k, qq).scale(half)
                        } else if l == qq {
                            f(k, pp).scale(half)
                        } else {
                            R::zero_value()
                        }
                    }
                }
            })
        });

        // second derivatives of W in (e2, e3)
        let (e2, e3) = (&e[1], &e[2]);
        let rho4 = (e2.clone() * e2.clone() + e3.clone() * e3.clone()).scale(S::lit(4.0) * p.b4);
        let eight_b4 = S::lit(8.0) * p.b4;
        let w22 = R::constant(two * p.b2) - e3.scale(S::lit(6.0) * p.b3)
            + rho4.clone()
            + (e2.clone() * e2.clone()).scale(eight_b4);
        let w33 = R::constant(two * p.b2) + e3.scale(S::lit(6.0) * p.b3) + rho4 + (e3.clone() * e3.clone()).scale(eight_b4);
        let w23 = e2.scale(S::lit(-6.0) * p.b3) + (e2.clone() * e3.clone()).scale(eight_b4);

        let two_l2 = two * p.l * p.l;
        for m in 0..9 {
            let (k, i) = (m / 3, m % 3);
            // q2, q3 = rows of the (e2, e3) block applied to de at m
            let q2 = w22.clone() * de[1][m].clone() + w23.clone() * de[2][m].clone();
            let q3 = w23.clone() * de[1][m].clone() + w33.clone() * de[2][m].clone();
            for n in m..9 {
                let (j, jj) = (n / 3, n % 3);
                let mut v = (de[0][m].clone() * de[0][n].clone()).scale(two * p.b1);
                v += q2.clone() * de[1][n].clone() + q3.clone() * de[2][n].clone();
                let mut off = de[3][m].clone() * de[3][n].clone();
                off += de[4][m].clone() * de[4][n].clone();
                off += de[5][m].clone() * de[5][n].clone();
                v += off.scale(two * p.b5);
                if k == j {
                    v += s[i][jj].clone();
                }
                // gradient part: 2l² Σ_{a,K} c_aI F_kI,K c_aJ F_jJ,K
                let mut gp = R::zero_value();
                for a in 1..3 {
                    let cc = self.c[a][i] * self.c[a][jj];
                    if cc == S::zero() {
                        continue;
                    }
                    for kk in 0..3 {
                        gp += (z[gf_index(k, i, kk)].clone() * z[gf_index(j, jj, kk)].clone()).scale(cc);
                    }
                }
                emit(m, n, v + gp.scale(two_l2));
            }
            // F – ∇F block: 2l² Σ_a [c_aJ F_jJ c_aI F_kI,L + δ_kj δ_IJ c_aI g_aL]
            for j in 0..3 {
                for jj in 0..3 {
                    for ll in 0..3 {
                        let mut v = R::zero_value();
                        let mut any = false;
                        for a in 1..3 {
                            let cc = self.c[a][jj] * self.c[a][i];
                            if cc != S::zero() {
                                v += (f(j, jj) * z[gf_index(k, i, ll)].clone()).scale(cc);
                                any = true;
                            }
                            if k == j && i == jj && self.c[a][i] != S::zero() {
                                v += g[a - 1][ll].scale(self.c[a][i]);
                                any = true;
                            }
                        }
                        if any {
                            emit(m, gf_index(j, jj, ll), v.scale(two_l2));
                        }
                    }
                }
            }
        }
        // ∇F – ∇F block: 2l² δ_KL Σ_a c_aI F_kI c_aJ F_jJ
        for m in 0..9 {
            let (k, i) = (m / 3, m % 3);
            for n in m..9 {
                let (j, jj) = (n / 3, n % 3);
                let mut v = R::zero_value();
                let mut any = false;
                for a in 1..3 {
                    let cc = self.c[a][i] * self.c[a][jj];
                    if cc != S::zero() {
                        v += (f(k, i) * f(j, jj)).scale(cc);
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                let v = v.scale(two_l2);
                for kk in 0..3 {
                    emit(gf_index(k, i, kk), gf_index(j, jj, kk), v.clone());
                }
            }
        }
    }

    fn density(&self) -> S {
        self.params.rho
    }

    fn damping(&self) -> S {
        self.params.c
    }
}
