use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_state(rng: &mut ChaCha8Rng) -> QuadState<f64> {
    let mut s = QuadState::identity();
    for i in 0..3 {
        for j in 0..3 {
            s.f[i][j] += rng.gen_range(-0.3..0.3);
            for k in 0..3 {
                s.grad_f[i][j][k] = rng.gen_range(-0.3..0.3);
            }
        }
    }
    s
}

/// Homogeneous state with diagonal strain built from `(e1, e2, e3)`.
fn diagonal_state(e1: f64, e2: f64, e3: f64) -> QuadState<f64> {
    let c = diagonal_strain_coeffs::<f64>();
    let mut s = QuadState::identity();
    for i in 0..3 {
        let eii = e1 * c[0][i] + e2 * c[1][i] + e3 * c[2][i];
        s.f[i][i] = (1.0 + 2.0 * eii).sqrt();
    }
    s
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[test]
fn green_lagrange_examples() {
    let id = QuadState::<f64>::identity();
    assert_eq!(green_lagrange(&id.f), [[0.0; 3]; 3]);
    let mut f = id.f;
    f[0][0] = 1.1;
    let e = green_lagrange(&f);
    assert!((e[0][0] - 0.105).abs() < 1e-15);
    for (i, row) in e.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if (i, j) != (0, 0) {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

#[test]
fn green_lagrange_matches_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let f = random_state(&mut rng).f;
        let e = green_lagrange(&f);
        // FᵀF by explicit row-column products
        for i in 0..3 {
            for j in 0..3 {
                let mut ftf = 0.0;
                for k in 0..3 {
                    ftf += f[k][i] * f[k][j];
                }
                let oracle = 0.5 * (ftf - if i == j { 1.0 } else { 0.0 });
                assert!((e[i][j] - oracle).abs() <= 1e-14);
                assert_eq!(e[i][j], e[j][i]);
            }
        }
    }
}

#[test]
fn reparam_examples() {
    let z3 = [[[0.0; 3]; 3]; 3];
    assert_eq!(reparam_strains(&[[0.0; 3]; 3], &z3).e, [0.0; 6]);
    let a = 0.07;
    let r = reparam_strains(&[[a, 0.0, 0.0], [0.0, -a, 0.0], [0.0, 0.0, 0.0]], &z3);
    assert!((r.e[1] - a * 2f64.sqrt()).abs() < 1e-15);
    assert!(r.e[0].abs() < 1e-15 && r.e[2].abs() < 1e-15);
    let s = 0.3;
    let r = reparam_strains(&[[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]], &z3);
    assert!((r.e[0] - s * 3f64.sqrt()).abs() < 1e-15);
    assert!(r.e[1].abs() < 1e-15 && r.e[2].abs() < 1e-15);
}

#[test]
fn strain_gradient_from_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = random_state(&mut rng);
    let ge = green_lagrange_gradient(&s);
    // central differences of E along a line where F moves with gradF
    let h = 1e-6;
    for k in 0..3 {
        let shifted = |sign: f64| {
            let mut f = s.f;
            for i in 0..3 {
                for j in 0..3 {
                    f[i][j] += sign * h * s.grad_f[i][j][k];
                }
            }
            green_lagrange(&f)
        };
        let (ep, em) = (shifted(1.0), shifted(-1.0));
        for i in 0..3 {
            for j in 0..3 {
                assert!(((ep[i][j] - em[i][j]) / (2.0 * h) - ge[i][j][k]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn reference_state_is_stress_free() {
    let p = MaterialParams::<f64>::reference();
    let id = QuadState::identity();
    assert_eq!(psi(&id, &p), 0.0);
    let st = stresses(&id, &p);
    assert!(st.to_flat().iter().all(|v| *v == 0.0));
}

#[test]
fn wells_have_unit_depth() {
    let p = MaterialParams::<f64>::reference();
    for (e2, e3) in p.wells() {
        assert!((p.non_convex(e2, e3) + 1.0).abs() <= 1e-14);
    }
}

#[test]
fn homogeneous_well_states_are_stationary() {
    let p = MaterialParams::<f64>::reference();
    for (e2, e3) in p.wells() {
        let s = diagonal_state(0.0, e2, e3);
        assert!((psi(&s, &p) + 1.0).abs() < 1e-12);
        for v in stresses(&s, &p).to_flat() {
            assert!(v.abs() < 1e-11, "{v}");
        }
    }
    // chain-rule check at the Z well: 2B2e3 + 3B3e3² + 4B4e3³ with e2 = 0
    let r = p.r;
    let d = 2.0 * p.b2 * (-r) + 3.0 * p.b3 * r * r + 4.0 * p.b4 * (-r).powi(3);
    assert!(d.abs() < 1e-12);
}

#[test]
fn phase_classification() {
    let p = MaterialParams::<f64>::reference();
    assert_eq!(classify_phase(0.0, 0.0, &p), Phase::None);
    let [x, y, z] = p.wells();
    assert_eq!(classify_phase(x.0, x.1, &p), Phase::X);
    assert_eq!(classify_phase(y.0, y.1, &p), Phase::Y);
    assert_eq!(classify_phase(z.0, z.1, &p), Phase::Z);
    assert_eq!(classify_phase(0.9 * z.0, 0.9 * z.1, &p), Phase::Z);
}

#[test]
fn stresses_match_finite_differences() {
    let p = MaterialParams::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = ThreeWell::new(p);
    let h = 1e-6;
    for _ in 0..100 {
        let z = random_state(&mut rng).to_zeta();
        let g = w.gradient(&z);
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for m in 0..NZ {
            let (mut zp, mut zm) = (z, z);
            zp[m] += h;
            zm[m] -= h;
            let fd = (w.psi(&zp) - w.psi(&zm)) / (2.0 * h);
            assert!((fd - g[m]).abs() <= 1e-5 * scale, "m={m}: {fd} vs {}", g[m]);
        }
    }
}

#[test]
fn hessian_matches_finite_differences_of_gradient() {
    let p = MaterialParams::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = ThreeWell::new(p);
    let h = 1e-6;
    for _ in 0..20 {
        let z = random_state(&mut rng).to_zeta();
        let hess = w.hessian(&z);
        let scale = hess.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        for n in 0..NZ {
            let (mut zp, mut zm) = (z, z);
            zp[n] += h;
            zm[n] -= h;
            let (gp, gm) = (w.gradient(&zp), w.gradient(&zm));
            for m in 0..NZ {
                let fd = (gp[m] - gm[m]) / (2.0 * h);
                assert!((fd - hess[m][n]).abs() <= 1e-5 * scale, "({m},{n}) {fd} vs {}", hess[m][n]);
            }
        }
    }
}

#[test]
fn axis_swap_symmetry() {
    let p = MaterialParams::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let perm = [1usize, 0, 2];
    for _ in 0..100 {
        let s = random_state(&mut rng);
        let mut t = s;
        for i in 0..3 {
            for j in 0..3 {
                t.f[perm[i]][perm[j]] = s.f[i][j];
                for k in 0..3 {
                    t.grad_f[perm[i]][perm[j]][perm[k]] = s.grad_f[i][j][k];
                }
            }
        }
        assert!(rel(psi(&s, &p), psi(&t, &p)) < 1e-13);
    }
}

#[test]
fn polynomial_matches_analytic_energy() {
    let p = MaterialParams::reference();
    let poly = PolynomialEnergy::from_params(&p);
    // expanded coefficients cancel at the reference state only up to rounding
    assert!(poly.psi.eval(&QuadState::<f64>::identity().to_zeta()).abs() <= 1e-12);
    assert_eq!(poly.psi.max_degree_f(), 8);
    assert_eq!(poly.psi.max_degree_grad_f(), 2);
    assert!(poly.psi.terms().all(|(m, c)| *c != 0.0 && m.degree_f() <= 8 && m.degree_grad_f() <= 2));
    let w = ThreeWell::new(p);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let z = random_state(&mut rng).to_zeta();
        assert!(rel(poly.psi(&z), w.psi(&z)) <= 1e-12);
        let (ga, gp) = (w.gradient(&z), poly.gradient(&z));
        for m in 0..NZ {
            assert!(rel(ga[m], gp[m]) <= 1e-10);
        }
    }
    let z = random_state(&mut rng).to_zeta();
    let (ha, hp) = (w.hessian(&z), poly.hessian(&z));
    for m in 0..NZ {
        for n in 0..NZ {
            assert!(rel(ha[m][n], hp[m][n]) <= 1e-10);
        }
    }
}

#[test]
fn params_validation() {
    assert!(MaterialParams::<f64>::reference().validate().is_ok());
    let mut p = MaterialParams::<f64>::reference();
    p.b4 = -1.0;
    assert!(p.validate().is_err());
    let p = MaterialParams::<f64>::reference().with_damping(-0.5);
    assert!(p.validate().is_err());
}

#[test]
fn single_precision_energy() {
    let p = MaterialParams::<f32>::reference();
    assert_eq!(psi(&QuadState::<f32>::identity(), &p), 0.0);
    let [z, ..] = p.wells();
    assert!((p.non_convex(z.0, z.1) + 1.0).abs() < 1e-5);
}

proptest! {
    #[test]
    fn prop_energy_is_frame_indifferent(seed in 0u64..10_000, angle in -3.0f64..3.0) {
        // rotation about X3 applied on the left of F and ∇F
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng);
        let (c, sn) = (angle.cos(), angle.sin());
        let q = [[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]];
        let mut t = s;
        for i in 0..3 {
            for j in 0..3 {
                t.f[i][j] = (0..3).map(|k| q[i][k] * s.f[k][j]).sum();
                for kk in 0..3 {
                    t.grad_f[i][j][kk] = (0..3).map(|k| q[i][k] * s.grad_f[k][j][kk]).sum();
                }
            }
        }
        let p = MaterialParams::reference();
        prop_assert!(rel(psi(&s, &p), psi(&t, &p)) < 1e-12);
    }
}
