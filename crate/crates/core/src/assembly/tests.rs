use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::integrators::SchemeKind;
use crate::material::{DiagonalQuadratic, MaterialParams, ThreeWell};
use crate::quadrature::gauss_legendre_unit;
use crate::spline::make_uniform_space;

fn random_field(space: &SplineSpace<f64>, amp: f64, seed: u64) -> FieldCoeffs<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = FieldCoeffs::zeros(space);
    for v in u.as_mut_slice() {
        *v = amp * rng.gen_range(-1.0..1.0);
    }
    u
}

fn constrained(space: &SplineSpace<f64>, amp: f64, seed: u64) -> FieldCoeffs<f64> {
    let mut u = random_field(space, amp, seed);
    ConstraintSet::boundary_layer(space).apply(&mut u);
    u
}

/// Residual over all unknowns by direct point evaluation on a 5-point rule.
fn brute_force_residual<E: EnergyDensity<f64>>(
    space: &SplineSpace<f64>,
    energy: &E,
    u_nm1: &FieldCoeffs<f64>,
    u_n: &FieldCoeffs<f64>,
    u_np1: &FieldCoeffs<f64>,
    dt: f64,
) -> Vec<f64> {
    let (pts, wts) = gauss_legendre_unit::<f64>(5);
    let ne = space.elements_per_axis();
    let mut r = vec![0.0; space.n_dofs()];
    let id = identity3::<f64>();
    for e2 in 0..ne[2] {
        for e1 in 0..ne[1] {
            for e0 in 0..ne[0] {
                let h = [1.0 / ne[0] as f64, 1.0 / ne[1] as f64, 1.0 / ne[2] as f64];
                for (q2, w2) in pts.iter().zip(&wts) {
                    for (q1, w1) in pts.iter().zip(&wts) {
                        for (q0, w0) in pts.iter().zip(&wts) {
                            let x = [(e0 as f64 + q0) * h[0], (e1 as f64 + q1) * h[1], (e2 as f64 + q2) * h[2]];
                            let w = w0 * w1 * w2 * h[0] * h[1] * h[2];
                            let fm1 = space.interpolate_field(u_nm1, x).unwrap();
                            let f0 = space.interpolate_field(u_n, x).unwrap();
                            let fp = space.interpolate_field(u_np1, x).unwrap();
                            let (zm1, z0, zp) = (zeta_of(&fm1, &id), zeta_of(&f0, &id), zeta_of(&fp, &id));
                            // quadratic energy: every scheme reduces to the gradient at the
                            // average of the two half-step states
                            let mid: [f64; NZ] = std::array::from_fn(|m| 0.25 * (zm1[m] + 2.0 * z0[m] + zp[m]));
                            let z = energy.gradient(&mid);
                            for b in space.eval_basis(x).unwrap() {
                                for i in 0..3 {
                                    let acc = (fp.u[i] - 2.0 * f0.u[i] + fm1.u[i]) / (dt * dt);
                                    let vel = (fp.u[i] - fm1.u[i]) / (2.0 * dt);
                                    let mut v = b.value * (energy.density() * acc + energy.damping() * vel);
                                    for j in 0..3 {
                                        v += b.grad[j] * z[3 * i + j];
                                        for k in 0..3 {
                                            v += b.hess[j][k] * z[9 + 9 * i + 3 * j + k];
                                        }
                                    }
                                    r[3 * b.index + i] += w * v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    r
}

#[test]
fn reference_state_is_equilibrium() {
    let space = make_uniform_space::<f64>(3, false).unwrap();
    let e = ThreeWell::new(MaterialParams::reference());
    let asm = Assembler::new(&space, &e, ConstraintSet::boundary_layer(&space)).unwrap();
    let z = FieldCoeffs::zeros(&space);
    for kind in SchemeKind::ALL {
        let mode = Mode::Dynamic {
            u_nm1: &z,
            u_n: &z,
            dt: 1e-3,
            scheme: SchemeConfig::new(kind),
        };
        let sys = asm.assemble(&z, &mode, false).unwrap();
        assert!(sys.residual.iter().all(|r| *r == 0.0));
    }
    assert!(asm.assemble(&z, &Mode::Static, false).unwrap().residual.iter().all(|r| *r == 0.0));
}

#[test]
fn residual_matches_brute_force_quadrature() {
    let space = make_uniform_space::<f64>(2, false).unwrap();
    let mut e = DiagonalQuadratic::linear_elastic(2.0, 0.7);
    e.c = 0.3;
    let asm = Assembler::new(&space, &e, ConstraintSet::new()).unwrap();
    let (a, b, c) = (random_field(&space, 0.05, 1), random_field(&space, 0.05, 2), random_field(&space, 0.05, 3));
    let dt = 0.1;
    let oracle = brute_force_residual(&space, &e, &a, &b, &c, dt);
    for kind in SchemeKind::ALL {
        let mode = Mode::Dynamic {
            u_nm1: &a,
            u_n: &b,
            dt,
            scheme: SchemeConfig::new(kind),
        };
        let r = asm.assemble(&c, &mode, false).unwrap().residual;
        let scale = oracle.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (x, y) in r.iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-12 * scale, "{kind:?}: {x} vs {y}");
        }
    }
}

fn check_tangent_fd(kind: SchemeKind) {
    let space = make_uniform_space::<f64>(3, false).unwrap();
    let e = ThreeWell::new(MaterialParams::reference().with_damping(0.5));
    let asm = Assembler::new(&space, &e, ConstraintSet::boundary_layer(&space)).unwrap();
    let (a, b, c) = (constrained(&space, 0.02, 4), constrained(&space, 0.02, 5), constrained(&space, 0.02, 6));
    let mode = Mode::Dynamic {
        u_nm1: &a,
        u_n: &b,
        dt: 0.01,
        scheme: SchemeConfig::new(kind),
    };
    let k = asm.assemble(&c, &mode, true).unwrap().tangent.unwrap();
    let kd = k.to_dense();
    let n = asm.n_free();
    let h = 1e-6;
    for col in 0..n {
        let mut du = vec![0.0; n];
        du[col] = h;
        let mut up = c.clone();
        asm.add_free(&mut up, &du, 1.0);
        let mut um = c.clone();
        asm.add_free(&mut um, &du, -1.0);
        let rp = asm.assemble(&up, &mode, false).unwrap().residual;
        let rm = asm.assemble(&um, &mode, false).unwrap().residual;
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        let scale = fd.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for row in 0..n {
            let an = kd[row * n + col];
            assert!((an - fd[row]).abs() <= 1e-5 * scale, "{kind:?} ({row},{col}): {an} vs {}", fd[row]);
        }
    }
}

#[test]
fn tangent_matches_finite_differences_taylor() {
    check_tangent_fd(SchemeKind::TaylorFull);
    check_tangent_fd(SchemeKind::TaylorReduced);
}

#[test]
fn tangent_matches_finite_differences_gonzalez() {
    check_tangent_fd(SchemeKind::Gonzalez);
}

#[test]
fn static_tangent_matches_finite_differences() {
    let space = make_uniform_space::<f64>(3, true).unwrap();
    let e = ThreeWell::new(MaterialParams::reference());
    let fbar = [[1.02, 0.01, 0.0], [0.0, 0.99, 0.0], [0.0, 0.0, 1.0]];
    let asm = Assembler::new(&space, &e, ConstraintSet::pin(0)).unwrap().with_base_gradient(fbar);
    let mut u = random_field(&space, 0.01, 7);
    asm.constraints().apply(&mut u);
    let k = asm.assemble(&u, &Mode::Static, true).unwrap().tangent.unwrap();
    let n = asm.n_free();
    let h = 1e-6;
    for col in (0..n).step_by(7) {
        let mut du = vec![0.0; n];
        du[col] = h;
        let (mut up, mut um) = (u.clone(), u.clone());
        asm.add_free(&mut up, &du, 1.0);
        asm.add_free(&mut um, &du, -1.0);
        let rp = asm.assemble(&up, &Mode::Static, false).unwrap().residual;
        let rm = asm.assemble(&um, &Mode::Static, false).unwrap().residual;
        let scale = rp.iter().zip(&rm).fold(1.0f64, |m, (p, q)| m.max(((p - q) / (2.0 * h)).abs()));
        for row in 0..n {
            let fd = (rp[row] - rm[row]) / (2.0 * h);
            assert!((k.get(row, col) - fd).abs() <= 1e-5 * scale);
        }
    }
}

#[test]
fn taylor_tangent_symmetric_gonzalez_not() {
    let space = make_uniform_space::<f64>(4, false).unwrap();
    let e = ThreeWell::new(MaterialParams::reference());
    let asm = Assembler::new(&space, &e, ConstraintSet::boundary_layer(&space)).unwrap();
    let (a, b, c) = (constrained(&space, 0.05, 8), constrained(&space, 0.05, 9), constrained(&space, 0.05, 10));
    for kind in SchemeKind::ALL {
        let mode = Mode::Dynamic {
            u_nm1: &a,
            u_n: &b,
            dt: 1e-3,
            scheme: SchemeConfig::new(kind),
        };
        let sys = asm.assemble(&c, &mode, true).unwrap();
        let k = sys.tangent.unwrap();
        let rel = k.max_asymmetry() / k.max_abs();
        if kind == SchemeKind::Gonzalez {
            assert!(!sys.symmetric);
            assert!(rel > 1e-14, "{rel}");
        } else {
            assert!(sys.symmetric);
            assert!(rel <= 1e-10, "{kind:?}: {rel}");
        }
    }
}

#[test]
fn assembly_is_deterministic() {
    let space = make_uniform_space::<f64>(4, false).unwrap();
    let e = ThreeWell::new(MaterialParams::reference().with_damping(1.0));
    let asm = Assembler::new(&space, &e, ConstraintSet::boundary_layer(&space)).unwrap();
    let (a, b, c) = (constrained(&space, 0.02, 11), constrained(&space, 0.02, 12), constrained(&space, 0.02, 13));
    let mode = Mode::Dynamic {
        u_nm1: &a,
        u_n: &b,
        dt: 1e-3,
        scheme: SchemeConfig::gonzalez(),
    };
    let s1 = asm.assemble(&c, &mode, true).unwrap();
    let s2 = asm.assemble(&c, &mode, true).unwrap();
    assert_eq!(s1.residual, s2.residual);
    assert_eq!(s1.tangent, s2.tangent);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let space = make_uniform_space::<f64>(3, false).unwrap();
    let other = make_uniform_space::<f64>(4, false).unwrap();
    let e = ThreeWell::new(MaterialParams::reference());
    let asm = Assembler::new(&space, &e, ConstraintSet::new()).unwrap();
    let u = FieldCoeffs::zeros(&other);
    assert!(matches!(asm.assemble(&u, &Mode::Static, false), Err(AssemblyError::Dimension { .. })));
    let mut c = ConstraintSet::<f64>::new();
    c.fix(0, 1, 0.0).unwrap();
    assert!(c.fix(0, 1, 1.0).is_err());
    let mut far = ConstraintSet::<f64>::new();
    far.fix(space.n_control_points(), 0, 0.0).unwrap();
    assert!(matches!(Assembler::new(&space, &e, far), Err(AssemblyError::OutOfRange { .. })));
}

#[test]
fn boundary_layer_counts() {
    let space = make_uniform_space::<f64>(4, false).unwrap();
    let c = ConstraintSet::boundary_layer(&space);
    // 6³ control points, 4³ interior
    assert_eq!(c.len(), 3 * (216 - 64));
    let p = make_uniform_space::<f64>(4, true).unwrap();
    assert!(ConstraintSet::boundary_layer(&p).is_empty());
}

#[test]
fn newton_on_linear_problem_takes_one_step() {
    let space = make_uniform_space::<f64>(3, false).unwrap();
    let e = DiagonalQuadratic::linear_elastic(1.0, 0.5);
    let mut cons = ConstraintSet::boundary_layer(&space);
    // a nonzero prescribed value on an interior point
    let cp = space.cp_index([2, 2, 2]);
    cons.fix(cp, 0, 1e-3).unwrap();
    let asm = Assembler::new(&space, &e, cons).unwrap();
    let mut u0 = constrained(&space, 0.01, 14);
    asm.constraints().apply(&mut u0);
    let mode = Mode::Dynamic {
        u_nm1: &u0,
        u_n: &u0,
        dt: 0.05,
        scheme: SchemeConfig::taylor_full(),
    };
    let cfg = NewtonConfig::default();
    let (u1, rep) = newton_solve(&(&asm, mode), u0.clone(), &cfg).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(*rep.residual_norms.last().unwrap() <= 1e-12);
    for (d, v) in asm.constraints().iter() {
        assert_eq!(u1[d].to_bits(), v.to_bits());
    }
    // restarting from the solution needs no iterations
    let (_, rep2) = newton_solve(&(&asm, mode), u1, &cfg).unwrap();
    assert_eq!(rep2.iterations, 0);
}

#[test]
fn newton_reports_nonconvergence() {
    let space = make_uniform_space::<f64>(3, false).unwrap();
    let e = ThreeWell::new(MaterialParams::reference());
    let asm = Assembler::new(&space, &e, ConstraintSet::boundary_layer(&space)).unwrap();
    let a = constrained(&space, 0.05, 15);
    let mode = Mode::Dynamic {
        u_nm1: &a,
        u_n: &a,
        dt: 1e-3,
        scheme: SchemeConfig::taylor_full(),
    };
    let cfg = NewtonConfig {
        max_iters: 1,
        ..NewtonConfig::default()
    };
    let guess = constrained(&space, 0.2, 16);
    match newton_solve(&(&asm, mode), guess, &cfg) {
        Err(SolveError::NonConvergence { iterations, residual }) => {
            assert_eq!(iterations, 1);
            assert!(residual > 1e-10);
        }
        other => panic!("expected nonconvergence, got {:?}", other.map(|(_, r)| r)),
    }
}

#[test]
fn newton_converges_on_three_well_step() {
    let space = make_uniform_space::<f64>(4, false).unwrap();
    let e = ThreeWell::new(MaterialParams::reference().with_damping(1.0));
    let asm = Assembler::new(&space, &e, ConstraintSet::boundary_layer(&space)).unwrap();
    let a = constrained(&space, 1e-3, 17);
    for kind in SchemeKind::ALL {
        let mode = Mode::Dynamic {
            u_nm1: &a,
            u_n: &a,
            dt: 1e-3,
            scheme: SchemeConfig::new(kind),
        };
        let (_, rep) = newton_solve(&(&asm, mode), a.clone(), &NewtonConfig::default()).unwrap();
        assert!(rep.iterations <= 5, "{kind:?}: {}", rep.iterations);
    }
}

#[test]
fn integrate_volume_and_linear_field() {
    let space = make_uniform_space::<f64>(3, false).unwrap();
    let vol = integrate(&space, &[], |_, _| 1.0);
    assert!((vol - 1.0).abs() < 1e-14);
    let first = integrate(&space, &[], |_, x| x[0] * x[1]);
    assert!((first - 0.25).abs() < 1e-14);
}

#[test]
fn residual_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("res.csv");
    write_residual_csv(&p, &[(1, 0, 1.5), (1, 1, 2.5e-11)]).unwrap();
    let (h, rows) = crate::io::read_numeric_csv(&p).unwrap();
    assert_eq!(h, ["step", "iter", "residual_norm"]);
    assert_eq!(rows[1], vec![1.0, 1.0, 2.5e-11]);
}
