use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn cox_de_boor(knots: &[f64], i: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        return if knots[i] <= x && x < knots[i + 1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        v += (x - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, x);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, i + 1, p - 1, x);
    }
    v
}

fn random_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

fn random_field(space: &SplineSpace<f64>, rng: &mut ChaCha8Rng) -> FieldCoeffs<f64> {
    FieldCoeffs::from_fn(space.dofs_per_axis(), |_| {
        [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
    })
}

#[test]
fn dof_counts() {
    assert_eq!(make_uniform_space::<f64>(16, false).unwrap().dofs_per_axis(), [18; 3]);
    assert_eq!(make_uniform_space::<f64>(64, false).unwrap().dofs_per_axis(), [66; 3]);
    assert_eq!(make_uniform_space::<f64>(8, true).unwrap().dofs_per_axis(), [8; 3]);
    assert!(matches!(
        make_uniform_space::<f64>(1, false),
        Err(SplineError::InvalidMesh { n_elem: 1 })
    ));
}

#[test]
fn elements_have_equal_width() {
    let kv = KnotVector::<f64>::uniform(7, false).unwrap();
    for e in 0..7 {
        let (a, b) = kv.element_bounds(e);
        assert!((b - a - 1.0 / 7.0).abs() < 1e-15);
    }
}

#[test]
fn basis_matches_cox_de_boor() {
    let kv = KnotVector::<f64>::uniform(4, false).unwrap();
    for e in 0..4 {
        for &x in &[0.125 + 0.25 * e as f64, 0.25 * e as f64 + 0.03] {
            let d = kv.basis_derivs(e, x);
            for j in 0..LOCAL {
                let i = kv.global_index(e, j);
                let oracle = cox_de_boor(kv.knots(), i, 2, x);
                assert!((d[0][j] - oracle).abs() < 1e-15, "e={e} j={j}");
                // derivative oracle by central differences of the recursion
                let h = 1e-6;
                let fd = (cox_de_boor(kv.knots(), i, 2, x + h) - cox_de_boor(kv.knots(), i, 2, x - h)) / (2.0 * h);
                assert!((d[1][j] - fd).abs() < 1e-7);
            }
        }
    }
    // center basis value at the midpoint of element 1: N_2 on knots [0,0,0,.25,.5,.75,1,1,1]
    let d = kv.basis_derivs(1, 0.375);
    assert!((d[0][1] - 0.75).abs() < 1e-15);
}

#[test]
fn partition_of_unity_and_derivative_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for periodic in [false, true] {
        let space = make_uniform_space::<f64>(5, periodic).unwrap();
        for _ in 0..1000 {
            let b = space.eval_basis(random_point(&mut rng)).unwrap();
            assert_eq!(b.len(), 27);
            let s: f64 = b.iter().map(|v| v.value).sum();
            assert!((s - 1.0).abs() <= 1e-14);
            for k in 0..3 {
                let g: f64 = b.iter().map(|v| v.grad[k]).sum();
                assert!(g.abs() <= 1e-12);
                for l in 0..3 {
                    let h: f64 = b.iter().map(|v| v.hess[k][l]).sum();
                    assert!(h.abs() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn out_of_domain_is_rejected() {
    let space = make_uniform_space::<f64>(4, false).unwrap();
    assert!(matches!(space.eval_basis([0.5, 1.2, 0.5]), Err(SplineError::Domain { .. })));
    assert!(space.eval_basis([0.5, f64::NAN, 0.5]).is_err());
    assert!(space.eval_basis([0.0, 1.0, 1.0]).is_ok());
}

#[test]
fn zero_field_evaluates_to_zero() {
    let space = make_uniform_space::<f64>(4, false).unwrap();
    let f = FieldCoeffs::zeros(&space);
    assert_eq!(space.interpolate_field(&f, [0.3, 0.6, 0.9]).unwrap(), FieldPoint::zero());
}

#[test]
fn linear_field_is_reproduced() {
    let space = make_uniform_space::<f64>(6, false).unwrap();
    let f = interpolate(&space, |x| [x[0], 0.0, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let x = random_point(&mut rng);
        let p = space.interpolate_field(&f, x).unwrap();
        assert!((p.u[0] - x[0]).abs() < 1e-12);
        assert!((p.grad[0][0] - 1.0).abs() < 1e-12);
        for h in p.hess.iter().flatten().flatten() {
            assert!(h.abs() < 1e-10);
        }
    }
}

#[test]
fn quadratic_reproduction() {
    let space = make_uniform_space::<f64>(5, false).unwrap();
    let q = |t: f64, a: f64, b: f64, c: f64| a + b * t + c * t * t;
    let exact = |x: [f64; 3]| {
        [
            q(x[0], 0.3, -1.2, 2.0) * q(x[1], 1.0, 0.5, -0.7),
            q(x[2], -0.4, 0.0, 1.5),
            q(x[0], 1.0, 1.0, 1.0) + q(x[1], 0.0, 2.0, -3.0) * q(x[2], 0.2, 0.1, 0.3),
        ]
    };
    let f = interpolate(&space, exact).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = random_point(&mut rng);
        let p = space.interpolate_field(&f, x).unwrap();
        let e = exact(x);
        for i in 0..3 {
            assert!((p.u[i] - e[i]).abs() <= 1e-12 * e[i].abs().max(1.0));
        }
    }
}

#[test]
fn hessian_matches_finite_differences_of_gradient() {
    let space = make_uniform_space::<f64>(4, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_field(&space, &mut rng);
    let h = 1e-5;
    for _ in 0..30 {
        let x = [0, 1, 2].map(|_| rng.gen_range(0.01..0.99));
        // stay inside one element so the second derivative is smooth
        let e = [0, 1, 2].map(|a| space.axes()[a].element_of(x[a]).unwrap());
        if (0..3).any(|a| {
            let (lo, hi) = space.axes()[a].element_bounds(e[a]);
            x[a] - h <= lo || x[a] + h >= hi
        }) {
            continue;
        }
        let p = space.interpolate_field(&f, x).unwrap();
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let gp = space.interpolate_field(&f, xp).unwrap().grad;
            let gm = space.interpolate_field(&f, xm).unwrap().grad;
            for i in 0..3 {
                for j in 0..3 {
                    let fd = (gp[i][j] - gm[i][j]) / (2.0 * h);
                    let an = p.hess[i][j][k];
                    assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
                }
            }
        }
    }
}

#[test]
fn periodic_faces_agree() {
    let space = make_uniform_space::<f64>(5, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = random_field(&space, &mut rng);
    for _ in 0..100 {
        let x = random_point(&mut rng);
        for a in 0..3 {
            let mut x0 = x;
            let mut x1 = x;
            x0[a] = 0.0;
            x1[a] = 1.0;
            let p0 = space.interpolate_field(&f, x0).unwrap();
            let p1 = space.interpolate_field(&f, x1).unwrap();
            // u_{,aa} jumps across the wrap like at any interior knot of a C¹ spline
            let flat = |p: &FieldPoint<f64>| {
                let mut v = p.u.to_vec();
                v.extend(p.grad.iter().flatten());
                for h in &p.hess {
                    for j in 0..3 {
                        for k in 0..3 {
                            if !(j == a && k == a) {
                                v.push(h[j][k]);
                            }
                        }
                    }
                }
                v
            };
            for (u, v) in flat(&p0).iter().zip(flat(&p1)) {
                assert!((u - v).abs() <= 1e-13 * v.abs().max(1.0));
            }
        }
    }
}

#[test]
fn knot_insertion_preserves_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (nc, nf, periodic) in [(4, 8, false), (3, 9, false), (4, 12, true), (16, 64, false)] {
        let coarse = make_uniform_space::<f64>(nc, periodic).unwrap();
        let fine = make_uniform_space::<f64>(nf, periodic).unwrap();
        let f = random_field(&coarse, &mut rng);
        let g = knot_insert(&coarse, &f, &fine).unwrap();
        for _ in 0..100 {
            let x = random_point(&mut rng);
            let a = coarse.interpolate_field(&f, x).unwrap();
            let b = fine.interpolate_field(&g, x).unwrap();
            for i in 0..3 {
                assert!((a.u[i] - b.u[i]).abs() <= 1e-13, "{nc}->{nf} {periodic}");
            }
        }
    }
}

#[test]
fn knot_insertion_trivial_fields() {
    let coarse = make_uniform_space::<f64>(3, false).unwrap();
    let fine = make_uniform_space::<f64>(6, false).unwrap();
    let ones = FieldCoeffs::from_fn(coarse.dofs_per_axis(), |_| [1.0; 3]);
    let g = knot_insert(&coarse, &ones, &fine).unwrap();
    assert!(g.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-15));
    let z = knot_insert(&coarse, &FieldCoeffs::zeros(&coarse), &fine).unwrap();
    assert!(z.as_slice().iter().all(|v| *v == 0.0));
}

#[test]
fn non_nested_refinement_is_rejected() {
    let a = make_uniform_space::<f64>(4, false).unwrap();
    let b = make_uniform_space::<f64>(6, false).unwrap();
    let f = FieldCoeffs::zeros(&a);
    assert_eq!(knot_insert(&a, &f, &b), Err(SplineError::NotNested));
    let p = make_uniform_space::<f64>(8, true).unwrap();
    assert_eq!(knot_insert(&a, &f, &p), Err(SplineError::NotNested));
}

#[test]
fn single_precision_space_works() {
    let space = make_uniform_space::<f32>(4, false).unwrap();
    let b = space.eval_basis([0.3, 0.2, 0.9]).unwrap();
    let s: f32 = b.iter().map(|v| v.value).sum();
    assert!((s - 1.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn prop_partition_of_unity(x in 0.0f64..=1.0, y in 0.0f64..=1.0, z in 0.0f64..=1.0, n in 2usize..10) {
        let space = make_uniform_space::<f64>(n, false).unwrap();
        let s: f64 = space.eval_basis([x, y, z]).unwrap().iter().map(|b| b.value).sum();
        prop_assert!((s - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn prop_refinement_preserves_point_values(seed in 0u64..1000, x in 0.0f64..=1.0, y in 0.0f64..=1.0, z in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coarse = make_uniform_space::<f64>(3, false).unwrap();
        let fine = make_uniform_space::<f64>(6, false).unwrap();
        let f = random_field(&coarse, &mut rng);
        let g = knot_insert(&coarse, &f, &fine).unwrap();
        let a = coarse.interpolate_field(&f, [x, y, z]).unwrap();
        let b = fine.interpolate_field(&g, [x, y, z]).unwrap();
        for i in 0..3 {
            prop_assert!((a.u[i] - b.u[i]).abs() <= 1e-13);
        }
    }
}
