use super::*;
use crate::material::{DiagonalQuadratic, MaterialParams, ThreeWell, NZ};
use crate::spline::make_uniform_space;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(space: &SplineSpace<f64>, amp: f64, seed: u64) -> FieldCoeffs<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = FieldCoeffs::zeros(space);
    for v in u.as_mut_slice() {
        *v = amp * rng.gen_range(-1.0..1.0);
    }
    u
}

fn newton() -> NewtonConfig<f64> {
    NewtonConfig {
        residual_tol: 1e-11,
        ..NewtonConfig::default()
    }
}

fn max_diff(a: &Mat3<f64>, b: &Mat3<f64>) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn zeta_affine(f: &Mat3<f64>) -> [f64; NZ] {
    let mut z = [0.0; NZ];
    for i in 0..3 {
        for j in 0..3 {
            z[f_index(i, j)] = f[i][j];
        }
    }
    z
}

#[test]
fn strain_of_reference_loading() {
    let load = MacroLoading::new(reference_direction::<f64>(), vec![1.0]);
    let f = load.fbar(1.0);
    let e = effective_strain(&f);
    let d = reference_direction::<f64>();
    // D is symmetric, so E = D + D²/2
    for i in 0..3 {
        for j in 0..3 {
            let d2: f64 = (0..3).map(|k| d[i][k] * d[k][j]).sum();
            assert!((e[i][j] - (d[i][j] + 0.5 * d2)).abs() < 1e-15);
            assert_eq!(e[i][j], e[j][i]);
        }
    }
    assert_eq!(effective_strain(&load.fbar(0.0)), [[0.0; 3]; 3]);
}

#[test]
fn evenly_spaced_and_validation() {
    let d = reference_direction::<f64>();
    let l = MacroLoading::evenly_spaced(d, -1.0, 1.0, 5);
    assert_eq!(l.eta_values, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    l.validate().unwrap();
    assert!(MacroLoading::new(d, vec![0.0, 0.0]).validate().is_err());
    assert!(MacroLoading::new(d, vec![f64::NAN]).validate().is_err());
    let mut bad = l.clone();
    bad.max_increment = 0.0;
    assert!(bad.validate().is_err());
}

#[test]
fn convex_cell_relaxes_to_affine_state() {
    let space = make_uniform_space::<f64>(3, true).unwrap();
    let energy = DiagonalQuadratic::linear_elastic(2.0, 0.1);
    let d = reference_direction::<f64>();
    let fbar = MacroLoading::new(d, vec![]).fbar(2.0);
    let (u, iters) = periodic_equilibrium(&space, &energy, &fbar, &random_field(&space, 1e-2, 1), &newton()).unwrap();
    assert!(iters >= 1);
    assert!(u.max_abs() < 1e-10, "{}", u.max_abs());
    let eff = effective_stress(&space, &energy, &u, &fbar).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let expect = 2.0 * (fbar[i][j] - if i == j { 1.0 } else { 0.0 });
            assert!((eff.p_bar[i][j] - expect).abs() < 1e-10);
        }
    }
    let trac = traction_average(&space, &energy, &u, &fbar).unwrap();
    assert!(max_diff(&trac, &eff.p_bar) < 1e-9);
}

#[test]
fn homogeneous_three_well_state_is_an_equilibrium() {
    let space = make_uniform_space::<f64>(3, true).unwrap();
    let energy = ThreeWell::new(MaterialParams::reference());
    let d = reference_direction::<f64>();
    let fbar = MacroLoading::new(d, vec![]).fbar(1.5);
    let (u, iters) = periodic_equilibrium(&space, &energy, &fbar, &FieldCoeffs::zeros(&space), &newton()).unwrap();
    assert_eq!(iters, 0);
    let eff = effective_stress(&space, &energy, &u, &fbar).unwrap();
    let g = energy.gradient(&zeta_affine(&fbar));
    for i in 0..3 {
        for j in 0..3 {
            assert!((eff.p_bar[i][j] - g[f_index(i, j)]).abs() < 1e-12 * (1.0 + g[f_index(i, j)].abs()));
            assert!((eff.s_bar[i][j] - eff.s_bar[j][i]).abs() < 1e-12 * (1.0 + eff.s_bar[i][j].abs()));
        }
    }
    assert!((eff.psi_bar - energy.psi(&zeta_affine(&fbar))).abs() < 1e-12);
    let trac = traction_average(&space, &energy, &u, &fbar).unwrap();
    assert!(max_diff(&trac, &eff.p_bar) < 1e-10 * (1.0 + eff.p_bar.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))));
}

#[test]
fn traction_route_sees_unbalanced_fields() {
    let space = make_uniform_space::<f64>(4, true).unwrap();
    let energy = ThreeWell::new(MaterialParams::reference());
    let fbar = identity3();
    let u = random_field(&space, 2e-2, 4);
    let vol = effective_stress(&space, &energy, &u, &fbar).unwrap().p_bar;
    let trac = traction_average(&space, &energy, &u, &fbar).unwrap();
    assert!(max_diff(&vol, &trac) > 1e-6);
}

#[test]
fn averages_ignore_translations() {
    let space = make_uniform_space::<f64>(3, true).unwrap();
    let energy = ThreeWell::new(MaterialParams::reference());
    let fbar = MacroLoading::new(reference_direction::<f64>(), vec![]).fbar(0.7);
    let u = random_field(&space, 1e-2, 5);
    let mut shifted = u.clone();
    for cp in 0..space.n_control_points() {
        shifted[3 * cp] += 0.3;
        shifted[3 * cp + 2] -= 0.1;
    }
    let a = effective_stress(&space, &energy, &u, &fbar).unwrap();
    let b = effective_stress(&space, &energy, &shifted, &fbar).unwrap();
    assert!(max_diff(&a.p_bar, &b.p_bar) < 1e-11);
    assert!((a.psi_bar - b.psi_bar).abs() < 1e-12);
    let ta = traction_average(&space, &energy, &u, &fbar).unwrap();
    let tb = traction_average(&space, &energy, &shifted, &fbar).unwrap();
    assert!(max_diff(&ta, &tb) < 1e-9);
}

#[test]
fn energy_derivative_along_path_is_stress_power() {
    let space = make_uniform_space::<f64>(3, true).unwrap();
    let energy = ThreeWell::new(MaterialParams::reference());
    let d = reference_direction::<f64>();
    let load = MacroLoading::new(d, vec![]);
    let eta = 1.2;
    let h = 1e-5;
    let psi_at = |e: f64| effective_stress(&space, &energy, &FieldCoeffs::zeros(&space), &load.fbar(e)).unwrap().psi_bar;
    let fd = (psi_at(eta + h) - psi_at(eta - h)) / (2.0 * h);
    let p = effective_stress(&space, &energy, &FieldCoeffs::zeros(&space), &load.fbar(eta)).unwrap().p_bar;
    let power: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| p[i][j] * d[i][j]).sum();
    assert!((fd - power).abs() < 1e-6 * (1.0 + power.abs()), "{fd} vs {power}");
}

#[test]
fn sweep_records_sorted_with_substeps() {
    let space = make_uniform_space::<f64>(3, true).unwrap();
    let energy = DiagonalQuadratic::linear_elastic(1.0, 0.1);
    let mut load = MacroLoading::new(reference_direction(), vec![-1.0, -0.25, 0.5, 1.0]);
    load.max_increment = 0.3;
    let seed = FieldCoeffs::zeros(&space);
    let out = continuation_sweep(&space, &energy, &load, &seed, 0.4, &newton()).unwrap();
    let etas: Vec<f64> = out.records.iter().map(|r| r.eta).collect();
    assert_eq!(etas, load.eta_values);
    assert_eq!(out.solutions.len(), 4);
    for r in &out.records {
        assert!(r.stress_asymmetry() < 1e-12);
        assert!(r.traction_mismatch() < 1e-9);
        assert_eq!(r.e_bar, effective_strain(&r.fbar));
    }
}

#[test]
fn sweep_failure_keeps_partial_records() {
    let space = make_uniform_space::<f64>(3, true).unwrap();
    let energy = DiagonalQuadratic::linear_elastic(1.0, 0.1);
    let minus_identity = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
    let load = MacroLoading::new(minus_identity, vec![0.0, 0.5, 1.0]);
    let err = continuation_sweep(&space, &energy, &load, &FieldCoeffs::zeros(&space), 0.0, &newton()).unwrap_err();
    assert!(matches!(err.error, HomogenizeError::SingularLoading { .. }));
    assert_eq!(err.partial.records.len(), 2);

    let open = make_uniform_space::<f64>(3, false).unwrap();
    let err = continuation_sweep(&open, &energy, &load, &FieldCoeffs::zeros(&open), 0.0, &newton()).unwrap_err();
    assert!(matches!(err.error, HomogenizeError::NotPeriodic));
    assert!(err.partial.records.is_empty());
}

#[test]
fn sweep_csv_layout() {
    let space = make_uniform_space::<f64>(3, true).unwrap();
    let energy = DiagonalQuadratic::linear_elastic(1.0, 0.1);
    let load = MacroLoading::new(reference_direction(), vec![0.0, 0.5]);
    let out = continuation_sweep(&space, &energy, &load, &FieldCoeffs::zeros(&space), 0.0, &newton()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&path, &out).unwrap();
    let (header, rows) = crate::io::read_numeric_csv(&path).unwrap();
    assert_eq!(header.len(), 15);
    assert_eq!(header[0], "eta");
    assert_eq!(header[14], "newton_iters");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], 0.5);
    assert_eq!(rows[1][1], out.records[1].e_bar[0][0]);
    assert_eq!(rows[1][12], out.records[1].s_bar[0][1]);
}

#[test]
fn map_between_periodic_meshes_is_exact_under_refinement() {
    let coarse = make_uniform_space::<f64>(3, true).unwrap();
    let fine = make_uniform_space::<f64>(6, true).unwrap();
    let u = random_field(&coarse, 1.0, 7);
    let v = map_to_space(&coarse, &u, &fine).unwrap();
    for x in [[0.1, 0.5, 0.9], [0.77, 0.01, 0.33]] {
        let a = coarse.interpolate_field(&u, x).unwrap().u;
        let b = fine.interpolate_field(&v, x).unwrap().u;
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn long_wave_perturbation_is_periodic_and_pinned() {
    let space = make_uniform_space::<f64>(4, true).unwrap();
    let u = long_wave_perturbation(&space, 0.3).unwrap();
    assert_eq!([u[0], u[1], u[2]], [0.0; 3]);
    let a = space.interpolate_field(&u, [0.0, 0.3, 0.7]).unwrap();
    let b = space.interpolate_field(&u, [1.0, 0.3, 0.7]).unwrap();
    for k in 0..3 {
        assert!((a.u[k] - b.u[k]).abs() < 1e-13);
    }
    let g = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a.grad[i][j].abs()).fold(0.0, f64::max);
    assert!(g > 0.01 && g < 1.0, "{g}");
}
