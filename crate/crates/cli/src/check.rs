//! Quick property checks runnable from the command line.

use gradelast::assembly::{Assembler, ConstraintSet, Mode};
use gradelast::integrators::{energy_identity_defect, evaluate, HalfStepStates, SchemeConfig, SchemeKind};
use gradelast::material::{EnergyDensity, MaterialParams, PolynomialEnergy, QuadState, ThreeWell, NZ};
use gradelast::spline::{make_uniform_space, FieldCoeffs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.value <= self.tol
    }
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed() { "pass" } else { "FAIL" };
        write!(f, "{status} {}: {:.3e} (tol {:.0e})", self.name, self.value, self.tol)
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> [f64; NZ] {
    let mut z = QuadState::<f64>::identity().to_zeta();
    for v in z.iter_mut() {
        *v += rng.gen_range(-0.3..0.3);
    }
    z
}

fn identity_defect(kind: SchemeKind, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let energy = ThreeWell::new(MaterialParams::<f64>::reference());
    let cfg = SchemeConfig::new(kind);
    (0..samples)
        .map(|_| {
            let zm = random_state(rng);
            let d: [f64; NZ] = std::array::from_fn(|_| 0.1 * rng.gen_range(-1.0..1.0));
            let h = HalfStepStates::from_delta(zm, &d);
            let stress = evaluate(&h, &energy, &cfg, false).stress;
            energy_identity_defect(&h, &energy, &stress)
        })
        .fold(0.0, f64::max)
}

fn well_depth() -> f64 {
    let p = MaterialParams::<f64>::reference();
    p.wells().iter().map(|&(e2, e3)| (p.non_convex(e2, e3) + 1.0).abs()).fold(0.0, f64::max)
}

fn polynomial_mismatch(samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let p = MaterialParams::<f64>::reference();
    let analytic = ThreeWell::new(p);
    let poly = PolynomialEnergy::from_params(&p);
    (0..samples)
        .map(|_| {
            let z = random_state(rng);
            let a = analytic.psi(&z);
            (a - poly.psi(&z)).abs() / a.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

fn partition_of_unity(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for periodic in [false, true] {
        let space = make_uniform_space::<f64>(4, periodic).expect("uniform space");
        for _ in 0..50 {
            let x = [0, 1, 2].map(|_| rng.gen_range(0.0..1.0));
            let sum: f64 = space.eval_basis(x).expect("inside the cube").iter().map(|b| b.value).sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    worst
}

fn tangent_asymmetry() -> f64 {
    let space = make_uniform_space::<f64>(3, false).expect("uniform space");
    let energy = ThreeWell::new(MaterialParams::<f64>::reference());
    let asm = Assembler::new(&space, &energy, ConstraintSet::new()).expect("assembler");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut field = || {
        let mut u = FieldCoeffs::zeros(&space);
        for v in u.as_mut_slice() {
            *v = rng.gen_range(-0.02..0.02);
        }
        u
    };
    let (a, b, c) = (field(), field(), field());
    let mode = Mode::Dynamic {
        u_nm1: &a,
        u_n: &b,
        dt: 1e-3,
        scheme: SchemeConfig::taylor_full(),
    };
    let k = asm.assemble(&c, &mode, true).expect("assembly").tangent.expect("tangent");
    k.max_asymmetry() / k.max_abs()
}

/// Runs every check with the given seed.
pub fn run_checks(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        CheckResult {
            name: "Gonzalez energy identity",
            value: identity_defect(SchemeKind::Gonzalez, 200, &mut rng),
            tol: 1e-12,
        },
        CheckResult {
            name: "Taylor energy identity",
            value: identity_defect(SchemeKind::TaylorFull, 200, &mut rng),
            tol: 1e-12,
        },
        CheckResult {
            name: "well depth",
            value: well_depth(),
            tol: 1e-14,
        },
        CheckResult {
            name: "polynomial energy",
            value: polynomial_mismatch(100, &mut rng),
            tol: 1e-12,
        },
        CheckResult {
            name: "partition of unity",
            value: partition_of_unity(&mut rng),
            tol: 1e-12,
        },
        CheckResult {
            name: "Taylor tangent symmetry",
            value: tangent_asymmetry(),
            tol: 1e-10,
        },
    ]
}
