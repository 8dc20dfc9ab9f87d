use gradelast::material::{DiagonalQuadratic, EnergyDensity, ThreeWell, NZ};
use gradelast::Ring;

/// The energies selectable from a spec.
#[derive(Clone, Debug)]
pub enum Material {
    ThreeWell(ThreeWell<f64>),
    LinearElastic(DiagonalQuadratic<f64>),
}

impl EnergyDensity<f64> for Material {
    fn psi<R: Ring<f64>>(&self, z: &[R; NZ]) -> R {
        match self {
            Material::ThreeWell(e) => e.psi(z),
            Material::LinearElastic(e) => e.psi(z),
        }
    }

    fn gradient<R: Ring<f64>>(&self, z: &[R; NZ]) -> [R; NZ] {
        match self {
            Material::ThreeWell(e) => e.gradient(z),
            Material::LinearElastic(e) => e.gradient(z),
        }
    }

    fn hessian_upper<R: Ring<f64>>(&self, z: &[R; NZ], emit: &mut impl FnMut(usize, usize, R)) {
        match self {
            Material::ThreeWell(e) => e.hessian_upper(z, emit),
            Material::LinearElastic(e) => e.hessian_upper(z, emit),
        }
    }

    fn hessian(&self, z: &[f64; NZ]) -> Box<[[f64; NZ]; NZ]> {
        match self {
            Material::ThreeWell(e) => e.hessian(z),
            Material::LinearElastic(e) => e.hessian(z),
        }
    }

    fn density(&self) -> f64 {
        match self {
            Material::ThreeWell(e) => e.density(),
            Material::LinearElastic(e) => e.density(),
        }
    }

    fn damping(&self) -> f64 {
        match self {
            Material::ThreeWell(e) => e.damping(),
            Material::LinearElastic(e) => e.damping(),
        }
    }
}
