//! Time-discrete stress approximations at a quadrature point.
//!
//! Every scheme maps the two half-step states `ζ⁻ = ζ^{n-1/2}` and
//! `ζ⁺ = ζ^{n+1/2}` to a stress vector `{Z}` laid out like ζ (the first
//! [`NF`] entries are `{P}`, the rest `{B}`), such that `{Z}·Δ` equals the
//! energy change `Ψ(ζ⁺) − Ψ(ζ⁻)` for the conservative schemes.
//!
//! Tangents are derivatives with respect to the state at `t^{n+1}`. Since
//! `ζ⁺ = ζ((uⁿ⁺¹ + uⁿ)/2)` and `Δ = ζ⁺ − ζ⁻ = ζ((uⁿ⁺¹ − uⁿ⁻¹)/2)`, both move
//! by half of any change in `ζ(uⁿ⁺¹)`.

use crate::linepoly::LinePoly;
use crate::material::{EnergyDensity, QuadState, StressPair, NF, NZ};
use crate::quadrature::gauss_legendre_unit;
use crate::scalar::Scalar;


/// Dense 36×36 material tangent.
pub type Tangent<S> = Box<[[S; NZ]; NZ]>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemeError {
    #[error("invalid scheme setting {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SchemeKind {
    Gonzalez,
    #[default]
    TaylorFull,
    TaylorReduced,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Gonzalez, SchemeKind::TaylorFull, SchemeKind::TaylorReduced];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Gonzalez => "gonzalez",
            SchemeKind::TaylorFull => "taylor_full",
            SchemeKind::TaylorReduced => "taylor_reduced",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig<S> {
    pub kind: SchemeKind,
    /// Length scale weighting `Δ∇F` in the Gonzalez correction.
    pub l_gs: S,
    /// Cap on `κ_F` in the Taylor remainders.
    pub kappa_f_max: usize,
    /// Cap on `κ_∇F` in the Taylor remainders.
    pub kappa_gradf_max: usize,
}

impl<S: Scalar> SchemeConfig<S> {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            l_gs: S::one(),
            kappa_f_max: if kind == SchemeKind::TaylorReduced { 4 } else { 8 },
            kappa_gradf_max: 2,
        }
    }

    pub fn gonzalez() -> Self {
        Self::new(SchemeKind::Gonzalez)
    }

    pub fn taylor_full() -> Self {
        Self::new(SchemeKind::TaylorFull)
    }

    pub fn taylor_reduced() -> Self {
        Self::new(SchemeKind::TaylorReduced)
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if !(1..=8).contains(&self.kappa_f_max) {
            return Err(SchemeError::Invalid {
                field: "kappa_f_max",
                reason: format!("{} not in [1, 8]", self.kappa_f_max),
            });
        }
        if self.kappa_gradf_max > 2 {
            return Err(SchemeError::Invalid {
                field: "kappa_gradf_max",
                reason: format!("{} not in [0, 2]", self.kappa_gradf_max),
            });
        }
        if !(self.l_gs > S::zero()) || !self.l_gs.is_finite() {
            return Err(SchemeError::Invalid {
                field: "l_gs",
                reason: format!("{} must be positive", self.l_gs),
            });
        }
        Ok(())
    }

    /// Whether the scheme produces symmetric tangents.
    pub fn is_symmetric(&self) -> bool {
        self.kind != SchemeKind::Gonzalez
    }

    /// Whether the scheme satisfies the discrete energy identity exactly.
    pub fn is_conservative(&self) -> bool {
        match self.kind {
            SchemeKind::Gonzalez => true,
            _ => self.kappa_f_max >= 8 && self.kappa_gradf_max >= 2,
        }
    }

    /// Whether a Taylor term with `κ_F = p`, `κ_∇F = q` is retained.
    fn keeps(&self, p: usize, q: usize) -> bool {
        p + q <= 2 || (p <= self.kappa_f_max && q <= self.kappa_gradf_max)
    }
}

impl<S: Scalar> Default for SchemeConfig<S> {
    fn default() -> Self {
        Self::taylor_full()
    }
}

/// The two half-step states at a quadrature point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfStepStates<S> {
    pub zeta_minus: [S; NZ],
    pub zeta_plus: [S; NZ],
}

impl<S: Scalar> HalfStepStates<S> {
    pub fn new(zeta_minus: [S; NZ], zeta_plus: [S; NZ]) -> Self {
        Self { zeta_minus, zeta_plus }
    }

    pub fn from_states(minus: &QuadState<S>, plus: &QuadState<S>) -> Self {
        Self::new(minus.to_zeta(), plus.to_zeta())
    }

    /// `ζ⁺ = ζ⁻ + Δ`.
    pub fn from_delta(zeta_minus: [S; NZ], delta: &[S; NZ]) -> Self {
        let mut zeta_plus = zeta_minus;
        for (p, d) in zeta_plus.iter_mut().zip(delta) {
            *p += *d;
        }
        Self { zeta_minus, zeta_plus }
    }

    pub fn delta(&self) -> [S; NZ] {
        std::array::from_fn(|m| self.zeta_plus[m] - self.zeta_minus[m])
    }

    pub fn midpoint(&self) -> [S; NZ] {
        let half = S::lit(0.5);
        std::array::from_fn(|m| half * (self.zeta_plus[m] + self.zeta_minus[m]))
    }

    pub fn delta_f(&self) -> [[S; 3]; 3] {
        QuadState::from_zeta(&self.delta()).f
    }

    pub fn delta_grad_f(&self) -> [[[S; 3]; 3]; 3] {
        QuadState::from_zeta(&self.delta()).grad_f
    }
}

/// Midpoint acceleration and velocity stencils.
pub fn kinematic_stencils<S: Scalar>(u_nm1: &[S; 3], u_n: &[S; 3], u_np1: &[S; 3], dt: S) -> ([S; 3], [S; 3]) {
    assert!(dt > S::zero(), "time step must be positive");
    let two = S::lit(2.0);
    let accel = std::array::from_fn(|i| (u_np1[i] - two * u_n[i] + u_nm1[i]) / (dt * dt));
    let veloc = std::array::from_fn(|i| (u_np1[i] - u_nm1[i]) / (two * dt));
    (accel, veloc)
}

/// Stress vector and, on request, its tangent.
#[derive(Clone, Debug)]
pub struct SchemeResponse<S> {
    pub stress: [S; NZ],
    pub tangent: Option<Tangent<S>>,
}

/// Denominator below which the Gonzalez correction is dropped.
pub const GONZALEZ_DEGENERATE: f64 = 1e-28;

fn metric<S: Scalar>(cfg: &SchemeConfig<S>) -> [S; NZ] {
    let l2 = cfg.l_gs * cfg.l_gs;
    std::array::from_fn(|m| if m < NF { S::one() } else { l2 })
}

fn dot<S: Scalar>(a: &[S; NZ], b: &[S; NZ]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Gonzalez-type stresses: midpoint stresses plus a correction along the
/// weighted step direction that restores the energy identity.
pub fn gonzalez<S: Scalar, E: EnergyDensity<S>>(
    h: &HalfStepStates<S>,
    energy: &E,
    cfg: &SchemeConfig<S>,
    with_tangent: bool,
) -> SchemeResponse<S> {
    let mid = h.midpoint();
    let delta = h.delta();
    let g = energy.gradient(&mid);
    let mw = metric(cfg);
    let m_delta: [S; NZ] = std::array::from_fn(|m| mw[m] * delta[m]);
    let d = dot(&delta, &m_delta);
    let half = S::lit(0.5);
    let quarter = S::lit(0.25);

    if d < S::lit(GONZALEZ_DEGENERATE) {
        let tangent = with_tangent.then(|| {
            let mut t = energy.hessian(&mid);
            t.iter_mut().flatten().for_each(|v| *v *= quarter);
            t
        });
        return SchemeResponse { stress: g, tangent };
    }

    let psi_plus = energy.psi(&h.zeta_plus);
    let psi_minus = energy.psi(&h.zeta_minus);
    let n = psi_plus - psi_minus - dot(&g, &delta);
    let ratio = n / d;
    let stress = std::array::from_fn(|m| g[m] + ratio * m_delta[m]);

    let tangent = with_tangent.then(|| {
        let hm = energy.hessian(&mid);
        let g_plus = energy.gradient(&h.zeta_plus);
        // ∂N/∂ζ⁺ = ∇Ψ(ζ⁺) − g − ½ H(mid) Δ
        let dn: [S; NZ] = std::array::from_fn(|j| {
            let hd = (0..NZ).fold(S::zero(), |acc, k| acc + hm[j][k] * delta[k]);
            g_plus[j] - g[j] - half * hd
        });
        let two = S::lit(2.0);
        let dratio: [S; NZ] = std::array::from_fn(|j| (dn[j] - two * ratio * m_delta[j]) / d);
        let mut t = Box::new([[S::zero(); NZ]; NZ]);
        for i in 0..NZ {
            for j in 0..NZ {
                let mut v = half * hm[i][j] + m_delta[i] * dratio[j];
                if i == j {
                    v += ratio * mw[i];
                }
                // ζ⁺ moves by half of ζ(uⁿ⁺¹)
                t[i][j] = half * v;
            }
        }
        t
    });
    SchemeResponse { stress, tangent }
}

/// The state `ζ⁻ + s·Δ_F + t·Δ_∇F` in the line-polynomial ring, truncated
/// past the highest `s` degree any retained term needs.
fn line_state<S: Scalar>(h: &HalfStepStates<S>, cfg: &SchemeConfig<S>) -> [LinePoly<S>; NZ] {
    let cap = cfg.kappa_f_max.max(2);
    std::array::from_fn(|m| {
        let d = h.zeta_plus[m] - h.zeta_minus[m];
        let p = if m < NF {
            LinePoly::along_s(h.zeta_minus[m], d)
        } else {
            LinePoly::along_t(h.zeta_minus[m], d)
        };
        p.truncated(cap)
    })
}

/// Gauss points in `τ` used by [`taylor_quadrature`]; exact for energies of
/// total polynomial degree up to eight.
pub const TAYLOR_GAUSS_POINTS: usize = 4;

/// Taylor-series stresses. Uncapped schemes use [`taylor_quadrature`], capped
/// ones [`taylor_expansion`].
pub fn taylor<S: Scalar, E: EnergyDensity<S>>(
    h: &HalfStepStates<S>,
    energy: &E,
    cfg: &SchemeConfig<S>,
    with_tangent: bool,
) -> SchemeResponse<S> {
    if cfg.kappa_f_max >= 8 && cfg.kappa_gradf_max >= 2 {
        taylor_quadrature(h, energy, with_tangent)
    } else {
        taylor_expansion(h, energy, cfg, with_tangent)
    }
}

/// Taylor-series stresses built from the exact expansion of Ψ about ζ⁻.
///
/// The coefficient of `sᵃtᵇ` in `∂Ψ/∂ζ_m` along the line belongs to the term
/// with `(κ_F, κ_∇F) = (a, b)` plus one for the class of `m`, and is weighted
/// by `1/κ`.
pub fn taylor_expansion<S: Scalar, E: EnergyDensity<S>>(
    h: &HalfStepStates<S>,
    energy: &E,
    cfg: &SchemeConfig<S>,
    with_tangent: bool,
) -> SchemeResponse<S> {
    let line = line_state(h, cfg);
    // weights for a coefficient whose own degrees are shifted by `extra`
    let table = |extra: (usize, usize)| {
        LinePoly::weight_table(|a, b| {
            let (p, q) = (a + extra.0, b + extra.1);
            if cfg.keeps(p, q) {
                S::one() / S::from_usize_lossy(p + q)
            } else {
                S::zero()
            }
        })
    };
    let grad = energy.gradient(&line);
    let (w_f, w_g) = (table((1, 0)), table((0, 1)));
    let stress = std::array::from_fn(|m| grad[m].dot(if m < NF { &w_f } else { &w_g }));

    let tangent = with_tangent.then(|| {
        let half = S::lit(0.5);
        let w_pair = [table((2, 0)), table((1, 1)), table((0, 2))];
        let mut t = Box::new([[S::zero(); NZ]; NZ]);
        energy.hessian_upper(&line, &mut |m, n, v: LinePoly<S>| {
            let k = usize::from(m >= NF) + usize::from(n >= NF);
            let w = half * v.dot(&w_pair[k]);
            t[m][n] += w;
            if m != n {
                t[n][m] += w;
            }
        });
        t
    });
    SchemeResponse { stress, tangent }
}

/// The uncapped Taylor-series scheme in closed form.
///
/// With every term kept, the `1/κ` weights turn the expansion into
/// `∫₀¹ ∇Ψ(ζ⁻ + τΔ) dτ`, and the tangent in `ζ(uⁿ⁺¹)` into
/// `½∫₀¹ τ ∇²Ψ(ζ⁻ + τΔ) dτ`. Both integrands are polynomials in `τ` of degree
/// at most seven for the energies here, so Gauss quadrature is exact.
pub fn taylor_quadrature<S: Scalar, E: EnergyDensity<S>>(h: &HalfStepStates<S>, energy: &E, with_tangent: bool) -> SchemeResponse<S> {
    let (pts, wts) = gauss_legendre_unit::<S>(TAYLOR_GAUSS_POINTS);
    let delta = h.delta();
    let mut stress = [S::zero(); NZ];
    let mut tangent = with_tangent.then(|| Box::new([[S::zero(); NZ]; NZ]));
    let half = S::lit(0.5);
    for (&tau, &w) in pts.iter().zip(&wts) {
        let z: [S; NZ] = std::array::from_fn(|m| h.zeta_minus[m] + tau * delta[m]);
        let g = energy.gradient(&z);
        for (s, gm) in stress.iter_mut().zip(&g) {
            *s += w * *gm;
        }
        if let Some(t) = tangent.as_mut() {
            let wt = half * w * tau;
            let hz = energy.hessian(&z);
            for (trow, hrow) in t.iter_mut().zip(hz.iter()) {
                for (tv, hv) in trow.iter_mut().zip(hrow) {
                    *tv += wt * *hv;
                }
            }
        }
    }
    SchemeResponse { stress, tangent }
}

/// Dispatch on the configured scheme.
pub fn evaluate<S: Scalar, E: EnergyDensity<S>>(
    h: &HalfStepStates<S>,
    energy: &E,
    cfg: &SchemeConfig<S>,
    with_tangent: bool,
) -> SchemeResponse<S> {
    match cfg.kind {
        SchemeKind::Gonzalez => gonzalez(h, energy, cfg, with_tangent),
        SchemeKind::TaylorFull | SchemeKind::TaylorReduced => taylor(h, energy, cfg, with_tangent),
    }
}

pub fn gonzalez_stresses<S: Scalar, E: EnergyDensity<S>>(h: &HalfStepStates<S>, energy: &E, cfg: &SchemeConfig<S>) -> StressPair<S> {
    StressPair::from_flat(&gonzalez(h, energy, cfg, false).stress)
}

pub fn gonzalez_tangent<S: Scalar, E: EnergyDensity<S>>(h: &HalfStepStates<S>, energy: &E, cfg: &SchemeConfig<S>) -> Tangent<S> {
    gonzalez(h, energy, cfg, true).tangent.expect("tangent requested")
}

pub fn taylor_stresses<S: Scalar, E: EnergyDensity<S>>(h: &HalfStepStates<S>, energy: &E, cfg: &SchemeConfig<S>) -> StressPair<S> {
    StressPair::from_flat(&taylor(h, energy, cfg, false).stress)
}

pub fn taylor_tangent<S: Scalar, E: EnergyDensity<S>>(h: &HalfStepStates<S>, energy: &E, cfg: &SchemeConfig<S>) -> Tangent<S> {
    taylor(h, energy, cfg, true).tangent.expect("tangent requested")
}

/// Both sides of the discrete energy identity: `({Z}·Δ, Ψ(ζ⁺) − Ψ(ζ⁻))`.
pub fn energy_identity<S: Scalar, E: EnergyDensity<S>>(h: &HalfStepStates<S>, energy: &E, stress: &[S; NZ]) -> (S, S) {
    let work = dot(stress, &h.delta());
    let change = energy.psi(&h.zeta_plus) - energy.psi(&h.zeta_minus);
    (work, change)
}

/// Relative defect of the energy identity, scaled by `max(1, |Ψ±|)`.
pub fn energy_identity_defect<S: Scalar, E: EnergyDensity<S>>(h: &HalfStepStates<S>, energy: &E, stress: &[S; NZ]) -> S {
    let (work, _) = energy_identity(h, energy, stress);
    let pp = energy.psi(&h.zeta_plus);
    let pm = energy.psi(&h.zeta_minus);
    let scale = S::one().max(pp.abs()).max(pm.abs());
    (work - (pp - pm)).abs() / scale
}

/// Largest `|T − Tᵀ|` entry relative to `max(1, max|T|)`.
pub fn tangent_asymmetry<S: Scalar>(t: &[[S; NZ]; NZ]) -> S {
    let mut asym = S::zero();
    let mut scale = S::one();
    for i in 0..NZ {
        for j in 0..NZ {
            asym = asym.max((t[i][j] - t[j][i]).abs());
            scale = scale.max(t[i][j].abs());
        }
    }
    asym / scale
}
