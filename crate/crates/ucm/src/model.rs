//! Constitutive laws, pressure, energy integrands, characteristic speed
//! bounds and the stress/conformation conversion shared by all solvers.
//!
//! The governed system evolves (rho, u, A, F) with extra stress
//! `T = rho G (F A F^T - I)`; A is symmetric positive definite and F is an
//! invertible deformation gradient. All operations here are pure functions.

use crate::mat3::Mat3;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("density must be nonnegative, got {0}")]
    NegativeDensity(f64),
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("deformation gradient is singular")]
    SingularDeformation,
}

/// Physical constants of the model. The shear modulus is tied to the
/// viscosity and relaxation time by `G = mu0 / lambda`; the background
/// density is normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters<S> {
    /// pressure coefficient a > 0 in p0 = a rho^gamma
    pub a: S,
    /// adiabatic exponent gamma > 1
    pub gamma: S,
    /// relaxation time lambda > 0
    pub lambda: S,
    /// kinematic viscosity mu0 > 0
    pub mu0: S,
    /// shear modulus, always mu0 / lambda
    pub g: S,
    /// background density, always 1
    pub rho_bar: S,
}

impl<S: Real> Parameters<S> {
    pub fn new(a: S, gamma: S, lambda: S, mu0: S) -> Result<Self, ModelError> {
        if !(a > S::zero()) {
            return Err(ModelError::InvalidParameter("a must be > 0".into()));
        }
        if !(gamma > S::one()) {
            return Err(ModelError::InvalidParameter("gamma must be > 1".into()));
        }
        if !(lambda > S::zero()) {
            return Err(ModelError::InvalidParameter("lambda must be > 0".into()));
        }
        if !(mu0 > S::zero()) {
            return Err(ModelError::InvalidParameter("mu0 must be > 0".into()));
        }
        Ok(Parameters {
            a,
            gamma,
            lambda,
            mu0,
            g: mu0 / lambda,
            rho_bar: S::one(),
        })
    }
}

/// Full 3D state at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState<S> {
    pub rho: S,
    pub u: [S; 3],
    pub a: Mat3<S>,
    pub f: Mat3<S>,
}

impl<S: Real> PointState<S> {
    pub fn background() -> Self {
        PointState {
            rho: S::one(),
            u: [S::zero(); 3],
            a: Mat3::identity(),
            f: Mat3::identity(),
        }
    }
}

/// Symmetric extra stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressTensor<S>(pub Mat3<S>);

/// Spherically symmetric state at a point: tensors are diagonal
/// diag(X_r, X_t, X_t) in the spherical frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialPointState<S> {
    pub rho: S,
    pub u: S,
    pub a_r: S,
    pub a_t: S,
    pub f_r: S,
    pub f_t: S,
}

impl<S: Real> RadialPointState<S> {
    pub fn background() -> Self {
        RadialPointState {
            rho: S::one(),
            u: S::zero(),
            a_r: S::one(),
            a_t: S::one(),
            f_r: S::one(),
            f_t: S::one(),
        }
    }

    /// Embed into a full PointState with radial direction `e_r`.
    pub fn to_point(&self, e_r: [S; 3]) -> PointState<S> {
        let mut a = Mat3::identity().scale(self.a_t);
        let mut f = Mat3::identity().scale(self.f_t);
        for i in 0..3 {
            for j in 0..3 {
                a.0[i][j] = a.0[i][j] + (self.a_r - self.a_t) * e_r[i] * e_r[j];
                f.0[i][j] = f.0[i][j] + (self.f_r - self.f_t) * e_r[i] * e_r[j];
            }
        }
        PointState {
            rho: self.rho,
            u: [self.u * e_r[0], self.u * e_r[1], self.u * e_r[2]],
            a,
            f,
        }
    }
}

/// gamma-law pressure p0 = a rho^gamma.
pub fn eval_p0<S: Real>(rho: S, params: &Parameters<S>) -> Result<S, ModelError> {
    if rho < S::zero() {
        return Err(ModelError::NegativeDensity(rho.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(params.a * rho.powf(params.gamma))
}

/// Extra stress T = rho G (F A F^T - I). Symmetrized entry-wise so the
/// output is exactly symmetric in floating point.
pub fn eval_stress<S: Real>(state: &PointState<S>, params: &Parameters<S>) -> StressTensor<S> {
    let faft = state.f.mul(&state.a).mul(&state.f.transpose()).sym_part();
    let t = faft.sub(&Mat3::identity()).scale(state.rho * params.g);
    StressTensor(t)
}

/// Inverts the constitutive relation: A = F^{-1} (T/(rho G) + I) F^{-T}.
pub fn conformation_from_stress<S: Real>(
    stress: &StressTensor<S>,
    rho: S,
    f: &Mat3<S>,
    params: &Parameters<S>,
) -> Result<Mat3<S>, ModelError> {
    if rho <= S::zero() {
        return Err(ModelError::NonPositiveDensity(rho.to_f64().unwrap_or(f64::NAN)));
    }
    let f_inv = f.inverse().ok_or(ModelError::SingularDeformation)?;
    let inner = stress.0.scale(S::one() / (rho * params.g)).add(&Mat3::identity());
    Ok(f_inv.mul(&inner).mul(&f_inv.transpose()).sym_part())
}

/// Pressure potential a/(gamma-1) (rho^gamma - 1 - gamma (rho - 1)),
/// nonnegative for all rho >= 0 by convexity.
pub fn pressure_potential<S: Real>(rho: S, params: &Parameters<S>) -> S {
    params.a / (params.gamma - S::one())
        * (rho.powf(params.gamma) - S::one() - params.gamma * (rho - S::one()))
}

/// Viscous potential (mu0/lambda) (rho ln rho - rho + 1), nonnegative.
pub fn viscous_potential<S: Real>(rho: S, params: &Parameters<S>) -> S {
    params.g * (rho * rho.ln() - rho + S::one())
}

/// Pointwise energy density: rho |u|^2 / 2 + pressure and viscous
/// potentials + tr(T)/2. Vanishes at the background state.
pub fn energy_integrand<S: Real>(
    state: &PointState<S>,
    params: &Parameters<S>,
) -> Result<S, ModelError> {
    if state.rho <= S::zero() {
        return Err(ModelError::NonPositiveDensity(state.rho.to_f64().unwrap_or(f64::NAN)));
    }
    let half = S::of(0.5);
    let u2 = state.u[0] * state.u[0] + state.u[1] * state.u[1] + state.u[2] * state.u[2];
    let tr_t = eval_stress(state, params).0.trace();
    Ok(half * state.rho * u2
        + pressure_potential(state.rho, params)
        + viscous_potential(state.rho, params)
        + half * tr_t)
}

/// Radial energy density, same integrand evaluated in the spherical frame.
pub fn energy_integrand_radial<S: Real>(p: &RadialPointState<S>, params: &Parameters<S>) -> S {
    let half = S::of(0.5);
    let (t_rr, t_t) = radial_stress(p, params);
    half * p.rho * p.u * p.u
        + pressure_potential(p.rho, params)
        + viscous_potential(p.rho, params)
        + half * (t_rr + S::of(2.0) * t_t)
}

/// Radial/tangential stress eigenvalues:
/// T_rr = rho G (F_r^2 A_r - 1), T_t = rho G (F_t^2 A_t - 1).
pub fn radial_stress<S: Real>(p: &RadialPointState<S>, params: &Parameters<S>) -> (S, S) {
    let c = p.rho * params.g;
    (
        c * (p.f_r * p.f_r * p.a_r - S::one()),
        c * (p.f_t * p.f_t * p.a_t - S::one()),
    )
}

/// Trace of T in the radial frame: T_rr + 2 T_t.
pub fn radial_tr_stress<S: Real>(p: &RadialPointState<S>, params: &Parameters<S>) -> S {
    let (t_rr, t_t) = radial_stress(p, params);
    t_rr + S::of(2.0) * t_t
}

// The characteristic speed bound uses |u| + sqrt(c_s^2 + c_e^2) with the
// acoustic part c_s^2 = a gamma rho^{gamma-1} and an elastic part
// 2 G lmax(F A F^T). Dispersion analysis of the linearization at the
// background gives longitudinal speed^2 = a gamma + 2 G and shear
// speed^2 = G: perturbing around (rho, u, A, F) = (1, 0, I, I), the
// principal part couples u with rho (acoustic, via a gamma grad rho) and
// with F (elastic, via G div(F' + F'^T) where F'_t = grad u), so a plane
// longitudinal wave obeys u_tt = (a gamma + 2G) u_xx. Away from the
// background the same structure holds with a gamma rho^{gamma-1} and
// G lmax(F A F^T); the factor 2 on the elastic term is kept as a safety
// factor so the bound dominates nonlinear states (validated by the
// support-propagation tests).
fn elastic_speed_sq<S: Real>(lmax_faft: S, params: &Parameters<S>) -> S {
    S::of(2.0) * params.g * lmax_faft.max(S::zero())
}

/// Upper bound on all characteristic speeds of the linearization at `state`.
pub fn char_speed_bound<S: Real>(state: &PointState<S>, params: &Parameters<S>) -> S {
    let u_mag = (state.u[0] * state.u[0] + state.u[1] * state.u[1] + state.u[2] * state.u[2]).sqrt();
    let faft = state.f.mul(&state.a).mul(&state.f.transpose()).sym_part();
    let cs2 = params.a * params.gamma * state.rho.powf(params.gamma - S::one());
    u_mag + (cs2 + elastic_speed_sq(faft.sym_eig_max(), params)).sqrt()
}

/// Radial specialization of [`char_speed_bound`]; the eigenvalues of
/// F A F^T are F_r^2 A_r and F_t^2 A_t exactly.
pub fn char_speed_bound_radial<S: Real>(p: &RadialPointState<S>, params: &Parameters<S>) -> S {
    let lmax = (p.f_r * p.f_r * p.a_r).max(p.f_t * p.f_t * p.a_t);
    let cs2 = params.a * params.gamma * p.rho.powf(params.gamma - S::one());
    p.u.abs() + (cs2 + elastic_speed_sq(lmax, params)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    type P = Parameters<f64>;

    fn params(a: f64, gamma: f64, lambda: f64, mu0: f64) -> P {
        Parameters::new(a, gamma, lambda, mu0).unwrap()
    }

    fn default_params() -> P {
        params(1.0, 1.4, 1.0, 1.0)
    }

    #[test]
    fn parameter_validation() {
        assert!(Parameters::new(0.0, 1.4, 1.0, 1.0).is_err());
        assert!(Parameters::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Parameters::new(1.0, 1.4, -1.0, 1.0).is_err());
        assert!(Parameters::new(1.0, 1.4, 1.0, 0.0).is_err());
        let p = params(1.0, 1.4, 2.0, 1.0);
        assert_eq!(p.g * p.lambda, p.mu0);
        assert_eq!(p.rho_bar, 1.0);
    }

    #[test]
    fn p0_values() {
        let p = default_params();
        assert_eq!(eval_p0(1.0, &p).unwrap(), p.a);
        let p2 = params(1.0, 2.0, 1.0, 1.0);
        assert_eq!(eval_p0(2.0, &p2).unwrap(), 4.0);
        assert_eq!(eval_p0(0.0, &p).unwrap(), 0.0);
        assert!(eval_p0(-1.0, &p).is_err());
    }

    #[test]
    fn stress_background_is_zero() {
        let p = default_params();
        let t = eval_stress(&PointState::background(), &p);
        assert_eq!(t.0, Mat3::zero());
    }

    #[test]
    fn stress_uniaxial_stretch() {
        // rho=1, G=1, F=diag(2,1,1), A=I -> F A F^T = diag(4,1,1), T = diag(3,0,0)
        let p = params(1.0, 1.4, 1.0, 1.0);
        let st = PointState {
            rho: 1.0,
            u: [0.0; 3],
            a: Mat3::identity(),
            f: Mat3::diag(2.0, 1.0, 1.0),
        };
        let t = eval_stress(&st, &p).0;
        assert_eq!(t, Mat3::diag(3.0, 0.0, 0.0));
    }

    fn random_state(rng: &mut impl Rng) -> PointState<f64> {
        // SPD A = M M^T + eps I, well-conditioned invertible F = I + small
        let mut m = Mat3::zero();
        let mut f = Mat3::identity();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = rng.gen_range(-1.0..1.0);
                f.0[i][j] += rng.gen_range(-0.3..0.3);
            }
        }
        let a = m.mul(&m.transpose()).add(&Mat3::identity().scale(0.5));
        PointState {
            rho: rng.gen_range(0.5..2.0),
            u: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            a,
            f,
        }
    }

    #[test]
    fn stress_trace_matches_direct_product() {
        let p = default_params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let st = random_state(&mut rng);
            let t = eval_stress(&st, &p).0;
            assert!(t.is_symmetric(1e-14));
            let faft = st.f.mul(&st.a).mul(&st.f.transpose());
            let want = st.rho * p.g * (faft.trace() - 3.0);
            assert!((t.trace() - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn conformation_roundtrip() {
        let p = default_params();
        // T=0, F=I, rho=1 -> A=I
        let a = conformation_from_stress(&StressTensor(Mat3::zero()), 1.0, &Mat3::identity(), &p)
            .unwrap();
        assert_eq!(a, Mat3::identity());
        // inverse of the uniaxial example
        let a2 = conformation_from_stress(
            &StressTensor(Mat3::diag(3.0, 0.0, 0.0)),
            1.0,
            &Mat3::diag(2.0, 1.0, 1.0),
            &p,
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a2.0[i][j] - want).abs() < 1e-15);
            }
        }
        // singular F rejected
        let err = conformation_from_stress(
            &StressTensor(Mat3::zero()),
            1.0,
            &Mat3::diag(1.0, 1.0, 0.0),
            &p,
        );
        assert!(err.is_err());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let st = random_state(&mut rng);
            let t = eval_stress(&st, &p);
            let a = conformation_from_stress(&t, st.rho, &st.f, &p).unwrap();
            let t2 = eval_stress(&PointState { a, ..st }, &p);
            let scale = 1.0 + t.0.frobenius_norm();
            assert!(t.0.sub(&t2.0).frobenius_norm() <= 1e-12 * scale);
            let a_err = a.sub(&st.a).frobenius_norm();
            assert!(a_err <= 1e-12 * (1.0 + st.a.frobenius_norm()));
        }
    }

    #[test]
    fn energy_integrand_values() {
        let p = default_params();
        assert_eq!(energy_integrand(&PointState::background(), &p).unwrap(), 0.0);
        let moving = PointState {
            u: [1.0, 0.0, 0.0],
            ..PointState::background()
        };
        assert!((energy_integrand(&moving, &p).unwrap() - 0.5).abs() < 1e-15);
        // rho=2, u=0, T=0 requires F A F^T = I: take A = I/4, F = diag(2,2,2)? No:
        // F=2I, A=I/4 gives F A F^T = I. a=1, gamma=2, mu0=lambda=1.
        let p2 = params(1.0, 2.0, 1.0, 1.0);
        let st = PointState {
            rho: 2.0,
            u: [0.0; 3],
            a: Mat3::identity().scale(0.25),
            f: Mat3::identity().scale(2.0),
        };
        let want = (4.0 - 1.0 - 2.0) + (2.0 * 2.0f64.ln() - 1.0);
        assert!((energy_integrand(&st, &p2).unwrap() - want).abs() < 1e-14);
        let bad = PointState { rho: 0.0, ..PointState::background() };
        assert!(energy_integrand(&bad, &p).is_err());
    }

    proptest! {
        #[test]
        fn potentials_are_nonnegative(rho in 1e-6f64..100.0, gamma in 1.01f64..3.0) {
            let p = params(1.0, gamma, 1.0, 1.0);
            prop_assert!(pressure_potential(rho, &p) >= -1e-13);
            prop_assert!(viscous_potential(rho, &p) >= -1e-13);
        }

        #[test]
        fn p0_monotone(r1 in 0.01f64..50.0, dr in 0.01f64..10.0) {
            let p = default_params();
            prop_assert!(eval_p0(r1 + dr, &p).unwrap() > eval_p0(r1, &p).unwrap());
        }
    }

    #[test]
    fn char_speed_background_dominates_longitudinal() {
        let p = params(1.0, 1.4, 1.0, 1.0); // G = 1
        let bound = char_speed_bound(&PointState::background(), &p);
        assert!(bound >= (1.4f64 + 2.0).sqrt() - 1e-14);
        // Galilean shift adds exactly |s|
        let s = 0.7;
        let shifted = PointState {
            u: [s, 0.0, 0.0],
            ..PointState::background()
        };
        let b2 = char_speed_bound(&shifted, &p);
        assert!((b2 - bound - s).abs() < 1e-14);
    }

    #[test]
    fn char_speed_monotone_in_conformation() {
        let p = default_params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let st = random_state(&mut rng);
            let doubled = PointState {
                a: st.a.scale(2.0),
                ..st
            };
            assert!(char_speed_bound(&doubled, &p) >= char_speed_bound(&st, &p) - 1e-13);
            let denser = PointState { rho: st.rho * 1.5, ..st };
            assert!(char_speed_bound(&denser, &p) >= char_speed_bound(&st, &p) - 1e-13);
        }
    }

    #[test]
    fn radial_embedding_consistency() {
        let p = default_params();
        let rp = RadialPointState {
            rho: 1.3,
            u: 0.4,
            a_r: 1.2,
            a_t: 0.9,
            f_r: 1.1,
            f_t: 0.95,
        };
        let e_r = [1.0 / 3.0f64.sqrt(); 3];
        let st = rp.to_point(e_r);
        let t = eval_stress(&st, &p).0;
        let (t_rr, t_t) = radial_stress(&rp, &p);
        assert!((t.trace() - (t_rr + 2.0 * t_t)).abs() < 1e-13);
        assert!(
            (char_speed_bound(&st, &p) - char_speed_bound_radial(&rp, &p)).abs() < 1e-12
        );
        assert!(
            (energy_integrand(&st, &p).unwrap() - energy_integrand_radial(&rp, &p)).abs() < 1e-13
        );
    }
}
