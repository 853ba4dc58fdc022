//! Spherically symmetric finite-volume solver.
//!
//! The reduced system, for u = u(r) e_r and frame-diagonal tensors
//! diag(X_r, X_t, X_t) (so grad u = diag(u_r, u/r, u/r)):
//!
//!   rho_t + (1/r^2) (r^2 rho u)_r = 0
//!   rho (u_t + u u_r) + (p0 - T_rr)_r = (2/r)(T_rr - T_t)
//!   lambda (A_r)_t + lambda u (A_r)_r + A_r = F_r^{-2}
//!   lambda (A_t)_t + lambda u (A_t)_r + A_t = F_t^{-2}
//!   (F_r)_t + u (F_r)_r = u_r F_r
//!   (F_t)_t + u (F_t)_r = (u/r) F_t
//!
//! with T_rr = rho G (F_r^2 A_r - 1) and T_t = rho G (F_t^2 A_t - 1).
//!
//! Discretization: MUSCL reconstruction with minmod limiting; the mass
//! equation in conservative flux form (discrete mass is conserved to
//! round-off), the rest in advective form with upwind-selected face
//! values, centered face averages for the stress/pressure gradient, and
//! local Lax-Friedrichs dissipation built from the reconstructed face
//! jumps. Two-stage SSP Runge-Kutta in time. Ghost cells at r = 0 by
//! even/odd reflection, fixed background Dirichlet at the outer boundary.

use crate::grid::RadialGrid;
use crate::initial_data::InitialData;
use crate::model::{char_speed_bound_radial, eval_p0, radial_stress, Parameters, RadialPointState};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("grid outer radius {r_max} < required {required} (support + sigma_est * t_end)")]
    DomainTooSmall { r_max: f64, required: f64 },
    #[error("cfl number must be in (0, 1], got {0}")]
    BadCfl(f64),
    #[error("non-finite characteristic speed")]
    NonFiniteSpeed,
}

/// Why a step refused to advance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BreakdownReason {
    /// a positive field dropped below the configured floor
    PositivityLoss { field: String, r: f64 },
    /// the stable timestep collapsed below the floor
    CflCollapse,
    /// sup |du/dr| exceeded the configured multiple of its initial value
    GradientThreshold,
    /// a non-finite value appeared
    NonFinite,
}

impl std::fmt::Display for BreakdownReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BreakdownReason::PositivityLoss { field, r } => {
                write!(f, "positivity loss in {field} at r = {r}")
            }
            BreakdownReason::CflCollapse => write!(f, "timestep collapse"),
            BreakdownReason::GradientThreshold => write!(f, "gradient threshold reached"),
            BreakdownReason::NonFinite => write!(f, "non-finite value"),
        }
    }
}

/// One time step either advances the state or reports breakdown.
#[derive(Debug)]
pub enum StepOutcome<S> {
    Advanced(RadialState<S>),
    Breakdown { reason: BreakdownReason, time: S },
}

/// Scheme configuration with the breakdown thresholds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SchemeConfig<S> {
    pub cfl: S,
    /// optional cap on dt (used by the relaxation test mode)
    pub max_dt: Option<S>,
    /// breakdown when sup |du/dr| exceeds this multiple of its initial value
    pub grad_threshold_factor: S,
    pub positivity_floor: S,
    /// dt floor, as a multiple of dr
    pub dt_floor_factor: S,
    /// test mode: hold u at zero (pure relaxation dynamics)
    pub pin_velocity: bool,
    /// carry the independently evolved stress (T-form) alongside
    pub track_t_form: bool,
}

impl<S: Real> Default for SchemeConfig<S> {
    fn default() -> Self {
        SchemeConfig {
            cfl: S::of(0.4),
            max_dt: None,
            grad_threshold_factor: S::of(1e3),
            positivity_floor: S::of(1e-10),
            dt_floor_factor: S::of(1e-12),
            pin_velocity: false,
            track_t_form: false,
        }
    }
}

/// Grid functions of the radial state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialState<S> {
    pub grid: RadialGrid<S>,
    pub t: S,
    pub rho: Vec<S>,
    pub u: Vec<S>,
    pub a_r: Vec<S>,
    pub a_t: Vec<S>,
    pub f_r: Vec<S>,
    pub f_t: Vec<S>,
    /// independently evolved stress eigenvalues (dual-path check)
    pub t_rr: Option<Vec<S>>,
    pub t_t: Option<Vec<S>>,
}

impl<S: Real> RadialState<S> {
    pub fn background(grid: RadialGrid<S>) -> Self {
        let n = grid.n_cells;
        RadialState {
            grid,
            t: S::zero(),
            rho: vec![S::one(); n],
            u: vec![S::zero(); n],
            a_r: vec![S::one(); n],
            a_t: vec![S::one(); n],
            f_r: vec![S::one(); n],
            f_t: vec![S::one(); n],
            t_rr: None,
            t_t: None,
        }
    }

    pub fn from_initial_data(data: &InitialData<S>, params: &Parameters<S>, track_t_form: bool) -> Self {
        let n = data.grid.n_cells;
        let mut st = RadialState {
            grid: data.grid,
            t: S::zero(),
            rho: data.rho0.clone(),
            u: data.u0.clone(),
            a_r: data.a0_r.clone(),
            a_t: data.a0_t.clone(),
            f_r: data.f0_r.clone(),
            f_t: data.f0_t.clone(),
            t_rr: None,
            t_t: None,
        };
        if track_t_form {
            let mut t_rr = vec![S::zero(); n];
            let mut t_t = vec![S::zero(); n];
            for i in 0..n {
                let (rr, tt) = radial_stress(&st.point(i), params);
                t_rr[i] = rr;
                t_t[i] = tt;
            }
            st.t_rr = Some(t_rr);
            st.t_t = Some(t_t);
        }
        st
    }

    pub fn point(&self, i: usize) -> RadialPointState<S> {
        RadialPointState {
            rho: self.rho[i],
            u: self.u[i],
            a_r: self.a_r[i],
            a_t: self.a_t[i],
            f_r: self.f_r[i],
            f_t: self.f_t[i],
        }
    }

    /// sup |du/dr| by central differences (one-sided at the ends).
    pub fn sup_grad_u(&self) -> S {
        let n = self.grid.n_cells;
        let two_dr = S::of(2.0) * self.grid.dr;
        let mut m = S::zero();
        for i in 0..n {
            let g = if i == 0 {
                // odd reflection: u_{-1} = -u_0
                (self.u[1] + self.u[0]) / two_dr
            } else if i == n - 1 {
                (self.u[i] - self.u[i - 1]) / self.grid.dr
            } else {
                (self.u[i + 1] - self.u[i - 1]) / two_dr
            };
            m = m.max(g.abs());
        }
        m
    }

    /// Largest cell-center radius where any field deviates from the
    /// background by more than `tol` (0 when none does).
    pub fn support_radius(&self, tol: S) -> S {
        let one = S::one();
        for i in (0..self.grid.n_cells).rev() {
            let dev = (self.rho[i] - one)
                .abs()
                .max(self.u[i].abs())
                .max((self.a_r[i] - one).abs())
                .max((self.a_t[i] - one).abs())
                .max((self.f_r[i] - one).abs())
                .max((self.f_t[i] - one).abs());
            if dev > tol {
                return self.grid.r_center(i);
            }
        }
        S::zero()
    }
}

/// Time derivatives of all evolved grid functions.
#[derive(Debug, Clone)]
pub struct RadialRhs<S> {
    pub rho: Vec<S>,
    pub u: Vec<S>,
    pub a_r: Vec<S>,
    pub a_t: Vec<S>,
    pub f_r: Vec<S>,
    pub f_t: Vec<S>,
    pub t_rr: Option<Vec<S>>,
    pub t_t: Option<Vec<S>>,
}

fn minmod<S: Real>(a: S, b: S) -> S {
    if a * b <= S::zero() {
        S::zero()
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Extended array with 2 ghost cells on each side: even or odd reflection
/// through r = 0, fixed background value outside.
fn extend<S: Real>(q: &[S], odd: bool, background: S) -> Vec<S> {
    let n = q.len();
    let mut e = Vec::with_capacity(n + 4);
    let sign = if odd { -S::one() } else { S::one() };
    e.push(sign * q[1]);
    e.push(sign * q[0]);
    e.extend_from_slice(q);
    e.push(background);
    e.push(background);
    e
}

fn slopes<S: Real>(e: &[S]) -> Vec<S> {
    // slope for extended cells 1..len-1
    let mut s = vec![S::zero(); e.len()];
    for i in 1..e.len() - 1 {
        s[i] = minmod(e[i] - e[i - 1], e[i + 1] - e[i]);
    }
    s
}

struct FaceData<S> {
    left: Vec<S>,
    right: Vec<S>,
}

fn reconstruct<S: Real>(e: &[S], s: &[S], n_faces: usize) -> FaceData<S> {
    // face f lies between extended cells f+1 and f+2
    let half = S::of(0.5);
    let mut left = Vec::with_capacity(n_faces);
    let mut right = Vec::with_capacity(n_faces);
    for f in 0..n_faces {
        left.push(e[f + 1] + half * s[f + 1]);
        right.push(e[f + 2] - half * s[f + 2]);
    }
    FaceData { left, right }
}

fn check_positivity<S: Real>(
    state: &RadialState<S>,
    floor: S,
) -> Result<(), BreakdownReason> {
    let fields: [(&str, &Vec<S>); 5] = [
        ("rho", &state.rho),
        ("a_r", &state.a_r),
        ("a_t", &state.a_t),
        ("f_r", &state.f_r),
        ("f_t", &state.f_t),
    ];
    for (name, v) in fields {
        for (i, x) in v.iter().enumerate() {
            if !x.is_finite() {
                return Err(BreakdownReason::NonFinite);
            }
            if *x <= floor {
                return Err(BreakdownReason::PositivityLoss {
                    field: name.to_string(),
                    r: state.grid.r_center(i).to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    if state.u.iter().any(|x| !x.is_finite()) {
        return Err(BreakdownReason::NonFinite);
    }
    Ok(())
}

/// Semi-discrete right-hand side of the reduced system.
pub fn rhs_radial<S: Real>(
    state: &RadialState<S>,
    params: &Parameters<S>,
    pin_velocity: bool,
) -> Result<RadialRhs<S>, BreakdownReason> {
    check_positivity(state, S::zero())?;
    let n = state.grid.n_cells;
    let dr = state.grid.dr;
    let half = S::of(0.5);
    let two = S::of(2.0);
    let n_faces = n + 1;

    let track = state.t_rr.is_some();

    let e_rho = extend(&state.rho, false, S::one());
    let e_u = extend(&state.u, true, S::zero());
    let e_ar = extend(&state.a_r, false, S::one());
    let e_at = extend(&state.a_t, false, S::one());
    let e_fr = extend(&state.f_r, false, S::one());
    let e_ft = extend(&state.f_t, false, S::one());
    let (e_trr, e_tt) = if track {
        (
            Some(extend(state.t_rr.as_ref().unwrap(), false, S::zero())),
            Some(extend(state.t_t.as_ref().unwrap(), false, S::zero())),
        )
    } else {
        (None, None)
    };

    let r_rho = reconstruct(&e_rho, &slopes(&e_rho), n_faces);
    let r_u = reconstruct(&e_u, &slopes(&e_u), n_faces);
    let r_ar = reconstruct(&e_ar, &slopes(&e_ar), n_faces);
    let r_at = reconstruct(&e_at, &slopes(&e_at), n_faces);
    let r_fr = reconstruct(&e_fr, &slopes(&e_fr), n_faces);
    let r_ft = reconstruct(&e_ft, &slopes(&e_ft), n_faces);
    let r_trr = e_trr.as_ref().map(|e| reconstruct(e, &slopes(e), n_faces));
    let r_tt = e_tt.as_ref().map(|e| reconstruct(e, &slopes(e), n_faces));

    // per-face quantities
    let mut flux_mass = vec![S::zero(); n_faces];
    let mut alpha = vec![S::zero(); n_faces];
    let mut u_bar = vec![S::zero(); n_faces]; // centered face velocity
    let mut pi_bar = vec![S::zero(); n_faces]; // centered p0 - T_rr
    let mut up_u = vec![S::zero(); n_faces]; // upwind-selected face values
    let mut up_ar = vec![S::zero(); n_faces];
    let mut up_at = vec![S::zero(); n_faces];
    let mut up_fr = vec![S::zero(); n_faces];
    let mut up_ft = vec![S::zero(); n_faces];
    let mut up_trr = vec![S::zero(); n_faces];
    let mut up_tt = vec![S::zero(); n_faces];

    let upsel = |uf: S, l: S, r: S| {
        if uf > S::zero() {
            l
        } else if uf < S::zero() {
            r
        } else {
            half * (l + r)
        }
    };

    for f in 0..n_faces {
        let pl = RadialPointState {
            rho: r_rho.left[f],
            u: r_u.left[f],
            a_r: r_ar.left[f],
            a_t: r_at.left[f],
            f_r: r_fr.left[f],
            f_t: r_ft.left[f],
        };
        let pr = RadialPointState {
            rho: r_rho.right[f],
            u: r_u.right[f],
            a_r: r_ar.right[f],
            a_t: r_at.right[f],
            f_r: r_fr.right[f],
            f_t: r_ft.right[f],
        };
        if pl.rho <= S::zero() || pr.rho <= S::zero() {
            return Err(BreakdownReason::PositivityLoss {
                field: "rho (face reconstruction)".into(),
                r: state.grid.r_face(f).to_f64().unwrap_or(f64::NAN),
            });
        }
        let a = char_speed_bound_radial(&pl, params).max(char_speed_bound_radial(&pr, params));
        if !a.is_finite() {
            return Err(BreakdownReason::NonFinite);
        }
        // pinned velocity freezes all transport, so the interface
        // dissipation goes too: the remaining dynamics are the exact
        // per-cell relaxation ODEs
        alpha[f] = if pin_velocity { S::zero() } else { a };
        let a = alpha[f];
        let uf = half * (pl.u + pr.u);
        u_bar[f] = uf;
        let r_f = state.grid.r_face(f);
        flux_mass[f] =
            r_f * r_f * (half * (pl.rho * pl.u + pr.rho * pr.u) - half * a * (pr.rho - pl.rho));
        let (t_rr_l, _) = radial_stress(&pl, params);
        let (t_rr_r, _) = radial_stress(&pr, params);
        let pi_l = eval_p0(pl.rho, params).map_err(|_| BreakdownReason::NonFinite)? - t_rr_l;
        let pi_r = eval_p0(pr.rho, params).map_err(|_| BreakdownReason::NonFinite)? - t_rr_r;
        pi_bar[f] = half * (pi_l + pi_r);
        up_u[f] = upsel(uf, pl.u, pr.u);
        up_ar[f] = upsel(uf, pl.a_r, pr.a_r);
        up_at[f] = upsel(uf, pl.a_t, pr.a_t);
        up_fr[f] = upsel(uf, pl.f_r, pr.f_r);
        up_ft[f] = upsel(uf, pl.f_t, pr.f_t);
        if let (Some(rt), Some(tt)) = (&r_trr, &r_tt) {
            up_trr[f] = upsel(uf, rt.left[f], rt.right[f]);
            up_tt[f] = upsel(uf, tt.left[f], tt.right[f]);
        }
    }

    // local Lax-Friedrichs dissipation from the reconstructed face jumps
    let diss = |get_l: &dyn Fn(usize) -> S, get_r: &dyn Fn(usize) -> S, i: usize| {
        let jl = alpha[i] * (get_r(i) - get_l(i));
        let jr = alpha[i + 1] * (get_r(i + 1) - get_l(i + 1));
        (jr - jl) / (two * dr)
    };

    let third = S::of(1.0 / 3.0);
    let mut d_rho = vec![S::zero(); n];
    let mut d_u = vec![S::zero(); n];
    let mut d_ar = vec![S::zero(); n];
    let mut d_at = vec![S::zero(); n];
    let mut d_fr = vec![S::zero(); n];
    let mut d_ft = vec![S::zero(); n];
    let mut d_trr = if track { Some(vec![S::zero(); n]) } else { None };
    let mut d_tt = if track { Some(vec![S::zero(); n]) } else { None };

    for i in 0..n {
        let r_i = state.grid.r_center(i);
        let rm = state.grid.r_face(i);
        let rp = state.grid.r_face(i + 1);
        let vol = third * (rp * rp * rp - rm * rm * rm);
        d_rho[i] = -(flux_mass[i + 1] - flux_mass[i]) / vol;

        let p = state.point(i);
        let (t_rr_c, t_t_c) = radial_stress(&p, params);
        // advective derivative (upwind faces) and centered u_r
        let adv = |up: &Vec<S>| p.u * (up[i + 1] - up[i]) / dr;
        let u_r_c = (u_bar[i + 1] - u_bar[i]) / dr;

        if pin_velocity {
            d_u[i] = S::zero();
        } else {
            d_u[i] = -adv(&up_u)
                - (pi_bar[i + 1] - pi_bar[i]) / (dr * p.rho)
                + two * (t_rr_c - t_t_c) / (p.rho * r_i)
                + diss(&|f| r_u.left[f], &|f| r_u.right[f], i);
        }
        d_ar[i] = -adv(&up_ar)
            + (S::one() / (p.f_r * p.f_r) - p.a_r) / params.lambda
            + diss(&|f| r_ar.left[f], &|f| r_ar.right[f], i);
        d_at[i] = -adv(&up_at)
            + (S::one() / (p.f_t * p.f_t) - p.a_t) / params.lambda
            + diss(&|f| r_at.left[f], &|f| r_at.right[f], i);
        d_fr[i] = -adv(&up_fr)
            + u_r_c * p.f_r
            + diss(&|f| r_fr.left[f], &|f| r_fr.right[f], i);
        d_ft[i] = -adv(&up_ft)
            + (p.u / r_i) * p.f_t
            + diss(&|f| r_ft.left[f], &|f| r_ft.right[f], i);

        if track {
            let trr = state.t_rr.as_ref().unwrap()[i];
            let tt = state.t_t.as_ref().unwrap()[i];
            let rt = r_trr.as_ref().unwrap();
            let rtt = r_tt.as_ref().unwrap();
            let g = params.g;
            d_trr.as_mut().unwrap()[i] = -p.u * (up_trr[i + 1] - up_trr[i]) / dr
                + (u_r_c - two * p.u / r_i) * trr
                - trr / params.lambda
                + two * g * p.rho * u_r_c
                + diss(&|f| rt.left[f], &|f| rt.right[f], i);
            d_tt.as_mut().unwrap()[i] = -p.u * (up_tt[i + 1] - up_tt[i]) / dr
                - u_r_c * tt
                - tt / params.lambda
                + two * g * p.rho * (p.u / r_i)
                + diss(&|f| rtt.left[f], &|f| rtt.right[f], i);
        }
    }

    Ok(RadialRhs {
        rho: d_rho,
        u: d_u,
        a_r: d_ar,
        a_t: d_at,
        f_r: d_fr,
        f_t: d_ft,
        t_rr: d_trr,
        t_t: d_tt,
    })
}

/// Time derivatives of the independently evolved stress eigenvalues
/// (the T-form path of the constitutive equivalence check). When the
/// state does not yet carry stress arrays they are initialized from the
/// (rho, A, F) reconstruction.
pub fn evolve_t_form<S: Real>(
    state: &RadialState<S>,
    params: &Parameters<S>,
) -> Result<(Vec<S>, Vec<S>), BreakdownReason> {
    let mut st = state.clone();
    if st.t_rr.is_none() {
        let n = st.grid.n_cells;
        let mut t_rr = vec![S::zero(); n];
        let mut t_t = vec![S::zero(); n];
        for i in 0..n {
            let (rr, tt) = radial_stress(&st.point(i), params);
            t_rr[i] = rr;
            t_t[i] = tt;
        }
        st.t_rr = Some(t_rr);
        st.t_t = Some(t_t);
    }
    let rhs = rhs_radial(&st, params, false)?;
    Ok((rhs.t_rr.unwrap(), rhs.t_t.unwrap()))
}

/// Stable timestep: cfl * dr / max characteristic speed bound.
pub fn cfl_dt<S: Real>(
    state: &RadialState<S>,
    params: &Parameters<S>,
    cfl: S,
) -> Result<S, SolverError> {
    if !(cfl > S::zero()) || cfl > S::one() {
        return Err(SolverError::BadCfl(cfl.to_f64().unwrap_or(f64::NAN)));
    }
    let mut smax = S::zero();
    for i in 0..state.grid.n_cells {
        let b = char_speed_bound_radial(&state.point(i), params);
        if !b.is_finite() {
            return Err(SolverError::NonFiniteSpeed);
        }
        smax = smax.max(b);
    }
    Ok(cfl * state.grid.dr / smax)
}

fn axpy<S: Real>(y: &mut [S], a: S, x: &[S]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi = *yi + a * *xi;
    }
}

fn blend<S: Real>(out: &mut [S], w_old: S, old: &[S], w_new: S) {
    for (o, prev) in out.iter_mut().zip(old.iter()) {
        *o = w_old * *prev + w_new * *o;
    }
}

fn apply_rhs<S: Real>(state: &mut RadialState<S>, rhs: &RadialRhs<S>, dt: S) {
    axpy(&mut state.rho, dt, &rhs.rho);
    axpy(&mut state.u, dt, &rhs.u);
    axpy(&mut state.a_r, dt, &rhs.a_r);
    axpy(&mut state.a_t, dt, &rhs.a_t);
    axpy(&mut state.f_r, dt, &rhs.f_r);
    axpy(&mut state.f_t, dt, &rhs.f_t);
    if let (Some(t_rr), Some(d)) = (state.t_rr.as_mut(), rhs.t_rr.as_ref()) {
        axpy(t_rr, dt, d);
    }
    if let (Some(t_t), Some(d)) = (state.t_t.as_mut(), rhs.t_t.as_ref()) {
        axpy(t_t, dt, d);
    }
}

fn blend_state<S: Real>(stage: &mut RadialState<S>, old: &RadialState<S>, w_old: S, w_new: S) {
    blend(&mut stage.rho, w_old, &old.rho, w_new);
    blend(&mut stage.u, w_old, &old.u, w_new);
    blend(&mut stage.a_r, w_old, &old.a_r, w_new);
    blend(&mut stage.a_t, w_old, &old.a_t, w_new);
    blend(&mut stage.f_r, w_old, &old.f_r, w_new);
    blend(&mut stage.f_t, w_old, &old.f_t, w_new);
    if let (Some(s), Some(o)) = (stage.t_rr.as_mut(), old.t_rr.as_ref()) {
        blend(s, w_old, o, w_new);
    }
    if let (Some(s), Some(o)) = (stage.t_t.as_mut(), old.t_t.as_ref()) {
        blend(s, w_old, o, w_new);
    }
}

/// One SSP two-stage step (Heun). `dt` is chosen internally from the CFL
/// condition unless capped by the config.
pub fn step<S: Real>(
    state: &RadialState<S>,
    params: &Parameters<S>,
    cfg: &SchemeConfig<S>,
) -> StepOutcome<S> {
    let dt = match cfl_dt(state, params, cfg.cfl) {
        Ok(dt) => match cfg.max_dt {
            Some(cap) => dt.min(cap),
            None => dt,
        },
        Err(_) => {
            return StepOutcome::Breakdown {
                reason: BreakdownReason::NonFinite,
                time: state.t,
            }
        }
    };
    step_with_dt(state, params, cfg, dt)
}

/// One SSP two-stage step with an externally chosen dt.
pub fn step_with_dt<S: Real>(
    state: &RadialState<S>,
    params: &Parameters<S>,
    cfg: &SchemeConfig<S>,
    dt: S,
) -> StepOutcome<S> {
    if dt < cfg.dt_floor_factor * state.grid.dr {
        return StepOutcome::Breakdown {
            reason: BreakdownReason::CflCollapse,
            time: state.t,
        };
    }
    let half = S::of(0.5);
    let rhs1 = match rhs_radial(state, params, cfg.pin_velocity) {
        Ok(r) => r,
        Err(reason) => return StepOutcome::Breakdown { reason, time: state.t },
    };
    let mut stage = state.clone();
    apply_rhs(&mut stage, &rhs1, dt);
    if let Err(reason) = check_positivity(&stage, cfg.positivity_floor) {
        return StepOutcome::Breakdown { reason, time: state.t };
    }
    let rhs2 = match rhs_radial(&stage, params, cfg.pin_velocity) {
        Ok(r) => r,
        Err(reason) => return StepOutcome::Breakdown { reason, time: state.t },
    };
    apply_rhs(&mut stage, &rhs2, dt);
    blend_state(&mut stage, state, half, half);
    stage.t = state.t + dt;
    if let Err(reason) = check_positivity(&stage, cfg.positivity_floor) {
        return StepOutcome::Breakdown { reason, time: state.t };
    }
    StepOutcome::Advanced(stage)
}

/// Full-run configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RunSetup<S> {
    pub scheme: SchemeConfig<S>,
    pub t_end: S,
    pub output_interval: S,
    pub sigma_est: S,
}

/// Terminal status of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RunOutcome<S> {
    Completed { t: S },
    Breakdown { reason: BreakdownReason, time: S },
}

#[derive(Debug)]
pub struct RunResult<S> {
    pub records: Vec<crate::diagnostics::DiagnosticsRecord<S>>,
    pub outcome: RunOutcome<S>,
    pub final_state: RadialState<S>,
    pub steps: usize,
}

/// March from the initial data to `t_end`, breakdown, or the gradient
/// threshold, emitting diagnostics every `output_interval`.
pub fn run<S: Real>(
    data: &InitialData<S>,
    params: &Parameters<S>,
    setup: &RunSetup<S>,
) -> Result<RunResult<S>, SolverError> {
    let required = data.r_support + setup.sigma_est * setup.t_end;
    if data.grid.r_max() < required {
        return Err(SolverError::DomainTooSmall {
            r_max: data.grid.r_max().to_f64().unwrap(),
            required: required.to_f64().unwrap(),
        });
    }
    let mut state = RadialState::from_initial_data(data, params, setup.scheme.track_t_form);
    let grad0 = state.sup_grad_u();
    let grad_cap = if grad0 > S::zero() {
        Some(setup.scheme.grad_threshold_factor * grad0)
    } else {
        None
    };

    let mut records = Vec::new();
    records.push(crate::diagnostics::observe(&state, params, setup.sigma_est, data.r_support));
    let mut next_output = setup.output_interval;
    let mut steps = 0usize;
    let outcome = loop {
        // treat a remainder at round-off scale as arrival
        if state.t >= setup.t_end - S::of(1e-12) * setup.t_end {
            break RunOutcome::Completed { t: state.t };
        }
        let dt_cfl = match cfl_dt(&state, params, setup.scheme.cfl) {
            Ok(dt) => dt,
            Err(_) => {
                break RunOutcome::Breakdown {
                    reason: BreakdownReason::NonFinite,
                    time: state.t,
                }
            }
        };
        let mut dt = dt_cfl;
        if let Some(cap) = setup.scheme.max_dt {
            dt = dt.min(cap);
        }
        // land exactly on output times and t_end
        let t_stop = next_output.min(setup.t_end);
        if state.t + dt > t_stop {
            dt = t_stop - state.t;
        }
        match step_with_dt(&state, params, &setup.scheme, dt) {
            StepOutcome::Advanced(next) => {
                state = next;
                steps += 1;
            }
            StepOutcome::Breakdown { reason, time } => {
                records.push(crate::diagnostics::observe(
                    &state,
                    params,
                    setup.sigma_est,
                    data.r_support,
                ));
                break RunOutcome::Breakdown { reason, time };
            }
        }
        if let Some(cap) = grad_cap {
            if state.sup_grad_u() > cap {
                records.push(crate::diagnostics::observe(
                    &state,
                    params,
                    setup.sigma_est,
                    data.r_support,
                ));
                break RunOutcome::Breakdown {
                    reason: BreakdownReason::GradientThreshold,
                    time: state.t,
                };
            }
        }
        if state.t >= next_output - S::of(1e-12) * setup.output_interval {
            records.push(crate::diagnostics::observe(&state, params, setup.sigma_est, data.r_support));
            next_output = next_output + setup.output_interval;
        }
    };
    Ok(RunResult {
        records,
        outcome,
        final_state: state,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::quad_m;
    use crate::grid::RadialGrid;
    use crate::initial_data::InitialData;

    fn params() -> Parameters<f64> {
        Parameters::new(1.0, 1.4, 1.0, 1.0).unwrap()
    }

    fn pulse_data(n: usize, r_max: f64, center: f64, width: f64, amp: f64) -> InitialData<f64> {
        let grid = RadialGrid::new(n, r_max / n as f64);
        let mut rho0 = vec![1.0; n];
        let mut u0 = vec![0.0; n];
        for i in 0..n {
            let s: f64 = ((grid.r_center(i) - center) / width).powi(2);
            let bump = if s < 1.0 { (1.0 - 1.0 / (1.0 - s)).exp() } else { 0.0 };
            rho0[i] = 1.0 + amp * bump;
            u0[i] = amp * bump;
        }
        InitialData {
            grid,
            rho0,
            u0,
            a0_r: vec![1.0; n],
            a0_t: vec![1.0; n],
            f0_r: vec![1.0; n],
            f0_t: vec![1.0; n],
            r_support: center + width,
            m0: 0.0,
            h0: 0.0,
            w0: 0.0,
        }
    }

    #[test]
    fn background_is_exact_fixed_point() {
        let p = params();
        let mut st = RadialState::<f64>::background(RadialGrid::new(128, 0.05));
        let rhs = rhs_radial(&st, &p, false).unwrap();
        for i in 0..128 {
            assert_eq!(rhs.rho[i], 0.0);
            assert_eq!(rhs.u[i], 0.0);
            assert_eq!(rhs.a_r[i], 0.0);
            assert_eq!(rhs.f_t[i], 0.0);
        }
        let cfg = SchemeConfig::default();
        for _ in 0..50 {
            match step(&st, &p, &cfg) {
                StepOutcome::Advanced(next) => st = next,
                StepOutcome::Breakdown { .. } => panic!("background broke down"),
            }
        }
        assert!(st.rho.iter().all(|&r| r == 1.0));
        assert!(st.u.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn mass_is_conserved_to_roundoff() {
        let p = params();
        let data = pulse_data(512, 8.0, 3.0, 1.0, 0.2);
        let mut st = RadialState::from_initial_data(&data, &p, false);
        let m0 = quad_m(&st);
        let cfg = SchemeConfig::default();
        for _ in 0..40 {
            match step(&st, &p, &cfg) {
                StepOutcome::Advanced(next) => st = next,
                StepOutcome::Breakdown { .. } => panic!("pulse broke down"),
            }
        }
        let m1 = quad_m(&st);
        assert!(((m1 - m0) / m0).abs() < 1e-13, "drift {:e}", (m1 - m0) / m0);
    }

    #[test]
    fn uniform_conformation_relaxes_exponentially() {
        // u = 0 and spatially uniform A: pure relaxation, A - 1 decays as
        // exp(-t / lambda)
        let p = Parameters::new(1.0, 1.4, 0.5, 0.5).unwrap();
        let grid = RadialGrid::new(64, 0.1);
        let mut st = RadialState::<f64>::background(grid);
        let eps = 0.2;
        for i in 0..64 {
            st.a_r[i] = 1.0 + eps;
            st.a_t[i] = 1.0 + eps;
        }
        let cfg = SchemeConfig {
            max_dt: Some(1e-4),
            pin_velocity: true,
            ..SchemeConfig::default()
        };
        let t_end = 0.5;
        while st.t < t_end - 1e-12 {
            let dt = (t_end - st.t).min(1e-4);
            match step_with_dt(&st, &p, &cfg, dt) {
                StepOutcome::Advanced(next) => st = next,
                StepOutcome::Breakdown { .. } => panic!("relaxation broke down"),
            }
        }
        let want = 1.0 + eps * (-t_end / p.lambda).exp();
        // skip cells near the outer boundary, where the fixed background
        // ghost values diffuse in through the interface dissipation
        for i in 0..48 {
            assert!((st.a_r[i] - want).abs() < 1e-6, "a_r {} vs {}", st.a_r[i], want);
            assert!((st.a_t[i] - want).abs() < 1e-6);
        }
        // velocity stayed pinned
        assert!(st.u.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn cfl_dt_background_value() {
        let p = params();
        let st = RadialState::<f64>::background(RadialGrid::new(32, 0.25));
        let dt = cfl_dt(&st, &p, 0.4).unwrap();
        let c = (p.a * p.gamma + 2.0 * p.g).sqrt();
        assert!((dt - 0.4 * 0.25 / c).abs() < 1e-14);
        assert!(cfl_dt(&st, &p, 0.0).is_err());
        assert!(cfl_dt(&st, &p, 1.5).is_err());
    }

    #[test]
    fn small_pulse_travels_at_the_longitudinal_speed() {
        // tiny density bump centered at r0; its outgoing front moves at
        // roughly sqrt(a gamma + 2 G) in the linear regime
        let p = params();
        let n = 4096;
        let data = pulse_data(n, 40.0, 10.0, 1.0, 1e-3);
        let mut st = RadialState::from_initial_data(&data, &p, false);
        let cfg = SchemeConfig::default();
        let t_end = 5.0;
        loop {
            if st.t >= t_end {
                break;
            }
            let dt = cfl_dt(&st, &p, 0.4).unwrap().min(t_end - st.t);
            match step_with_dt(&st, &p, &cfg, dt) {
                StepOutcome::Advanced(next) => st = next,
                StepOutcome::Breakdown { .. } => panic!("pulse broke down"),
            }
        }
        // outgoing peak of |rho - 1| beyond the initial support
        let mut best = (0usize, 0.0f64);
        for i in 0..n {
            if st.grid.r_center(i) > 11.5 {
                let v = (st.rho[i] - 1.0).abs();
                if v > best.1 {
                    best = (i, v);
                }
            }
        }
        let speed = (st.grid.r_center(best.0) - 10.0) / t_end;
        let c = (p.a * p.gamma + 2.0 * p.g).sqrt();
        assert!(
            (speed - c).abs() / c < 0.05,
            "front speed {speed}, expected about {c}"
        );
    }

    #[test]
    fn run_emits_records_and_completes() {
        let p = params();
        let data = pulse_data(512, 16.0, 3.0, 1.0, 0.1);
        let setup = RunSetup {
            scheme: SchemeConfig::default(),
            t_end: 0.5,
            output_interval: 0.1,
            sigma_est: 6.0,
        };
        let result = run(&data, &p, &setup).unwrap();
        assert!(matches!(result.outcome, RunOutcome::Completed { .. }));
        assert_eq!(result.records.len(), 6);
        assert!((result.final_state.t - 0.5).abs() < 1e-12);
        // output times land exactly on the grid
        for (k, rec) in result.records.iter().enumerate() {
            assert!((rec.t - 0.1 * k as f64).abs() < 1e-9, "t = {}", rec.t);
        }
        // domain-size precondition
        let bad = RunSetup { t_end: 10.0, ..setup };
        assert!(run(&data, &p, &bad).is_err());
    }

    #[test]
    fn stress_paths_agree_initially() {
        // the independently evolved stress arrays start from the algebraic
        // stress, so both paths see identical derivatives at t = 0 for
        // uniform data
        let p = params();
        let grid = RadialGrid::new(64, 0.1);
        let st = RadialState::<f64>::background(grid);
        let (d_trr, d_tt) = evolve_t_form(&st, &p).unwrap();
        for i in 0..64 {
            assert_eq!(d_trr[i], 0.0);
            assert_eq!(d_tt[i], 0.0);
        }
    }
}
