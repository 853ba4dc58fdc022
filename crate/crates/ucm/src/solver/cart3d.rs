//! Low-order 3D Cartesian solver for the (rho, u, A, F) system on tiny
//! grids. First-order donor-cell convection, centered pressure/stress
//! divergence, local Lax-Friedrichs dissipation, forward Euler in time.
//! Used only as an independent oracle for the radial reduction.

use crate::initial_data::InitialData;
use crate::mat3::Mat3;
use crate::model::{Parameters, RadialPointState};
use crate::scalar::Real;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid size {0} exceeds the oracle cap of 64")]
    GridTooLarge(usize),
    #[error("breakdown in the {solver} solver at t = {t}")]
    Breakdown { solver: &'static str, t: f64 },
    #[error(transparent)]
    Radial(#[from] crate::solver::radial::SolverError),
}

/// n^3 grid of point states, stored as structure-of-arrays. The domain is
/// the cube [-n h / 2, n h / 2]^3 with cell centers off the origin.
#[derive(Debug, Clone)]
pub struct CartesianState<S> {
    pub n: usize,
    pub h: S,
    pub t: S,
    pub rho: Vec<S>,
    pub u: Vec<[S; 3]>,
    /// symmetric conformation, packed (xx, yy, zz, xy, xz, yz)
    pub a: Vec<[S; 6]>,
    /// deformation gradient, row-major
    pub f: Vec<[S; 9]>,
}

fn sym_to_mat<S: Real>(a: &[S; 6]) -> Mat3<S> {
    Mat3([[a[0], a[3], a[4]], [a[3], a[1], a[5]], [a[4], a[5], a[2]]])
}

fn mat_to_sym<S: Real>(m: &Mat3<S>) -> [S; 6] {
    [m.0[0][0], m.0[1][1], m.0[2][2], m.0[0][1], m.0[0][2], m.0[1][2]]
}

fn row_to_mat<S: Real>(f: &[S; 9]) -> Mat3<S> {
    Mat3([[f[0], f[1], f[2]], [f[3], f[4], f[5]], [f[6], f[7], f[8]]])
}

impl<S: Real> CartesianState<S> {
    pub fn coord(&self, i: usize, axis_index: usize) -> S {
        let _ = axis_index;
        (S::of(i as f64) + S::of(0.5) - S::of(self.n as f64) * S::of(0.5)) * self.h
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    /// Embed radial initial data: tensors diag(X_r, X_t, X_t) in the local
    /// spherical frame become X_t I + (X_r - X_t) e_r e_r^T.
    pub fn embed_radial(data: &InitialData<S>, params: &Parameters<S>, n: usize, h: S) -> Self {
        let _ = params;
        let ncell = n * n * n;
        let mut st = CartesianState {
            n,
            h,
            t: S::zero(),
            rho: vec![S::one(); ncell],
            u: vec![[S::zero(); 3]; ncell],
            a: vec![[S::one(), S::one(), S::one(), S::zero(), S::zero(), S::zero()]; ncell],
            f: vec![
                [
                    S::one(),
                    S::zero(),
                    S::zero(),
                    S::zero(),
                    S::one(),
                    S::zero(),
                    S::zero(),
                    S::zero(),
                    S::one(),
                ];
                ncell
            ],
        };
        let sample = |field: &[S], r: S| -> S {
            // linear interpolation at radius r on the radial grid of `data`
            let dr = data.grid.dr;
            let x = (r / dr - S::of(0.5)).max(S::zero());
            let i0 = x.floor().to_f64().unwrap() as usize;
            if i0 + 1 >= field.len() {
                return *field.last().unwrap();
            }
            let frac = x - S::of(i0 as f64);
            field[i0] + frac * (field[i0 + 1] - field[i0])
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = [st.coord(i, 0), st.coord(j, 1), st.coord(k, 2)];
                    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                    let c = st.idx(i, j, k);
                    if r >= data.grid.r_max() {
                        continue;
                    }
                    let e = [x[0] / r, x[1] / r, x[2] / r];
                    let p = RadialPointState {
                        rho: sample(&data.rho0, r),
                        u: sample(&data.u0, r),
                        a_r: sample(&data.a0_r, r),
                        a_t: sample(&data.a0_t, r),
                        f_r: sample(&data.f0_r, r),
                        f_t: sample(&data.f0_t, r),
                    };
                    let ps = p.to_point(e);
                    st.rho[c] = ps.rho;
                    st.u[c] = ps.u;
                    st.a[c] = mat_to_sym(&ps.a);
                    let fm = ps.f;
                    st.f[c] = [
                        fm.0[0][0], fm.0[0][1], fm.0[0][2], fm.0[1][0], fm.0[1][1], fm.0[1][2],
                        fm.0[2][0], fm.0[2][1], fm.0[2][2],
                    ];
                }
            }
        }
        st
    }

    pub fn total_mass(&self) -> S {
        let h3 = self.h * self.h * self.h;
        self.rho.iter().cloned().sum::<S>() * h3
    }

    fn cell_bound(&self, c: usize, params: &Parameters<S>) -> S {
        let u = self.u[c];
        let u_mag = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        let am = sym_to_mat(&self.a[c]);
        let fm = row_to_mat(&self.f[c]);
        let faft = fm.mul(&am).mul(&fm.transpose()).sym_part();
        let cs2 = params.a * params.gamma * self.rho[c].powf(params.gamma - S::one());
        u_mag + (cs2 + S::of(2.0) * params.g * faft.sym_eig_max().max(S::zero())).sqrt()
    }
}

type CellDeriv<S> = [S; 19]; // rho, u[3], a[6], f[9]

/// Semi-discrete right-hand side; returns per-cell derivatives or a
/// breakdown signal on positivity loss.
pub fn rhs_cart<S: Real>(
    state: &CartesianState<S>,
    params: &Parameters<S>,
) -> Result<Vec<CellDeriv<S>>, OracleError> {
    let n = state.n;
    let ncell = n * n * n;
    if state.rho.iter().any(|r| *r <= S::zero() || !r.is_finite()) {
        return Err(OracleError::Breakdown {
            solver: "cartesian",
            t: state.t.to_f64().unwrap_or(f64::NAN),
        });
    }

    // per-cell stress and speed bound
    let stress: Vec<[S; 6]> = (0..ncell)
        .into_par_iter()
        .map(|c| {
            let am = sym_to_mat(&state.a[c]);
            let fm = row_to_mat(&state.f[c]);
            let faft = fm.mul(&am).mul(&fm.transpose()).sym_part();
            let t = faft.sub(&Mat3::identity()).scale(state.rho[c] * params.g);
            mat_to_sym(&t)
        })
        .collect();
    let bound: Vec<S> = (0..ncell)
        .into_par_iter()
        .map(|c| state.cell_bound(c, params))
        .collect();

    let bg_a = [S::one(), S::one(), S::one(), S::zero(), S::zero(), S::zero()];
    let bg_f = [
        S::one(),
        S::zero(),
        S::zero(),
        S::zero(),
        S::one(),
        S::zero(),
        S::zero(),
        S::zero(),
        S::one(),
    ];

    let half = S::of(0.5);
    let inv_h = S::one() / state.h;
    let derivs: Vec<CellDeriv<S>> = (0..ncell)
        .into_par_iter()
        .map(|c| {
            let k = c % n;
            let j = (c / n) % n;
            let i = c / (n * n);
            // neighbor lookup with fixed background outside the box
            let nb = |di: i64, dj: i64, dk: i64| -> (S, [S; 3], [S; 6], [S; 9], [S; 6], S) {
                let (ii, jj, kk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                if ii < 0 || jj < 0 || kk < 0 || ii >= n as i64 || jj >= n as i64 || kk >= n as i64 {
                    let cs2 = params.a * params.gamma;
                    let bgb = (cs2 + S::of(2.0) * params.g).sqrt();
                    return (
                        S::one(),
                        [S::zero(); 3],
                        bg_a,
                        bg_f,
                        [S::zero(); 6],
                        bgb,
                    );
                }
                let cc = ((ii as usize) * n + jj as usize) * n + kk as usize;
                (
                    state.rho[cc],
                    state.u[cc],
                    state.a[cc],
                    state.f[cc],
                    stress[cc],
                    bound[cc],
                )
            };
            let here = nb(0, 0, 0);
            let (rho_c, u_c, a_c, f_c, _, b_c) = here;

            let mut d: CellDeriv<S> = [S::zero(); 19];
            let p0 = |rho: S| params.a * rho.powf(params.gamma);

            let dirs: [[i64; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
            for (dim, dv) in dirs.iter().enumerate() {
                let plus = nb(dv[0], dv[1], dv[2]);
                let minus = nb(-dv[0], -dv[1], -dv[2]);
                let (rho_p, u_p, a_p, f_p, t_p, b_p) = plus;
                let (rho_m, u_m, a_m, f_m, t_m, b_m) = minus;
                let alpha_p = b_c.max(b_p);
                let alpha_m = b_c.max(b_m);

                // conservative upwind mass flux with LLF dissipation
                let uf_p = half * (u_c[dim] + u_p[dim]);
                let uf_m = half * (u_m[dim] + u_c[dim]);
                let flux_p = if uf_p > S::zero() { rho_c * uf_p } else { rho_p * uf_p }
                    - half * alpha_p * (rho_p - rho_c);
                let flux_m = if uf_m > S::zero() { rho_m * uf_m } else { rho_c * uf_m }
                    - half * alpha_m * (rho_c - rho_m);
                d[0] = d[0] - (flux_p - flux_m) * inv_h;

                // upwind derivative helper for advected scalars
                let ud = u_c[dim];
                let up = |q_m: S, q_c: S, q_p: S| -> S {
                    if ud > S::zero() {
                        (q_c - q_m) * inv_h
                    } else if ud < S::zero() {
                        (q_p - q_c) * inv_h
                    } else {
                        S::zero()
                    }
                };
                let diss = |q_m: S, q_c: S, q_p: S| -> S {
                    (alpha_p * (q_p - q_c) - alpha_m * (q_c - q_m)) * half * inv_h
                };

                // velocity: advection + pressure + stress divergence
                let sym_idx = |r: usize, cdim: usize| -> usize {
                    // (xx,yy,zz,xy,xz,yz)
                    match (r.min(cdim), r.max(cdim)) {
                        (0, 0) => 0,
                        (1, 1) => 1,
                        (2, 2) => 2,
                        (0, 1) => 3,
                        (0, 2) => 4,
                        _ => 5,
                    }
                };
                for comp in 0..3 {
                    let adv = ud * up(u_m[comp], u_c[comp], u_p[comp]);
                    let grad_p = if comp == dim {
                        (p0(rho_p) - p0(rho_m)) * half * inv_h
                    } else {
                        S::zero()
                    };
                    let div_t =
                        (t_p[sym_idx(comp, dim)] - t_m[sym_idx(comp, dim)]) * half * inv_h;
                    d[1 + comp] = d[1 + comp] - adv + (div_t - grad_p) / rho_c
                        + diss(u_m[comp], u_c[comp], u_p[comp]);
                }
                // conformation advection + dissipation
                for comp in 0..6 {
                    d[4 + comp] = d[4 + comp] - ud * up(a_m[comp], a_c[comp], a_p[comp])
                        + diss(a_m[comp], a_c[comp], a_p[comp]);
                }
                // deformation gradient: advection + grad(u) . F + dissipation
                let grad_u: [S; 3] = [
                    (u_p[0] - u_m[0]) * half * inv_h,
                    (u_p[1] - u_m[1]) * half * inv_h,
                    (u_p[2] - u_m[2]) * half * inv_h,
                ];
                for row in 0..3 {
                    for col in 0..3 {
                        let comp = row * 3 + col;
                        // (grad u . F)_{row,col} += (d_dim u_row) F_{dim,col}
                        d[10 + comp] = d[10 + comp]
                            - ud * up(f_m[comp], f_c[comp], f_p[comp])
                            + grad_u[row] * f_c[dim * 3 + col]
                            + diss(f_m[comp], f_c[comp], f_p[comp]);
                    }
                }
            }
            // relaxation source: (F^{-1} F^{-T} - A)/lambda
            let fm = row_to_mat(&f_c);
            if let Some(fi) = fm.inverse() {
                let target = fi.mul(&fi.transpose());
                let am = sym_to_mat(&a_c);
                let rel = target.sub(&am).scale(S::one() / params.lambda);
                let rel6 = mat_to_sym(&rel);
                for comp in 0..6 {
                    d[4 + comp] = d[4 + comp] + rel6[comp];
                }
            } else {
                d[0] = S::nan(); // flagged below
            }
            d
        })
        .collect();

    if derivs.iter().any(|d| !d[0].is_finite()) {
        return Err(OracleError::Breakdown {
            solver: "cartesian",
            t: state.t.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(derivs)
}

/// Forward Euler step; dt from the per-dimension CFL condition.
pub fn step_cart<S: Real>(
    state: &mut CartesianState<S>,
    params: &Parameters<S>,
    cfl: S,
) -> Result<S, OracleError> {
    let ncell = state.n * state.n * state.n;
    let max_bound = (0..ncell)
        .into_par_iter()
        .map(|c| state.cell_bound(c, params))
        .reduce(|| S::zero(), S::max);
    let dt = cfl * state.h / (S::of(3.0) * max_bound);
    let derivs = rhs_cart(state, params)?;
    for c in 0..ncell {
        state.rho[c] = state.rho[c] + dt * derivs[c][0];
        for comp in 0..3 {
            state.u[c][comp] = state.u[c][comp] + dt * derivs[c][1 + comp];
        }
        for comp in 0..6 {
            state.a[c][comp] = state.a[c][comp] + dt * derivs[c][4 + comp];
        }
        for comp in 0..9 {
            state.f[c][comp] = state.f[c][comp] + dt * derivs[c][10 + comp];
        }
    }
    state.t = state.t + dt;
    if state.rho.iter().any(|r| *r <= S::zero() || !r.is_finite()) {
        return Err(OracleError::Breakdown {
            solver: "cartesian",
            t: state.t.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(dt)
}

/// Cross-solver comparison report (serialized into verify output).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport<S> {
    pub n: usize,
    pub t_short: S,
    /// relative L2 discrepancy of the shell-averaged density perturbation
    pub rel_l2_rho: S,
    /// relative L2 discrepancy of the shell-averaged speed
    pub rel_l2_u: S,
    /// max of the two
    pub discrepancy: S,
}

/// Shell-average a 3D field over radial bins of width `h` up to `r_limit`.
fn shell_average<S: Real>(
    state: &CartesianState<S>,
    value: impl Fn(usize) -> S,
    r_limit: S,
) -> (Vec<S>, Vec<usize>) {
    let nbins = (r_limit / state.h).to_f64().unwrap().floor() as usize;
    let mut sums = vec![S::zero(); nbins];
    let mut counts = vec![0usize; nbins];
    let n = state.n;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = [state.coord(i, 0), state.coord(j, 1), state.coord(k, 2)];
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if r >= r_limit {
                    continue;
                }
                let b = (r / state.h).to_f64().unwrap().floor() as usize;
                if b < nbins {
                    sums[b] = sums[b] + value(state.idx(i, j, k));
                    counts[b] += 1;
                }
            }
        }
    }
    for b in 0..nbins {
        if counts[b] > 0 {
            sums[b] = sums[b] / S::of(counts[b] as f64);
        }
    }
    (sums, counts)
}

fn sample_radial<S: Real>(field: &[S], grid: &crate::grid::RadialGrid<S>, r: S) -> S {
    let x = (r / grid.dr - S::of(0.5)).max(S::zero());
    let i0 = x.floor().to_f64().unwrap() as usize;
    if i0 + 1 >= field.len() {
        return *field.last().unwrap();
    }
    let frac = x - S::of(i0 as f64);
    field[i0] + frac * (field[i0 + 1] - field[i0])
}

/// Embed `data` into an n^3 box, run both solvers to `t_short`, and return
/// the relative L2 discrepancy of the shell-averaged (rho, |u|) fields.
pub fn run_compare<S: Real>(
    data: &InitialData<S>,
    params: &Parameters<S>,
    n: usize,
    t_short: S,
    sigma_est: S,
) -> Result<CompareReport<S>, OracleError> {
    if n > 64 {
        return Err(OracleError::GridTooLarge(n));
    }
    // box sized to keep the support interior over the horizon
    let half_width = data.r_support + sigma_est * t_short + S::of(0.5);
    let h = S::of(2.0) * half_width / S::of(n as f64);

    // 3D run
    let mut cart = CartesianState::embed_radial(data, params, n, h);
    while cart.t < t_short {
        let remaining = t_short - cart.t;
        let max_bound = (0..n * n * n)
            .map(|c| cart.cell_bound(c, params))
            .fold(S::zero(), S::max);
        let dt_full = S::of(0.4) * h / (S::of(3.0) * max_bound);
        if dt_full >= remaining {
            // final partial step
            let derivs = rhs_cart(&cart, params)?;
            let ncell = n * n * n;
            for c in 0..ncell {
                cart.rho[c] = cart.rho[c] + remaining * derivs[c][0];
                for comp in 0..3 {
                    cart.u[c][comp] = cart.u[c][comp] + remaining * derivs[c][1 + comp];
                }
                for comp in 0..6 {
                    cart.a[c][comp] = cart.a[c][comp] + remaining * derivs[c][4 + comp];
                }
                for comp in 0..9 {
                    cart.f[c][comp] = cart.f[c][comp] + remaining * derivs[c][10 + comp];
                }
            }
            cart.t = t_short;
        } else {
            step_cart(&mut cart, params, S::of(0.4))?;
        }
    }

    // radial reference on the data's own (finer) grid
    let setup = crate::solver::radial::RunSetup {
        scheme: crate::solver::radial::SchemeConfig::default(),
        t_end: t_short,
        output_interval: t_short.max(S::of(1e-9)),
        sigma_est,
    };
    let result = crate::solver::radial::run(data, params, &setup)?;
    if let crate::solver::radial::RunOutcome::Breakdown { time, .. } = result.outcome {
        return Err(OracleError::Breakdown {
            solver: "radial",
            t: time.to_f64().unwrap_or(f64::NAN),
        });
    }
    let radial = result.final_state;

    // shell averages of (rho, |u|) against the radial reference
    let r_limit = half_width;
    let (rho_avg, counts) = shell_average(&cart, |c| cart.rho[c], r_limit);
    let (u_avg, _) = shell_average(
        &cart,
        |c| {
            let u = cart.u[c];
            (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
        },
        r_limit,
    );
    let mut num_rho = S::zero();
    let mut den_rho = S::zero();
    let mut num_u = S::zero();
    let mut den_u = S::zero();
    for b in 0..rho_avg.len() {
        if counts[b] == 0 {
            continue;
        }
        let r = (S::of(b as f64) + S::of(0.5)) * h;
        let w = r * r;
        let rho_ref = sample_radial(&radial.rho, &radial.grid, r);
        let u_ref = sample_radial(&radial.u, &radial.grid, r).abs();
        num_rho = num_rho + w * (rho_avg[b] - rho_ref).powi(2);
        den_rho = den_rho + w * (rho_ref - S::one()).powi(2);
        num_u = num_u + w * (u_avg[b] - u_ref).powi(2);
        den_u = den_u + w * u_ref.powi(2);
    }
    let rel_rho = (num_rho / den_rho.max(S::of(1e-300))).sqrt();
    let rel_u = (num_u / den_u.max(S::of(1e-300))).sqrt();
    Ok(CompareReport {
        n,
        t_short,
        rel_l2_rho: rel_rho,
        rel_l2_u: rel_u,
        discrepancy: rel_rho.max(rel_u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::initial_data::InitialData;

    fn params() -> Parameters<f64> {
        Parameters::new(1.0, 1.4, 1.0, 1.0).unwrap()
    }

    fn background_data(n: usize, dr: f64) -> InitialData<f64> {
        let grid = RadialGrid::new(n, dr);
        InitialData {
            grid,
            rho0: vec![1.0; n],
            u0: vec![0.0; n],
            a0_r: vec![1.0; n],
            a0_t: vec![1.0; n],
            f0_r: vec![1.0; n],
            f0_t: vec![1.0; n],
            r_support: 2.0,
            m0: 0.0,
            h0: 0.0,
            w0: 0.0,
        }
    }

    #[test]
    fn background_is_fixed_point() {
        let p = params();
        let data = background_data(64, 0.1);
        let st = CartesianState::embed_radial(&data, &p, 16, 0.4);
        let derivs = rhs_cart(&st, &p).unwrap();
        for d in derivs {
            for v in d {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn relaxation_source_matches_closed_form() {
        // u = 0, A = (1 + eps) I, F = I -> dA/dt = -(A - I)/lambda per cell
        let p = params();
        let data = background_data(64, 0.1);
        let mut st = CartesianState::embed_radial(&data, &p, 8, 0.4);
        let eps = 0.05;
        for a in st.a.iter_mut() {
            a[0] += eps;
            a[1] += eps;
            a[2] += eps;
        }
        let derivs = rhs_cart(&st, &p).unwrap();
        let c = st.idx(4, 4, 4);
        for comp in 0..3 {
            // advection of the uniform A field contributes nothing
            assert!((derivs[c][4 + comp] + eps / p.lambda).abs() < 1e-12);
        }
        assert_eq!(derivs[c][0], 0.0);
    }

    #[test]
    fn mass_conserved_and_octant_symmetric() {
        let p = params();
        // smooth compact pulse
        let nr = 512;
        let grid = RadialGrid::new(nr, 4.0 / nr as f64);
        let mut data = background_data(nr, grid.dr);
        for i in 0..nr {
            let r = grid.r_center(i);
            let s: f64 = (r / 1.2f64).powi(2);
            let bump = if s < 1.0 { (1.0 - 1.0 / (1.0 - s)).exp() } else { 0.0 };
            data.rho0[i] = 1.0 + 0.05 * bump;
            data.u0[i] = 0.05 * r * bump;
        }
        let n = 16;
        let mut st = CartesianState::embed_radial(&data, &p, n, 6.0 / n as f64);
        let m0 = st.total_mass();
        for _ in 0..5 {
            step_cart(&mut st, &p, 0.4).unwrap();
        }
        let m1 = st.total_mass();
        assert!((m1 - m0).abs() <= 1e-12 * m0, "mass drift {}", (m1 - m0).abs());

        // octant reflection symmetry of rho
        for i in 0..n / 2 {
            for j in 0..n / 2 {
                for k in 0..n / 2 {
                    let a = st.rho[st.idx(i, j, k)];
                    let b = st.rho[st.idx(n - 1 - i, j, k)];
                    let c = st.rho[st.idx(i, n - 1 - j, n - 1 - k)];
                    assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
                }
            }
        }
    }
}
