//! Averaged quantities and numerical verification of the energy identity
//! and the functional inequalities on solver output.
//!
//! All spatial integrals use the cell-volume quadrature of
//! [`crate::grid::RadialGrid`]; time integrals accumulate with the
//! trapezoid rule over the output times.

use crate::initial_data::InitialData;
use crate::model::{
    energy_integrand_radial, eval_p0, radial_tr_stress, Parameters,
};
use crate::riccati;
use crate::scalar::Real;
use crate::solver::radial::RadialState;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("fewer than {0} records; insufficient data")]
    InsufficientData(usize),
    #[error("csv schema mismatch: expected columns [{expected}], got [{got}]")]
    SchemaMismatch { expected: String, got: String },
    #[error("csv parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Threshold used when measuring the numerical support radius.
pub const SUPPORT_TOL: f64 = 1e-12;

/// One output-time row of the diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord<S> {
    pub t: S,
    /// excess mass m(t)
    pub m: S,
    /// radial momentum moment W(t)
    pub w: S,
    /// total energy E(t)
    pub e: S,
    /// int tr(T) dx
    pub int_tr_t: S,
    /// int_0^t int tr(T) dx ds (trapezoid in output time)
    pub cum_int_tr_t: S,
    pub support_radius: S,
    pub sup_grad_u: S,
    /// residual of dE/dt + (1/lambda) int tr(T)/2 dx = 0
    pub energy_residual: S,
    /// int_{B(t)} (p(rho) - p(1)) dx
    pub jensen_margin: S,
    /// lambda (H0 + max rho0 ||u0||^2) - cumulative int tr(T)
    pub tr_t_slack: S,
    /// W'(t) - [ (4/3 pi (R + sigma t)^5 max rho0)^{-1} W^2 - int tr(T) ]
    pub w_ineq_residual: S,
    /// Riccati comparison curve V(t) (equals U0 when U0 <= 0)
    pub v_lower: S,
}

/// m(t) = 4 pi int (rho - 1) r^2 dr.
pub fn quad_m<S: Real>(state: &RadialState<S>) -> S {
    let f: Vec<S> = state.rho.iter().map(|r| *r - S::one()).collect();
    state.grid.integrate(f.iter())
}

/// W(t) = 4 pi int rho u r^3 dr.
pub fn quad_w<S: Real>(state: &RadialState<S>) -> S {
    let f: Vec<S> = (0..state.grid.n_cells)
        .map(|i| state.rho[i] * state.u[i] * state.grid.r_center(i))
        .collect();
    state.grid.integrate(f.iter())
}

/// E(t) = 4 pi int (rho u^2/2 + potentials + tr(T)/2) r^2 dr.
pub fn quad_e<S: Real>(state: &RadialState<S>, params: &Parameters<S>) -> S {
    let f: Vec<S> = (0..state.grid.n_cells)
        .map(|i| energy_integrand_radial(&state.point(i), params))
        .collect();
    state.grid.integrate(f.iter())
}

/// int tr(T) dx with T reconstructed from (rho, A, F).
pub fn quad_int_tr_t<S: Real>(state: &RadialState<S>, params: &Parameters<S>) -> S {
    let f: Vec<S> = (0..state.grid.n_cells)
        .map(|i| radial_tr_stress(&state.point(i), params))
        .collect();
    state.grid.integrate(f.iter())
}

/// Jensen margin int_{B(t)} (p(rho) - p(1)) dx with B(t) = {r <= R + sigma t}.
pub fn check_jensen<S: Real>(
    state: &RadialState<S>,
    params: &Parameters<S>,
    sigma_est: S,
    r_support: S,
) -> S {
    let r_ball = r_support + sigma_est * state.t;
    let p_bar = params.a;
    let mut acc = S::zero();
    for i in 0..state.grid.n_cells {
        if state.grid.r_center(i) > r_ball {
            break;
        }
        let p = eval_p0(state.rho[i], params).unwrap_or(S::nan());
        acc = acc + (p - p_bar) * state.grid.cell_volume(i);
    }
    acc
}

/// Snapshot the instantaneous quantities (integral time-series columns are
/// filled later by [`finalize_series`]).
pub fn observe<S: Real>(
    state: &RadialState<S>,
    params: &Parameters<S>,
    sigma_est: S,
    r_support: S,
) -> DiagnosticsRecord<S> {
    DiagnosticsRecord {
        t: state.t,
        m: quad_m(state),
        w: quad_w(state),
        e: quad_e(state, params),
        int_tr_t: quad_int_tr_t(state, params),
        cum_int_tr_t: S::zero(),
        support_radius: state.support_radius(S::of(SUPPORT_TOL)),
        sup_grad_u: state.sup_grad_u(),
        energy_residual: S::zero(),
        jensen_margin: check_jensen(state, params, sigma_est, r_support),
        tr_t_slack: S::zero(),
        w_ineq_residual: S::zero(),
        v_lower: S::zero(),
    }
}

/// Fill the derived columns: cumulative stress integral, energy identity
/// residual, the tr(T) bound slack, the W-inequality residual, and the
/// Riccati comparison curve.
pub fn finalize_series<S: Real>(
    records: &mut [DiagnosticsRecord<S>],
    params: &Parameters<S>,
    data: &InitialData<S>,
    sigma_est: S,
) {
    let n = records.len();
    if n == 0 {
        return;
    }
    let half = S::of(0.5);
    // cumulative int tr(T), trapezoid in output time
    let mut cum = S::zero();
    records[0].cum_int_tr_t = S::zero();
    for k in 1..n {
        let dt = records[k].t - records[k - 1].t;
        cum = cum + half * dt * (records[k].int_tr_t + records[k - 1].int_tr_t);
        records[k].cum_int_tr_t = cum;
    }
    // energy identity residual (central differences in output time)
    for k in 1..n.saturating_sub(1) {
        let dt = records[k + 1].t - records[k - 1].t;
        if dt > S::zero() {
            let de = (records[k + 1].e - records[k - 1].e) / dt;
            records[k].energy_residual = de + half * records[k].int_tr_t / params.lambda;
        }
    }
    // tr(T) cumulative bound slack
    let budget = params.lambda * (data.h0 + data.max_rho0() * data.u0_l2_sq());
    for rec in records.iter_mut() {
        rec.tr_t_slack = budget - rec.cum_int_tr_t;
    }
    // W inequality residual
    let max_rho0 = data.max_rho0();
    let c_ball = S::of(4.0 / 3.0) * S::PI() * max_rho0;
    for k in 1..n.saturating_sub(1) {
        let dt = records[k + 1].t - records[k - 1].t;
        if dt > S::zero() {
            let w_dot = (records[k + 1].w - records[k - 1].w) / dt;
            let ball = c_ball * (data.r_support + sigma_est * records[k].t).powi(5);
            let rhs = records[k].w * records[k].w / ball - records[k].int_tr_t;
            records[k].w_ineq_residual = w_dot - rhs;
        }
    }
    // Riccati comparison curve
    let u0 = riccati::compute_u0(data, params);
    if u0 > S::zero() {
        let c2 = riccati::c2(sigma_est, data.r_support);
        let c3 = riccati::c3(max_rho0, data.r_support);
        let t_grid: Vec<S> = records.iter().map(|r| r.t).collect();
        let series = riccati::integrate_v(u0, c2, c3, &t_grid);
        for (rec, v) in records.iter_mut().zip(series.v.iter()) {
            rec.v_lower = *v;
        }
    } else {
        for rec in records.iter_mut() {
            rec.v_lower = u0;
        }
    }
}

/// Maximum |residual| of the energy identity over the interior records.
pub fn check_energy_identity<S: Real>(
    records: &[DiagnosticsRecord<S>],
) -> Result<S, DiagnosticsError> {
    if records.len() < 3 {
        return Err(DiagnosticsError::InsufficientData(3));
    }
    Ok(records[1..records.len() - 1]
        .iter()
        .fold(S::zero(), |m, r| m.max(r.energy_residual.abs())))
}

/// Verdict and minimum slack of the cumulative tr(T) bound.
pub fn check_tr_t_bound<S: Real>(
    records: &[DiagnosticsRecord<S>],
    tolerance: S,
) -> (bool, S) {
    let min_slack = records
        .iter()
        .fold(S::infinity(), |m, r| m.min(r.tr_t_slack));
    (min_slack >= -tolerance, min_slack)
}

/// Most negative W-inequality residual over the interior records.
pub fn check_w_inequality<S: Real>(
    records: &[DiagnosticsRecord<S>],
) -> Result<S, DiagnosticsError> {
    if records.len() < 3 {
        return Err(DiagnosticsError::InsufficientData(3));
    }
    Ok(records[1..records.len() - 1]
        .iter()
        .fold(S::infinity(), |m, r| m.min(r.w_ineq_residual)))
}

pub const CSV_COLUMNS: [&str; 13] = [
    "t",
    "m",
    "W",
    "E",
    "int_trT",
    "cum_int_trT",
    "support_radius",
    "sup_grad_u",
    "energy_residual",
    "jensen_margin",
    "trT_slack",
    "W_ineq_residual",
    "V_lower",
];

pub fn write_csv<S: Real, W: Write>(
    records: &[DiagnosticsRecord<S>],
    mut out: W,
) -> Result<(), DiagnosticsError> {
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.m,
            r.w,
            r.e,
            r.int_tr_t,
            r.cum_int_tr_t,
            r.support_radius,
            r.sup_grad_u,
            r.energy_residual,
            r.jensen_margin,
            r.tr_t_slack,
            r.w_ineq_residual,
            r.v_lower
        )?;
    }
    Ok(())
}

pub fn read_csv<S: Real, R: BufRead>(input: R) -> Result<Vec<DiagnosticsRecord<S>>, DiagnosticsError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or(DiagnosticsError::InsufficientData(1))??;
    let got: Vec<&str> = header.trim().split(',').collect();
    if got != CSV_COLUMNS {
        return Err(DiagnosticsError::SchemaMismatch {
            expected: CSV_COLUMNS.join(","),
            got: got.join(","),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<S> = line
            .trim()
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map(S::of)
                    .map_err(|e| DiagnosticsError::Parse {
                        line: idx + 2,
                        msg: e.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != CSV_COLUMNS.len() {
            return Err(DiagnosticsError::Parse {
                line: idx + 2,
                msg: format!("expected {} fields, got {}", CSV_COLUMNS.len(), vals.len()),
            });
        }
        records.push(DiagnosticsRecord {
            t: vals[0],
            m: vals[1],
            w: vals[2],
            e: vals[3],
            int_tr_t: vals[4],
            cum_int_tr_t: vals[5],
            support_radius: vals[6],
            sup_grad_u: vals[7],
            energy_residual: vals[8],
            jensen_margin: vals[9],
            tr_t_slack: vals[10],
            w_ineq_residual: vals[11],
            v_lower: vals[12],
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;

    fn params() -> Parameters<f64> {
        Parameters::new(1.0, 1.4, 1.0, 1.0).unwrap()
    }

    #[test]
    fn background_quantities_vanish() {
        let st = RadialState::background(RadialGrid::new(128, 0.05));
        let p = params();
        assert_eq!(quad_m(&st), 0.0);
        assert_eq!(quad_w(&st), 0.0);
        assert_eq!(quad_e(&st, &p), 0.0);
        assert_eq!(quad_int_tr_t(&st, &p), 0.0);
        assert_eq!(check_jensen(&st, &p, 1.0, 2.0), 0.0);
        assert_eq!(st.support_radius(1e-12), 0.0);
    }

    #[test]
    fn jensen_positive_for_density_bump() {
        let mut st = RadialState::background(RadialGrid::new(128, 0.05));
        for i in 0..40 {
            st.rho[i] = 1.2;
        }
        assert!(check_jensen(&st, &params(), 1.0, 3.0) > 0.0);
    }

    #[test]
    fn cauchy_schwarz_for_w() {
        // W^2 <= (4 pi int rho r^4 dr)(4 pi int rho u^2 r^2 dr)
        let g = RadialGrid::<f64>::new(256, 0.02);
        let mut st = RadialState::background(g);
        for i in 0..g.n_cells {
            let r = g.r_center(i);
            st.rho[i] = 1.0 + 0.3 * (-r * r).exp();
            st.u[i] = 0.5 * r * (-r * r).exp();
        }
        let w = quad_w(&st);
        let f1: Vec<f64> = (0..g.n_cells)
            .map(|i| st.rho[i] * g.r_center(i).powi(2))
            .collect();
        let f2: Vec<f64> = (0..g.n_cells)
            .map(|i| st.rho[i] * st.u[i].powi(2))
            .collect();
        assert!(w * w <= g.integrate(f1.iter()) * g.integrate(f2.iter()) * (1.0 + 1e-12));
    }

    #[test]
    fn csv_roundtrip_and_schema_check() {
        let rec = DiagnosticsRecord {
            t: 0.125,
            m: 1.0 / 3.0,
            w: -2.5e-17,
            e: 7.0,
            int_tr_t: 0.1,
            cum_int_tr_t: 0.01,
            support_radius: 5.5,
            sup_grad_u: 1e3,
            energy_residual: -1e-9,
            jensen_margin: 0.0,
            tr_t_slack: 4.0,
            w_ineq_residual: 1e-4,
            v_lower: 2.0,
        };
        let mut buf = Vec::new();
        write_csv(&[rec], &mut buf).unwrap();
        let back: Vec<DiagnosticsRecord<f64>> = read_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], rec); // exact numeric text round-trip

        let bad = b"t,m,W\n0,0,0\n";
        assert!(matches!(
            read_csv::<f64, _>(&bad[..]),
            Err(DiagnosticsError::SchemaMismatch { .. })
        ));
    }
}
