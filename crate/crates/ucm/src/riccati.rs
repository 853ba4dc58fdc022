//! Blow-up criterion evaluation and the Riccati comparison: constants
//! c2 = sigma/R and c3 = 3/(4 pi max rho0 R^5), the threshold U0 > 4 c2/c3,
//! the closed-form lifespan bound T*, and the comparison curve V(t)
//! integrated numerically against its closed form.

use crate::initial_data::InitialData;
use crate::model::Parameters;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("criterion not satisfied: U0 = {u0} <= 4 c2/c3 = {threshold}; no lifespan bound")]
    NoBound { u0: f64, threshold: f64 },
    #[error("fewer than {0} records; insufficient data")]
    InsufficientData(usize),
}

/// Outcome of the criterion evaluation and lifespan computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupReport<S> {
    pub sigma_est: S,
    pub c2: S,
    pub c3: S,
    pub u0: S,
    /// the right-hand side 4 c2 / c3 of the strict criterion
    pub threshold: S,
    pub criterion_satisfied: bool,
    /// lifespan upper bound, present iff the criterion holds
    pub t_star: Option<S>,
    pub w0: S,
    pub h0: S,
    pub max_rho0: S,
    pub u0_l2_sq: S,
}

/// Both sides of the criterion comparison.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriterionVerdict<S> {
    pub u0: S,
    pub threshold: S,
    pub satisfied: bool,
}

pub fn c2<S: Real>(sigma_est: S, r_support: S) -> S {
    sigma_est / r_support
}

pub fn c3<S: Real>(max_rho0: S, r_support: S) -> S {
    S::of(3.0) / (S::of(4.0) * S::PI() * max_rho0 * r_support.powi(5))
}

/// U0 = W(0) - lambda (H0 + max rho0 ||u0||^2).
pub fn compute_u0<S: Real>(data: &InitialData<S>, params: &Parameters<S>) -> S {
    data.w0 - params.lambda * (data.h0 + data.max_rho0() * data.u0_l2_sq())
}

/// Strict criterion U0 > 4 c2 / c3; equality is not sufficient.
pub fn check_criterion<S: Real>(
    data: &InitialData<S>,
    params: &Parameters<S>,
    sigma_est: S,
) -> CriterionVerdict<S> {
    let u0 = compute_u0(data, params);
    let threshold = S::of(4.0) * c2(sigma_est, data.r_support) / c3(data.max_rho0(), data.r_support);
    CriterionVerdict {
        u0,
        threshold,
        satisfied: u0 > threshold,
    }
}

/// Lifespan bound from the equality case of the Riccati comparison:
/// T* = ((1 - 4 c2 / (c3 U0))^{-1/4} - 1) / c2.
pub fn blowup_bound_t_star<S: Real>(u0: S, c2: S, c3: S) -> Result<S, RiccatiError> {
    let four = S::of(4.0);
    let threshold = four * c2 / c3;
    if !(u0 > threshold) {
        return Err(RiccatiError::NoBound {
            u0: u0.to_f64().unwrap(),
            threshold: threshold.to_f64().unwrap(),
        });
    }
    let q = S::one() - four * c2 / (c3 * u0);
    Ok((q.powf(S::of(-0.25)) - S::one()) / c2)
}

/// Closed form of the comparison curve: 1/V = 1/U0 - (c3/4c2)(1 - (1+c2 t)^{-4}).
pub fn v_closed_form<S: Real>(u0: S, c2: S, c3: S, t: S) -> S {
    let inv = S::one() / u0
        - c3 / (S::of(4.0) * c2) * (S::one() - (S::one() + c2 * t).powi(-4));
    S::one() / inv
}

/// Numerically integrated comparison series with divergence bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VSeries<S> {
    pub t: Vec<S>,
    pub v: Vec<S>,
    /// true when the integration hit the divergence cap before the end of
    /// the requested grid; entries past the cap are dropped
    pub diverged: bool,
    /// time at which V first exceeded the divergence cap
    pub t_divergence: Option<S>,
}

const V_DIVERGENCE_CAP: f64 = 1e12;

/// Integrate dV/dt = c3 (1 + c2 t)^{-5} V^2, V(0) = U0, with an embedded
/// adaptive Runge-Kutta (Cash-Karp 4/5). Output lands exactly on the
/// requested grid; past the divergence cap the series is truncated.
pub fn integrate_v<S: Real>(u0: S, c2: S, c3: S, t_grid: &[S]) -> VSeries<S> {
    assert!(u0 > S::zero(), "integrate_v requires U0 > 0");
    let rhs = |t: S, v: S| c3 * (S::one() + c2 * t).powi(-5) * v * v;
    let cap = S::of(V_DIVERGENCE_CAP);
    let rel_tol = S::of(1e-12);

    let mut out = VSeries {
        t: Vec::with_capacity(t_grid.len()),
        v: Vec::with_capacity(t_grid.len()),
        diverged: false,
        t_divergence: None,
    };
    let mut t = S::zero();
    let mut v = u0;
    let mut h = S::of(1e-4) * (S::one() + u0 * c3).recip().min(S::one());
    'grid: for &t_target in t_grid {
        if t_target <= t && !out.t.is_empty() {
            out.t.push(t_target);
            out.v.push(v);
            continue;
        }
        while t < t_target {
            let mut step = h.min(t_target - t);
            loop {
                let (v_new, err) = cash_karp_step(&rhs, t, v, step);
                let scale = v.abs().max(v_new.abs()) * rel_tol + S::of(1e-300);
                if err <= scale || step <= S::of(1e-15) * (S::one() + t) {
                    t = t + step;
                    v = v_new;
                    // PI-free step control
                    let grow = if err > S::zero() {
                        (scale / err).powf(S::of(0.2)).min(S::of(4.0))
                    } else {
                        S::of(4.0)
                    };
                    h = (step * S::of(0.9) * grow).max(S::of(1e-15) * (S::one() + t));
                    break;
                }
                step = step * S::of(0.5) * (scale / err).powf(S::of(0.25)).max(S::of(0.1));
            }
            if v > cap || !v.is_finite() {
                out.diverged = true;
                out.t_divergence = Some(t);
                break 'grid;
            }
        }
        out.t.push(t_target);
        out.v.push(v);
    }
    out
}

fn cash_karp_step<S: Real>(rhs: &impl Fn(S, S) -> S, t: S, y: S, h: S) -> (S, S) {
    let c = |x: f64| S::of(x);
    let k1 = rhs(t, y);
    let k2 = rhs(t + c(0.2) * h, y + h * c(0.2) * k1);
    let k3 = rhs(t + c(0.3) * h, y + h * (c(3.0 / 40.0) * k1 + c(9.0 / 40.0) * k2));
    let k4 = rhs(
        t + c(0.6) * h,
        y + h * (c(0.3) * k1 - c(0.9) * k2 + c(1.2) * k3),
    );
    let k5 = rhs(
        t + h,
        y + h * (c(-11.0 / 54.0) * k1 + c(2.5) * k2 - c(70.0 / 27.0) * k3 + c(35.0 / 27.0) * k4),
    );
    let k6 = rhs(
        t + c(0.875) * h,
        y + h * (c(1631.0 / 55296.0) * k1
            + c(175.0 / 512.0) * k2
            + c(575.0 / 13824.0) * k3
            + c(44275.0 / 110592.0) * k4
            + c(253.0 / 4096.0) * k5),
    );
    let y5 = y + h
        * (c(37.0 / 378.0) * k1
            + c(250.0 / 621.0) * k3
            + c(125.0 / 594.0) * k4
            + c(512.0 / 1771.0) * k6);
    let y4 = y + h
        * (c(2825.0 / 27648.0) * k1
            + c(18575.0 / 48384.0) * k3
            + c(13525.0 / 55296.0) * k4
            + c(277.0 / 14336.0) * k5
            + c(0.25) * k6);
    (y5, (y5 - y4).abs())
}

/// Pointwise margin W(t) - V(t); passes when the margin stays above
/// -tol_rel * max |W| throughout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonVerdict<S> {
    pub min_margin: S,
    pub tolerance: S,
    pub passed: bool,
    /// set when the V series had to be interpolated onto the W grid
    pub interpolated: bool,
}

pub fn compare_w_v<S: Real>(
    t_w: &[S],
    w: &[S],
    v_series: &VSeries<S>,
    tol_rel: S,
) -> Result<ComparisonVerdict<S>, RiccatiError> {
    if t_w.is_empty() || w.len() != t_w.len() {
        return Err(RiccatiError::InsufficientData(1));
    }
    let aligned = v_series.t.len() >= t_w.len()
        && t_w
            .iter()
            .zip(v_series.t.iter())
            .all(|(a, b)| (*a - *b).abs() <= S::of(1e-12) * (S::one() + a.abs()));
    let w_max = w.iter().fold(S::zero(), |m, x| m.max(x.abs()));
    let tolerance = tol_rel * w_max;
    let mut min_margin = S::infinity();
    for (k, (&tk, &wk)) in t_w.iter().zip(w.iter()).enumerate() {
        let vk = if aligned {
            v_series.v[k]
        } else {
            match interp(&v_series.t, &v_series.v, tk) {
                Some(v) => v,
                None => break, // past the truncated (diverged) series
            }
        };
        min_margin = min_margin.min(wk - vk);
    }
    Ok(ComparisonVerdict {
        min_margin,
        tolerance,
        passed: min_margin >= -tolerance,
        interpolated: !aligned,
    })
}

fn interp<S: Real>(ts: &[S], vs: &[S], t: S) -> Option<S> {
    if ts.is_empty() || t < ts[0] || t > *ts.last().unwrap() {
        return None;
    }
    let idx = ts.partition_point(|x| *x < t);
    if idx == 0 {
        return Some(vs[0]);
    }
    if idx >= ts.len() {
        return Some(*vs.last().unwrap());
    }
    let (t0, t1) = (ts[idx - 1], ts[idx]);
    let frac = if t1 > t0 { (t - t0) / (t1 - t0) } else { S::zero() };
    Some(vs[idx - 1] + frac * (vs[idx] - vs[idx - 1]))
}

/// Assemble the full report for a datum.
pub fn blowup_report<S: Real>(
    data: &InitialData<S>,
    params: &Parameters<S>,
    sigma_est: S,
) -> BlowupReport<S> {
    let verdict = check_criterion(data, params, sigma_est);
    let c2v = c2(sigma_est, data.r_support);
    let c3v = c3(data.max_rho0(), data.r_support);
    let t_star = if verdict.satisfied {
        blowup_bound_t_star(verdict.u0, c2v, c3v).ok()
    } else {
        None
    };
    BlowupReport {
        sigma_est,
        c2: c2v,
        c3: c3v,
        u0: verdict.u0,
        threshold: verdict.threshold,
        criterion_satisfied: verdict.satisfied,
        t_star,
        w0: data.w0,
        h0: data.h0,
        max_rho0: data.max_rho0(),
        u0_l2_sq: data.u0_l2_sq(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_star_worked_example() {
        // c2 = 1, c3 = 8, U0 = 1: 4 c2/(c3 U0) = 1/2, T* = 2^{1/4} - 1
        let t = blowup_bound_t_star(1.0f64, 1.0, 8.0).unwrap();
        let want = 2.0f64.powf(0.25) - 1.0;
        assert!((t - want).abs() < 1e-12);
        // cross-check by bisection on the closed-form equality
        let f = |tt: f64| 1.0 - (8.0 / 4.0) * (1.0 - (1.0 + tt).powi(-4));
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((t - lo).abs() < 1e-10);
    }

    #[test]
    fn t_star_limits_and_monotonicity() {
        // U0 -> infinity, T* -> 0+
        assert!(blowup_bound_t_star(1e18f64, 1.0, 8.0).unwrap() < 1e-15);
        // barely above threshold: T* large and finite
        let u0 = 0.5 * (1.0 + 1e-9);
        let t = blowup_bound_t_star(u0, 1.0f64, 8.0).unwrap();
        assert!(t.is_finite() && t > 100.0);
        // monotone decreasing in U0
        let t1 = blowup_bound_t_star(1.0f64, 1.0, 8.0).unwrap();
        let t2 = blowup_bound_t_star(2.0f64, 1.0, 8.0).unwrap();
        assert!(t2 < t1);
        // equality case rejected (strict inequality)
        assert!(blowup_bound_t_star(0.5f64, 1.0, 8.0).is_err());
    }

    #[test]
    fn integrate_v_matches_closed_form() {
        let (u0, c2v, c3v) = (1.0f64, 1.0, 8.0);
        let t_star = blowup_bound_t_star(u0, c2v, c3v).unwrap();
        let n = 200;
        let t_grid: Vec<f64> = (0..=n).map(|k| 0.99 * t_star * k as f64 / n as f64).collect();
        let series = integrate_v(u0, c2v, c3v, &t_grid);
        assert!(!series.diverged);
        assert_eq!(series.v[0], u0);
        for (k, &t) in t_grid.iter().enumerate() {
            let want = v_closed_form(u0, c2v, c3v, t);
            let rel = (series.v[k] - want).abs() / want.abs();
            assert!(rel <= 1e-8, "t = {t}: rel err {rel}");
        }
        // half-way point explicitly (the frozen oracle value path)
        let half = integrate_v(u0, c2v, c3v, &[0.5 * t_star]);
        let want = v_closed_form(u0, c2v, c3v, 0.5 * t_star);
        assert!((half.v[0] - want).abs() / want <= 1e-8);
    }

    #[test]
    fn integrate_v_divergence_time_near_t_star() {
        let (u0, c2v, c3v) = (1.0f64, 1.0, 8.0);
        let t_star = blowup_bound_t_star(u0, c2v, c3v).unwrap();
        let t_grid: Vec<f64> = (0..=400).map(|k| 1.2 * t_star * k as f64 / 400.0).collect();
        let series = integrate_v(u0, c2v, c3v, &t_grid);
        assert!(series.diverged);
        let t_div = series.t_divergence.unwrap();
        assert!(
            (t_div - t_star).abs() <= 0.01 * t_star,
            "t_div = {t_div}, T* = {t_star}"
        );
    }

    #[test]
    fn integrate_v_degenerate_cases() {
        // c3 = 0 -> V stays at U0
        let series = integrate_v(2.0f64, 1.0, 0.0, &[0.0, 1.0, 5.0]);
        for v in &series.v {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_scaling() {
        // doubling max rho0 halves c3
        assert_eq!(c3(2.0f64, 5.0), 0.5 * c3(1.0f64, 5.0));
        // and strictly increases T* when the criterion still holds
        let c2v = 0.1f64;
        let (c3a, c3b) = (c3(1.0f64, 5.0), c3(2.0f64, 5.0));
        let u0 = 2.0 * 4.0 * c2v / c3b; // holds for both
        let ta = blowup_bound_t_star(u0, c2v, c3a).unwrap();
        let tb = blowup_bound_t_star(u0, c2v, c3b).unwrap();
        assert!(tb > ta);
    }

    #[test]
    fn compare_w_v_basics() {
        let t: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let series = integrate_v(1.0f64, 1.0, 0.0, &t);
        // W slightly above V everywhere
        let w: Vec<f64> = t.iter().map(|_| 1.0 + 1e-6).collect();
        let verdict = compare_w_v(&t, &w, &series, 1e-3).unwrap();
        assert!(verdict.passed && !verdict.interpolated);
        // misaligned grid triggers interpolation
        let t2: Vec<f64> = (0..9).map(|k| k as f64 * 0.1 + 0.05).collect();
        let w2: Vec<f64> = t2.iter().map(|_| 1.0 + 1e-6).collect();
        let verdict2 = compare_w_v(&t2, &w2, &series, 1e-3).unwrap();
        assert!(verdict2.passed && verdict2.interpolated);
        // W dipping far below V fails
        let w3: Vec<f64> = t.iter().map(|_| 0.5).collect();
        assert!(!compare_w_v(&t, &w3, &series, 1e-3).unwrap().passed);
    }
}
