//! Construction of admissible large initial data: the piecewise-cosine
//! radial velocity profile, mollified and cut off, plus density and
//! conformation perturbations, with the mass / energy / momentum-moment
//! functionals and the (L, R) auto-selection.

use crate::grid::RadialGrid;
use crate::model::{radial_tr_stress, Parameters, RadialPointState};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("R must be >= 5, got {0}")]
    SupportTooSmall(f64),
    #[error("L must be > 0")]
    NonPositiveAmplitude,
    #[error("mollifier width must be in (0, 1/4], got {0}")]
    BadMollifierWidth(f64),
    #[error("grid must resolve the mollifier width by >= 8 cells (dr = {dr}, width = {width})")]
    GridTooCoarse { dr: f64, width: f64 },
    #[error("grid outer radius {r_max} does not cover the support radius {r_support}")]
    GridTooSmall { r_max: f64, r_support: f64 },
    #[error("mollified profile drops below L on (2, R-2); width too large")]
    MollifierTooWide,
    #[error("condition (ass1) violated: m0 = {0} < 0")]
    Ass1Violated(f64),
    #[error("condition (ass2) violated: tr(T0) = {tr} < 0 at r = {r}")]
    Ass2Violated { tr: f64, r: f64 },
    #[error("perturbation amplitudes must be >= 0")]
    NegativePerturbation,
    #[error("no (L, R) within caps L <= {l_cap}, R <= {r_cap}; binding constraint: {binding}")]
    SearchFailure { l_cap: f64, r_cap: f64, binding: String },
}

/// Profile parameters for the constructed data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec<S> {
    /// velocity amplitude L > 0
    pub l: S,
    /// support radius R >= 5
    pub r_support: S,
    /// mollifier smoothing length, in (0, 1/4]
    pub mollifier_width: S,
    /// density bump amplitude, rho0 = 1 + amplitude * bump(r)
    pub rho0_amplitude: S,
    /// conformation perturbation, A0 = (1 + delta_a) I inside the support
    pub delta_a: S,
}

impl<S: Real> ProfileSpec<S> {
    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.l > S::zero()) {
            return Err(DataError::NonPositiveAmplitude);
        }
        if self.r_support < S::of(5.0) {
            return Err(DataError::SupportTooSmall(self.r_support.to_f64().unwrap()));
        }
        if !(self.mollifier_width > S::zero()) || self.mollifier_width > S::of(0.25) {
            return Err(DataError::BadMollifierWidth(
                self.mollifier_width.to_f64().unwrap(),
            ));
        }
        if self.rho0_amplitude < S::zero() || self.delta_a < S::zero() {
            return Err(DataError::NegativePerturbation);
        }
        Ok(())
    }
}

/// Constructed radial initial data with its functionals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialData<S> {
    pub grid: RadialGrid<S>,
    pub rho0: Vec<S>,
    pub u0: Vec<S>,
    pub a0_r: Vec<S>,
    pub a0_t: Vec<S>,
    pub f0_r: Vec<S>,
    pub f0_t: Vec<S>,
    /// support radius R of the perturbation
    pub r_support: S,
    /// excess mass int (rho0 - 1) dx
    pub m0: S,
    /// initial energy functional H0
    pub h0: S,
    /// initial radial momentum moment W(0)
    pub w0: S,
}

impl<S: Real> InitialData<S> {
    pub fn point(&self, i: usize) -> RadialPointState<S> {
        RadialPointState {
            rho: self.rho0[i],
            u: self.u0[i],
            a_r: self.a0_r[i],
            a_t: self.a0_t[i],
            f_r: self.f0_r[i],
            f_t: self.f0_t[i],
        }
    }

    pub fn max_rho0(&self) -> S {
        self.rho0.iter().cloned().fold(S::neg_infinity(), S::max)
    }

    pub fn min_rho0(&self) -> S {
        self.rho0.iter().cloned().fold(S::infinity(), S::min)
    }

    /// ||u0||_{L^2(R^3)}^2 = 4 pi int v^2 r^2 dr.
    pub fn u0_l2_sq(&self) -> S {
        let sq: Vec<S> = self.u0.iter().map(|v| *v * *v).collect();
        self.grid.integrate(sq.iter())
    }
}

/// The four-branch piecewise-cosine velocity profile.
pub fn tilde_v<S: Real>(r: S, l: S, r_support: S) -> S {
    let half = S::of(0.5);
    let pi = S::PI();
    if r < S::zero() {
        -tilde_v(-r, l, r_support)
    } else if r <= S::one() {
        l * (half * pi * (r - S::one())).cos()
    } else if r <= r_support - S::one() {
        l
    } else if r <= r_support {
        half * l * (pi * (r - r_support + S::one())).cos() + half * l
    } else {
        S::zero()
    }
}

/// C^2 ramp: 0 below lo, 1 above hi.
fn smoothstep<S: Real>(r: S, lo: S, hi: S) -> S {
    let x = ((r - lo) / (hi - lo)).max(S::zero()).min(S::one());
    x * x * x * (S::of(10.0) + x * (S::of(-15.0) + S::of(6.0) * x))
}

/// Smooth plateau bump used for the density and conformation
/// perturbations: 1 on [0, R-2], descending to 0 at R-1.
fn plateau_bump<S: Real>(r: S, r_support: S) -> S {
    S::one() - smoothstep(r, r_support - S::of(2.0), r_support - S::one())
}

/// Mollified velocity profile on the grid: discrete convolution of the
/// piecewise profile with a normalized compact bump kernel, zeroed near
/// r = 0 (below 1/2) and near r = R so the support stays inside B_R.
pub fn mollify_profile<S: Real>(
    spec: &ProfileSpec<S>,
    grid: &RadialGrid<S>,
) -> Result<Vec<S>, DataError> {
    spec.validate()?;
    let w = spec.mollifier_width;
    let dr = grid.dr;
    if dr > w / S::of(8.0) {
        return Err(DataError::GridTooCoarse {
            dr: dr.to_f64().unwrap(),
            width: w.to_f64().unwrap(),
        });
    }
    // kernel on grid offsets, normalized so a constant is reproduced exactly
    let k = (w / dr).to_f64().unwrap().ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * k + 1) as usize);
    let mut ksum = S::zero();
    for j in -k..=k {
        let x = S::of(j as f64) * dr / w;
        let v = if x.abs() < S::one() {
            (-S::one() / (S::one() - x * x)).exp()
        } else {
            S::zero()
        };
        kernel.push(v);
        ksum = ksum + v;
    }
    for v in kernel.iter_mut() {
        *v = *v / ksum;
    }

    let n = grid.n_cells;
    let quarter = S::of(0.25);
    let half = S::of(0.5);
    let two = S::of(2.0);
    let r_out_hi = spec.r_support - w; // zero from here outward
    let r_out_lo = spec.r_support - two * w;
    let mut v = vec![S::zero(); n];
    for (i, vi) in v.iter_mut().enumerate() {
        let r = grid.r_center(i);
        if r > spec.r_support {
            continue;
        }
        let mut acc = S::zero();
        for (jj, kv) in kernel.iter().enumerate() {
            let j = jj as i64 - k;
            // odd extension through r = 0
            let rj = r + S::of(j as f64) * dr;
            acc = acc + *kv * tilde_v(rj, spec.l, spec.r_support);
        }
        // inner cutoff: zero on [0, 1/4], one from 1/2
        let chi_in = smoothstep(r, quarter, half);
        // outer cutoff keeps the support strictly inside B_R
        let chi_out = S::one() - smoothstep(r, r_out_lo, r_out_hi);
        *vi = acc * chi_in * chi_out;
    }
    // plateau check: v >= L on (2, R - 2)
    for (i, vi) in v.iter().enumerate() {
        let r = grid.r_center(i);
        if r > two && r < spec.r_support - two && *vi < spec.l * (S::one() - S::of(1e-12)) {
            return Err(DataError::MollifierTooWide);
        }
    }
    Ok(v)
}

/// Build the full initial state on `grid` and compute its functionals.
pub fn build_initial_state<S: Real>(
    spec: &ProfileSpec<S>,
    params: &Parameters<S>,
    grid: &RadialGrid<S>,
) -> Result<InitialData<S>, DataError> {
    spec.validate()?;
    if grid.r_max() < spec.r_support {
        return Err(DataError::GridTooSmall {
            r_max: grid.r_max().to_f64().unwrap(),
            r_support: spec.r_support.to_f64().unwrap(),
        });
    }
    let n = grid.n_cells;
    let u0 = mollify_profile(spec, grid)?;
    let mut rho0 = vec![S::one(); n];
    let mut a0_r = vec![S::one(); n];
    let mut a0_t = vec![S::one(); n];
    let f0_r = vec![S::one(); n];
    let f0_t = vec![S::one(); n];
    for i in 0..n {
        let r = grid.r_center(i);
        let bump = plateau_bump(r, spec.r_support);
        rho0[i] = S::one() + spec.rho0_amplitude * bump;
        a0_r[i] = S::one() + spec.delta_a * bump;
        a0_t[i] = a0_r[i];
    }
    let mut data = InitialData {
        grid: *grid,
        rho0,
        u0,
        a0_r,
        a0_t,
        f0_r,
        f0_t,
        r_support: spec.r_support,
        m0: S::zero(),
        h0: S::zero(),
        w0: S::zero(),
    };
    data.m0 = compute_m0(&data);
    data.h0 = compute_h0(&data, params);
    data.w0 = compute_w0(&data);

    // admissibility
    if data.m0 < S::zero() {
        return Err(DataError::Ass1Violated(data.m0.to_f64().unwrap()));
    }
    for i in 0..n {
        let tr = radial_tr_stress(&data.point(i), params);
        if tr < -S::of(1e-14) {
            return Err(DataError::Ass2Violated {
                tr: tr.to_f64().unwrap(),
                r: grid.r_center(i).to_f64().unwrap(),
            });
        }
    }
    Ok(data)
}

/// m0 = 4 pi int (rho0 - 1) r^2 dr.
pub fn compute_m0<S: Real>(data: &InitialData<S>) -> S {
    let f: Vec<S> = data.rho0.iter().map(|r| *r - S::one()).collect();
    data.grid.integrate(f.iter())
}

/// H0 = int (2a/(gamma-1)(rho0^gamma - 1 - gamma(rho0-1))
///          + 2 mu0/lambda (rho0 ln rho0 - rho0 + 1) + tr(T0)) dx.
pub fn compute_h0<S: Real>(data: &InitialData<S>, params: &Parameters<S>) -> S {
    let two = S::of(2.0);
    let f: Vec<S> = (0..data.grid.n_cells)
        .map(|i| {
            let p = data.point(i);
            two * crate::model::pressure_potential(p.rho, params)
                + two * crate::model::viscous_potential(p.rho, params)
                + radial_tr_stress(&p, params)
        })
        .collect();
    data.grid.integrate(f.iter())
}

/// W(0) = 4 pi int rho0 v r^3 dr.
pub fn compute_w0<S: Real>(data: &InitialData<S>) -> S {
    let f: Vec<S> = (0..data.grid.n_cells)
        .map(|i| data.rho0[i] * data.u0[i] * data.grid.r_center(i))
        .collect();
    data.grid.integrate(f.iter())
}

/// Caps for the (L, R) search.
#[derive(Debug, Clone, Copy)]
pub struct SearchCaps {
    pub l_max: f64,
    pub r_max: f64,
}

impl Default for SearchCaps {
    fn default() -> Self {
        SearchCaps { l_max: 1e9, r_max: 1e7 }
    }
}

/// Auto-select (L, R): L is the smallest power of 2 that satisfies the
/// amplitude condition
///     (pi min rho0 / 64) L >= 16 sigma pi max rho0 / 3
/// with 10% margin, then R grows in powers of 2 (from 8) until the
/// support condition
///     (pi min rho0 / 64) L R^4 >= lambda (H0 + max rho0 4 L^2 (4 pi/3) R^3)
/// holds with H0 evaluated for the candidate spec.
pub fn choose_l_r<S: Real>(
    params: &Parameters<S>,
    sigma_est: S,
    rho0_amplitude: S,
    delta_a: S,
    mollifier_width: S,
    caps: SearchCaps,
) -> Result<ProfileSpec<S>, DataError> {
    assert!(sigma_est > S::zero(), "sigma_est must be positive");
    let pi = S::PI();
    let min_rho = S::one();
    let max_rho = S::one() + rho0_amplitude;

    let l_min = S::of(1024.0 / 3.0) * sigma_est * max_rho / min_rho;
    let mut l = S::one();
    while l < S::of(1.1) * l_min {
        l = l * S::of(2.0);
        if l.to_f64().unwrap() > caps.l_max {
            return Err(DataError::SearchFailure {
                l_cap: caps.l_max,
                r_cap: caps.r_max,
                binding: format!(
                    "amplitude condition needs L >= {}",
                    (S::of(1.1) * l_min).to_f64().unwrap()
                ),
            });
        }
    }

    let mut r = S::of(8.0);
    loop {
        let spec = ProfileSpec {
            l,
            r_support: r,
            mollifier_width,
            rho0_amplitude,
            delta_a,
        };
        // H0 only involves rho0 and A0; build them on an auto-sized grid
        let dr = (mollifier_width / S::of(8.0)).min(S::of(1.0 / 64.0));
        let n = ((S::of(1.02) * r / dr).to_f64().unwrap().ceil() as usize).max(16);
        let grid = RadialGrid::new(n, dr);
        let h0 = {
            let mut probe = spec;
            // H0 does not depend on the velocity profile; skip the expensive
            // convolution by using a tiny L placeholder and zeroing u0.
            probe.l = S::one();
            let mut d = build_initial_state(&probe, params, &grid)?;
            for v in d.u0.iter_mut() {
                *v = S::zero();
            }
            compute_h0(&d, params)
        };
        let lhs = pi * min_rho / S::of(64.0) * l * r.powi(4);
        let rhs = params.lambda
            * (h0 + max_rho * S::of(4.0) * l * l * S::of(4.0 / 3.0) * pi * r.powi(3));
        if lhs >= rhs {
            return Ok(spec);
        }
        r = r * S::of(2.0);
        if r.to_f64().unwrap() > caps.r_max {
            return Err(DataError::SearchFailure {
                l_cap: caps.l_max,
                r_cap: caps.r_max,
                binding: "support condition (R^4 vs R^3 growth) exceeded the R cap".into(),
            });
        }
    }
}
