//! Uniform radial mesh with cell-volume quadrature.

use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Uniform radial grid: cell centers at r_i = (i + 1/2) dr, outer radius
/// r_max = n_cells * dr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid<S> {
    pub n_cells: usize,
    pub dr: S,
}

impl<S: Real> RadialGrid<S> {
    pub fn new(n_cells: usize, dr: S) -> Self {
        assert!(n_cells > 0 && dr > S::zero());
        RadialGrid { n_cells, dr }
    }

    pub fn r_center(&self, i: usize) -> S {
        (S::of(i as f64) + S::of(0.5)) * self.dr
    }

    /// Face i sits at r = i dr, for i in 0..=n_cells.
    pub fn r_face(&self, i: usize) -> S {
        S::of(i as f64) * self.dr
    }

    pub fn r_max(&self) -> S {
        S::of(self.n_cells as f64) * self.dr
    }

    /// Volume of cell i: 4 pi (r_{i+1/2}^3 - r_{i-1/2}^3) / 3. Summing
    /// f_i * cell_volume(i) is the midpoint-in-volume quadrature rule for
    /// 4 pi int f r^2 dr; it is second order and exactly compatible with
    /// the conservative mass update.
    pub fn cell_volume(&self, i: usize) -> S {
        let rm = self.r_face(i);
        let rp = self.r_face(i + 1);
        S::of(4.0 / 3.0) * S::PI() * (rp * rp * rp - rm * rm * rm)
    }

    /// 4 pi int f(r) r^2 dr over the whole grid.
    pub fn integrate<'a>(&self, f: impl Iterator<Item = &'a S>) -> S
    where
        S: 'a,
    {
        f.enumerate().map(|(i, v)| *v * self.cell_volume(i)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_telescope_to_ball() {
        let g: RadialGrid<f64> = RadialGrid::new(100, 0.01);
        let total: f64 = (0..g.n_cells).map(|i| g.cell_volume(i)).sum();
        let ball = 4.0 / 3.0 * std::f64::consts::PI * g.r_max().powi(3);
        assert!((total - ball).abs() < 1e-12 * ball);
    }

    #[test]
    fn integrate_is_second_order() {
        // 4 pi int_0^1 r^4 dr = 4 pi / 5 using f = r^2
        let exact = 4.0 * std::f64::consts::PI / 5.0;
        let err = |n: usize| {
            let g: RadialGrid<f64> = RadialGrid::new(n, 1.0 / n as f64);
            let f: Vec<f64> = (0..n).map(|i| g.r_center(i).powi(2)).collect();
            (g.integrate(f.iter()) - exact).abs()
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 / e2 > 3.5, "expected order 2, got ratio {}", e1 / e2);
    }
}
